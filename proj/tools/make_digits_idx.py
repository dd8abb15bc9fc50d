#!/usr/bin/env python3
"""Write the scikit-learn 8x8 handwritten digits as IDX files.

The desk-scale `mnist8x8` profile reads these when no full-size MNIST files
are present. Pixel intensities 0..16 are rescaled to 0..255. The sample order
is a fixed permutation so the train/test split is class-balanced.
"""
import argparse
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--test", type=int, default=500)
    args = ap.parse_args()

    digits = load_digits()
    pixels = np.rint(digits.data * (255.0 / 16.0)).reshape(-1, 8, 8)
    labels = digits.target
    order = np.random.RandomState(1234).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_test = args.test
    write_idx_images(out / "digits8x8-train-images-idx3-ubyte", pixels[n_test:])
    write_idx_labels(out / "digits8x8-train-labels-idx1-ubyte", labels[n_test:])
    write_idx_images(out / "digits8x8-test-images-idx3-ubyte", pixels[:n_test])
    write_idx_labels(out / "digits8x8-test-labels-idx1-ubyte", labels[:n_test])


if __name__ == "__main__":
    main()
