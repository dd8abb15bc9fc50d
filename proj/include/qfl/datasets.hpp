#pragma once

// Dataset loaders: IDX (MNIST layout), CIFAR-10 binary batches, the bundled
// 8x8 digits, and a Gaussian-blob generator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qfl/batch.hpp"
#include "qfl/rng.hpp"

namespace qfl::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kCifarRecord = 3073;

/// Environment variable naming the dataset root directory.
inline constexpr const char* kDataRootEnv = "QFL_DATA_DIR";

/// Pixels scaled by 1/255; n_classes = max(10, max label + 1).
Batch load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Concatenates CIFAR-10 binary batch files; 10 classes.
Batch load_cifar10_bin(std::span<const std::filesystem::path> batches);

/// Writes a pool as an IDX image/label pair (pixels round(v * 255)).
/// `rows * cols` must equal input_dim.
void write_mnist_idx(const Batch& pool, int rows, int cols, const std::filesystem::path& images,
                     const std::filesystem::path& labels);

/// Gaussian clusters with unit variance; class c is centered at
/// separation * e_{c mod dim}. Samples are interleaved by class.
Batch synthetic_blobs(int n_classes, int n_per_class, int dim, double separation, Rng& rng);

/// Area-average downscale of square images (side must divide evenly).
Batch downscale(const Batch& pool, int side, int new_side);

enum class DatasetId { Mnist, Mnist8x8, Cifar10, SyntheticBlobs };

std::string_view to_string(DatasetId id);
DatasetId parse_dataset_id(std::string_view text);

struct DatasetSpec {
    DatasetId id = DatasetId::Mnist8x8;
    std::string root;                  // empty: env var, then the bundled data dir
    std::optional<std::size_t> train_subset;
    std::optional<std::size_t> test_subset;
    // synthetic_blobs generator
    int blobs_classes = 4;
    int blobs_per_class = 100;
    int blobs_test_per_class = 50;
    int blobs_dim = 8;
    double blobs_separation = 3.0;
};

struct Split {
    Batch train;
    Batch test;
};

/// Resolved dataset root: spec.root, then $QFL_DATA_DIR, then the bundled dir.
std::filesystem::path data_root(const DatasetSpec& spec);

/// Loads train/test pools, applies a seeded subset, and checks that every
/// class appears in the training pool.
Split load_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// First n rows of a seeded permutation (n >= size keeps everything, reordered).
Batch random_subset(const Batch& pool, std::size_t n, Rng& rng);

}  // namespace qfl::data
