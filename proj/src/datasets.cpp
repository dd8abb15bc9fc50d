#include "qfl/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>

#include "qfl/errors.hpp"

namespace qfl::data {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LoadError("cannot open " + p.string(), 0);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off, const fs::path& p) {
    if (off + 4 > buf.size()) throw LoadError(p.string() + ": truncated header", static_cast<long long>(buf.size()));
    return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
           (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

void check_magic(std::uint32_t got, std::uint32_t want, const fs::path& p) {
    if (got != want) {
        char msg[96];
        std::snprintf(msg, sizeof msg, ": bad magic 0x%08x, expected 0x%08x", got, want);
        throw LoadError(p.string() + msg, 0);
    }
}

}  // namespace

Batch load_mnist_idx(const fs::path& images, const fs::path& labels) {
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    check_magic(read_be32(ib, 0, images), kIdxImagesMagic, images);
    check_magic(read_be32(lb, 0, labels), kIdxLabelsMagic, labels);

    const std::size_t n = read_be32(ib, 4, images);
    const std::size_t rows = read_be32(ib, 8, images);
    const std::size_t cols = read_be32(ib, 12, images);
    const std::size_t nl = read_be32(lb, 4, labels);
    if (n != nl)
        throw LoadError("image count " + std::to_string(n) + " != label count " + std::to_string(nl) + " in " +
                            labels.string(),
                        4);
    const std::size_t px = rows * cols;
    if (16 + n * px > ib.size()) throw LoadError(images.string() + ": truncated pixel data", static_cast<long long>(ib.size()));
    if (8 + n > lb.size()) throw LoadError(labels.string() + ": truncated label data", static_cast<long long>(lb.size()));

    Batch b;
    b.input_dim = static_cast<int>(px);
    b.inputs.resize(n * px);
    for (std::size_t i = 0; i < n * px; ++i) b.inputs[i] = ib[16 + i] / 255.0;
    b.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        b.labels[i] = lb[8 + i];
        max_label = std::max(max_label, b.labels[i]);
    }
    b.n_classes = std::max(10, max_label + 1);
    return b;
}

Batch load_cifar10_bin(std::span<const fs::path> batches) {
    Batch b;
    b.input_dim = 3072;
    b.n_classes = 10;
    for (const auto& p : batches) {
        const auto buf = read_file(p);
        if (buf.size() % kCifarRecord != 0)
            throw LoadError(p.string() + ": size " + std::to_string(buf.size()) + " is not a multiple of 3073",
                            static_cast<long long>(buf.size() - buf.size() % kCifarRecord));
        for (std::size_t off = 0; off < buf.size(); off += kCifarRecord) {
            if (buf[off] > 9)
                throw LoadError(p.string() + ": label " + std::to_string(buf[off]) + " outside [0, 9]",
                                static_cast<long long>(off));
            b.labels.push_back(buf[off]);
            for (std::size_t k = 1; k < kCifarRecord; ++k) b.inputs.push_back(buf[off + k] / 255.0);
        }
    }
    return b;
}

void write_mnist_idx(const Batch& pool, int rows, int cols, const fs::path& images, const fs::path& labels) {
    if (rows * cols != pool.input_dim) throw ShapeError("rows * cols must equal input_dim");
    std::ofstream im(images, std::ios::binary);
    std::ofstream lb(labels, std::ios::binary);
    if (!im) throw LoadError("cannot write " + images.string(), 0);
    if (!lb) throw LoadError("cannot write " + labels.string(), 0);
    const auto n = static_cast<std::uint32_t>(pool.size());
    put_be32(im, kIdxImagesMagic);
    put_be32(im, n);
    put_be32(im, static_cast<std::uint32_t>(rows));
    put_be32(im, static_cast<std::uint32_t>(cols));
    for (double v : pool.inputs) {
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        im.put(static_cast<char>(q));
    }
    put_be32(lb, kIdxLabelsMagic);
    put_be32(lb, n);
    for (int l : pool.labels) {
        if (l < 0 || l > 255) throw DataError("label does not fit in a byte");
        lb.put(static_cast<char>(l));
    }
}

Batch synthetic_blobs(int n_classes, int n_per_class, int dim, double separation, Rng& rng) {
    if (dim < 1) throw ConfigError("blob dimension must be at least 1");
    if (n_classes < 1 || n_per_class < 0) throw ConfigError("blob class count must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    Batch b;
    b.input_dim = dim;
    b.n_classes = n_classes;
    for (int i = 0; i < n_per_class; ++i) {
        for (int c = 0; c < n_classes; ++c) {
            for (int j = 0; j < dim; ++j) b.inputs.push_back((j == c % dim ? separation : 0.0) + normal(rng));
            b.labels.push_back(c);
        }
    }
    return b;
}

Batch downscale(const Batch& pool, int side, int new_side) {
    if (side * side != pool.input_dim || new_side < 1 || side % new_side != 0)
        throw ShapeError("downscale needs a square input whose side is a multiple of the new side");
    const int f = side / new_side;
    Batch out;
    out.input_dim = new_side * new_side;
    out.n_classes = pool.n_classes;
    out.labels = pool.labels;
    out.inputs.reserve(pool.size() * static_cast<std::size_t>(out.input_dim));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto x = pool.input(i);
        for (int r = 0; r < new_side; ++r)
            for (int c = 0; c < new_side; ++c) {
                double s = 0.0;
                for (int dr = 0; dr < f; ++dr)
                    for (int dc = 0; dc < f; ++dc)
                        s += x[static_cast<std::size_t>((r * f + dr) * side + c * f + dc)];
                out.inputs.push_back(s / (f * f));
            }
    }
    return out;
}

std::string_view to_string(DatasetId id) {
    switch (id) {
        case DatasetId::Mnist: return "mnist";
        case DatasetId::Mnist8x8: return "mnist8x8";
        case DatasetId::Cifar10: return "cifar10";
        case DatasetId::SyntheticBlobs: return "synthetic_blobs";
    }
    return "?";
}

DatasetId parse_dataset_id(std::string_view t) {
    if (t == "mnist") return DatasetId::Mnist;
    if (t == "mnist8x8") return DatasetId::Mnist8x8;
    if (t == "cifar10") return DatasetId::Cifar10;
    if (t == "synthetic_blobs") return DatasetId::SyntheticBlobs;
    throw ConfigError("unknown dataset '" + std::string(t) + "' (mnist, mnist8x8, cifar10, synthetic_blobs)");
}

fs::path data_root(const DatasetSpec& spec) {
    if (!spec.root.empty()) return spec.root;
    if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
    return QFL_DEFAULT_DATA_DIR;
}

Batch random_subset(const Batch& pool, std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, idx.size()));
    return pool.subset(idx);
}

namespace {

Split load_raw(const DatasetSpec& spec, std::uint64_t seed) {
    const fs::path root = data_root(spec);
    switch (spec.id) {
        case DatasetId::Mnist:
            return {load_mnist_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte"),
                    load_mnist_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte")};
        case DatasetId::Mnist8x8: {
            const fs::path img = root / "digits8x8-train-images-idx3-ubyte";
            if (fs::exists(img))
                return {load_mnist_idx(img, root / "digits8x8-train-labels-idx1-ubyte"),
                        load_mnist_idx(root / "digits8x8-test-images-idx3-ubyte",
                                       root / "digits8x8-test-labels-idx1-ubyte")};
            // Full MNIST under the root: downscale 28x28 -> 7x7 is not 8x8, so crop to 24x24 first.
            Split s{load_mnist_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte"),
                    load_mnist_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte")};
            auto crop = [](const Batch& b) {
                Batch out;
                out.input_dim = 24 * 24;
                out.n_classes = b.n_classes;
                out.labels = b.labels;
                for (std::size_t i = 0; i < b.size(); ++i) {
                    const auto x = b.input(i);
                    for (int r = 2; r < 26; ++r)
                        for (int c = 2; c < 26; ++c) out.inputs.push_back(x[static_cast<std::size_t>(r * 28 + c)]);
                }
                return downscale(out, 24, 8);
            };
            return {crop(s.train), crop(s.test)};
        }
        case DatasetId::Cifar10: {
            std::vector<fs::path> train;
            for (int i = 1; i <= 5; ++i) train.push_back(root / ("data_batch_" + std::to_string(i) + ".bin"));
            const std::array<fs::path, 1> test{root / "test_batch.bin"};
            return {load_cifar10_bin(train), load_cifar10_bin(test)};
        }
        case DatasetId::SyntheticBlobs: {
            Rng rng(derive_seed(seed, {stream::kData, 1}));
            Split s;
            s.train = synthetic_blobs(spec.blobs_classes, spec.blobs_per_class, spec.blobs_dim, spec.blobs_separation,
                                      rng);
            s.test = synthetic_blobs(spec.blobs_classes, spec.blobs_test_per_class, spec.blobs_dim,
                                     spec.blobs_separation, rng);
            return s;
        }
    }
    throw ConfigError("unhandled dataset id");
}

}  // namespace

Split load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    Split s = load_raw(spec, seed);
    // Subsets depend only on the dataset, not on the run seed, so every cell
    // of a sweep trains on the same pool.
    Rng rng(derive_seed(0, {stream::kData, 2}));
    if (spec.train_subset) s.train = random_subset(s.train, *spec.train_subset, rng);
    if (spec.test_subset) s.test = random_subset(s.test, *spec.test_subset, rng);
    s.test.n_classes = s.train.n_classes = std::max(s.train.n_classes, s.test.n_classes);
    s.train.validate();
    s.test.validate();
    const auto h = s.train.histogram();
    for (std::size_t c = 0; c < h.size(); ++c)
        if (h[c] == 0) throw DataError("training pool has no samples of class " + std::to_string(c));
    return s;
}

}  // namespace qfl::data
