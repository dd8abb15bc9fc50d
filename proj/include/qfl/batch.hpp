#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qfl {

/// Row-major sample matrix with integer labels. Used both for a whole data
/// pool and for minibatches drawn from it.
struct Batch {
    int input_dim = 0;
    int n_classes = 0;
    std::vector<double> inputs;  // size() * input_dim values in [0, 1]
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }

    std::span<const double> input(std::size_t i) const {
        return {inputs.data() + i * static_cast<std::size_t>(input_dim), static_cast<std::size_t>(input_dim)};
    }

    /// Throws DataError on a shape mismatch or a label outside [0, n_classes).
    void validate() const;

    /// Rows `rows` in the given order.
    Batch subset(std::span<const std::size_t> rows) const;

    /// Per-class sample counts.
    std::vector<std::size_t> histogram() const;
};

}  // namespace qfl
