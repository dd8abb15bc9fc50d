#include "qfl/batch.hpp"

#include <string>

#include "qfl/errors.hpp"

namespace qfl {

void Batch::validate() const {
    if (input_dim < 1) throw DataError("input dimension must be positive");
    if (n_classes < 1) throw DataError("class count must be positive");
    if (inputs.size() != labels.size() * static_cast<std::size_t>(input_dim))
        throw DataError("input matrix holds " + std::to_string(inputs.size()) + " values for " +
                        std::to_string(labels.size()) + " rows of width " + std::to_string(input_dim));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                            " outside [0, " + std::to_string(n_classes) + ")");
}

Batch Batch::subset(std::span<const std::size_t> rows) const {
    Batch out;
    out.input_dim = input_dim;
    out.n_classes = n_classes;
    out.inputs.reserve(rows.size() * static_cast<std::size_t>(input_dim));
    out.labels.reserve(rows.size());
    for (auto r : rows) {
        if (r >= size()) throw DataError("row " + std::to_string(r) + " out of range");
        const auto x = input(r);
        out.inputs.insert(out.inputs.end(), x.begin(), x.end());
        out.labels.push_back(labels[r]);
    }
    return out;
}

std::vector<std::size_t> Batch::histogram() const {
    std::vector<std::size_t> h(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels)
        if (y >= 0 && y < n_classes) ++h[static_cast<std::size_t>(y)];
    return h;
}

}  // namespace qfl
