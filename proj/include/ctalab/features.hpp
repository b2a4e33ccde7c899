#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctalab::features {

// Hashed bag of lowercased word unigrams and character n-grams.
//
// Words are maximal runs of bytes that are neither ASCII whitespace nor ASCII
// punctuation. Character n-grams run over Unicode code points of the lowercased
// text with whitespace runs collapsed to one space. Each feature key is
// "w\x1f<word>" or "c\x1f<gram>", hashed with 64-bit FNV-1a and reduced modulo
// the dimension. Values are occurrence counts; colliding keys add up.
struct FeatureConfig {
    std::uint32_t dimension = 1u << 18;
    int char_min = 3;
    int char_max = 5;
};

struct SparseVector {
    std::vector<std::uint32_t> index;  // strictly increasing
    std::vector<double> value;

    std::size_t nnz() const { return index.size(); }
    double at(std::uint32_t i) const;
};

std::uint32_t word_feature(std::string_view word, const FeatureConfig& cfg);
std::uint32_t char_feature(std::string_view gram, const FeatureConfig& cfg);

SparseVector featurize(std::string_view text, const FeatureConfig& cfg = {});

// Row-major (CSR) storage plus a column-major (CSC) copy restricted to the
// columns that actually occur, so gradient accumulation can run per column.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(const std::vector<SparseVector>& rows, std::uint32_t dimension);

    std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    std::uint32_t dimension() const { return dimension_; }
    std::size_t nnz() const { return col_idx_.size(); }

    // CSR
    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const std::uint32_t> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    // CSC over active columns only
    std::span<const std::uint32_t> active_cols() const { return active_cols_; }
    std::span<const std::size_t> col_ptr() const { return col_ptr_; }
    std::span<const std::uint32_t> row_idx() const { return row_idx_; }
    std::span<const double> col_values() const { return col_values_; }

private:
    std::uint32_t dimension_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> col_idx_;
    std::vector<double> values_;
    std::vector<std::uint32_t> active_cols_;
    std::vector<std::size_t> col_ptr_;
    std::vector<std::uint32_t> row_idx_;
    std::vector<double> col_values_;
};

}  // namespace ctalab::features
