#include "ctalab/features.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ctalab/common.hpp"

namespace ctalab::features {

double SparseVector::at(std::uint32_t i) const {
    auto it = std::lower_bound(index.begin(), index.end(), i);
    return (it != index.end() && *it == i) ? value[static_cast<std::size_t>(it - index.begin())] : 0.0;
}

static std::uint32_t hashed(char kind, std::string_view token, const FeatureConfig& cfg) {
    std::string key;
    key.reserve(token.size() + 2);
    key += kind;
    key += '\x1f';
    key += token;
    return static_cast<std::uint32_t>(fnv1a64(key) % cfg.dimension);
}

std::uint32_t word_feature(std::string_view word, const FeatureConfig& cfg) { return hashed('w', word, cfg); }
std::uint32_t char_feature(std::string_view gram, const FeatureConfig& cfg) { return hashed('c', gram, cfg); }

SparseVector featurize(std::string_view text, const FeatureConfig& cfg) {
    if (cfg.dimension == 0) throw Error(ErrorKind::invalid_argument, "feature dimension must be positive");
    const std::string lower = utf8_lower(text);
    std::map<std::uint32_t, double> acc;

    auto is_sep = [](unsigned char c) { return c < 0x80 && (std::isspace(c) || std::ispunct(c)); };
    for (std::size_t i = 0; i < lower.size();) {
        while (i < lower.size() && is_sep(static_cast<unsigned char>(lower[i]))) ++i;
        std::size_t j = i;
        while (j < lower.size() && !is_sep(static_cast<unsigned char>(lower[j]))) ++j;
        if (j > i) acc[word_feature(std::string_view(lower).substr(i, j - i), cfg)] += 1;
        i = j;
    }

    std::string collapsed;
    collapsed.reserve(lower.size());
    for (unsigned char c : lower) {
        if (std::isspace(c)) {
            if (!collapsed.empty() && collapsed.back() != ' ') collapsed += ' ';
        } else {
            collapsed += static_cast<char>(c);
        }
    }
    if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
    auto cps = utf8_code_points(collapsed);
    for (int n = cfg.char_min; n <= cfg.char_max; ++n) {
        if (cps.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t s = 0; s + n <= cps.size(); ++s) {
            auto begin = cps[s].data();
            auto end = cps[s + n - 1].data() + cps[s + n - 1].size();
            acc[char_feature(std::string_view(begin, static_cast<std::size_t>(end - begin)), cfg)] += 1;
        }
    }

    SparseVector v;
    v.index.reserve(acc.size());
    v.value.reserve(acc.size());
    for (const auto& [k, c] : acc) {
        v.index.push_back(k);
        v.value.push_back(c);
    }
    return v;
}

FeatureMatrix::FeatureMatrix(const std::vector<SparseVector>& rows, std::uint32_t dimension)
    : dimension_(dimension) {
    row_ptr_.reserve(rows.size() + 1);
    row_ptr_.push_back(0);
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.nnz(); ++k) {
            if (r.index[k] >= dimension) throw Error(ErrorKind::invalid_argument, "feature index out of range");
            col_idx_.push_back(r.index[k]);
            values_.push_back(r.value[k]);
        }
        row_ptr_.push_back(col_idx_.size());
    }

    // counting sort into CSC; rows are visited in order so each column's row
    // list comes out ascending
    std::vector<std::size_t> count(dimension, 0);
    for (auto c : col_idx_) ++count[c];
    std::vector<std::size_t> slot(dimension, 0);
    col_ptr_.push_back(0);
    for (std::uint32_t c = 0; c < dimension; ++c) {
        if (count[c] == 0) continue;
        slot[c] = active_cols_.size();
        active_cols_.push_back(c);
        col_ptr_.push_back(col_ptr_.back() + count[c]);
    }
    row_idx_.resize(col_idx_.size());
    col_values_.resize(col_idx_.size());
    std::vector<std::size_t> fill(active_cols_.size(), 0);
    for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            auto s = slot[col_idx_[k]];
            auto pos = col_ptr_[s] + fill[s]++;
            row_idx_[pos] = static_cast<std::uint32_t>(r);
            col_values_[pos] = values_[k];
        }
}

}  // namespace ctalab::features
