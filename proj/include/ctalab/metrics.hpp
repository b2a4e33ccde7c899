#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctalab/common.hpp"

namespace ctalab::metrics {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
};

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> predicted,
                          Label positive_class = Label::positive);

struct BreakdownRow {
    std::string post_type;
    std::string text_type;
    double kappa = 0, f1_macro = 0, f1_binary = 0, precision = 0, recall = 0;
    std::size_t n = 0;
};

struct EvalReport {
    ConfusionCounts counts;
    double precision = 0;
    double recall = 0;
    double f1_binary = 0;
    double f1_macro = 0;
    double kappa = 0;
    std::size_t support_positive = 0;
    std::size_t support_negative = 0;
    std::vector<BreakdownRow> breakdown;

    std::size_t n() const { return counts.total(); }
};

// Zero-denominator convention: precision, recall and F1 are 0.
double safe_f1(double precision, double recall);
EvalReport report_from_counts(const ConfusionCounts& c);
EvalReport evaluate_predictions(std::span<const Label> truth, std::span<const Label> predicted,
                                Label positive_class = Label::positive);

// Categorical codes; items whose value is missing must be removed beforehand.
double cohens_kappa(std::span<const int> a, std::span<const int> b);
double cohens_kappa(std::span<const Label> a, std::span<const Label> b);

// items x coders, nullopt = missing. Nominal metric.
using VoteMatrix = std::vector<std::vector<std::optional<int>>>;
double krippendorff_alpha(const VoteMatrix& votes);

struct ContingencyTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> counts;

    std::size_t rows() const { return counts.size(); }
    std::size_t cols() const { return counts.empty() ? 0 : counts.front().size(); }
    double n() const;
};

struct ChiSquareResult {
    double statistic = 0;
    int df = 0;
    double p_value = 1;
    double cramers_v = 0;
    double n = 0;
};

// Pearson statistic without continuity correction.
ChiSquareResult chi_square_test(const ContingencyTable& table);
double cramers_v(double statistic, double n, std::size_t rows, std::size_t cols);

// Upper tail of the chi-square distribution, Q(df/2, x/2).
double chi_square_sf(double x, double df);
// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Serialization with the fixed column order
// model,prompt,kappa,f1_macro,f1_binary,precision,recall,n
json to_json(const EvalReport& r);
std::string eval_csv_header();
std::string eval_csv_row(const std::string& model, const std::string& prompt, const EvalReport& r);

}  // namespace ctalab::metrics
