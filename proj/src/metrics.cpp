#include "ctalab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace ctalab::metrics {

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> predicted,
                          Label positive_class) {
    if (truth.size() != predicted.size())
        throw Error(ErrorKind::invalid_argument,
                    "length mismatch: " + std::to_string(truth.size()) + " truth vs " +
                        std::to_string(predicted.size()) + " predicted");
    if (truth.empty()) throw Error(ErrorKind::empty_input, "no predictions to evaluate");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        bool t = truth[i] == positive_class;
        bool p = predicted[i] == positive_class;
        if (t && p) ++c.tp;
        else if (!t && p) ++c.fp;
        else if (t && !p) ++c.fn;
        else ++c.tn;
    }
    return c;
}

static double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double safe_f1(double precision, double recall) {
    return precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
}

EvalReport report_from_counts(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error(ErrorKind::empty_input, "empty confusion matrix");
    EvalReport r;
    r.counts = c;
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    r.f1_binary = safe_f1(r.precision, r.recall);
    // the negative class swaps the roles of tp/tn and fp/fn
    double neg_precision = ratio(c.tn, c.tn + c.fn);
    double neg_recall = ratio(c.tn, c.tn + c.fp);
    r.f1_macro = (r.f1_binary + safe_f1(neg_precision, neg_recall)) / 2;
    r.support_positive = c.tp + c.fn;
    r.support_negative = c.tn + c.fp;

    double n = static_cast<double>(c.total());
    double p_o = static_cast<double>(c.tp + c.tn) / n;
    double p_e = (static_cast<double>(c.tp + c.fn) * static_cast<double>(c.tp + c.fp) +
                  static_cast<double>(c.tn + c.fp) * static_cast<double>(c.tn + c.fn)) /
                 (n * n);
    r.kappa = p_e == 1.0 ? 1.0 : (p_o - p_e) / (1 - p_e);
    return r;
}

EvalReport evaluate_predictions(std::span<const Label> truth, std::span<const Label> predicted,
                                Label positive_class) {
    return report_from_counts(confusion(truth, predicted, positive_class));
}

double cohens_kappa(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::invalid_argument, "kappa inputs differ in length");
    if (a.empty()) throw Error(ErrorKind::undefined_agreement, "kappa needs at least one paired item");
    std::map<int, std::pair<std::size_t, std::size_t>> marginals;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++marginals[a[i]].first;
        ++marginals[b[i]].second;
        agree += a[i] == b[i];
    }
    double n = static_cast<double>(a.size());
    double p_o = static_cast<double>(agree) / n;
    double p_e = 0;
    for (const auto& [cat, m] : marginals)
        p_e += static_cast<double>(m.first) * static_cast<double>(m.second) / (n * n);
    if (p_e == 1.0) return 1.0;
    return (p_o - p_e) / (1 - p_e);
}

double cohens_kappa(std::span<const Label> a, std::span<const Label> b) {
    std::vector<int> ia(a.size()), ib(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) ia[i] = static_cast<int>(a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) ib[i] = static_cast<int>(b[i]);
    return cohens_kappa(std::span<const int>(ia), std::span<const int>(ib));
}

double krippendorff_alpha(const VoteMatrix& votes) {
    // coincidence matrix o[c][k]
    std::map<int, std::map<int, double>> o;
    for (const auto& item : votes) {
        std::map<int, double> counts;
        double n_u = 0;
        for (const auto& v : item) {
            if (!v) continue;
            counts[*v] += 1;
            n_u += 1;
        }
        if (n_u < 2) continue;
        for (const auto& [c, n_c] : counts)
            for (const auto& [k, n_k] : counts)
                o[c][k] += (c == k ? n_c * (n_c - 1) : n_c * n_k) / (n_u - 1);
    }
    std::map<int, double> marg;
    double n = 0, disagree = 0;
    for (const auto& [c, row] : o)
        for (const auto& [k, v] : row) {
            marg[c] += v;
            n += v;
            if (c != k) disagree += v;
        }
    if (n == 0) throw Error(ErrorKind::undefined_agreement, "no item carries two or more values");
    double expected = 0;
    for (const auto& [c, n_c] : marg)
        for (const auto& [k, n_k] : marg)
            if (c != k) expected += n_c * n_k;
    expected /= n * (n - 1);
    double observed = disagree / n;
    if (expected == 0) return 1.0;  // a single category in use: no disagreement possible
    return 1.0 - observed / expected;
}

double ContingencyTable::n() const {
    double total = 0;
    for (const auto& r : counts)
        for (double v : r) total += v;
    return total;
}

double gamma_q(double a, double x) {
    if (a <= 0) throw Error(ErrorKind::invalid_argument, "gamma_q requires a > 0");
    if (x <= 0) return 1.0;
    constexpr double eps = 1e-16;
    constexpr int max_iter = 100000;
    double log_prefix = a * std::log(x) - x - std::lgamma(a);
    if (x < a + 1) {
        // series for the lower regularized gamma P(a, x)
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < max_iter; ++i) {
            ap += 1;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * eps) break;
        }
        return 1.0 - sum * std::exp(log_prefix);
    }
    // modified Lentz continued fraction for Q(a, x)
    constexpr double tiny = std::numeric_limits<double>::min() / eps;
    double b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
    for (int i = 1; i < max_iter; ++i) {
        double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1) < eps) break;
    }
    return std::exp(log_prefix) * h;
}

double chi_square_sf(double x, double df) {
    if (df <= 0) throw Error(ErrorKind::invalid_argument, "df must be positive");
    return gamma_q(df / 2, x / 2);
}

double cramers_v(double statistic, double n, std::size_t rows, std::size_t cols) {
    if (n <= 0) throw Error(ErrorKind::invalid_argument, "Cramer's V requires n > 0");
    if (rows < 2 || cols < 2)
        throw Error(ErrorKind::invalid_argument, "Cramer's V requires at least a 2x2 table");
    auto m = static_cast<double>(std::min(rows, cols) - 1);
    return std::sqrt(statistic / (n * m));
}

ChiSquareResult chi_square_test(const ContingencyTable& table) {
    auto r = table.rows(), c = table.cols();
    if (r < 2 || c < 2) throw Error(ErrorKind::invalid_argument, "contingency table must be at least 2x2");
    std::vector<double> row_sum(r, 0), col_sum(c, 0);
    for (std::size_t i = 0; i < r; ++i) {
        if (table.counts[i].size() != c) throw Error(ErrorKind::invalid_argument, "ragged contingency table");
        for (std::size_t j = 0; j < c; ++j) {
            double v = table.counts[i][j];
            if (v < 0 || !std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "cell counts must be non-negative");
            row_sum[i] += v;
            col_sum[j] += v;
        }
    }
    for (std::size_t i = 0; i < r; ++i)
        if (row_sum[i] == 0)
            throw Error(ErrorKind::invalid_argument,
                        "zero marginal for row '" + (i < table.row_labels.size() ? table.row_labels[i] : std::to_string(i)) + "'");
    for (std::size_t j = 0; j < c; ++j)
        if (col_sum[j] == 0)
            throw Error(ErrorKind::invalid_argument,
                        "zero marginal for column '" + (j < table.col_labels.size() ? table.col_labels[j] : std::to_string(j)) + "'");
    double n = table.n();
    ChiSquareResult res;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double e = row_sum[i] * col_sum[j] / n;
            double d = table.counts[i][j] - e;
            res.statistic += d * d / e;
        }
    res.df = static_cast<int>((r - 1) * (c - 1));
    res.p_value = std::clamp(chi_square_sf(res.statistic, res.df), 0.0, 1.0);
    res.n = n;
    res.cramers_v = cramers_v(res.statistic, n, r, c);
    return res;
}

json to_json(const EvalReport& r) {
    json j = {{"kappa", r.kappa},
              {"f1_macro", r.f1_macro},
              {"f1_binary", r.f1_binary},
              {"precision", r.precision},
              {"recall", r.recall},
              {"n", r.n()},
              {"support", {{"positive", r.support_positive}, {"negative", r.support_negative}}},
              {"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}}};
    if (!r.breakdown.empty()) {
        json rows = json::array();
        for (const auto& b : r.breakdown)
            rows.push_back({{"post_type", b.post_type},
                            {"text_type", b.text_type},
                            {"kappa", b.kappa},
                            {"f1_macro", b.f1_macro},
                            {"f1_binary", b.f1_binary},
                            {"precision", b.precision},
                            {"recall", b.recall},
                            {"n", b.n}});
        j["breakdown"] = std::move(rows);
    }
    return j;
}

std::string eval_csv_header() { return "model,prompt,kappa,f1_macro,f1_binary,precision,recall,n"; }

std::string eval_csv_row(const std::string& model, const std::string& prompt, const EvalReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, ",%.4f,%.4f,%.4f,%.4f,%.4f,%zu\n", r.kappa, r.f1_macro,
                  r.f1_binary, r.precision, r.recall, r.n());
    return model + "," + prompt + buf;
}

}  // namespace ctalab::metrics
