#include "ctalab/kernels.hpp"

#include <cmath>
#include <vector>

#include "ctalab/common.hpp"

namespace ctalab::kernels {

double sigmoid(double m) {
    if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
    double e = std::exp(m);
    return e / (1.0 + e);
}

double softplus(double m) { return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

static void check(const Problem& p, std::span<const double> w) {
    if (p.targets.size() != p.x.rows() || p.sample_weights.size() != p.x.rows())
        throw Error(ErrorKind::invalid_argument, "targets/weights do not match the feature matrix");
    if (w.size() != p.x.dimension()) throw Error(ErrorKind::invalid_argument, "weight vector has wrong size");
}

static double weight_total(const Problem& p) {
    double s = 0;
    for (double v : p.sample_weights) s += v;
    if (!(s > 0)) throw Error(ErrorKind::invalid_argument, "sample weights must sum to a positive value");
    return s;
}

static double regularizer(const Problem& p, std::span<const double> w) {
    double r = 0;
    for (double v : w) r += v * v;
    return 0.5 * p.l2 * r;
}

double loss_serial(const Problem& p, std::span<const double> w, double b) {
    check(p, w);
    const double total = weight_total(p);
    auto rp = p.x.row_ptr();
    auto ci = p.x.col_idx();
    auto xv = p.x.values();
    double data = 0;
    for (std::size_t i = 0; i < p.x.rows(); ++i) {
        double m = b;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) m += w[ci[k]] * xv[k];
        data += p.sample_weights[i] * (softplus(m) - p.targets[i] * m);
    }
    return data / total + regularizer(p, w);
}

double loss_and_gradient_serial(const Problem& p, std::span<const double> w, double b, Gradient& g) {
    check(p, w);
    const double total = weight_total(p);
    const std::size_t n = p.x.rows();
    auto rp = p.x.row_ptr();
    auto ci = p.x.col_idx();
    auto xv = p.x.values();

    std::vector<double> residual(n);
    double data = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = b;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) m += w[ci[k]] * xv[k];
        data += p.sample_weights[i] * (softplus(m) - p.targets[i] * m);
        residual[i] = p.sample_weights[i] * (sigmoid(m) - p.targets[i]) / total;
    }
    for (std::size_t j = 0; j < w.size(); ++j) g.weights[j] = p.l2 * w[j];
    g.bias = 0;
    for (std::size_t i = 0; i < n; ++i) {
        g.bias += residual[i];
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) g.weights[ci[k]] += residual[i] * xv[k];
    }
    return data / total + regularizer(p, w);
}

void margins_parallel(const features::FeatureMatrix& x, std::span<const double> w, double b,
                      std::span<double> out) {
    auto rp = x.row_ptr();
    auto ci = x.col_idx();
    auto xv = x.values();
    const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double m = b;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) m += w[ci[k]] * xv[k];
        out[i] = m;
    }
}

double loss_and_gradient_parallel(const Problem& p, std::span<const double> w, double b, Gradient& g) {
    check(p, w);
    const double total = weight_total(p);
    const auto n = static_cast<std::ptrdiff_t>(p.x.rows());

    std::vector<double> margin(p.x.rows()), term(p.x.rows()), residual(p.x.rows());
    margins_parallel(p.x, w, b, margin);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double m = margin[i];
        term[i] = p.sample_weights[i] * (softplus(m) - p.targets[i] * m);
        residual[i] = p.sample_weights[i] * (sigmoid(m) - p.targets[i]) / total;
    }
    // ordered reductions keep the result bitwise equal to the serial kernel
    double data = 0;
    g.bias = 0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        data += term[i];
        g.bias += residual[i];
    }

    const auto dim = static_cast<std::ptrdiff_t>(w.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < dim; ++j) g.weights[j] = p.l2 * w[j];

    auto cols = p.x.active_cols();
    auto cp = p.x.col_ptr();
    auto ri = p.x.row_idx();
    auto cv = p.x.col_values();
    const auto ncols = static_cast<std::ptrdiff_t>(cols.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::ptrdiff_t c = 0; c < ncols; ++c) {
        double acc = g.weights[cols[c]];
        for (std::size_t k = cp[c]; k < cp[c + 1]; ++k) acc += residual[ri[k]] * cv[k];
        g.weights[cols[c]] = acc;
    }
    return data / total + regularizer(p, w);
}

}  // namespace ctalab::kernels
