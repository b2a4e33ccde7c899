#pragma once

#include <span>

#include "ctalab/features.hpp"

// Weighted L2-regularized logistic loss and its gradient:
//
//   L(w, b) = (1/S) * sum_i s_i * [softplus(m_i) - y_i * m_i] + (l2/2) * |w|^2
//   m_i     = b + <w, x_i>,   S = sum_i s_i
//
// The serial version is the reference. The OpenMP version parallelizes the
// per-row margins and the per-column gradient accumulation while keeping every
// floating-point sum in the same order, so both return identical bits for any
// thread count.
namespace ctalab::kernels {

struct Problem {
    const features::FeatureMatrix& x;
    std::span<const double> targets;         // 0 or 1 per row
    std::span<const double> sample_weights;  // class weight per row
    double l2 = 0;
};

struct Gradient {
    std::span<double> weights;  // size = dimension
    double bias = 0;
};

double loss_and_gradient_serial(const Problem& p, std::span<const double> w, double b, Gradient& g);
double loss_and_gradient_parallel(const Problem& p, std::span<const double> w, double b, Gradient& g);

// Loss only.
double loss_serial(const Problem& p, std::span<const double> w, double b);

// Margins b + <w, x_i> for every row.
void margins_parallel(const features::FeatureMatrix& x, std::span<const double> w, double b,
                      std::span<double> out);

double sigmoid(double m);
double softplus(double m);

}  // namespace ctalab::kernels
