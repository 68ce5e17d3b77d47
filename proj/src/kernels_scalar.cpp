#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace pdesharp::kernels::detail {
namespace {

void diffusion_step_periodic_s(double* out, const double* u, std::size_t n, double lam) {
    if (n == 0) return;
    if (n == 1) {
        out[0] = u[0];
        return;
    }
    out[0] = u[0] + lam * (u[n - 1] - (u[0] + u[0]) + u[1]);
    for (std::size_t j = 1; j + 1 < n; ++j)
        out[j] = u[j] + lam * (u[j - 1] - (u[j] + u[j]) + u[j + 1]);
    out[n - 1] = u[n - 1] + lam * (u[n - 2] - (u[n - 1] + u[n - 1]) + u[0]);
}

void logistic_exact_step_s(double* out, const double* u, std::size_t n, double decay, double eps) {
    for (std::size_t j = 0; j < n; ++j)
        out[j] = 1.0 / (1.0 + decay * (1.0 - u[j]) / (u[j] + eps));
}

double sum_s(const double* u, std::size_t n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += u[j];
    return acc;
}

double sum_sq_s(const double* u, std::size_t n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += u[j] * u[j];
    return acc;
}

double sum_abs_s(const double* u, std::size_t n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += std::fabs(u[j]);
    return acc;
}

double sum_sq_diff_s(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j] - b[j];
        acc += d * d;
    }
    return acc;
}

double total_variation_periodic_s(const double* u, std::size_t n) {
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) acc += std::fabs(u[j + 1] - u[j]);
    acc += std::fabs(u[0] - u[n - 1]);
    return acc;
}

std::pair<double, double> minmax_s(const double* u, std::size_t n) {
    if (n == 0) return {0.0, 0.0};
    double lo = u[0], hi = u[0];
    for (std::size_t j = 1; j < n; ++j) {
        lo = std::min(lo, u[j]);
        hi = std::max(hi, u[j]);
    }
    return {lo, hi};
}

double below_sq_s(const double* u, std::size_t n, double lo) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = std::max(0.0, lo - u[j]);
        acc += d * d;
    }
    return acc;
}

double above_sq_s(const double* u, std::size_t n, double hi) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = std::max(0.0, u[j] - hi);
        acc += d * d;
    }
    return acc;
}

double below_l1_s(const double* u, std::size_t n, double lo) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += std::max(0.0, lo - u[j]);
    return acc;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{
        diffusion_step_periodic_s, logistic_exact_step_s, sum_s,    sum_sq_s,
        sum_abs_s,                 sum_sq_diff_s,         total_variation_periodic_s,
        minmax_s,                  below_sq_s,            above_sq_s,
        below_l1_s,
    };
    return t;
}

}  // namespace pdesharp::kernels::detail
