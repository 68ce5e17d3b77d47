#pragma once

#include <cstddef>
#include <string>
#include <utility>

// Inner loops shared by the reference solvers and the metric suite.
// Every kernel has a scalar implementation and, on x86 with AVX2, a vector
// variant selected once at startup. Elementwise kernels are bit-identical
// across implementations; reductions differ only by accumulation order.

namespace pdesharp::kernels {

enum class Isa { scalar, avx2 };

Isa active();
void force(Isa isa);  // throws if the ISA is unavailable on this machine
bool supported(Isa isa);
const char* isa_name(Isa isa);

// out[j] = u[j] + lam * (u[j-1] - 2 u[j] + u[j+1]), periodic wrap. out != u.
void diffusion_step_periodic(double* out, const double* u, std::size_t n, double lam);

// Exact logistic reaction update with the overflow-stable formula
// out = 1 / (1 + decay * (1 - u) / (u + eps)), decay = exp(-rho*dt).
void logistic_exact_step(double* out, const double* u, std::size_t n, double decay, double eps);

double sum(const double* u, std::size_t n);
double sum_sq(const double* u, std::size_t n);
double sum_abs(const double* u, std::size_t n);
double sum_sq_diff(const double* a, const double* b, std::size_t n);

// sum_j |u[(j+1) mod n] - u[j]|
double total_variation_periodic(const double* u, std::size_t n);

std::pair<double, double> minmax(const double* u, std::size_t n);

// sum max(0, lo - u)^2  /  sum max(0, u - hi)^2  /  sum max(0, lo - u)
double below_sq(const double* u, std::size_t n, double lo);
double above_sq(const double* u, std::size_t n, double hi);
double below_l1(const double* u, std::size_t n, double lo);

}  // namespace pdesharp::kernels
