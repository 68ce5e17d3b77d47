#pragma once

#include <cstddef>
#include <utility>

// Per-ISA entry points filled into the dispatch table.

namespace pdesharp::kernels::detail {

struct KernelTable {
    void (*diffusion_step_periodic)(double*, const double*, std::size_t, double);
    void (*logistic_exact_step)(double*, const double*, std::size_t, double, double);
    double (*sum)(const double*, std::size_t);
    double (*sum_sq)(const double*, std::size_t);
    double (*sum_abs)(const double*, std::size_t);
    double (*sum_sq_diff)(const double*, const double*, std::size_t);
    double (*total_variation_periodic)(const double*, std::size_t);
    std::pair<double, double> (*minmax)(const double*, std::size_t);
    double (*below_sq)(const double*, std::size_t, double);
    double (*above_sq)(const double*, std::size_t, double);
    double (*below_l1)(const double*, std::size_t, double);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();  // only valid when built with AVX2 support

}  // namespace pdesharp::kernels::detail
