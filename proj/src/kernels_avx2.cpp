#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

// Elementwise kernels replicate the scalar operation order exactly, so results
// are bit-identical. Reductions keep four lane accumulators and fold them as
// (l0+l1)+(l2+l3)+tail, which differs from left-to-right only in rounding.

namespace pdesharp::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline __m256d abs_pd(__m256d v) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    return _mm256_and_pd(v, mask);
}

void diffusion_step_periodic_v(double* out, const double* u, std::size_t n, double lam) {
    if (n < 2) {
        if (n == 1) out[0] = u[0];
        return;
    }
    out[0] = u[0] + lam * (u[n - 1] - (u[0] + u[0]) + u[1]);
    const __m256d vlam = _mm256_set1_pd(lam);
    std::size_t j = 1;
    for (; j + 4 + 1 <= n; j += 4) {
        __m256d um = _mm256_loadu_pd(u + j - 1);
        __m256d uc = _mm256_loadu_pd(u + j);
        __m256d up = _mm256_loadu_pd(u + j + 1);
        __m256d t = _mm256_sub_pd(um, _mm256_add_pd(uc, uc));
        t = _mm256_add_pd(t, up);
        _mm256_storeu_pd(out + j, _mm256_add_pd(uc, _mm256_mul_pd(vlam, t)));
    }
    for (; j + 1 < n; ++j)
        out[j] = u[j] + lam * (u[j - 1] - (u[j] + u[j]) + u[j + 1]);
    out[n - 1] = u[n - 1] + lam * (u[n - 2] - (u[n - 1] + u[n - 1]) + u[0]);
}

void logistic_exact_step_v(double* out, const double* u, std::size_t n, double decay, double eps) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d vdecay = _mm256_set1_pd(decay);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d uv = _mm256_loadu_pd(u + j);
        __m256d num = _mm256_mul_pd(vdecay, _mm256_sub_pd(one, uv));
        __m256d den = _mm256_add_pd(uv, veps);
        __m256d e = _mm256_add_pd(one, _mm256_div_pd(num, den));
        _mm256_storeu_pd(out + j, _mm256_div_pd(one, e));
    }
    for (; j < n; ++j)
        out[j] = 1.0 / (1.0 + decay * (1.0 - u[j]) / (u[j] + eps));
}

double sum_v(const double* u, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(u + j));
    double s = hsum(acc);
    for (; j < n; ++j) s += u[j];
    return s;
}

double sum_sq_v(const double* u, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d v = _mm256_loadu_pd(u + j);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    double s = hsum(acc);
    for (; j < n; ++j) s += u[j] * u[j];
    return s;
}

double sum_abs_v(const double* u, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) acc = _mm256_add_pd(acc, abs_pd(_mm256_loadu_pd(u + j)));
    double s = hsum(acc);
    for (; j < n; ++j) s += std::fabs(u[j]);
    return s;
}

double sum_sq_diff_v(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; j < n; ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

double total_variation_periodic_v(const double* u, std::size_t n) {
    if (n < 2) return 0.0;
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 + 1 <= n; j += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(u + j + 1), _mm256_loadu_pd(u + j));
        acc = _mm256_add_pd(acc, abs_pd(d));
    }
    double s = hsum(acc);
    for (; j + 1 < n; ++j) s += std::fabs(u[j + 1] - u[j]);
    s += std::fabs(u[0] - u[n - 1]);
    return s;
}

std::pair<double, double> minmax_v(const double* u, std::size_t n) {
    if (n == 0) return {0.0, 0.0};
    if (n < 4) {
        double lo = u[0], hi = u[0];
        for (std::size_t j = 1; j < n; ++j) {
            lo = std::min(lo, u[j]);
            hi = std::max(hi, u[j]);
        }
        return {lo, hi};
    }
    __m256d vlo = _mm256_loadu_pd(u);
    __m256d vhi = vlo;
    std::size_t j = 4;
    for (; j + 4 <= n; j += 4) {
        __m256d v = _mm256_loadu_pd(u + j);
        vlo = _mm256_min_pd(vlo, v);
        vhi = _mm256_max_pd(vhi, v);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vlo);
    double lo = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
    _mm256_store_pd(lanes, vhi);
    double hi = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; j < n; ++j) {
        lo = std::min(lo, u[j]);
        hi = std::max(hi, u[j]);
    }
    return {lo, hi};
}

double below_sq_v(const double* u, std::size_t n, double lo) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d zero = _mm256_setzero_pd();
    __m256d acc = zero;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d d = _mm256_max_pd(zero, _mm256_sub_pd(vlo, _mm256_loadu_pd(u + j)));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; j < n; ++j) {
        double d = std::max(0.0, lo - u[j]);
        s += d * d;
    }
    return s;
}

double above_sq_v(const double* u, std::size_t n, double hi) {
    const __m256d vhi = _mm256_set1_pd(hi);
    const __m256d zero = _mm256_setzero_pd();
    __m256d acc = zero;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d d = _mm256_max_pd(zero, _mm256_sub_pd(_mm256_loadu_pd(u + j), vhi));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; j < n; ++j) {
        double d = std::max(0.0, u[j] - hi);
        s += d * d;
    }
    return s;
}

double below_l1_v(const double* u, std::size_t n, double lo) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d zero = _mm256_setzero_pd();
    __m256d acc = zero;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4)
        acc = _mm256_add_pd(acc, _mm256_max_pd(zero, _mm256_sub_pd(vlo, _mm256_loadu_pd(u + j))));
    double s = hsum(acc);
    for (; j < n; ++j) s += std::max(0.0, lo - u[j]);
    return s;
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable t{
        diffusion_step_periodic_v, logistic_exact_step_v, sum_v,    sum_sq_v,
        sum_abs_v,                 sum_sq_diff_v,         total_variation_periodic_v,
        minmax_v,                  below_sq_v,            above_sq_v,
        below_l1_v,
    };
    return t;
}

}  // namespace pdesharp::kernels::detail
