#include "pdesharp/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernels_impl.hpp"

namespace pdesharp::kernels {
namespace {

using detail::KernelTable;

bool cpu_has_avx2() {
#if defined(PDESHARP_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

struct Dispatch {
    Isa isa;
    const KernelTable* table;
};

Dispatch select_initial() {
    const char* env = std::getenv("PDESHARP_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return {Isa::scalar, &detail::scalar_table()};
    if (env && std::strcmp(env, "avx2") == 0) {
        if (!cpu_has_avx2()) throw std::runtime_error("PDESHARP_KERNELS=avx2 but cpu lacks avx2");
#if defined(PDESHARP_HAVE_AVX2)
        return {Isa::avx2, &detail::avx2_table()};
#endif
    }
    if (env && *env) throw std::runtime_error(std::string("unknown PDESHARP_KERNELS value: ") + env);
#if defined(PDESHARP_HAVE_AVX2)
    if (cpu_has_avx2()) return {Isa::avx2, &detail::avx2_table()};
#endif
    return {Isa::scalar, &detail::scalar_table()};
}

Dispatch& dispatch() {
    static Dispatch d = select_initial();
    return d;
}

}  // namespace

Isa active() { return dispatch().isa; }

bool supported(Isa isa) {
    if (isa == Isa::scalar) return true;
    return cpu_has_avx2();
}

void force(Isa isa) {
    if (!supported(isa)) throw std::runtime_error("kernel ISA not supported on this machine");
    if (isa == Isa::scalar) {
        dispatch() = {Isa::scalar, &detail::scalar_table()};
        return;
    }
#if defined(PDESHARP_HAVE_AVX2)
    dispatch() = {Isa::avx2, &detail::avx2_table()};
#else
    throw std::runtime_error("binary built without avx2 kernels");
#endif
}

const char* isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

void diffusion_step_periodic(double* out, const double* u, std::size_t n, double lam) {
    dispatch().table->diffusion_step_periodic(out, u, n, lam);
}
void logistic_exact_step(double* out, const double* u, std::size_t n, double decay, double eps) {
    dispatch().table->logistic_exact_step(out, u, n, decay, eps);
}
double sum(const double* u, std::size_t n) { return dispatch().table->sum(u, n); }
double sum_sq(const double* u, std::size_t n) { return dispatch().table->sum_sq(u, n); }
double sum_abs(const double* u, std::size_t n) { return dispatch().table->sum_abs(u, n); }
double sum_sq_diff(const double* a, const double* b, std::size_t n) {
    return dispatch().table->sum_sq_diff(a, b, n);
}
double total_variation_periodic(const double* u, std::size_t n) {
    return dispatch().table->total_variation_periodic(u, n);
}
std::pair<double, double> minmax(const double* u, std::size_t n) {
    return dispatch().table->minmax(u, n);
}
double below_sq(const double* u, std::size_t n, double lo) {
    return dispatch().table->below_sq(u, n, lo);
}
double above_sq(const double* u, std::size_t n, double hi) {
    return dispatch().table->above_sq(u, n, hi);
}
double below_l1(const double* u, std::size_t n, double lo) {
    return dispatch().table->below_l1(u, n, lo);
}

}  // namespace pdesharp::kernels
