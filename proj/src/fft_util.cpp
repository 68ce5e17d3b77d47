#include "fft_util.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

namespace pdesharp::fftutil {

namespace {

struct FftPlans {
    fftw_plan fwd = nullptr, inv = nullptr;
};

FftPlans& plans_for(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, FftPlans> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& p = cache[n];
    if (!p.fwd) {
        std::vector<double> real(n);
        std::vector<std::complex<double>> spec(n / 2 + 1);
        p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(),
                                     reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
        p.inv = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                     reinterpret_cast<fftw_complex*>(spec.data()), real.data(),
                                     FFTW_ESTIMATE);
    }
    return p;
}

}  // namespace

void rfft(const double* in, std::complex<double>* spectrum, std::size_t n) {
    auto& plans = plans_for(n);
    std::vector<double> real(in, in + n);
    fftw_execute_dft_r2c(plans.fwd, real.data(), reinterpret_cast<fftw_complex*>(spectrum));
}

void irfft(const std::complex<double>* spectrum, double* out, std::size_t n) {
    auto& plans = plans_for(n);
    // c2r destroys its input, so transform a copy
    std::vector<std::complex<double>> spec(spectrum, spectrum + n / 2 + 1);
    fftw_execute_dft_c2r(plans.inv, reinterpret_cast<fftw_complex*>(spec.data()), out);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) out[j] *= scale;
}

}  // namespace pdesharp::fftutil
