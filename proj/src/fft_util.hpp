#pragma once

#include <complex>
#include <cstddef>

// Thin cache over FFTW's 1D real transforms. Planning is serialized; execution
// on caller-owned buffers is thread-safe. Plans use FFTW_ESTIMATE so the chosen
// algorithm (and hence rounding) never depends on machine timing.

namespace pdesharp::fftutil {

// spectrum has n/2+1 entries; unnormalized, matching fftw's r2c convention
void rfft(const double* in, std::complex<double>* spectrum, std::size_t n);
// overwrites out with the inverse transform of spectrum, scaled by 1/n
void irfft(const std::complex<double>* spectrum, double* out, std::size_t n);

}  // namespace pdesharp::fftutil
