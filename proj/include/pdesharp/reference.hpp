#pragma once

#include <cstdint>
#include <filesystem>

#include "pdesharp/task.hpp"

namespace pdesharp {

struct ReferenceError : Error {
    using Error::Error;
};

struct ReferenceConfig {
    // "exact_spectral" shifts Fourier modes by the closed form; "second_order_fv"
    // runs a MUSCL + Rusanov + Heun scheme instead (used for order studies).
    std::string advection_scheme = "exact_spectral";
    int oversample = 4;   // fine-grid factor for burgers / navier_stokes
    double safety = 1.0;  // fraction of the diffusion stability bound
    double cfl = 0.5;     // advective CFL fraction
};

// Largest stable explicit diffusion step: safety * 0.25 * dx^2 / nu.
double dt_max_diffusion(double dx, double nu, double safety = 1.0);

// Exact logistic reaction update over dt, in the overflow-stable form
// 1 / (1 + exp(-rho dt) (1-u) / (u+eps)). Maps [0,1] into itself; u=1 stays 1;
// u=0 comes back eps-perturbed (at most eps * e^(rho dt)).
Tensor reaction_exact_step(const Tensor& u, double dt, double rho, double eps = 1e-10);
void reaction_exact_step_inplace(double* u, std::size_t n, double dt, double rho,
                                 double eps = 1e-10);

// Trusted solutions on the output grid. First time slice equals the given
// initial data bit-for-bit. Aborts with a step diagnostic if a non-finite
// value ever appears. Output times are hit exactly.
SolutionField solve_reference(const PdeTask& task, const GridSpec& grid,
                              const SolutionField& init, const ReferenceConfig& cfg = {});

struct ReferenceBundle {
    std::filesystem::path dir, manifest, inputs, solutions;
};

// Samples initial data, solves, and writes inputs.pdet / solutions.pdet plus a
// manifest with content hashes.
ReferenceBundle generate_reference_set(const PdeTask& task, const GridSpec& grid,
                                       std::size_t batch, std::uint64_t seed,
                                       const std::filesystem::path& dir,
                                       const ReferenceConfig& cfg = {});

}  // namespace pdesharp
