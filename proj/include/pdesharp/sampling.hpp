#pragma once

#include <cstdint>

#include "pdesharp/task.hpp"

namespace pdesharp {

// Deterministic initial data: same (task, grid, batch, seed) gives identical
// bytes. Random draws happen per sample and mode, never per grid point, so the
// same seed describes the same continuous field at every resolution (darcy's
// noise field is the exception and is documented as grid-tied).
//
// advection/burgers: truncated Fourier series, modes 1..8, amplitude 1/k,
//   uniform random phases, plus a random positive mean term.
// reaction_diffusion: logistic squash of such a series, strictly inside (0,1).
// navier_stokes: positive density/pressure around 1, bounded velocity.
// darcy: two-level coefficient field (3 and 12) from thresholded smoothed noise.
SolutionField sample_initial_conditions(const PdeTask& task, const GridSpec& grid,
                                        std::size_t batch, std::uint64_t seed);

}  // namespace pdesharp
