#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdesharp/task.hpp"
#include "pdesharp/tensor.hpp"
#include "pdesharp/util.hpp"

// Feedback metrics scored against candidate solver output. Everything here is
// a pure function of its arguments; nothing touches the filesystem or clock.
//
// Conventions shared by the whole suite:
//   * integrals use midpoint quadrature, sum(f) * dx
//   * violation-style metrics are 0 on clean trajectories and grow with the
//     defect; their record value is the worst sample of the batch
//   * quality-style metrics (nrmse, residual) average over the batch
//   * per_sample always has one entry per batch sample

namespace pdesharp {

struct MetricsError : Error {
    using Error::Error;
};

// What a synthesis tournament ranks candidates by.
enum class FeedbackType { nrmse, residual, none };

FeedbackType feedback_type_from_string(const std::string& s);
const char* feedback_type_name(FeedbackType t);

struct FeedbackRecord {
    std::string metric_id;  // namespaced, e.g. "general.nrmse" or "burgers.tv_growth"
    double value = 0.0;
    std::vector<double> per_sample;
    std::map<std::string, double> metadata;  // scalar diagnostics, keys metric-specific
};

// Mean over the batch of per-sample relative L2 error, ||pred - ref|| / ||ref||.
// Shapes must match exactly; a zero-norm reference sample is an error.
FeedbackRecord nrmse(const Tensor& pred, const Tensor& ref);

// Observed order from (h, E) pairs with h strictly decreasing and E > 0:
// the mean over consecutive pairs of log(E_i/E_{i+1}) / log(h_i/h_{i+1}).
double convergence_order(const std::vector<double>& h, const std::vector<double>& errors);

// How well stored slices satisfy the PDE: forward difference in time between
// consecutive slices, central differences in space (periodic wrap), RMS over
// cells and intervals; systems add the per-equation norms. The steady darcy
// task needs its coefficient field, passed as `inputs`.
FeedbackRecord pde_residual(const PdeTask& task, const SolutionField& field, const GridSpec& grid,
                            const Tensor* inputs = nullptr);

// Largest advective CFL number (diffusion number for reaction_diffusion)
// implied by the output cadence. Steady tasks have no CFL and raise an error.
FeedbackRecord cfl_max(const PdeTask& task, const SolutionField& field, const GridSpec& grid);

struct InvariantConfig {
    // a Fourier mode joins the tracked set when it holds at least this share
    // of the initial spectral energy (DC excluded)
    double mode_energy_threshold = 0.01;
    // eps of the stable logistic update the reaction consistency check uses
    double reaction_eps = 1e-10;
};

// Task-specific conservation / admissibility checks. `initial` is the input
// tensor the trajectory started from (the coefficient field for darcy), with
// the sampler's shape for that task.
std::vector<FeedbackRecord> invariant_metrics(const PdeTask& task, const SolutionField& field,
                                              const GridSpec& grid, const Tensor& initial,
                                              const InvariantConfig& cfg = {});

struct MetricInfo {
    std::string metric_id;
    std::vector<std::string> tasks;  // applicable task names; empty = every task
    bool requires_reference = false;
    bool is_signed = false;  // signed metrics keep their sign; others are >= 0
};

// Every metric the suite can emit, for manifest export and id validation.
const std::vector<MetricInfo>& metric_catalog();

}  // namespace pdesharp
