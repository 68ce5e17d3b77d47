#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdesharp/tensor.hpp"
#include "pdesharp/util.hpp"

namespace pdesharp {

enum class TaskId { advection, burgers, reaction_diffusion, navier_stokes, darcy };

struct TaskError : Error {
    using Error::Error;
};

// Everything the pipeline needs to know about one PDE benchmark task.
struct PdeTask {
    TaskId id;
    std::string name;
    int spatial_dim;
    bool time_dependent;
    std::string boundary;  // "periodic" or "dirichlet_zero"
    std::map<std::string, double> params;
    std::vector<double> domain_lo, domain_hi;
    double default_t_end;

    // guest solver contract
    std::vector<std::string> input_names;      // tensors handed to the guest
    std::vector<std::string> param_order;      // scalar arguments, in signature order
    std::vector<std::string> component_names;  // output components; empty = scalar field

    double param(const std::string& key) const {
        auto it = params.find(key);
        if (it == params.end()) throw TaskError(name + ": unknown parameter " + key);
        return it->second;
    }
    double domain_length(int axis = 0) const { return domain_hi[axis] - domain_lo[axis]; }
};

PdeTask registry_get(const std::string& name, const std::map<std::string, double>& overrides = {});
std::vector<std::string> registry_names();

struct GridSpec {
    std::vector<std::size_t> n;  // points per spatial axis
    std::vector<double> dx;
    std::vector<double> t;  // output times incl. t=0; empty for steady tasks

    std::size_t t_steps() const { return t.empty() ? 0 : t.size() - 1; }
};

// Time-dependent tasks: n points per axis, t_steps output intervals on (0, t_end].
GridSpec make_grid(const PdeTask& task, std::size_t n, std::size_t t_steps, double t_end);
// Steady tasks (darcy). Passing a time axis to a steady task is an error.
GridSpec make_grid(const PdeTask& task, std::size_t n);

// Node coordinates along one axis. Periodic axes use x_j = lo + j*dx (the FFT
// convention); the Dirichlet darcy grid spans [lo, hi] inclusive.
std::vector<double> axis_points(const PdeTask& task, const GridSpec& grid, int axis = 0);

// Expected guest output shape for a batch of the given size.
std::vector<std::size_t> solution_shape(const PdeTask& task, const GridSpec& grid, std::size_t batch);

}  // namespace pdesharp
