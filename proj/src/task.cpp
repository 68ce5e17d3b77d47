#include "pdesharp/task.hpp"

#include <cmath>

namespace pdesharp {

namespace {

PdeTask base_task(TaskId id) {
    PdeTask t;
    t.id = id;
    switch (id) {
        case TaskId::advection:
            t.name = "advection";
            t.spatial_dim = 1;
            t.time_dependent = true;
            t.boundary = "periodic";
            t.params = {{"beta", 0.1}};
            t.domain_lo = {0.0};
            t.domain_hi = {1.0};
            t.default_t_end = 2.0;
            t.input_names = {"u0"};
            t.param_order = {"beta"};
            break;
        case TaskId::burgers:
            t.name = "burgers";
            t.spatial_dim = 1;
            t.time_dependent = true;
            t.boundary = "periodic";
            t.params = {{"nu", 0.01}};
            t.domain_lo = {0.0};
            t.domain_hi = {1.0};
            t.default_t_end = 1.0;
            t.input_names = {"u0"};
            t.param_order = {"nu"};
            break;
        case TaskId::reaction_diffusion:
            t.name = "reaction_diffusion";
            t.spatial_dim = 1;
            t.time_dependent = true;
            t.boundary = "periodic";
            t.params = {{"nu", 0.5}, {"rho", 1.0}};
            t.domain_lo = {0.0};
            t.domain_hi = {1.0};
            t.default_t_end = 1.0;
            t.input_names = {"u0"};
            t.param_order = {"nu", "rho"};
            break;
        case TaskId::navier_stokes:
            t.name = "navier_stokes";
            t.spatial_dim = 1;
            t.time_dependent = true;
            t.boundary = "periodic";
            t.params = {{"eta", 0.1}, {"zeta", 0.1}, {"gamma", 5.0 / 3.0}};
            t.domain_lo = {-1.0};
            t.domain_hi = {1.0};
            t.default_t_end = 1.0;
            t.input_names = {"density0", "velocity0", "pressure0"};
            t.param_order = {"eta", "zeta"};
            t.component_names = {"density", "velocity", "pressure"};
            break;
        case TaskId::darcy:
            t.name = "darcy";
            t.spatial_dim = 2;
            t.time_dependent = false;
            t.boundary = "dirichlet_zero";
            t.params = {{"beta", 1.0}};
            t.domain_lo = {0.0, 0.0};
            t.domain_hi = {1.0, 1.0};
            t.default_t_end = 0.0;
            t.input_names = {"coeff"};
            t.param_order = {"beta"};
            break;
    }
    return t;
}

}  // namespace

std::vector<std::string> registry_names() {
    return {"advection", "burgers", "reaction_diffusion", "navier_stokes", "darcy"};
}

PdeTask registry_get(const std::string& name, const std::map<std::string, double>& overrides) {
    TaskId id;
    if (name == "advection") id = TaskId::advection;
    else if (name == "burgers") id = TaskId::burgers;
    else if (name == "reaction_diffusion") id = TaskId::reaction_diffusion;
    else if (name == "navier_stokes") id = TaskId::navier_stokes;
    else if (name == "darcy") id = TaskId::darcy;
    else throw TaskError("unknown task: " + name);

    PdeTask t = base_task(id);
    for (const auto& [key, value] : overrides) {
        if (!t.params.count(key)) throw TaskError(name + ": unknown parameter override " + key);
        t.params[key] = value;
    }
    for (const char* visc : {"nu", "eta", "zeta"}) {
        auto it = t.params.find(visc);
        if (it != t.params.end() && it->second <= 0.0)
            throw TaskError(name + ": " + visc + " must be positive, got " +
                            format_double(it->second));
    }
    return t;
}

GridSpec make_grid(const PdeTask& task, std::size_t n, std::size_t t_steps, double t_end) {
    if (!task.time_dependent)
        throw TaskError(task.name + " is steady-state; it has no time axis");
    if (n < 8) throw TaskError("grid too coarse: n = " + std::to_string(n));
    if (t_steps < 1) throw TaskError("need at least one output interval");
    if (!(t_end > 0.0)) throw TaskError("t_end must be positive");
    GridSpec g;
    for (int a = 0; a < task.spatial_dim; ++a) {
        g.n.push_back(n);
        g.dx.push_back(task.domain_length(a) / static_cast<double>(n));
    }
    g.t.resize(t_steps + 1);
    for (std::size_t i = 0; i <= t_steps; ++i)
        g.t[i] = t_end * static_cast<double>(i) / static_cast<double>(t_steps);
    g.t.back() = t_end;  // exact endpoint, no accumulation residue
    return g;
}

GridSpec make_grid(const PdeTask& task, std::size_t n) {
    if (task.time_dependent)
        throw TaskError(task.name + " is time-dependent; supply t_steps and t_end");
    if (n < 8) throw TaskError("grid too coarse: n = " + std::to_string(n));
    GridSpec g;
    for (int a = 0; a < task.spatial_dim; ++a) {
        g.n.push_back(n);
        // nodes include both Dirichlet boundaries
        g.dx.push_back(task.domain_length(a) / static_cast<double>(n - 1));
    }
    return g;
}

std::vector<double> axis_points(const PdeTask& task, const GridSpec& grid, int axis) {
    std::vector<double> x(grid.n[axis]);
    for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = task.domain_lo[axis] + grid.dx[axis] * static_cast<double>(j);
    return x;
}

std::vector<std::size_t> solution_shape(const PdeTask& task, const GridSpec& grid,
                                        std::size_t batch) {
    std::vector<std::size_t> shape{batch};
    if (task.time_dependent) shape.push_back(grid.t.size());
    if (!task.component_names.empty()) shape.push_back(task.component_names.size());
    for (std::size_t a = 0; a < grid.n.size(); ++a) shape.push_back(grid.n[a]);
    return shape;
}

}  // namespace pdesharp
