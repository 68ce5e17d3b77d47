#include "pdesharp/reference.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "fft_util.hpp"
#include "pdesharp/kernels.hpp"
#include "pdesharp/sampling.hpp"
#include "pdesharp/tensor_io.hpp"

namespace pdesharp {

namespace {

void check_finite(const double* u, std::size_t n, std::size_t out_step, double t,
                  const char* what) {
    for (std::size_t j = 0; j < n; ++j)
        if (!std::isfinite(u[j]))
            throw ReferenceError(std::string("instability: non-finite ") + what +
                                 " at output step " + std::to_string(out_step) + " (t=" +
                                 format_double(t) + ", cell " + std::to_string(j) + ")");
}

// ---- spectral advection ----------------------------------------------------

void advection_exact_spectral(const PdeTask& task, const GridSpec& grid, const double* u0,
                              double* out, std::size_t nt) {
    const std::size_t n = grid.n[0];
    const double beta = task.param("beta");
    const double len = task.domain_length(0);

    std::vector<std::complex<double>> spec0(n / 2 + 1), spec(n / 2 + 1);
    fftutil::rfft(u0, spec0.data(), n);

    std::memcpy(out, u0, n * sizeof(double));
    for (std::size_t i = 1; i < nt; ++i) {
        // phase from t=0 each time, so no error accumulates across outputs
        for (std::size_t k = 0; k < spec0.size(); ++k) {
            double arg = -2.0 * std::numbers::pi * static_cast<double>(k) * beta * grid.t[i] / len;
            spec[k] = spec0[k] * std::polar(1.0, arg);
        }
        fftutil::irfft(spec.data(), out + i * n, n);
        check_finite(out + i * n, n, i, grid.t[i], "advection field");
    }
}

// ---- finite-volume machinery -----------------------------------------------

inline double minmod(double a, double b) {
    if (a > 0 && b > 0) return std::min(a, b);
    if (a < 0 && b < 0) return std::max(a, b);
    return 0.0;
}

// Reconstruction slopes: unlimited central (Fromm) keeps full second order on
// smooth fields; minmod is the TVD choice where shocks can form.
void muscl_states(const std::vector<double>& u, std::vector<double>& ul, std::vector<double>& ur,
                  bool central_slopes) {
    const std::size_t n = u.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
        double dm = u[i] - u[im], dp = u[ip] - u[i];
        double s = central_slopes ? 0.5 * (dm + dp) : minmod(dm, dp);
        // face i+1/2: left state from cell i, right state from cell i+1
        ul[i] = u[i] + 0.5 * s;
        ur[(i + n - 1) % n] = u[i] - 0.5 * s;
    }
}

void advection_fv_rhs(const std::vector<double>& u, double beta, double dx,
                      std::vector<double>& rhs, std::vector<double>& ul, std::vector<double>& ur,
                      std::vector<double>& flux) {
    const std::size_t n = u.size();
    muscl_states(u, ul, ur, true);
    for (std::size_t i = 0; i < n; ++i) {
        double fl = beta * ul[i], fr = beta * ur[i];
        flux[i] = 0.5 * (fl + fr) - 0.5 * std::fabs(beta) * (ur[i] - ul[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t im = (i + n - 1) % n;
        rhs[i] = -(flux[i] - flux[im]) / dx;
    }
}

void advection_second_order_fv(const PdeTask& task, const GridSpec& grid, const double* u0,
                               double* out, std::size_t nt, const ReferenceConfig& cfg) {
    const std::size_t n = grid.n[0];
    const double beta = task.param("beta");
    const double dx = grid.dx[0];
    std::vector<double> u(u0, u0 + n), u1(n), rhs(n), ul(n), ur(n), flux(n);
    const double dt_max = cfg.cfl * dx / std::max(std::fabs(beta), 1e-300);

    std::memcpy(out, u0, n * sizeof(double));
    for (std::size_t i = 1; i < nt; ++i) {
        double span = grid.t[i] - grid.t[i - 1];
        auto m = static_cast<std::size_t>(std::ceil(span / dt_max - 1e-12));
        m = std::max<std::size_t>(m, 1);
        double dt = span / static_cast<double>(m);
        for (std::size_t s = 0; s < m; ++s) {
            advection_fv_rhs(u, beta, dx, rhs, ul, ur, flux);
            for (std::size_t j = 0; j < n; ++j) u1[j] = u[j] + dt * rhs[j];
            advection_fv_rhs(u1, beta, dx, rhs, ul, ur, flux);
            for (std::size_t j = 0; j < n; ++j) u[j] = 0.5 * (u[j] + u1[j] + dt * rhs[j]);
        }
        std::memcpy(out + i * n, u.data(), n * sizeof(double));
        check_finite(out + i * n, n, i, grid.t[i], "advection field");
    }
}

// ---- burgers ----------------------------------------------------------------

void burgers_rhs(const std::vector<double>& u, double nu, double dx, std::vector<double>& rhs,
                 std::vector<double>& ul, std::vector<double>& ur, std::vector<double>& flux) {
    const std::size_t n = u.size();
    muscl_states(u, ul, ur, false);
    for (std::size_t i = 0; i < n; ++i) {
        double fl = 0.5 * ul[i] * ul[i], fr = 0.5 * ur[i] * ur[i];
        double a = std::max(std::fabs(ul[i]), std::fabs(ur[i]));
        flux[i] = 0.5 * (fl + fr) - 0.5 * a * (ur[i] - ul[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
        rhs[i] = -(flux[i] - flux[im]) / dx + nu * (u[im] - 2.0 * u[i] + u[ip]) / (dx * dx);
    }
}

void burgers_reference(const PdeTask& task, const GridSpec& grid, const double* u0, double* out,
                       std::size_t nt, const ReferenceConfig& cfg) {
    const std::size_t n = grid.n[0];
    const std::size_t f = std::max(cfg.oversample, 1);
    const std::size_t m = n * f;
    const double nu = task.param("nu");
    const double dx = grid.dx[0] / static_cast<double>(f);

    std::vector<double> u(m), u1(m), rhs(m), ul(m), ur(m), flux(m);
    for (std::size_t j = 0; j < m; ++j) u[j] = u0[j / f];  // piecewise-constant prolongation

    const double dt_visc = dt_max_diffusion(dx, nu, cfg.safety);
    std::memcpy(out, u0, n * sizeof(double));
    for (std::size_t i = 1; i < nt; ++i) {
        double remaining = grid.t[i] - grid.t[i - 1];
        while (remaining > 1e-14 * grid.t.back()) {
            auto [lo, hi] = kernels::minmax(u.data(), m);
            double umax = std::max(std::fabs(lo), std::fabs(hi));
            double dt = std::min(dt_visc, cfg.cfl * dx / std::max(umax, 1e-12));
            dt = std::min(dt, remaining);
            if (dt >= remaining * (1.0 - 1e-12)) dt = remaining;
            burgers_rhs(u, nu, dx, rhs, ul, ur, flux);
            for (std::size_t j = 0; j < m; ++j) u1[j] = u[j] + dt * rhs[j];
            burgers_rhs(u1, nu, dx, rhs, ul, ur, flux);
            for (std::size_t j = 0; j < m; ++j) u[j] = 0.5 * (u[j] + u1[j] + dt * rhs[j]);
            remaining -= dt;
        }
        double* slice = out + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t q = 0; q < f; ++q) acc += u[j * f + q];
            slice[j] = acc / static_cast<double>(f);
        }
        check_finite(slice, n, i, grid.t[i], "burgers field");
    }
}

// ---- reaction-diffusion (Strang) --------------------------------------------

void reaction_diffusion_reference(const PdeTask& task, const GridSpec& grid, const double* u0,
                                  double* out, std::size_t nt, const ReferenceConfig& cfg) {
    const std::size_t n = grid.n[0];
    const double nu = task.param("nu");
    const double rho = task.param("rho");
    const double dx = grid.dx[0];
    const double dt_max = dt_max_diffusion(dx, nu, cfg.safety);

    std::vector<double> u(u0, u0 + n), tmp(n);
    std::memcpy(out, u0, n * sizeof(double));
    for (std::size_t i = 1; i < nt; ++i) {
        double span = grid.t[i] - grid.t[i - 1];
        auto steps = static_cast<std::size_t>(std::ceil(span / dt_max - 1e-12));
        steps = std::max<std::size_t>(steps, 1);
        double dt = span / static_cast<double>(steps);
        double lam = nu * dt / (dx * dx);
        for (std::size_t s = 0; s < steps; ++s) {
            reaction_exact_step_inplace(u.data(), n, 0.5 * dt, rho);
            kernels::diffusion_step_periodic(tmp.data(), u.data(), n, lam);
            std::swap(u, tmp);
            reaction_exact_step_inplace(u.data(), n, 0.5 * dt, rho);
        }
        std::memcpy(out + i * n, u.data(), n * sizeof(double));
        check_finite(out + i * n, n, i, grid.t[i], "reaction-diffusion field");
    }
}

// ---- compressible navier-stokes ----------------------------------------------

struct NsState {
    std::vector<double> rho, mom, ene;  // conserved
    std::vector<double> v, p, c;        // derived
};

void ns_primitives(NsState& s, double gamma, std::size_t out_step, double t) {
    const std::size_t m = s.rho.size();
    for (std::size_t j = 0; j < m; ++j) {
        if (!(s.rho[j] > 0.0) || !std::isfinite(s.rho[j]))
            throw ReferenceError("instability: non-positive density at output step " +
                                 std::to_string(out_step) + " (t=" + format_double(t) + ")");
        s.v[j] = s.mom[j] / s.rho[j];
        s.p[j] = (gamma - 1.0) * (s.ene[j] - 0.5 * s.rho[j] * s.v[j] * s.v[j]);
        if (!(s.p[j] > 0.0) || !std::isfinite(s.p[j]))
            throw ReferenceError("instability: non-positive pressure at output step " +
                                 std::to_string(out_step) + " (t=" + format_double(t) + ")");
        s.c[j] = std::sqrt(gamma * s.p[j] / s.rho[j]);
    }
}

void navier_stokes_reference(const PdeTask& task, const GridSpec& grid, const double* init,
                             double* out, std::size_t nt, const ReferenceConfig& cfg) {
    const std::size_t n = grid.n[0];
    const std::size_t f = std::max(cfg.oversample, 1);
    const std::size_t m = n * f;
    const double gamma = task.param("gamma");
    const double mu = task.param("zeta") + 4.0 * task.param("eta") / 3.0;
    const double dx = grid.dx[0] / static_cast<double>(f);

    const double* rho0 = init;            // [3, n] slices: density, velocity, pressure
    const double* v0 = init + n;
    const double* p0 = init + 2 * n;

    NsState s;
    s.rho.resize(m);
    s.mom.resize(m);
    s.ene.resize(m);
    s.v.resize(m);
    s.p.resize(m);
    s.c.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        double r = rho0[j / f], v = v0[j / f], p = p0[j / f];
        s.rho[j] = r;
        s.mom[j] = r * v;
        s.ene[j] = p / (gamma - 1.0) + 0.5 * r * v * v;
    }

    std::vector<double> frho(m), fmom(m), fene(m);
    std::vector<double> nrho(m), nmom(m), nene(m);

    std::memcpy(out, init, 3 * n * sizeof(double));
    for (std::size_t i = 1; i < nt; ++i) {
        double remaining = grid.t[i] - grid.t[i - 1];
        while (remaining > 1e-14 * grid.t.back()) {
            ns_primitives(s, gamma, i, grid.t[i]);
            double amax = 0.0, rmin = s.rho[0];
            for (std::size_t j = 0; j < m; ++j) {
                amax = std::max(amax, std::fabs(s.v[j]) + s.c[j]);
                rmin = std::min(rmin, s.rho[j]);
            }
            double dt = std::min(cfg.cfl * dx / std::max(amax, 1e-12),
                                 cfg.safety * 0.25 * dx * dx * rmin / mu);
            dt = std::min(dt, remaining);
            if (dt >= remaining * (1.0 - 1e-12)) dt = remaining;

            for (std::size_t j = 0; j < m; ++j) {
                std::size_t jp = (j + 1) % m;
                double al = std::fabs(s.v[j]) + s.c[j], ar = std::fabs(s.v[jp]) + s.c[jp];
                double a = std::max(al, ar);
                double fl_rho = s.mom[j], fr_rho = s.mom[jp];
                double fl_mom = s.mom[j] * s.v[j] + s.p[j];
                double fr_mom = s.mom[jp] * s.v[jp] + s.p[jp];
                double fl_ene = (s.ene[j] + s.p[j]) * s.v[j];
                double fr_ene = (s.ene[jp] + s.p[jp]) * s.v[jp];
                frho[j] = 0.5 * (fl_rho + fr_rho) - 0.5 * a * (s.rho[jp] - s.rho[j]);
                fmom[j] = 0.5 * (fl_mom + fr_mom) - 0.5 * a * (s.mom[jp] - s.mom[j]);
                fene[j] = 0.5 * (fl_ene + fr_ene) - 0.5 * a * (s.ene[jp] - s.ene[j]);
                // viscous stress sigma' = mu dv/dx enters momentum and energy fluxes
                double sig = mu * (s.v[jp] - s.v[j]) / dx;
                double vbar = 0.5 * (s.v[j] + s.v[jp]);
                fmom[j] -= sig;
                fene[j] -= vbar * sig;
            }
            for (std::size_t j = 0; j < m; ++j) {
                std::size_t jm = (j + m - 1) % m;
                nrho[j] = s.rho[j] - dt / dx * (frho[j] - frho[jm]);
                nmom[j] = s.mom[j] - dt / dx * (fmom[j] - fmom[jm]);
                nene[j] = s.ene[j] - dt / dx * (fene[j] - fene[jm]);
            }
            s.rho.swap(nrho);
            s.mom.swap(nmom);
            s.ene.swap(nene);
            remaining -= dt;
        }
        double* slice = out + i * 3 * n;
        for (std::size_t j = 0; j < n; ++j) {
            double r = 0.0, q = 0.0, e = 0.0;
            for (std::size_t w = 0; w < f; ++w) {
                r += s.rho[j * f + w];
                q += s.mom[j * f + w];
                e += s.ene[j * f + w];
            }
            r /= static_cast<double>(f);
            q /= static_cast<double>(f);
            e /= static_cast<double>(f);
            double v = q / r;
            slice[j] = r;
            slice[n + j] = v;
            slice[2 * n + j] = (gamma - 1.0) * (e - 0.5 * r * v * v);
        }
        check_finite(slice, 3 * n, i, grid.t[i], "navier-stokes field");
    }
}

// ---- darcy -------------------------------------------------------------------

inline double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

void darcy_reference(const PdeTask& task, const GridSpec& grid, const double* a, double* out) {
    const std::size_t ny = grid.n[0], nx = grid.n[1];
    const double h = grid.dx[0];
    const double beta = task.param("beta");
    const std::size_t iy = ny - 2, ix = nx - 2;  // interior unknowns
    const auto unknowns = static_cast<Eigen::Index>(iy * ix);

    auto aat = [&](std::size_t i, std::size_t j) { return a[i * nx + j]; };
    auto uidx = [&](std::size_t i, std::size_t j) {
        return static_cast<Eigen::Index>((i - 1) * ix + (j - 1));
    };

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(iy * ix * 5);
    Eigen::VectorXd rhs(unknowns);
    const double inv_h2 = 1.0 / (h * h);
    for (std::size_t i = 1; i + 1 < ny; ++i) {
        for (std::size_t j = 1; j + 1 < nx; ++j) {
            double an = harmonic(aat(i, j), aat(i - 1, j));
            double as = harmonic(aat(i, j), aat(i + 1, j));
            double aw = harmonic(aat(i, j), aat(i, j - 1));
            double ae = harmonic(aat(i, j), aat(i, j + 1));
            double diag = (an + as + aw + ae) * inv_h2;
            Eigen::Index row = uidx(i, j);
            trips.emplace_back(row, row, diag);
            if (i > 1) trips.emplace_back(row, uidx(i - 1, j), -an * inv_h2);
            if (i + 2 < ny) trips.emplace_back(row, uidx(i + 1, j), -as * inv_h2);
            if (j > 1) trips.emplace_back(row, uidx(i, j - 1), -aw * inv_h2);
            if (j + 2 < nx) trips.emplace_back(row, uidx(i, j + 1), -ae * inv_h2);
            rhs[row] = beta;  // boundary neighbors hold u = 0, nothing moves to rhs
        }
    }
    Eigen::SparseMatrix<double> mat(unknowns, unknowns);
    mat.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(mat);
    if (solver.info() != Eigen::Success) throw ReferenceError("darcy factorization failed");
    Eigen::VectorXd u = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw ReferenceError("darcy solve failed");

    std::fill(out, out + ny * nx, 0.0);
    for (std::size_t i = 1; i + 1 < ny; ++i)
        for (std::size_t j = 1; j + 1 < nx; ++j) out[i * nx + j] = u[uidx(i, j)];
    check_finite(out, ny * nx, 0, 0.0, "darcy field");
}

}  // namespace

double dt_max_diffusion(double dx, double nu, double safety) {
    if (!(dx > 0.0)) throw ReferenceError("dt_max_diffusion: dx must be positive");
    if (!(nu > 0.0)) throw ReferenceError("dt_max_diffusion: nu must be positive");
    if (!(safety > 0.0) || safety > 1.0)
        throw ReferenceError("dt_max_diffusion: safety must lie in (0, 1]");
    return safety * 0.25 * dx * dx / nu;
}

void reaction_exact_step_inplace(double* u, std::size_t n, double dt, double rho, double eps) {
    if (!(eps > 0.0)) throw ReferenceError("reaction_exact_step: eps must be positive");
    if (dt < 0.0) throw ReferenceError("reaction_exact_step: dt must be non-negative");
    const double decay = std::exp(-rho * dt);
    kernels::logistic_exact_step(u, u, n, decay, eps);
}

Tensor reaction_exact_step(const Tensor& u, double dt, double rho, double eps) {
    Tensor out = u;
    reaction_exact_step_inplace(out.data.data(), out.size(), dt, rho, eps);
    return out;
}

SolutionField solve_reference(const PdeTask& task, const GridSpec& grid,
                              const SolutionField& init, const ReferenceConfig& cfg) {
    SolutionField out;
    out.component_names = task.component_names;

    if (task.id == TaskId::darcy) {
        if (init.data.rank() != 3) throw ReferenceError("darcy initial data must be [batch, ny, nx]");
        std::size_t batch = init.data.shape[0];
        out.data = Tensor({batch, grid.n[0], grid.n[1]});
        std::size_t cells = grid.n[0] * grid.n[1];
        for (std::size_t b = 0; b < batch; ++b)
            darcy_reference(task, grid, &init.data.data[b * cells], &out.data.data[b * cells]);
        return out;
    }

    if (grid.t.empty()) throw ReferenceError("time-dependent task needs a time axis");
    const std::size_t nt = grid.t.size();
    const std::size_t n = grid.n[0];
    const std::size_t batch = init.data.shape[0];

    if (task.id == TaskId::navier_stokes) {
        if (init.data.rank() != 3 || init.data.shape[1] != 3)
            throw ReferenceError("navier_stokes initial data must be [batch, 3, n]");
        out.data = Tensor({batch, nt, 3, n});
        for (std::size_t b = 0; b < batch; ++b)
            navier_stokes_reference(task, grid, &init.data.data[b * 3 * n],
                                    &out.data.data[b * nt * 3 * n], nt, cfg);
        return out;
    }

    if (init.data.rank() != 2) throw ReferenceError(task.name + " initial data must be [batch, n]");
    out.data = Tensor({batch, nt, n});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* u0 = &init.data.data[b * n];
        double* dst = &out.data.data[b * nt * n];
        switch (task.id) {
            case TaskId::advection:
                if (cfg.advection_scheme == "exact_spectral")
                    advection_exact_spectral(task, grid, u0, dst, nt);
                else if (cfg.advection_scheme == "second_order_fv")
                    advection_second_order_fv(task, grid, u0, dst, nt, cfg);
                else
                    throw ReferenceError("unknown advection scheme: " + cfg.advection_scheme);
                break;
            case TaskId::burgers:
                burgers_reference(task, grid, u0, dst, nt, cfg);
                break;
            case TaskId::reaction_diffusion:
                reaction_diffusion_reference(task, grid, u0, dst, nt, cfg);
                break;
            default:
                throw ReferenceError("unhandled task");
        }
    }
    return out;
}

ReferenceBundle generate_reference_set(const PdeTask& task, const GridSpec& grid,
                                       std::size_t batch, std::uint64_t seed,
                                       const std::filesystem::path& dir,
                                       const ReferenceConfig& cfg) {
    std::filesystem::create_directories(dir);
    SolutionField inputs = sample_initial_conditions(task, grid, batch, seed);
    SolutionField solutions = solve_reference(task, grid, inputs, cfg);

    ReferenceBundle bundle{dir, dir / "manifest.json", dir / "inputs.pdet",
                           dir / "solutions.pdet"};
    std::string in_bytes = encode_tensor(inputs.data);
    std::string sol_bytes = encode_tensor(solutions.data);
    write_binary_file(bundle.inputs, in_bytes);
    write_binary_file(bundle.solutions, sol_bytes);

    nlohmann::json manifest;
    manifest["task"] = task.name;
    manifest["params"] = task.params;
    manifest["grid"] = {{"n", grid.n}, {"dx", grid.dx}, {"t", grid.t}};
    manifest["batch"] = batch;
    manifest["seed"] = seed;
    manifest["scheme"] = {{"advection_scheme", cfg.advection_scheme},
                          {"oversample", cfg.oversample},
                          {"safety", cfg.safety},
                          {"cfl", cfg.cfl}};
    manifest["component_names"] = task.component_names;
    manifest["hashes"] = {{"inputs.pdet", sha256_hex(in_bytes)},
                          {"solutions.pdet", sha256_hex(sol_bytes)}};
    write_file_atomic(bundle.manifest, manifest.dump(2) + "\n");
    return bundle;
}

}  // namespace pdesharp
