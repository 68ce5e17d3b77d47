#include "pdesharp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fft_util.hpp"
#include "pdesharp/kernels.hpp"
#include "pdesharp/reference.hpp"

namespace pdesharp {

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

std::size_t batch_of(const Tensor& t, const char* what) {
    if (t.shape.empty() || t.shape[0] == 0)
        throw MetricsError(std::string(what) + ": empty batch");
    return t.shape[0];
}

void require_solution_shape(const PdeTask& task, const SolutionField& field, const GridSpec& grid) {
    std::size_t batch = batch_of(field.data, "solution");
    auto expect = solution_shape(task, grid, batch);
    if (field.data.shape != expect)
        throw MetricsError(task.name + ": solution shape " + shape_str(field.data.shape) +
                           ", expected " + shape_str(expect));
    if (task.time_dependent && grid.t.size() < 2)
        throw MetricsError(task.name + ": need at least two stored time slices");
}

void require_initial_shape(const PdeTask& task, const Tensor& initial, const GridSpec& grid,
                           std::size_t batch) {
    std::vector<std::size_t> expect;
    switch (task.id) {
        case TaskId::navier_stokes: expect = {batch, 3, grid.n[0]}; break;
        case TaskId::darcy: expect = {batch, grid.n[0], grid.n[1]}; break;
        default: expect = {batch, grid.n[0]}; break;
    }
    if (initial.shape != expect)
        throw MetricsError(task.name + ": initial data shape " + shape_str(initial.shape) +
                           ", expected " + shape_str(expect));
}

double midpoint_integral(const double* u, std::size_t n, double dx) {
    return kernels::sum(u, n) * dx;
}

double l2_norm(const double* u, std::size_t n, double dx) {
    return std::sqrt(kernels::sum_sq(u, n) * dx);
}

// |x - base| / |base|; falls back to the absolute difference around zero
double rel_drift(double x, double base, bool* absolute = nullptr) {
    if (std::fabs(base) < 1e-300) {
        if (absolute) *absolute = true;
        return std::fabs(x - base);
    }
    return std::fabs(x - base) / std::fabs(base);
}

FeedbackRecord make_record(std::string id, std::vector<double> per_sample, bool batch_mean) {
    FeedbackRecord rec;
    rec.metric_id = std::move(id);
    rec.per_sample = std::move(per_sample);
    if (batch_mean) {
        double acc = 0.0;
        for (double v : rec.per_sample) acc += v;
        rec.value = acc / static_cast<double>(rec.per_sample.size());
    } else {
        rec.value = *std::max_element(rec.per_sample.begin(), rec.per_sample.end());
    }
    return rec;
}

// ---- residuals ---------------------------------------------------------------

// d/dx by central differences on a periodic grid
void central(const double* u, double* out, std::size_t n, double dx) {
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t jp = (j + 1) % n, jm = (j + n - 1) % n;
        out[j] = (u[jp] - u[jm]) / (2.0 * dx);
    }
}

void second_central(const double* u, double* out, std::size_t n, double dx) {
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t jp = (j + 1) % n, jm = (j + n - 1) % n;
        out[j] = (u[jp] - 2.0 * u[j] + u[jm]) / (dx * dx);
    }
}

double scalar_residual_rms(const PdeTask& task, const double* traj, const GridSpec& grid) {
    const std::size_t n = grid.n[0];
    const std::size_t nt = grid.t.size();
    const double dx = grid.dx[0];
    std::vector<double> d1(n), d2(n);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < nt; ++i) {
        const double* u0 = traj + i * n;
        const double* u1 = traj + (i + 1) * n;
        double dt = grid.t[i + 1] - grid.t[i];
        switch (task.id) {
            case TaskId::advection: {
                central(u0, d1.data(), n, dx);
                double beta = task.param("beta");
                for (std::size_t j = 0; j < n; ++j) {
                    double r = (u1[j] - u0[j]) / dt + beta * d1[j];
                    acc += r * r;
                }
                break;
            }
            case TaskId::burgers: {
                std::vector<double> flux(n);
                for (std::size_t j = 0; j < n; ++j) flux[j] = 0.5 * u0[j] * u0[j];
                central(flux.data(), d1.data(), n, dx);
                second_central(u0, d2.data(), n, dx);
                double nu = task.param("nu");
                for (std::size_t j = 0; j < n; ++j) {
                    double r = (u1[j] - u0[j]) / dt + d1[j] - nu * d2[j];
                    acc += r * r;
                }
                break;
            }
            case TaskId::reaction_diffusion: {
                second_central(u0, d2.data(), n, dx);
                double nu = task.param("nu"), rho = task.param("rho");
                for (std::size_t j = 0; j < n; ++j) {
                    double r = (u1[j] - u0[j]) / dt - nu * d2[j] - rho * u0[j] * (1.0 - u0[j]);
                    acc += r * r;
                }
                break;
            }
            default: throw MetricsError("scalar residual: unsupported task");
        }
        count += n;
    }
    return std::sqrt(acc / static_cast<double>(count));
}

double ns_residual(const PdeTask& task, const double* traj, const GridSpec& grid) {
    const std::size_t n = grid.n[0];
    const std::size_t nt = grid.t.size();
    const double dx = grid.dx[0];
    const double gamma = task.param("gamma");
    const double mu = task.param("zeta") + 4.0 * task.param("eta") / 3.0;

    std::vector<double> fm(n), fq(n), fe(n), dm(n), dq(n), de(n), visc(n), w(n), dv(n);
    double acc[3] = {0.0, 0.0, 0.0};
    std::size_t count = 0;
    auto cons = [&](const double* s, std::size_t j, double& r, double& q, double& e) {
        double rho = s[j], v = s[n + j], p = s[2 * n + j];
        r = rho;
        q = rho * v;
        e = p / (gamma - 1.0) + 0.5 * rho * v * v;
    };
    for (std::size_t i = 0; i + 1 < nt; ++i) {
        const double* s0 = traj + i * 3 * n;
        const double* s1 = traj + (i + 1) * 3 * n;
        double dt = grid.t[i + 1] - grid.t[i];
        for (std::size_t j = 0; j < n; ++j) {
            double rho = s0[j], v = s0[n + j], p = s0[2 * n + j];
            fm[j] = rho * v;
            fq[j] = rho * v * v + p;
            fe[j] = (p / (gamma - 1.0) + 0.5 * rho * v * v + p) * v;
        }
        central(fm.data(), dm.data(), n, dx);
        central(fq.data(), dq.data(), n, dx);
        central(fe.data(), de.data(), n, dx);
        second_central(s0 + n, visc.data(), n, dx);
        central(s0 + n, dv.data(), n, dx);
        for (std::size_t j = 0; j < n; ++j) w[j] = s0[n + j] * dv[j];
        central(w.data(), dv.data(), n, dx);  // d/dx (v dv/dx)
        for (std::size_t j = 0; j < n; ++j) {
            double r0, q0, e0, r1, q1, e1;
            cons(s0, j, r0, q0, e0);
            cons(s1, j, r1, q1, e1);
            double rm = (r1 - r0) / dt + dm[j];
            double rq = (q1 - q0) / dt + dq[j] - mu * visc[j];
            double re = (e1 - e0) / dt + de[j] - mu * dv[j];
            acc[0] += rm * rm;
            acc[1] += rq * rq;
            acc[2] += re * re;
        }
        count += n;
    }
    double total = 0.0;
    for (double a : acc) total += std::sqrt(a / static_cast<double>(count));
    return total;
}

// residual of the flux-form darcy stencil with harmonic face coefficients;
// matches the operator the direct solver assembles, so a solve scores ~0
double darcy_cell_residual(const double* a, const double* u, std::size_t nx, std::size_t i,
                           std::size_t j, double h, double beta) {
    auto harmonic = [](double x, double y) { return 2.0 * x * y / (x + y); };
    double uc = u[i * nx + j], ac = a[i * nx + j];
    double fn = harmonic(ac, a[(i - 1) * nx + j]) * (u[(i - 1) * nx + j] - uc) / h;
    double fs = harmonic(ac, a[(i + 1) * nx + j]) * (u[(i + 1) * nx + j] - uc) / h;
    double fw = harmonic(ac, a[i * nx + j - 1]) * (u[i * nx + j - 1] - uc) / h;
    double fe = harmonic(ac, a[i * nx + j + 1]) * (u[i * nx + j + 1] - uc) / h;
    return beta + (fn + fs + fw + fe) / h;
}

double darcy_residual_rms(const PdeTask& task, const double* u, const double* a,
                          const GridSpec& grid) {
    const std::size_t ny = grid.n[0], nx = grid.n[1];
    const double h = grid.dx[0];
    const double beta = task.param("beta");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 1; i + 1 < ny; ++i)
        for (std::size_t j = 1; j + 1 < nx; ++j) {
            double r = darcy_cell_residual(a, u, nx, i, j, h, beta);
            acc += r * r;
            ++count;
        }
    return std::sqrt(acc / static_cast<double>(count));
}

// ---- invariants, task by task --------------------------------------------------

void append_drift_record(std::vector<FeedbackRecord>& out, std::string id,
                         std::vector<double> per_sample, bool any_absolute) {
    FeedbackRecord rec = make_record(std::move(id), std::move(per_sample), false);
    if (any_absolute) rec.metadata["absolute_fallback"] = 1.0;
    out.push_back(std::move(rec));
}

std::vector<FeedbackRecord> advection_invariants(const PdeTask& task, const SolutionField& field,
                                                 const GridSpec& grid, const Tensor& initial,
                                                 const InvariantConfig& cfg) {
    const std::size_t batch = field.data.shape[0];
    const std::size_t nt = grid.t.size();
    const std::size_t n = grid.n[0];
    const double dx = grid.dx[0];
    const double beta = task.param("beta");
    const double len = task.domain_length(0);

    std::vector<double> phase(batch), amp(batch), mass(batch), l2(batch);
    bool mass_abs = false, l2_abs = false;
    double modes_min = static_cast<double>(n), modes_max = 0.0;
    double signed_l2_min = 0.0, signed_l2_max = 0.0;

    const std::size_t nspec = n / 2 + 1;
    // Nyquist has no usable phase on an even grid, so the tracked set stops below it
    const std::size_t kmax = (n % 2 == 0) ? nspec - 2 : nspec - 1;
    std::vector<std::complex<double>> spec0(nspec), spec(nspec);

    for (std::size_t b = 0; b < batch; ++b) {
        const double* init = initial.ptr() + b * n;
        fftutil::rfft(init, spec0.data(), n);

        double total = 0.0;
        for (std::size_t k = 1; k <= kmax; ++k) total += std::norm(spec0[k]);
        std::vector<std::size_t> modes;
        double retained = 0.0;
        for (std::size_t k = 1; k <= kmax; ++k) {
            double e = std::norm(spec0[k]);
            if (total > 0.0 && e >= cfg.mode_energy_threshold * total) {
                modes.push_back(k);
                retained += e;
            }
        }
        modes_min = std::min(modes_min, static_cast<double>(modes.size()));
        modes_max = std::max(modes_max, static_cast<double>(modes.size()));

        double m0 = midpoint_integral(init, n, dx);
        double norm0 = l2_norm(init, n, dx);
        const double inv_n = 1.0 / static_cast<double>(n);

        for (std::size_t i = 0; i < nt; ++i) {
            const double* slice = field.data.ptr() + (b * nt + i) * n;
            fftutil::rfft(slice, spec.data(), n);
            double ep2 = 0.0, ea2 = 0.0;
            for (std::size_t k : modes) {
                double w = std::norm(spec0[k]) / retained;
                double expected = std::arg(spec0[k]) -
                                  2.0 * std::numbers::pi * static_cast<double>(k) * beta *
                                      grid.t[i] / len;
                double d = std::remainder(std::arg(spec[k]) - expected, 2.0 * std::numbers::pi);
                ep2 += w * d * d;
                double da = (std::abs(spec[k]) - std::abs(spec0[k])) * inv_n;
                ea2 += w * da * da;
            }
            phase[b] = std::max(phase[b], std::sqrt(ep2));
            amp[b] = std::max(amp[b], std::sqrt(ea2));

            mass[b] = std::max(mass[b], rel_drift(midpoint_integral(slice, n, dx), m0, &mass_abs));
            double norm_i = l2_norm(slice, n, dx);
            double signed_drift =
                std::fabs(norm0) < 1e-300 ? norm_i - norm0 : (norm_i - norm0) / norm0;
            if (std::fabs(norm0) < 1e-300) l2_abs = true;
            signed_l2_min = std::min(signed_l2_min, signed_drift);
            signed_l2_max = std::max(signed_l2_max, signed_drift);
            l2[b] = std::max(l2[b], std::fabs(signed_drift));
        }
    }

    std::vector<FeedbackRecord> out;
    FeedbackRecord rp = make_record("advection.phase_error", std::move(phase), false);
    rp.metadata["mode_energy_threshold"] = cfg.mode_energy_threshold;
    rp.metadata["modes_retained_min"] = modes_min;
    rp.metadata["modes_retained_max"] = modes_max;
    out.push_back(std::move(rp));
    FeedbackRecord ra = make_record("advection.amplitude_error", std::move(amp), false);
    ra.metadata["mode_energy_threshold"] = cfg.mode_energy_threshold;
    out.push_back(std::move(ra));
    append_drift_record(out, "advection.mass_drift", std::move(mass), mass_abs);
    FeedbackRecord rl = make_record("advection.l2_drift", std::move(l2), false);
    if (l2_abs) rl.metadata["absolute_fallback"] = 1.0;
    rl.metadata["signed_min"] = signed_l2_min;
    rl.metadata["signed_max"] = signed_l2_max;
    out.push_back(std::move(rl));
    return out;
}

std::vector<FeedbackRecord> burgers_invariants(const SolutionField& field, const GridSpec& grid,
                                               const Tensor& initial) {
    const std::size_t batch = field.data.shape[0];
    const std::size_t nt = grid.t.size();
    const std::size_t n = grid.n[0];
    const double dx = grid.dx[0];

    std::vector<double> entropy(batch), tv(batch), mean(batch);
    bool mean_abs = false;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* init = initial.ptr() + b * n;
        double m0 = midpoint_integral(init, n, dx);
        double prev_e = 0.0, prev_tv = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            const double* slice = field.data.ptr() + (b * nt + i) * n;
            double e = 0.5 * kernels::sum_sq(slice, n) * dx;
            double t = kernels::total_variation_periodic(slice, n);
            if (i > 0) {
                entropy[b] += std::max(0.0, e - prev_e);
                tv[b] += std::max(0.0, t - prev_tv);
            }
            prev_e = e;
            prev_tv = t;
            mean[b] = std::max(mean[b], rel_drift(midpoint_integral(slice, n, dx), m0, &mean_abs));
        }
    }

    std::vector<FeedbackRecord> out;
    out.push_back(make_record("burgers.entropy_growth", std::move(entropy), false));
    out.push_back(make_record("burgers.tv_growth", std::move(tv), false));
    append_drift_record(out, "burgers.mean_drift", std::move(mean), mean_abs);
    return out;
}

std::vector<FeedbackRecord> rd_invariants(const PdeTask& task, const SolutionField& field,
                                          const GridSpec& grid, const InvariantConfig& cfg) {
    const std::size_t batch = field.data.shape[0];
    const std::size_t nt = grid.t.size();
    const std::size_t n = grid.n[0];
    const double dx = grid.dx[0];
    const double rho = task.param("rho");

    std::vector<double> mp(batch), react(batch);
    std::vector<double> pred(n);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < nt; ++i) {
            const double* slice = field.data.ptr() + (b * nt + i) * n;
            double v = std::sqrt(kernels::below_sq(slice, n, 0.0) * dx) +
                       std::sqrt(kernels::above_sq(slice, n, 1.0) * dx);
            mp[b] = std::max(mp[b], v);
            if (i + 1 < nt) {
                // distance of the stored step from the exact logistic update;
                // isolates reaction errors, 0 for spatially uniform dynamics
                std::copy(slice, slice + n, pred.begin());
                reaction_exact_step_inplace(pred.data(), n, grid.t[i + 1] - grid.t[i], rho,
                                            cfg.reaction_eps);
                const double* next = field.data.ptr() + (b * nt + i + 1) * n;
                double rms = std::sqrt(kernels::sum_sq_diff(pred.data(), next, n) /
                                       static_cast<double>(n));
                react[b] = std::max(react[b], rms);
            }
        }
    }

    double dt_max = 0.0;
    for (std::size_t i = 0; i + 1 < nt; ++i) dt_max = std::max(dt_max, grid.t[i + 1] - grid.t[i]);

    std::vector<FeedbackRecord> out;
    out.push_back(make_record("reaction_diffusion.max_principle", std::move(mp), false));
    FeedbackRecord rr = make_record("reaction_diffusion.reaction_consistency", std::move(react), false);
    rr.metadata["reaction_eps"] = cfg.reaction_eps;
    out.push_back(std::move(rr));
    FeedbackRecord rs;
    rs.metric_id = "reaction_diffusion.stiffness";
    rs.value = std::max(0.0, rho * dt_max - 1.0);
    rs.per_sample.assign(batch, rs.value);
    rs.metadata["rho_dt_max"] = rho * dt_max;
    out.push_back(std::move(rs));
    return out;
}

std::vector<FeedbackRecord> ns_invariants(const PdeTask& task, const SolutionField& field,
                                          const GridSpec& grid, const Tensor& initial) {
    const std::size_t batch = field.data.shape[0];
    const std::size_t nt = grid.t.size();
    const std::size_t n = grid.n[0];
    const double dx = grid.dx[0];
    const double gamma = task.param("gamma");
    const double mu = task.param("zeta") + 4.0 * task.param("eta") / 3.0;

    std::vector<double> mass(batch), mom(batch), ene(batch), neg(batch), loss(batch),
        change(batch), rh(batch);
    bool mom_abs = false;
    double skipped_entropy = 0.0, skipped_rh = 0.0;

    std::vector<double> q(n), e(n), frho(n), fmom(n), fene(n);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* init = initial.ptr() + b * 3 * n;
        for (std::size_t j = 0; j < n; ++j) {
            double r = init[j], v = init[n + j], p = init[2 * n + j];
            q[j] = r * v;
            e[j] = p / (gamma - 1.0) + 0.5 * r * v * v;
        }
        double m0 = midpoint_integral(init, n, dx);
        double q0 = midpoint_integral(q.data(), n, dx);
        double e0 = midpoint_integral(e.data(), n, dx);
        double q0_scale = kernels::sum_abs(q.data(), n) * dx;

        bool have_prev_sigma = false;
        double prev_sigma = 0.0, first_sigma = 0.0, last_sigma = 0.0;
        bool have_first = false;

        for (std::size_t i = 0; i < nt; ++i) {
            const double* s = field.data.ptr() + (b * nt + i) * 3 * n;
            const double* rho_s = s;
            const double* v_s = s + n;
            const double* p_s = s + 2 * n;
            for (std::size_t j = 0; j < n; ++j) {
                q[j] = rho_s[j] * v_s[j];
                e[j] = p_s[j] / (gamma - 1.0) + 0.5 * rho_s[j] * v_s[j] * v_s[j];
            }
            mass[b] = std::max(mass[b], rel_drift(midpoint_integral(rho_s, n, dx), m0));
            double qi = midpoint_integral(q.data(), n, dx);
            if (q0_scale < 1e-300) {
                mom_abs = true;
                mom[b] = std::max(mom[b], std::fabs(qi - q0));
            } else {
                mom[b] = std::max(mom[b], std::fabs(qi - q0) / q0_scale);
            }
            ene[b] = std::max(ene[b], rel_drift(midpoint_integral(e.data(), n, dx), e0));
            neg[b] = std::max(neg[b], (kernels::below_l1(rho_s, n, 0.0) +
                                       kernels::below_l1(p_s, n, 0.0)) * dx);

            auto [rmin, rmax] = kernels::minmax(rho_s, n);
            auto [pmin, pmax] = kernels::minmax(p_s, n);
            (void)rmax;
            (void)pmax;
            bool positive = rmin > 0.0 && pmin > 0.0;
            if (positive) {
                double sigma = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    sigma += rho_s[j] * (std::log(p_s[j]) - gamma * std::log(rho_s[j]));
                sigma *= dx;
                if (!have_first) {
                    first_sigma = sigma;
                    have_first = true;
                }
                last_sigma = sigma;
                if (have_prev_sigma) loss[b] += std::max(0.0, prev_sigma - sigma);
                prev_sigma = sigma;
                have_prev_sigma = true;
            } else {
                have_prev_sigma = false;
                skipped_entropy += 1.0;
            }

            if (i + 1 < nt) {
                if (!positive) {
                    skipped_rh += 1.0;
                    continue;
                }
                // finite-volume balance of the stored step against the same
                // Rusanov + viscous flux the reference integrator uses
                double dt = grid.t[i + 1] - grid.t[i];
                const double* s1 = field.data.ptr() + (b * nt + i + 1) * 3 * n;
                for (std::size_t j = 0; j < n; ++j) {
                    std::size_t jp = (j + 1) % n;
                    double cl = std::sqrt(gamma * p_s[j] / rho_s[j]);
                    double cr = std::sqrt(gamma * p_s[jp] / rho_s[jp]);
                    double a = std::max(std::fabs(v_s[j]) + cl, std::fabs(v_s[jp]) + cr);
                    double ql = rho_s[j] * v_s[j], qr = rho_s[jp] * v_s[jp];
                    double el = p_s[j] / (gamma - 1.0) + 0.5 * rho_s[j] * v_s[j] * v_s[j];
                    double er = p_s[jp] / (gamma - 1.0) + 0.5 * rho_s[jp] * v_s[jp] * v_s[jp];
                    frho[j] = 0.5 * (ql + qr) - 0.5 * a * (rho_s[jp] - rho_s[j]);
                    fmom[j] = 0.5 * (ql * v_s[j] + p_s[j] + qr * v_s[jp] + p_s[jp]) -
                              0.5 * a * (qr - ql);
                    fene[j] = 0.5 * ((el + p_s[j]) * v_s[j] + (er + p_s[jp]) * v_s[jp]) -
                              0.5 * a * (er - el);
                    double sig = mu * (v_s[jp] - v_s[j]) / dx;
                    double vbar = 0.5 * (v_s[j] + v_s[jp]);
                    fmom[j] -= sig;
                    fene[j] -= vbar * sig;
                }
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    std::size_t jm = (j + n - 1) % n;
                    double r1 = s1[j], v1 = s1[n + j], p1 = s1[2 * n + j];
                    double e1v = p1 / (gamma - 1.0) + 0.5 * r1 * v1 * v1;
                    double e0v = p_s[j] / (gamma - 1.0) + 0.5 * rho_s[j] * v_s[j] * v_s[j];
                    acc += std::fabs((r1 - rho_s[j]) / dt + (frho[j] - frho[jm]) / dx);
                    acc += std::fabs((r1 * v1 - rho_s[j] * v_s[j]) / dt +
                                     (fmom[j] - fmom[jm]) / dx);
                    acc += std::fabs((e1v - e0v) / dt + (fene[j] - fene[jm]) / dx);
                }
                rh[b] = std::max(rh[b], acc / (3.0 * static_cast<double>(n)));
            }
        }
        change[b] = have_first ? last_sigma - first_sigma : 0.0;
    }

    std::vector<FeedbackRecord> out;
    out.push_back(make_record("navier_stokes.mass_drift", std::move(mass), false));
    append_drift_record(out, "navier_stokes.momentum_drift", std::move(mom), mom_abs);
    out.push_back(make_record("navier_stokes.energy_drift", std::move(ene), false));
    out.push_back(make_record("navier_stokes.negativity", std::move(neg), false));
    FeedbackRecord rl = make_record("navier_stokes.entropy_loss", std::move(loss), false);
    if (skipped_entropy > 0.0) rl.metadata["slices_skipped"] = skipped_entropy;
    out.push_back(std::move(rl));
    FeedbackRecord rc;
    rc.metric_id = "navier_stokes.entropy_change";
    rc.per_sample = std::move(change);
    double extreme = 0.0;
    for (double v : rc.per_sample)
        if (std::fabs(v) > std::fabs(extreme)) extreme = v;
    rc.value = extreme;  // signed, the batch extreme by magnitude
    out.push_back(std::move(rc));
    FeedbackRecord rrh = make_record("navier_stokes.rankine_hugoniot", std::move(rh), false);
    if (skipped_rh > 0.0) rrh.metadata["intervals_skipped"] = skipped_rh;
    out.push_back(std::move(rrh));
    return out;
}

std::vector<FeedbackRecord> darcy_invariants(const PdeTask& task, const SolutionField& field,
                                             const GridSpec& grid, const Tensor& initial) {
    const std::size_t batch = field.data.shape[0];
    const std::size_t ny = grid.n[0], nx = grid.n[1];
    const double h = grid.dx[0];
    const double beta = task.param("beta");

    std::vector<double> eta(batch), local(batch), global(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* a = initial.ptr() + b * ny * nx;
        const double* u = field.data.ptr() + b * ny * nx;
        double eta2 = 0.0, mass = 0.0, net = 0.0;
        for (std::size_t i = 1; i + 1 < ny; ++i)
            for (std::size_t j = 1; j + 1 < nx; ++j) {
                double r = darcy_cell_residual(a, u, nx, i, j, h, beta);
                eta2 += h * h * (r * r * h * h);  // h_K^2 ||r||^2 on the cell
                mass += std::fabs(r) * h * h;
                net += r * h * h;
            }
        // flux jumps across edges between two interior cells; edges touching
        // the Dirichlet boundary carry the exact boundary flux, no jump
        for (std::size_t i = 1; i + 1 < ny; ++i)
            for (std::size_t j = 1; j + 2 < nx; ++j) {
                double g = (u[i * nx + j + 1] - u[i * nx + j]) / h;
                double jump = (a[i * nx + j] - a[i * nx + j + 1]) * g;
                eta2 += 0.5 * h * (jump * jump * h);
            }
        for (std::size_t i = 1; i + 2 < ny; ++i)
            for (std::size_t j = 1; j + 1 < nx; ++j) {
                double g = (u[(i + 1) * nx + j] - u[i * nx + j]) / h;
                double jump = (a[i * nx + j] - a[(i + 1) * nx + j]) * g;
                eta2 += 0.5 * h * (jump * jump * h);
            }
        eta[b] = std::sqrt(eta2);
        local[b] = mass;
        global[b] = std::fabs(net);
    }

    std::vector<FeedbackRecord> out;
    out.push_back(make_record("darcy.error_estimator", std::move(eta), false));
    out.push_back(make_record("darcy.local_mass_defect", std::move(local), false));
    out.push_back(make_record("darcy.global_compatibility", std::move(global), false));
    return out;
}

}  // namespace

FeedbackType feedback_type_from_string(const std::string& s) {
    if (s == "nrmse") return FeedbackType::nrmse;
    if (s == "residual") return FeedbackType::residual;
    if (s == "none") return FeedbackType::none;
    throw MetricsError("unknown feedback type: " + s);
}

const char* feedback_type_name(FeedbackType t) {
    switch (t) {
        case FeedbackType::nrmse: return "nrmse";
        case FeedbackType::residual: return "residual";
        case FeedbackType::none: return "none";
    }
    return "none";
}

FeedbackRecord nrmse(const Tensor& pred, const Tensor& ref) {
    if (!pred.same_shape(ref))
        throw MetricsError("nrmse: shape mismatch, prediction " + shape_str(pred.shape) +
                           " vs reference " + shape_str(ref.shape));
    std::size_t batch = batch_of(pred, "nrmse");
    std::size_t per = pred.size() / batch;
    std::vector<double> samples(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        double num = kernels::sum_sq_diff(pred.ptr() + b * per, ref.ptr() + b * per, per);
        double den = kernels::sum_sq(ref.ptr() + b * per, per);
        if (den == 0.0)
            throw MetricsError("nrmse: reference sample " + std::to_string(b) + " has zero norm");
        samples[b] = std::sqrt(num / den);
    }
    return make_record("general.nrmse", std::move(samples), true);
}

double convergence_order(const std::vector<double>& h, const std::vector<double>& errors) {
    if (h.size() != errors.size())
        throw MetricsError("convergence_order: h and E lists differ in length");
    if (h.size() < 2) throw MetricsError("convergence_order: need at least two (h, E) pairs");
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0)) throw MetricsError("convergence_order: h must be positive");
        if (!(errors[i] > 0.0)) throw MetricsError("convergence_order: E must be positive");
        if (i > 0 && !(h[i] < h[i - 1]))
            throw MetricsError("convergence_order: h must be strictly decreasing");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < h.size(); ++i)
        acc += std::log(errors[i] / errors[i + 1]) / std::log(h[i] / h[i + 1]);
    return acc / static_cast<double>(h.size() - 1);
}

FeedbackRecord pde_residual(const PdeTask& task, const SolutionField& field, const GridSpec& grid,
                            const Tensor* inputs) {
    require_solution_shape(task, field, grid);
    std::size_t batch = field.data.shape[0];
    std::vector<double> samples(batch);

    if (task.id == TaskId::darcy) {
        if (!inputs) throw MetricsError("darcy residual needs the coefficient field");
        require_initial_shape(task, *inputs, grid, batch);
        std::size_t cells = grid.n[0] * grid.n[1];
        for (std::size_t b = 0; b < batch; ++b)
            samples[b] = darcy_residual_rms(task, field.data.ptr() + b * cells,
                                            inputs->ptr() + b * cells, grid);
    } else if (task.id == TaskId::navier_stokes) {
        std::size_t per = grid.t.size() * 3 * grid.n[0];
        for (std::size_t b = 0; b < batch; ++b)
            samples[b] = ns_residual(task, field.data.ptr() + b * per, grid);
    } else {
        std::size_t per = grid.t.size() * grid.n[0];
        for (std::size_t b = 0; b < batch; ++b)
            samples[b] = scalar_residual_rms(task, field.data.ptr() + b * per, grid);
    }
    FeedbackRecord rec = make_record("general.residual", std::move(samples), true);
    if (task.time_dependent) rec.metadata["intervals"] = static_cast<double>(grid.t_steps());
    return rec;
}

FeedbackRecord cfl_max(const PdeTask& task, const SolutionField& field, const GridSpec& grid) {
    if (!task.time_dependent) throw MetricsError(task.name + ": steady task has no CFL number");
    require_solution_shape(task, field, grid);
    const std::size_t batch = field.data.shape[0];
    const std::size_t nt = grid.t.size();
    const std::size_t n = grid.n[0];
    const double dx = grid.dx[0];

    std::vector<double> samples(batch, 0.0);
    double nonpositive = 0.0;
    double dt_max = 0.0;
    for (std::size_t i = 0; i + 1 < nt; ++i) dt_max = std::max(dt_max, grid.t[i + 1] - grid.t[i]);

    switch (task.id) {
        case TaskId::advection:
            samples.assign(batch, std::fabs(task.param("beta")) * dt_max / dx);
            break;
        case TaskId::reaction_diffusion:
            samples.assign(batch, task.param("nu") * dt_max / (dx * dx));
            break;
        case TaskId::burgers:
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i + 1 < nt; ++i) {
                    const double* s = field.data.ptr() + (b * nt + i) * n;
                    auto [lo, hi] = kernels::minmax(s, n);
                    double umax = std::max(std::fabs(lo), std::fabs(hi));
                    samples[b] = std::max(samples[b], umax * (grid.t[i + 1] - grid.t[i]) / dx);
                }
            break;
        case TaskId::navier_stokes: {
            double gamma = task.param("gamma");
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i + 1 < nt; ++i) {
                    const double* s = field.data.ptr() + (b * nt + i) * 3 * n;
                    double wave = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        double rho = s[j], v = s[n + j], p = s[2 * n + j];
                        double c = 0.0;
                        if (rho > 0.0 && p > 0.0)
                            c = std::sqrt(gamma * p / rho);
                        else
                            nonpositive += 1.0;
                        wave = std::max(wave, std::fabs(v) + c);
                    }
                    samples[b] = std::max(samples[b], wave * (grid.t[i + 1] - grid.t[i]) / dx);
                }
            break;
        }
        default: throw MetricsError(task.name + ": no CFL rule");
    }
    FeedbackRecord rec = make_record("general.cfl_max", std::move(samples), false);
    rec.metadata["dt_max"] = dt_max;
    if (nonpositive > 0.0) rec.metadata["nonpositive_states"] = nonpositive;
    return rec;
}

std::vector<FeedbackRecord> invariant_metrics(const PdeTask& task, const SolutionField& field,
                                              const GridSpec& grid, const Tensor& initial,
                                              const InvariantConfig& cfg) {
    require_solution_shape(task, field, grid);
    require_initial_shape(task, initial, grid, field.data.shape[0]);
    switch (task.id) {
        case TaskId::advection: return advection_invariants(task, field, grid, initial, cfg);
        case TaskId::burgers: return burgers_invariants(field, grid, initial);
        case TaskId::reaction_diffusion: return rd_invariants(task, field, grid, cfg);
        case TaskId::navier_stokes: return ns_invariants(task, field, grid, initial);
        case TaskId::darcy: return darcy_invariants(task, field, grid, initial);
    }
    throw MetricsError("invariant_metrics: unknown task");
}

const std::vector<MetricInfo>& metric_catalog() {
    static const std::vector<MetricInfo> catalog = [] {
        std::vector<MetricInfo> c;
        auto add = [&](std::string id, std::vector<std::string> tasks, bool ref = false,
                       bool is_signed = false) {
            c.push_back({std::move(id), std::move(tasks), ref, is_signed});
        };
        std::vector<std::string> unsteady = {"advection", "burgers", "reaction_diffusion",
                                             "navier_stokes"};
        add("general.nrmse", {}, true);
        add("general.residual", {});
        add("general.cfl_max", unsteady);
        add("advection.phase_error", {"advection"});
        add("advection.amplitude_error", {"advection"});
        add("advection.mass_drift", {"advection"});
        add("advection.l2_drift", {"advection"});
        add("burgers.entropy_growth", {"burgers"});
        add("burgers.tv_growth", {"burgers"});
        add("burgers.mean_drift", {"burgers"});
        add("reaction_diffusion.max_principle", {"reaction_diffusion"});
        add("reaction_diffusion.reaction_consistency", {"reaction_diffusion"});
        add("reaction_diffusion.stiffness", {"reaction_diffusion"});
        add("navier_stokes.mass_drift", {"navier_stokes"});
        add("navier_stokes.momentum_drift", {"navier_stokes"});
        add("navier_stokes.energy_drift", {"navier_stokes"});
        add("navier_stokes.negativity", {"navier_stokes"});
        add("navier_stokes.entropy_loss", {"navier_stokes"});
        add("navier_stokes.entropy_change", {"navier_stokes"}, false, true);
        add("navier_stokes.rankine_hugoniot", {"navier_stokes"});
        add("darcy.error_estimator", {"darcy"});
        add("darcy.local_mass_defect", {"darcy"});
        add("darcy.global_compatibility", {"darcy"});
        return c;
    }();
    return catalog;
}

}  // namespace pdesharp
