#include "pdesharp/sampling.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pdesharp {

namespace {

constexpr int kModes = 8;

struct SeriesCoefs {
    double mean = 0.0;
    double phase[kModes];
};

SeriesCoefs draw_series(std::mt19937_64& rng, bool with_mean) {
    SeriesCoefs c;
    if (with_mean) c.mean = 0.5 + uniform01(rng);
    for (int k = 0; k < kModes; ++k) c.phase[k] = 2.0 * std::numbers::pi * uniform01(rng);
    return c;
}

double eval_series(const SeriesCoefs& c, double x01) {
    double v = c.mean;
    for (int k = 1; k <= kModes; ++k)
        v += std::cos(2.0 * std::numbers::pi * k * x01 + c.phase[k - 1]) / static_cast<double>(k);
    return v;
}

void fill_series_row(double* row, const std::vector<double>& x, double lo, double len,
                     const SeriesCoefs& c, double scale, double offset) {
    for (std::size_t j = 0; j < x.size(); ++j)
        row[j] = offset + scale * eval_series(c, (x[j] - lo) / len);
}

void darcy_coefficient(double* field, std::size_t ny, std::size_t nx, std::mt19937_64& rng) {
    std::vector<double> s(ny * nx), tmp(ny * nx);
    for (auto& v : s) v = uniform01(rng) - 0.5;
    auto idx = [nx](std::size_t i, std::size_t j) { return i * nx + j; };
    auto clampi = [](long v, long hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (int pass = 0; pass < 10; ++pass) {
        for (std::size_t i = 0; i < ny; ++i)
            for (std::size_t j = 0; j < nx; ++j) {
                long im = clampi(static_cast<long>(i) - 1, static_cast<long>(ny) - 1);
                long ip = clampi(static_cast<long>(i) + 1, static_cast<long>(ny) - 1);
                long jm = clampi(static_cast<long>(j) - 1, static_cast<long>(nx) - 1);
                long jp = clampi(static_cast<long>(j) + 1, static_cast<long>(nx) - 1);
                tmp[idx(i, j)] = 0.2 * (s[idx(i, j)] + s[idx(im, j)] + s[idx(ip, j)] +
                                        s[idx(i, jm)] + s[idx(i, jp)]);
            }
        std::swap(s, tmp);
    }
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) field[j] = s[j] > mean ? 12.0 : 3.0;
}

}  // namespace

SolutionField sample_initial_conditions(const PdeTask& task, const GridSpec& grid,
                                        std::size_t batch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SolutionField out;
    const double lo = task.domain_lo[0];
    const double len = task.domain_length(0);

    switch (task.id) {
        case TaskId::advection:
        case TaskId::burgers: {
            auto x = axis_points(task, grid, 0);
            out.data = Tensor({batch, grid.n[0]});
            for (std::size_t b = 0; b < batch; ++b) {
                auto c = draw_series(rng, true);
                fill_series_row(&out.data.data[b * grid.n[0]], x, lo, len, c, 1.0, 0.0);
            }
            break;
        }
        case TaskId::reaction_diffusion: {
            auto x = axis_points(task, grid, 0);
            out.data = Tensor({batch, grid.n[0]});
            for (std::size_t b = 0; b < batch; ++b) {
                auto c = draw_series(rng, false);
                double* row = &out.data.data[b * grid.n[0]];
                for (std::size_t j = 0; j < x.size(); ++j) {
                    double s = 2.0 * eval_series(c, (x[j] - lo) / len);
                    row[j] = 1.0 / (1.0 + std::exp(-s));
                }
            }
            break;
        }
        case TaskId::navier_stokes: {
            auto x = axis_points(task, grid, 0);
            std::size_t n = grid.n[0];
            out.data = Tensor({batch, 3, n});
            out.component_names = task.component_names;
            for (std::size_t b = 0; b < batch; ++b) {
                auto crho = draw_series(rng, false);
                auto cv = draw_series(rng, false);
                auto cp = draw_series(rng, false);
                double* base = &out.data.data[b * 3 * n];
                // sum_k 1/k over 8 modes < 2.72, so 0.15 * series keeps rho, p > 0.59
                fill_series_row(base + 0 * n, x, lo, len, crho, 0.15, 1.0);
                fill_series_row(base + 1 * n, x, lo, len, cv, 0.5, 0.0);
                fill_series_row(base + 2 * n, x, lo, len, cp, 0.15, 1.0);
            }
            break;
        }
        case TaskId::darcy: {
            std::size_t ny = grid.n[0], nx = grid.n[1];
            out.data = Tensor({batch, ny, nx});
            for (std::size_t b = 0; b < batch; ++b)
                darcy_coefficient(&out.data.data[b * ny * nx], ny, nx, rng);
            break;
        }
    }
    return out;
}

}  // namespace pdesharp
