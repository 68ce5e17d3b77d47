#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "pdesharp/sampling.hpp"
#include "pdesharp/task.hpp"
#include "support/test_util.hpp"

using namespace pdesharp;

TEST_CASE("registry defaults match the benchmark parameterization") {
    auto adv = registry_get("advection");
    CHECK(adv.param("beta") == 0.1);
    CHECK(adv.domain_lo[0] == 0.0);
    CHECK(adv.domain_hi[0] == 1.0);
    CHECK(adv.default_t_end == 2.0);
    CHECK(adv.boundary == "periodic");

    auto bur = registry_get("burgers");
    CHECK(bur.param("nu") == 0.01);

    auto rd = registry_get("reaction_diffusion");
    CHECK(rd.param("nu") == 0.5);
    CHECK(rd.param("rho") == 1.0);

    auto ns = registry_get("navier_stokes");
    CHECK(ns.param("eta") == 0.1);
    CHECK(ns.param("zeta") == 0.1);
    CHECK(ns.param("gamma") == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(ns.domain_lo[0] == -1.0);
    CHECK(ns.domain_hi[0] == 1.0);
    CHECK(ns.component_names == std::vector<std::string>{"density", "velocity", "pressure"});

    auto darcy = registry_get("darcy");
    CHECK(darcy.param("beta") == 1.0);
    CHECK(darcy.spatial_dim == 2);
    CHECK_FALSE(darcy.time_dependent);
    CHECK(darcy.boundary == "dirichlet_zero");
}

TEST_CASE("registry overrides and rejection") {
    auto rd = registry_get("reaction_diffusion", {{"nu", 0.25}});
    CHECK(rd.param("nu") == 0.25);
    CHECK(rd.param("rho") == 1.0);

    CHECK_THROWS_AS(registry_get("heat"), TaskError);
    CHECK_THROWS_AS(registry_get("burgers", {{"mu", 1.0}}), TaskError);
    CHECK_THROWS_AS(registry_get("burgers", {{"nu", 0.0}}), TaskError);
    CHECK_THROWS_AS(registry_get("burgers", {{"nu", -0.1}}), TaskError);
    CHECK_THROWS_AS(registry_get("navier_stokes", {{"eta", -1.0}}), TaskError);
    CHECK_THROWS_AS(registry_get("navier_stokes", {{"zeta", 0.0}}), TaskError);
}

TEST_CASE("grid construction") {
    auto adv = registry_get("advection");
    auto g = make_grid(adv, 1024, 100, 2.0);
    CHECK(g.dx[0] == 1.0 / 1024.0);
    CHECK(g.t.size() == 101);
    CHECK(g.t.front() == 0.0);
    CHECK(g.t.back() == 2.0);
    CHECK(g.t[50] == doctest::Approx(1.0).epsilon(1e-15));

    auto ns = registry_get("navier_stokes");
    auto gns = make_grid(ns, 128, 10, 1.0);
    CHECK(gns.dx[0] == 2.0 / 128.0);

    auto darcy = registry_get("darcy");
    auto gd = make_grid(darcy, 64);
    CHECK(gd.n == std::vector<std::size_t>{64, 64});
    CHECK(gd.dx[0] == doctest::Approx(1.0 / 63.0).epsilon(1e-15));
    CHECK(gd.t.empty());

    CHECK_THROWS_AS(make_grid(darcy, 64, 10, 1.0), TaskError);  // steady task, no time axis
    CHECK_THROWS_AS(make_grid(adv, 64), TaskError);
    CHECK_THROWS_AS(make_grid(adv, 4, 10, 1.0), TaskError);
    CHECK_THROWS_AS(make_grid(adv, 64, 0, 1.0), TaskError);
    CHECK_THROWS_AS(make_grid(adv, 64, 10, 0.0), TaskError);
}

TEST_CASE("solution shapes per task") {
    auto adv = registry_get("advection");
    auto g = make_grid(adv, 64, 5, 2.0);
    CHECK(solution_shape(adv, g, 3) == std::vector<std::size_t>{3, 6, 64});

    auto ns = registry_get("navier_stokes");
    auto gns = make_grid(ns, 64, 5, 1.0);
    CHECK(solution_shape(ns, gns, 2) == std::vector<std::size_t>{2, 6, 3, 64});

    auto darcy = registry_get("darcy");
    auto gd = make_grid(darcy, 32);
    CHECK(solution_shape(darcy, gd, 4) == std::vector<std::size_t>{4, 32, 32});
}

TEST_CASE("sampler determinism") {
    auto rd = registry_get("reaction_diffusion");
    auto g = make_grid(rd, 64, 4, 1.0);
    auto a = sample_initial_conditions(rd, g, 3, 11);
    auto b = sample_initial_conditions(rd, g, 3, 11);
    auto c = sample_initial_conditions(rd, g, 3, 12);
    REQUIRE(a.data.data == b.data.data);
    CHECK(a.data.data != c.data.data);
}

TEST_CASE("advection samples match a direct series-summation oracle") {
    auto adv = registry_get("advection");
    auto g = make_grid(adv, 64, 4, 2.0);
    const std::uint64_t seed = 7;
    auto field = sample_initial_conditions(adv, g, 4, seed);
    REQUIRE(field.data.shape == std::vector<std::size_t>{4, 64});

    // independently re-derive the documented construction
    std::mt19937_64 rng(seed);
    for (std::size_t b = 0; b < 4; ++b) {
        double mean = 0.5 + uniform01(rng);
        double phase[8];
        for (auto& p : phase) p = 2.0 * std::numbers::pi * uniform01(rng);
        double mass = 0.0;
        for (std::size_t j = 0; j < 64; ++j) {
            double x = static_cast<double>(j) / 64.0;
            double want = mean;
            for (int k = 1; k <= 8; ++k)
                want += std::cos(2.0 * std::numbers::pi * k * x + phase[k - 1]) / k;
            CHECK(field.data.at({b, j}) == doctest::Approx(want).epsilon(1e-14));
            mass += field.data.at({b, j});
        }
        // grid mean reduces to the mode-0 coefficient
        CHECK(mass / 64.0 == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("samples describe the same function at every resolution") {
    auto adv = registry_get("advection");
    auto g64 = make_grid(adv, 64, 4, 2.0);
    auto g128 = make_grid(adv, 128, 4, 2.0);
    auto a = sample_initial_conditions(adv, g64, 2, 3);
    auto b = sample_initial_conditions(adv, g128, 2, 3);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t j = 0; j < 64; ++j)
            CHECK(a.data.at({s, j}) == b.data.at({s, 2 * j}));
}

TEST_CASE("reaction-diffusion samples live strictly inside (0,1)") {
    auto rd = registry_get("reaction_diffusion");
    auto g = make_grid(rd, 256, 4, 1.0);
    auto f = sample_initial_conditions(rd, g, 8, 5);
    for (double v : f.data.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("navier-stokes samples have positive density and pressure") {
    auto ns = registry_get("navier_stokes");
    auto g = make_grid(ns, 128, 4, 1.0);
    auto f = sample_initial_conditions(ns, g, 6, 9);
    REQUIRE(f.data.shape == std::vector<std::size_t>{6, 3, 128});
    REQUIRE(f.component_names.size() == 3);
    for (std::size_t b = 0; b < 6; ++b)
        for (std::size_t j = 0; j < 128; ++j) {
            CHECK(f.data.at({b, 0, j}) > 0.0);
            CHECK(f.data.at({b, 2, j}) > 0.0);
            CHECK(std::fabs(f.data.at({b, 1, j})) < 2.0);
        }
}

TEST_CASE("darcy coefficients are two-level with both levels present") {
    auto darcy = registry_get("darcy");
    auto g = make_grid(darcy, 32);
    auto f = sample_initial_conditions(darcy, g, 3, 21);
    for (std::size_t b = 0; b < 3; ++b) {
        std::set<double> levels;
        for (std::size_t i = 0; i < 32; ++i)
            for (std::size_t j = 0; j < 32; ++j) levels.insert(f.data.at({b, i, j}));
        CHECK(levels == std::set<double>{3.0, 12.0});
    }
}
