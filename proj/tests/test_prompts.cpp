#include "pdesharp/prompts.hpp"

#include "doctest.h"
#include "support/test_util.hpp"

using namespace pdesharp;

TEST_CASE("the shipped asset set is complete") {
    PromptLibrary lib(default_prompt_dir());
    const char* names[] = {
        "system_stage12",      "analysis_classify",    "analysis_analytical",
        "analysis_transformation", "analysis_splitting",   "analysis_stability",
        "analysis_repair",     "genesis_analytical",   "genesis_transform",
        "genesis_hybrid",      "genesis_numerical",    "genesis_sample_tag",
        "code_generation_criteria", "judge_initial",    "hybridization_round",
        "corrected_diff",      "debug_fix",            "translate",
        "desc_advection",      "desc_burgers",         "desc_reaction_diffusion",
        "desc_navier_stokes",  "desc_darcy",           "template_advection",
        "template_burgers",    "template_reaction_diffusion",
        "template_navier_stokes", "template_darcy",
    };
    for (const char* name : names) {
        CAPTURE(name);
        CHECK(lib.has(name));
        CHECK(!lib.text(name).empty());
    }
    CHECK(!lib.has("no_such_prompt"));
    CHECK_THROWS_WITH_AS(lib.text("no_such_prompt"), doctest::Contains("no_such_prompt"),
                         PromptError);
}

TEST_CASE("placeholder substitution") {
    std::map<std::string, std::string> subs{{"name", "advection"}, {"n", "32"}};
    SUBCASE("replaces every occurrence") {
        CHECK(PromptLibrary::substitute("task {{name}}, n={{n}}, again {{name}}", subs) ==
              "task advection, n=32, again advection");
    }
    SUBCASE("extra bindings are fine") {
        CHECK(PromptLibrary::substitute("just text", subs) == "just text");
    }
    SUBCASE("missing binding is refused") {
        CHECK_THROWS_WITH_AS(PromptLibrary::substitute("{{name}} {{missing}}", subs),
                             doctest::Contains("{{missing}}"), PromptError);
    }
    SUBCASE("single braces and malformed tokens pass through") {
        CHECK(PromptLibrary::substitute("f\"{dt_max:.2e}\"", subs) == "f\"{dt_max:.2e}\"");
        CHECK(PromptLibrary::substitute("set {{ x }} literal", subs) == "set {{ x }} literal");
        CHECK(PromptLibrary::substitute("open {{name", subs) == "open {{name");
        CHECK(PromptLibrary::substitute("{{UPPER}} stays", subs) == "{{UPPER}} stays");
    }
    SUBCASE("substituted values are not rescanned") {
        std::map<std::string, std::string> tricky{{"a", "payload {{b}} end"}, {"b", "X"}};
        CHECK(PromptLibrary::substitute("{{a}}", tricky) == "payload {{b}} end");
    }
}

TEST_CASE("task descriptions carry their parameter values") {
    PromptLibrary lib(default_prompt_dir());

    auto rd = registry_get("reaction_diffusion");
    auto rd_text = task_description(rd, lib);
    CHECK(rd_text.find("diffusion-reaction equation") != std::string::npos);
    CHECK(rd_text.find("\\nu=0.5") != std::string::npos);
    CHECK(rd_text.find("\\rho=1.0") != std::string::npos);
    CHECK(rd_text.find("[batch_size, T+1, N]") != std::string::npos);
    CHECK(rd_text.find("{{") == std::string::npos);

    auto adv = task_description(registry_get("advection"), lib);
    CHECK(adv.find("\\beta=0.1") != std::string::npos);

    auto burgers = task_description(registry_get("burgers"), lib);
    CHECK(burgers.find("\\nu=0.01") != std::string::npos);

    auto ns = task_description(registry_get("navier_stokes"), lib);
    CHECK(ns.find("\\eta=0.1") != std::string::npos);
    CHECK(ns.find("\\zeta=0.1") != std::string::npos);
    CHECK(ns.find("[batch_size, T+1, 3, N]") != std::string::npos);

    auto darcy = task_description(registry_get("darcy"), lib);
    CHECK(darcy.find("\\beta=1.0") != std::string::npos);
    CHECK(darcy.find("[batch_size, N, N]") != std::string::npos);

    auto overridden = task_description(registry_get("advection", {{"beta", 0.25}}), lib);
    CHECK(overridden.find("\\beta=0.25") != std::string::npos);
}

TEST_CASE("solver templates define the expected signatures") {
    PromptLibrary lib(default_prompt_dir());
    CHECK(solver_template_text(registry_get("advection"), lib)
              .find("def solver(u0_batch, t_coordinate, beta):") != std::string::npos);
    CHECK(solver_template_text(registry_get("reaction_diffusion"), lib)
              .find("def solver(u0_batch, t_coordinate, nu, rho):") != std::string::npos);
    CHECK(solver_template_text(registry_get("navier_stokes"), lib)
              .find("def solver(density0_batch, velocity0_batch, pressure0_batch, "
                    "t_coordinate, eta, zeta):") != std::string::npos);
    CHECK(solver_template_text(registry_get("darcy"), lib).find("def solver(coeff_batch, beta):") !=
          std::string::npos);
}

TEST_CASE("diagnostic print contract survives in the criteria asset") {
    // The harness scrapes these exact shapes from guest stdout, so the
    // criteria text must show them with plain f-string braces.
    PromptLibrary lib(default_prompt_dir());
    const auto& criteria = lib.text("code_generation_criteria");
    CHECK(criteria.find("print(f\"Stability-based dt_max = {dt_max:.2e}\")") != std::string::npos);
    CHECK(criteria.find("print(f\"Using {n_internal} internal time steps\")") != std::string::npos);
    CHECK(criteria.find("{{") == std::string::npos);
}

TEST_CASE("judge prompt scales its counts from the pool") {
    PromptLibrary lib(default_prompt_dir());
    auto text = lib.render("judge_initial", {{"judge_name", "A"},
                                             {"shortlist_size", "16"},
                                             {"pool_size", "32"},
                                             {"pde_description", "the pde"},
                                             {"initial_solvers_plus_reasoning", "..."}});
    CHECK(text.find("PDE-SHARP Judge A") != std::string::npos);
    CHECK(text.find("top 16 best implementations") != std::string::npos);
    CHECK(text.find("32 different solver codes") != std::string::npos);
    CHECK(text.find("```verdict") != std::string::npos);
}

TEST_CASE("genesis prompt assembly end to end") {
    PromptLibrary lib(default_prompt_dir());
    auto task = registry_get("reaction_diffusion");
    auto text = lib.render("genesis_hybrid",
                           {{"pde_description", task_description(task, lib)},
                            {"stability_section", "dt_max = 0.5*dx^2/nu"},
                            {"solver_template", solver_template_text(task, lib)},
                            {"code_generation_criteria", lib.text("code_generation_criteria")}});
    CHECK(text.find("operator splitting") != std::string::npos);
    CHECK(text.find("def solver(u0_batch, t_coordinate, nu, rho):") != std::string::npos);
    CHECK(text.find("**MUST-OBEY:**") != std::string::npos);
    CHECK(text.find("dt_max = 0.5*dx^2/nu") != std::string::npos);
    // values (the criteria text) keep their literal braces intact
    CHECK(text.find("{dt_max:.2e}") != std::string::npos);
}

TEST_CASE("parameter formatting round-trips") {
    CHECK(format_param(0.1) == "0.1");
    CHECK(format_param(0.01) == "0.01");
    CHECK(format_param(1.0) == "1.0");
    CHECK(format_param(5.0 / 3.0) == format_param(5.0 / 3.0));
    CHECK(std::stod(format_param(5.0 / 3.0)) == 5.0 / 3.0);
}
