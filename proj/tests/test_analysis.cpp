#include "pdesharp/analysis.hpp"

#include "doctest.h"
#include "support/test_util.hpp"

using namespace pdesharp;

namespace {

const char* kCleanClassification = R"fix(The PDE is second order.
```json
{"order": 2, "linearity": "non-linear", "type": "parabolic",
 "homogeneity": "homogeneous",
 "domain_bc": "periodic boundary on (0,1)",
 "special_properties": "logistic reaction; diffusion with constant nu"}
```
)fix";

ScriptedBackend scripted_chain(std::vector<std::string> replies, const std::string& key = "analysis") {
    ScriptedBackend backend;
    for (std::size_t i = 0; i < replies.size(); ++i)
        backend.add(key + "/" + std::to_string(i), replies[i], 100, 50);
    return backend;
}

const char* kStabilityReply = R"(Von Neumann analysis of the diffusion operator gives the bound.
```stability
dt_bound_formula: dt_max = 0.5 * dx^2 / nu
scheme_recommendation: Strang splitting; exact logistic update composed with Crank-Nicolson diffusion
constraints: keep u in [0,1]; safety factor 0.8 on the theoretical bound
```
)";

}  // namespace

TEST_CASE("verdict parsing") {
    SUBCASE("plain yes") {
        auto v = parse_verdict("YES — closed form exists via the method of characteristics.");
        CHECK(v.is_yes());
        CHECK(v.rationale.substr(0, 6) == "closed");
        CHECK(v.raw_response.substr(0, 3) == "YES");
    }
    SUBCASE("lowercase no with comma") {
        auto v = parse_verdict("no, the nonlinearity prevents a closed form.");
        CHECK(!v.is_yes());
        CHECK(v.rationale.substr(0, 3) == "the");
    }
    SUBCASE("markup-wrapped yes") {
        auto v = parse_verdict("**YES**\nThe Cole-Hopf transformation linearizes it.");
        CHECK(v.is_yes());
        CHECK(v.rationale == "The Cole-Hopf transformation linearizes it.");
    }
    SUBCASE("bare tokens") {
        CHECK(parse_verdict("YES").is_yes());
        CHECK(!parse_verdict("## No").is_yes());
    }
    SUBCASE("lookalike words are not verdicts") {
        CHECK_THROWS_AS(parse_verdict("NOTE: this is ambiguous"), AnalysisError);
        CHECK_THROWS_AS(parse_verdict("Yesterday's analysis..."), AnalysisError);
        CHECK_THROWS_WITH_AS(parse_verdict("It depends."), doctest::Contains("It depends."),
                             AnalysisError);
    }
}

TEST_CASE("classification parsing") {
    SUBCASE("strict json block") {
        auto c = parse_classification(kCleanClassification);
        CHECK(c.order == 2);
        CHECK(c.linearity == Linearity::non_linear);
        CHECK(c.type == PdeType::parabolic);
        CHECK(c.homogeneity == Homogeneity::homogeneous);
        CHECK(c.domain_bc == "periodic boundary on (0,1)");
        CHECK(!c.char_polynomial.has_value());
    }
    SUBCASE("loose template-shaped block") {
        const char* reply = R"(```json
{
order:               1  # integer
linearity:           "linear"
type:                hyperbolic
homogeneity:         "homogeneous",
domain_bc: |-
  periodic on the unit interval
special_properties: |-
  constant-coefficient transport
  exactly solvable along characteristics
char_polynomial: |-
  lambda + beta k
  }
```)";
        auto c = parse_classification(reply);
        CHECK(c.order == 1);
        CHECK(c.linearity == Linearity::linear);
        CHECK(c.type == PdeType::hyperbolic);
        CHECK(c.domain_bc == "periodic on the unit interval");
        CHECK(c.special_properties ==
              "constant-coefficient transport\nexactly solvable along characteristics");
        REQUIRE(c.char_polynomial.has_value());
        CHECK(*c.char_polynomial == "lambda + beta k");
    }
    SUBCASE("unfenced json still parses") {
        CHECK(parse_classification(R"({"order": 2, "linearity": "linear", "type": "elliptic",
            "homogeneity": "non-homogeneous", "domain_bc": "zero Dirichlet",
            "special_properties": "steady"})").type == PdeType::elliptic);
    }
    SUBCASE("enum synonyms normalize") {
        auto c = parse_classification(R"({"order": 2, "linearity": "nonlinear",
            "type": "parabolic", "homogeneity": "inhomogeneous",
            "domain_bc": "x", "special_properties": "y"})");
        CHECK(c.linearity == Linearity::non_linear);
        CHECK(c.homogeneity == Homogeneity::non_homogeneous);
    }
    SUBCASE("missing fields are named") {
        CHECK_THROWS_WITH_AS(
            parse_classification(R"({"order": 2, "linearity": "linear", "type": "parabolic",
                "homogeneity": "homogeneous", "domain_bc": "x"})"),
            doctest::Contains("special_properties"), AnalysisError);
    }
    SUBCASE("prose is rejected") {
        CHECK_THROWS_AS(parse_classification("This is a parabolic equation of order two."),
                        AnalysisError);
    }
    SUBCASE("invalid enum is rejected") {
        CHECK_THROWS_WITH_AS(
            parse_classification(R"({"order": 2, "linearity": "curvy", "type": "parabolic",
                "homogeneity": "homogeneous", "domain_bc": "x", "special_properties": "y"})"),
            doctest::Contains("curvy"), AnalysisError);
    }
}

TEST_CASE("classification serialization round-trips losslessly") {
    Classification c;
    c.order = 2;
    c.linearity = Linearity::quasi_linear;
    c.type = PdeType::mixed;
    c.homogeneity = Homogeneity::non_homogeneous;
    c.domain_bc = "periodic in x, Dirichlet in y";
    c.special_properties = "multi-line\nproperties";
    SUBCASE("with char polynomial") { c.char_polynomial = "lambda^2 - c^2 k^2"; }
    SUBCASE("without char polynomial") {}
    auto j = classification_to_json(c);
    auto back = classification_from_json(j);
    CHECK(back == c);
    CHECK(classification_to_json(back) == j);
}

TEST_CASE("route precedence is the branch order") {
    auto yes = parse_verdict("YES because");
    auto no = parse_verdict("NO because");
    using OV = std::optional<Verdict>;

    CHECK(decide_route(yes, OV{}, OV{}) == Route::analytical);
    CHECK(decide_route(no, yes, OV{}) == Route::transform);
    CHECK(decide_route(no, no, yes) == Route::hybrid);
    CHECK(decide_route(no, no, no) == Route::numerical);
    CHECK(decide_route(OV{}, OV{}, OV{}) == Route::numerical);
    // precedence holds even if later verdicts are (improperly) present
    CHECK(decide_route(yes, yes, yes) == Route::analytical);
    CHECK(decide_route(no, yes, yes) == Route::transform);

    for (const char* name : {"analytical", "transform", "hybrid", "numerical"})
        CHECK(route_name(route_from_name(name)) == name);
}

TEST_CASE("stability parsing") {
    auto plan = parse_stability(kStabilityReply);
    CHECK(plan.dt_bound_formula == "dt_max = 0.5 * dx^2 / nu");
    CHECK(plan.scheme_recommendation.find("Strang splitting") == 0);
    CHECK(plan.constraints.find("safety factor 0.8") != std::string::npos);
    CHECK(plan.raw_response == kStabilityReply);

    CHECK_THROWS_AS(parse_stability("I think dt should be small."), AnalysisError);
}

TEST_CASE("five-step chain routes and raw retention") {
    PromptLibrary lib(default_prompt_dir());
    auto task = registry_get("reaction_diffusion");

    SUBCASE("NO, NO, YES gives the hybrid route") {
        auto backend = scripted_chain({kCleanClassification,
                                       "NO, strongly coupled nonlinearity.",
                                       "NO, no global linearizing transformation.",
                                       "YES: split the logistic reaction from diffusion.",
                                       kStabilityReply});
        auto report = run_analysis(task, backend, lib);
        CHECK(report.route == Route::hybrid);
        REQUIRE(report.analytical);
        REQUIRE(report.transformation);
        REQUIRE(report.splitting);
        CHECK(report.splitting->is_yes());
        REQUIRE(report.stability);
        CHECK(report.stability->dt_bound_formula == "dt_max = 0.5 * dx^2 / nu");
        CHECK(report.classification_raw == kCleanClassification);
        CHECK(report.analytical->raw_response == "NO, strongly coupled nonlinearity.");
    }
    SUBCASE("first YES short-circuits everything else") {
        auto backend = scripted_chain({kCleanClassification,
                                       "YES: separable; exact spectral solution on the torus."});
        auto report = run_analysis(registry_get("advection"), backend, lib);
        CHECK(report.route == Route::analytical);
        CHECK(!report.transformation);
        CHECK(!report.splitting);
        CHECK(!report.stability);
    }
    SUBCASE("transform route skips splitting and stability") {
        auto backend = scripted_chain({kCleanClassification,
                                       "NO.",
                                       "YES, Cole-Hopf reduces it to the heat equation."});
        auto report = run_analysis(registry_get("burgers"), backend, lib);
        CHECK(report.route == Route::transform);
        CHECK(!report.splitting);
        CHECK(!report.stability);
    }
    SUBCASE("all NO lands on numerical with a stability plan") {
        auto backend = scripted_chain({kCleanClassification, "NO.", "NO.", "NO.", kStabilityReply});
        auto report = run_analysis(registry_get("navier_stokes"), backend, lib);
        CHECK(report.route == Route::numerical);
        REQUIRE(report.stability);
        CHECK(report.stability->scheme_recommendation.find("Strang") == 0);
    }
    SUBCASE("classification repair retry consumes one extra call") {
        auto backend = scripted_chain({"I will classify it shortly.",
                                       kCleanClassification,
                                       "YES, exact solution."});
        auto report = run_analysis(task, backend, lib);
        CHECK(report.route == Route::analytical);
        CHECK(report.classification.order == 2);
        CHECK(report.classification_raw == kCleanClassification);
    }
    SUBCASE("two unparseable classifications abort") {
        auto backend = scripted_chain({"no block here", "still no block", "YES"});
        CHECK_THROWS_WITH_AS(run_analysis(task, backend, lib),
                             doctest::Contains("repair retry"), AnalysisError);
    }
    SUBCASE("replay determinism: identical reports") {
        auto make = [&] {
            auto backend = scripted_chain({kCleanClassification, "NO.", "NO.", "YES.",
                                           kStabilityReply});
            return report_to_json(run_analysis(task, backend, lib)).dump(2);
        };
        CHECK(make() == make());
    }
}

TEST_CASE("analysis report serialization round-trips") {
    PromptLibrary lib(default_prompt_dir());
    auto backend = scripted_chain({kCleanClassification, "NO, coupled.", "NO.", "YES, split.",
                                   kStabilityReply});
    auto report = run_analysis(registry_get("reaction_diffusion"), backend, lib);
    auto j = report_to_json(report);
    auto back = report_from_json(j);
    CHECK(report_to_json(back) == j);
    CHECK(back.route == Route::hybrid);
    CHECK(back.stability->constraints == report.stability->constraints);
}

TEST_CASE("missing prompt asset fails loudly") {
    testsupport::TempDir tmp("prompts");
    PromptLibrary empty(tmp.path);
    auto backend = scripted_chain({kCleanClassification});
    CHECK_THROWS_AS(run_analysis(registry_get("advection"), backend, empty), PromptError);
}

TEST_CASE("description translation") {
    PromptLibrary lib(default_prompt_dir());

    SUBCASE("complete statement passes through") {
        ScriptedBackend backend;
        backend.add("analysis/0",
                    "The PDE is a linear advection equation with beta=0.1 on (0,1), periodic "
                    "boundaries, solved to T=2.");
        auto res = translate_description("advect a profile at speed 0.1 on the unit circle",
                                         backend, lib);
        CHECK(res.outcome == TranslationResult::Outcome::translated);
        CHECK(res.text.find("advection") != std::string::npos);
    }
    SUBCASE("missing information requests clarification") {
        ScriptedBackend backend;
        backend.add("analysis/0",
                    "CLARIFICATION NEEDED: What are the boundary conditions? What is the final "
                    "time T?");
        auto res = translate_description("please solve my heat equation", backend, lib);
        CHECK(res.outcome == TranslationResult::Outcome::clarification_needed);
        CHECK(res.text.find("boundary conditions") != std::string::npos);
    }
    SUBCASE("empty input is a precondition error") {
        ScriptedBackend backend;
        CHECK_THROWS_AS(translate_description("   \n", backend, lib), AnalysisError);
    }
}
