#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "pdesharp/gateway.hpp"
#include "pdesharp/prompts.hpp"
#include "pdesharp/task.hpp"

namespace pdesharp {

struct AnalysisError : Error {
    using Error::Error;
};

enum class Linearity { linear, quasi_linear, non_linear };
enum class PdeType { elliptic, parabolic, hyperbolic, mixed };
enum class Homogeneity { homogeneous, non_homogeneous };
enum class Route { analytical, transform, hybrid, numerical };

std::string route_name(Route r);
Route route_from_name(const std::string& name);

struct Classification {
    int order = 0;
    Linearity linearity = Linearity::linear;
    PdeType type = PdeType::parabolic;
    Homogeneity homogeneity = Homogeneity::homogeneous;
    std::string domain_bc;
    std::string special_properties;
    std::optional<std::string> char_polynomial;

    bool operator==(const Classification&) const = default;
};

nlohmann::json classification_to_json(const Classification& c);
Classification classification_from_json(const nlohmann::json& j);

struct Verdict {
    enum class Decision { yes, no };
    Decision decision;
    std::string rationale;
    std::string raw_response;

    bool is_yes() const { return decision == Decision::yes; }
};

struct StabilityPlan {
    std::string dt_bound_formula;
    std::string scheme_recommendation;
    std::string constraints;
    std::string raw_response;
};

struct AnalysisReport {
    Classification classification;
    std::string classification_raw;
    std::optional<Verdict> analytical;
    std::optional<Verdict> transformation;  // absent when a prior step fixed the route
    std::optional<Verdict> splitting;
    std::optional<StabilityPlan> stability;  // only for hybrid/numerical routes
    Route route = Route::numerical;
};

nlohmann::json report_to_json(const AnalysisReport& r);
AnalysisReport report_from_json(const nlohmann::json& j);

// Leading YES/NO after markup is stripped, case-insensitive; the rest of the
// response is the rationale. Throws AnalysisError (carrying the text) when
// neither token opens the response.
Verdict parse_verdict(const std::string& text);

// Reads the classification out of a fenced block: strict JSON when the model
// produced it, else a line-based key reader for the looser shape the prompt
// shows. Throws AnalysisError when required fields are missing or invalid.
Classification parse_classification(const std::string& text);

StabilityPlan parse_stability(const std::string& text);

// Branch precedence: analytical beats transform beats hybrid beats numerical;
// absent verdicts count as no.
Route decide_route(const std::optional<Verdict>& analytical,
                   const std::optional<Verdict>& transformation,
                   const std::optional<Verdict>& splitting);

struct AnalysisConfig {
    std::string model_id = "analyst";
    std::string conversation_key = "analysis";
    ChatParams params;
};

// Runs the five-step chain: classify, analytical check, transformation
// check, splitting check, stability analysis. Later checks are skipped once
// a route is fixed; stability runs only ahead of hybrid/numerical
// generation. A classification that fails to parse gets one repair retry.
AnalysisReport run_analysis(const PdeTask& task, Backend& backend, const PromptLibrary& prompts,
                            const AnalysisConfig& config = {});

struct TranslationResult {
    enum class Outcome { translated, clarification_needed };
    Outcome outcome;
    std::string text;
};

// Optional front door: turns an informal problem statement into a structured
// task description, or reports the questions that block it.
TranslationResult translate_description(const std::string& free_text, Backend& backend,
                                        const PromptLibrary& prompts,
                                        const AnalysisConfig& config = {});

}  // namespace pdesharp
