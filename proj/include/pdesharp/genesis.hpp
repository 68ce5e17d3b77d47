#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdesharp/analysis.hpp"
#include "pdesharp/gateway.hpp"
#include "pdesharp/prompts.hpp"
#include "pdesharp/task.hpp"

namespace pdesharp {

struct GenesisError : Error {
    using Error::Error;
};

enum class Origin { genesis, hybridization, debug_fix };
std::string origin_name(Origin o);
Origin origin_from_name(const std::string& name);

struct SolverCandidate {
    std::string candidate_id;
    std::string source;  // guest program text
    Route strategy;
    Origin origin = Origin::genesis;
    std::vector<std::string> parent_ids;
    std::optional<std::string> patch;  // the diff that produced a hybridization child
    std::string generator_model;
    std::string reasoning;

    // origin-specific structural rules; throws GenesisError on violation
    void validate() const;
};

nlohmann::json candidate_to_json(const SolverCandidate& c);
SolverCandidate candidate_from_json(const nlohmann::json& j);

// Contents of the response's single fenced code block. Multiple blocks:
// longest wins and *warning is set. Zero blocks: GenesisError.
std::string extract_code(const std::string& message, std::string* warning = nullptr);

struct GenesisConfig {
    std::string model_id = "generator";
    std::string conversation_key = "genesis";
    ChatParams params;  // temperature defaults to 0.7
};

struct GenesisResult {
    std::vector<SolverCandidate> candidates;
    std::vector<std::string> warnings;  // extraction retries, multi-block notes
};

// Generates n candidates conditioned on the analysis route. Each call gets a
// fresh conversation keyed by its index; a response with no code block is
// retried once, then that slot is dropped (recorded in warnings). Fewer than
// n/2 surviving candidates aborts.
GenesisResult generate_candidates(const AnalysisReport& report, const PdeTask& task, int n,
                                  Backend& backend, const PromptLibrary& prompts,
                                  const GenesisConfig& config = {});

// Writes candidate sources plus a pool manifest (id, strategy, parent, hash)
// into dir; returns the manifest.
nlohmann::json persist_pool(const std::vector<SolverCandidate>& pool,
                            const std::filesystem::path& dir);
std::vector<SolverCandidate> load_pool(const std::filesystem::path& dir);

}  // namespace pdesharp
