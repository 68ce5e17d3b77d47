#include "pdesharp/genesis.hpp"

#include <cctype>
#include <map>

#include "pdesharp/util.hpp"

namespace pdesharp {

std::string origin_name(Origin o) {
    switch (o) {
        case Origin::genesis: return "genesis";
        case Origin::hybridization: return "hybridization";
        default: return "debug_fix";
    }
}

Origin origin_from_name(const std::string& name) {
    if (name == "genesis") return Origin::genesis;
    if (name == "hybridization") return Origin::hybridization;
    if (name == "debug_fix") return Origin::debug_fix;
    throw GenesisError("unknown candidate origin: " + name);
}

void SolverCandidate::validate() const {
    if (candidate_id.empty()) throw GenesisError("candidate has no id");
    if (source.empty()) throw GenesisError(candidate_id + ": candidate source is empty");
    switch (origin) {
        case Origin::genesis:
            if (!parent_ids.empty())
                throw GenesisError(candidate_id + ": genesis candidates have no parents");
            break;
        case Origin::hybridization:
            if (!patch || parent_ids.size() != 1)
                throw GenesisError(candidate_id +
                                   ": hybridization needs a patch and exactly one parent");
            break;
        case Origin::debug_fix:
            if (parent_ids.size() != 1)
                throw GenesisError(candidate_id + ": debug fix needs exactly one parent");
            break;
    }
}

nlohmann::json candidate_to_json(const SolverCandidate& c) {
    nlohmann::json j{{"candidate_id", c.candidate_id},
                     {"strategy", route_name(c.strategy)},
                     {"origin", origin_name(c.origin)},
                     {"parent_ids", c.parent_ids},
                     {"generator_model", c.generator_model},
                     {"reasoning", c.reasoning},
                     {"source", c.source}};
    if (c.patch) j["patch"] = *c.patch;
    return j;
}

SolverCandidate candidate_from_json(const nlohmann::json& j) {
    SolverCandidate c;
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.strategy = route_from_name(j.at("strategy").get<std::string>());
    c.origin = origin_from_name(j.at("origin").get<std::string>());
    c.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
    c.generator_model = j.at("generator_model").get<std::string>();
    c.reasoning = j.at("reasoning").get<std::string>();
    c.source = j.at("source").get<std::string>();
    if (j.contains("patch")) c.patch = j["patch"].get<std::string>();
    return c;
}

std::string extract_code(const std::string& message, std::string* warning) {
    auto blocks = fenced_blocks(message);
    if (blocks.empty()) throw GenesisError("response contains no fenced code block");
    std::size_t best = 0;
    for (std::size_t i = 1; i < blocks.size(); ++i)
        if (blocks[i].content.size() > blocks[best].content.size()) best = i;
    if (blocks.size() > 1 && warning)
        *warning = "response contained " + std::to_string(blocks.size()) +
                   " fenced blocks; kept the longest";
    return blocks[best].content;
}

namespace {

std::string stability_section_text(const StabilityPlan& plan) {
    return "- dt bound: " + plan.dt_bound_formula +
           "\n- recommended scheme: " + plan.scheme_recommendation +
           "\n- constraints: " + plan.constraints;
}

// Ids stay sortable as files: c01..c16 for a pool of 16.
std::string pool_id(int index, int n) {
    auto digits = std::to_string(n).size();
    auto num = std::to_string(index + 1);
    return "c" + std::string(digits - num.size(), '0') + num;
}

// Text ahead of the first fence; the model's stated reasoning.
std::string leading_reasoning(const std::string& message) {
    auto fence = message.find("```");
    auto cut = fence == std::string::npos ? message.size() : fence;
    auto text = message.substr(0, cut);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return text;
}

}  // namespace

GenesisResult generate_candidates(const AnalysisReport& report, const PdeTask& task, int n,
                                  Backend& backend, const PromptLibrary& prompts,
                                  const GenesisConfig& config) {
    if (n < 2 || n % 2 != 0)
        throw GenesisError("candidate pool size must be an even number >= 2, got " +
                           std::to_string(n));

    std::map<std::string, std::string> subs{
        {"pde_description", task_description(task, prompts)},
        {"solver_template", solver_template_text(task, prompts)},
        {"code_generation_criteria", prompts.text("code_generation_criteria")}};
    if (report.route == Route::hybrid || report.route == Route::numerical) {
        if (!report.stability)
            throw GenesisError("analysis report lacks the stability section required for the " +
                               route_name(report.route) + " route");
        subs["stability_section"] = stability_section_text(*report.stability);
    }
    const std::string body = prompts.render("genesis_" + route_name(report.route), subs);

    GenesisResult result;
    for (int i = 0; i < n; ++i) {
        Conversation conv;
        conv.model_id = config.model_id;
        conv.key = config.conversation_key + "/" + std::to_string(i);
        conv.purpose = "genesis";
        conv.params = config.params;
        conv.add_system(prompts.text("system_stage12"));
        conv.add_user(body + "\n\n" +
                      prompts.render("genesis_sample_tag",
                                     {{"call_index", std::to_string(i + 1)},
                                      {"pool_size", std::to_string(n)}}));

        SolverCandidate cand;
        cand.candidate_id = pool_id(i, n);
        cand.strategy = report.route;
        cand.origin = Origin::genesis;
        cand.generator_model = config.model_id;

        auto res = complete(conv, backend);
        std::string warning;
        try {
            cand.source = extract_code(res.text, &warning);
        } catch (const GenesisError&) {
            result.warnings.push_back(cand.candidate_id +
                                      ": no code block in response, retrying once");
            conv.add_assistant(res.text).add_user(prompts.text("genesis_extract_retry"));
            auto retry = complete(conv, backend);
            try {
                cand.source = extract_code(retry.text, &warning);
                res = retry;
            } catch (const GenesisError&) {
                result.warnings.push_back(cand.candidate_id +
                                          ": retry also lacked a code block; slot dropped");
                continue;
            }
        }
        if (!warning.empty()) result.warnings.push_back(cand.candidate_id + ": " + warning);
        cand.reasoning = leading_reasoning(res.text);
        cand.validate();
        result.candidates.push_back(std::move(cand));
    }

    if (static_cast<int>(result.candidates.size()) < n / 2)
        throw GenesisError("only " + std::to_string(result.candidates.size()) + " of " +
                           std::to_string(n) +
                           " generation calls yielded code; pool is below n/2, aborting");
    return result;
}

nlohmann::json persist_pool(const std::vector<SolverCandidate>& pool,
                            const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& cand : pool) {
        cand.validate();
        write_file_atomic(dir / (cand.candidate_id + ".py"), cand.source);
        auto meta = candidate_to_json(cand);
        meta.erase("source");  // lives next door in the .py file
        write_file_atomic(dir / (cand.candidate_id + ".meta.json"), meta.dump(2) + "\n");
        manifest.push_back({{"id", cand.candidate_id},
                            {"strategy", route_name(cand.strategy)},
                            {"parent", cand.parent_ids.empty() ? nlohmann::json(nullptr)
                                                               : nlohmann::json(cand.parent_ids[0])},
                            {"hash", sha256_hex(cand.source)}});
    }
    write_file_atomic(dir / "pool.json", manifest.dump(2) + "\n");
    return manifest;
}

std::vector<SolverCandidate> load_pool(const std::filesystem::path& dir) {
    auto manifest = nlohmann::json::parse(read_text_file(dir / "pool.json"));
    std::vector<SolverCandidate> pool;
    for (const auto& entry : manifest) {
        auto id = entry.at("id").get<std::string>();
        auto meta = nlohmann::json::parse(read_text_file(dir / (id + ".meta.json")));
        meta["source"] = read_text_file(dir / (id + ".py"));
        auto cand = candidate_from_json(meta);
        if (sha256_hex(cand.source) != entry.at("hash").get<std::string>())
            throw GenesisError(id + ": source file does not match the pool manifest hash");
        cand.validate();
        pool.push_back(std::move(cand));
    }
    return pool;
}

}  // namespace pdesharp
