#include "pdesharp/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "pdesharp/diffpatch.hpp"
#include "pdesharp/util.hpp"

namespace pdesharp {

const char* confidence_name(Confidence c) {
    switch (c) {
        case Confidence::high: return "high";
        case Confidence::medium: return "medium";
        default: return "low";
    }
}

Confidence confidence_from_name(const std::string& s) {
    std::string t;
    for (char ch : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (t == "high") return Confidence::high;
    if (t == "medium") return Confidence::medium;
    if (t == "low") return Confidence::low;
    throw TournamentError("unknown confidence level: " + s);
}

void TournamentConfig::validate() const {
    if (judges.size() < 2) throw TournamentError("tournament needs at least two judges");
    if (judges.size() > 26) throw TournamentError("more judges than letters to name them");
    if (max_rounds_per_cycle < 1) throw TournamentError("max_rounds_per_cycle must be >= 1");
    if (max_cycles < 1) throw TournamentError("max_cycles must be >= 1");
    if (!(saturation_rel_threshold > 0.0))
        throw TournamentError("saturation threshold must be positive");
    if (saturation_window < 1) throw TournamentError("saturation window must be >= 1");
}

nlohmann::json verdict_to_json(const JudgeVerdict& v) {
    return nlohmann::json{{"judge_id", v.judge_id},
                          {"shortlist", v.shortlist},
                          {"nominee", v.nominee},
                          {"confidence", confidence_name(v.confidence)},
                          {"risks", v.risks},
                          {"reasoning", v.reasoning}};
}

namespace {

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Judges tend to echo ids as `c3` or "Code c3"; accept both spellings.
std::string clean_id(std::string id) {
    auto strip_marks = [](std::string s) {
        while (!s.empty() && (s.front() == '`' || s.front() == '*')) s.erase(s.begin());
        while (!s.empty() && (s.back() == '`' || s.back() == '*' || s.back() == '.'))
            s.pop_back();
        return s;
    };
    id = strip_marks(trimmed(id));
    if (id.size() > 5) {
        std::string head;
        for (std::size_t i = 0; i < 5; ++i)
            head += static_cast<char>(std::tolower(static_cast<unsigned char>(id[i])));
        if (head == "code ") id = strip_marks(trimmed(id.substr(5)));
    }
    return id;
}

std::vector<std::string> split_ids(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            auto id = clean_id(cur);
            if (!id.empty()) out.push_back(id);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    auto id = clean_id(cur);
    if (!id.empty()) out.push_back(id);
    return out;
}

std::string lower_letter(std::size_t index) {
    return std::string(1, static_cast<char>('a' + index));
}

std::string upper_letter(std::size_t index) {
    return std::string(1, static_cast<char>('A' + index));
}

// Conversation keys end in ".../judge-a"; the letter survives judge drops
// where a positional index would not.
std::string letter_from_key(const std::string& key, std::size_t fallback_index) {
    auto pos = key.rfind("/judge-");
    if (pos == std::string::npos) return upper_letter(fallback_index);
    std::string tail = key.substr(pos + 7);
    if (tail.empty()) return upper_letter(fallback_index);
    for (char& ch : tail) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return tail;
}

std::string text_before_fence(const std::string& message) {
    auto fence = message.find("```");
    auto cut = fence == std::string::npos ? message.size() : fence;
    auto text = message.substr(0, cut);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return text;
}

}  // namespace

JudgeVerdict parse_judge_verdict(const std::string& response) {
    const FencedBlock* block = nullptr;
    auto blocks = fenced_blocks(response);
    for (const auto& b : blocks)
        if (b.info == "verdict") block = &b;
    if (!block) throw TournamentError("response contains no fenced verdict block");

    JudgeVerdict v;
    v.reasoning = response;
    bool have_shortlist = false, have_nominee = false, have_confidence = false, in_risks = false;

    std::size_t start = 0;
    const std::string& body = block->content;
    while (start <= body.size()) {
        auto nl = body.find('\n', start);
        std::string line =
            body.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
        start = nl == std::string::npos ? body.size() + 1 : nl + 1;

        std::string t = trimmed(line);
        std::string key;
        for (char ch : t) {
            if (ch == ':') break;
            key += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
        auto rest = [&]() { return trimmed(t.substr(t.find(':') + 1)); };

        if (key == "shortlist" && t.find(':') != std::string::npos) {
            v.shortlist = split_ids(rest());
            have_shortlist = !v.shortlist.empty();
            in_risks = false;
        } else if (key == "nominee" && t.find(':') != std::string::npos) {
            v.nominee = clean_id(rest());
            have_nominee = !v.nominee.empty();
            in_risks = false;
        } else if (key == "confidence" && t.find(':') != std::string::npos) {
            v.confidence = confidence_from_name(rest());
            have_confidence = true;
            in_risks = false;
        } else if (key == "risks" && t.find(':') != std::string::npos) {
            in_risks = true;
            std::string first = rest();
            std::string low;
            for (char ch : first)
                low += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (!first.empty() && low != "none") v.risks.push_back(first);
        } else if (in_risks && !t.empty()) {
            if (!t.empty() && t.front() == '-') t = trimmed(t.substr(1));
            if (!t.empty()) v.risks.push_back(t);
        }
    }

    if (!have_shortlist) throw TournamentError("verdict block is missing the shortlist line");
    if (!have_nominee) throw TournamentError("verdict block is missing the nominee line");
    if (!have_confidence) throw TournamentError("verdict block is missing the confidence line");
    return v;
}

void validate_verdict(const JudgeVerdict& v, const std::vector<std::string>& pool_ids,
                      std::size_t shortlist_size) {
    if (v.shortlist.size() != shortlist_size)
        throw TournamentError("shortlist has " + std::to_string(v.shortlist.size()) +
                              " entries, expected " + std::to_string(shortlist_size));
    for (std::size_t i = 0; i < v.shortlist.size(); ++i) {
        const auto& id = v.shortlist[i];
        if (std::find(pool_ids.begin(), pool_ids.end(), id) == pool_ids.end())
            throw TournamentError("unknown candidate id " + id);
        for (std::size_t j = i + 1; j < v.shortlist.size(); ++j)
            if (v.shortlist[j] == id)
                throw TournamentError("shortlist repeats candidate " + id);
    }
    if (std::find(v.shortlist.begin(), v.shortlist.end(), v.nominee) == v.shortlist.end())
        throw TournamentError("nominee " + v.nominee + " is not on the shortlist");
}

bool detect_saturation(const std::vector<double>& best_per_round, double rel_threshold,
                       int window) {
    if (window < 1) throw TournamentError("saturation window must be >= 1");
    auto k = static_cast<int>(best_per_round.size());
    if (k < window + 1) return false;
    for (int i = k - window; i < k; ++i) {
        double prev = best_per_round[static_cast<std::size_t>(i - 1)];
        double cur = best_per_round[static_cast<std::size_t>(i)];
        double improvement = prev == 0.0 ? 0.0 : (prev - cur) / std::abs(prev);
        if (improvement >= rel_threshold) return false;
    }
    return true;
}

std::vector<Conversation> make_judge_conversations(const TournamentConfig& config, int cycle) {
    config.validate();
    std::vector<Conversation> convs;
    for (std::size_t i = 0; i < config.judges.size(); ++i) {
        Conversation c;
        c.model_id = config.judges[i];
        c.key = config.conversation_key + "/cycle-" + std::to_string(cycle) + "/judge-" +
                lower_letter(i);
        c.purpose = "judge";
        c.params = config.params;
        convs.push_back(std::move(c));
    }
    return convs;
}

namespace {

std::string pool_listing(const std::map<std::string, SolverCandidate>& pool,
                         const std::map<std::string, std::string>& notes) {
    std::string text;
    for (const auto& [id, c] : pool) {
        text += "### Code " + id + " (strategy " + route_name(c.strategy) + ", origin " +
                origin_name(c.origin) + ")\n";
        if (!c.reasoning.empty()) text += "Reasoning:\n" + c.reasoning + "\n";
        auto note = notes.find(id);
        if (note != notes.end()) text += "Tournament history: " + note->second + "\n";
        text += "```python\n" + c.source;
        if (!c.source.empty() && c.source.back() != '\n') text += "\n";
        text += "```\n\n";
    }
    while (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

}  // namespace

std::vector<JudgeVerdict> initial_judgment(const std::map<std::string, SolverCandidate>& pool,
                                           std::vector<Conversation>& judges, const PdeTask& task,
                                           const TournamentConfig& config, Backend& backend,
                                           const PromptLibrary& prompts,
                                           const std::map<std::string, std::string>& candidate_notes,
                                           std::vector<std::string>* warnings) {
    config.validate();
    if (pool.size() < 2) throw TournamentError("cannot judge a pool of fewer than two candidates");
    if (judges.empty()) throw TournamentError("no judge conversations supplied");

    std::size_t shortlist_size = pool.size() / 2;
    std::vector<std::string> pool_ids;
    for (const auto& [id, c] : pool) pool_ids.push_back(id);

    std::string body_common = pool_listing(pool, candidate_notes);
    std::string description = task_description(task, prompts);

    std::vector<JudgeVerdict> verdicts;
    std::size_t i = 0;
    while (i < judges.size()) {
        Conversation& conv = judges[i];
        std::string letter = letter_from_key(conv.key, i);
        conv.add_user(prompts.render("judge_initial",
                                     {{"judge_name", letter},
                                      {"shortlist_size", std::to_string(shortlist_size)},
                                      {"pool_size", std::to_string(pool.size())},
                                      {"pde_description", description},
                                      {"initial_solvers_plus_reasoning", body_common}}));
        auto reply = complete(conv, backend);
        conv.add_assistant(reply.text);

        auto attempt = [&](const std::string& text) {
            JudgeVerdict v = parse_judge_verdict(text);
            validate_verdict(v, pool_ids, shortlist_size);
            v.judge_id = letter;
            return v;
        };

        try {
            verdicts.push_back(attempt(reply.text));
            ++i;
            continue;
        } catch (const TournamentError& first) {
            conv.add_user(prompts.render(
                "judge_repair",
                {{"error", first.what()}, {"shortlist_size", std::to_string(shortlist_size)}}));
            auto retry = complete(conv, backend);
            conv.add_assistant(retry.text);
            try {
                verdicts.push_back(attempt(retry.text));
                ++i;
            } catch (const TournamentError& second) {
                if (warnings)
                    warnings->push_back("judge " + letter +
                                       " dropped after a failed repair retry: " + second.what());
                judges.erase(judges.begin() + static_cast<std::ptrdiff_t>(i));
            }
        }
    }

    if (verdicts.size() < 2)
        throw TournamentError("cycle aborted: only " + std::to_string(verdicts.size()) +
                              " usable judge verdicts");
    return verdicts;
}

HarnessRunner::HarnessRunner(PdeTask task, GridSpec grid, std::map<std::string, Tensor> inputs,
                             HarnessConfig config, Backend& backend, const PromptLibrary& prompts,
                             DebugConfig debug)
    : task_(std::move(task)),
      grid_(grid),
      inputs_(std::move(inputs)),
      config_(std::move(config)),
      backend_(backend),
      prompts_(prompts),
      debug_(std::move(debug)) {}

RunOutcome HarnessRunner::run(const SolverCandidate& candidate) {
    auto result = execute(candidate, task_, grid_, inputs_, config_);
    if (result.status == ExecStatus::ok) return {candidate, std::move(result), {}};
    int prior = debug_runs_[candidate.candidate_id]++;
    DebugConfig cfg = debug_;
    if (prior > 0) cfg.conversation_key += "/retry-" + std::to_string(prior);
    auto fixed = debug_loop(candidate, result, task_, grid_, inputs_, backend_, prompts_, config_,
                            cfg);
    return {std::move(fixed.candidate), std::move(fixed.result), std::move(fixed.attempts)};
}

namespace {

constexpr double kUnscored = std::numeric_limits<double>::infinity();

struct Lane {
    std::string letter;
    std::string model_id;
    std::string candidate_id;
    std::string justification;  // shown alongside this lane's latest results
};

struct PatchRecord {
    std::string judge;
    std::string base_id;
    std::string new_id;
    std::string outcome;  // applied | corrected | carried
    std::string error;
    std::string justification;
    std::string diff;
};

double mean_score(const std::vector<FeedbackRecord>& records) {
    if (records.empty()) return kUnscored;
    double sum = 0.0;
    for (const auto& r : records) sum += r.value;
    return sum / static_cast<double>(records.size());
}

std::string feedback_summary(const std::vector<FeedbackRecord>& records) {
    std::string s;
    for (const auto& r : records) {
        if (!s.empty()) s += ", ";
        s += r.metric_id + " = " + format_double(r.value);
    }
    return s;
}

std::string diagnostics_summary(const Diagnostics& d) {
    std::string s;
    if (d.dt_max) s += "dt_max " + format_double(*d.dt_max);
    if (d.internal_steps) {
        if (!s.empty()) s += ", ";
        s += "internal steps " + std::to_string(*d.internal_steps);
    }
    if (d.total_internal_steps) {
        if (!s.empty()) s += ", ";
        s += "total internal steps " + std::to_string(*d.total_internal_steps);
    }
    return s;
}

std::string stderr_tail(const std::string& trace) {
    constexpr std::size_t cap = 400;
    if (trace.size() <= cap) return trace;
    return "..." + trace.substr(trace.size() - cap);
}

// The per-round broadcast every judge sees; identical text for all lanes.
// Accuracy numbers appear only when the tournament runs with feedback.
std::string broadcast_text(const std::vector<Lane>& lanes,
                           const std::vector<RunOutcome>& outcomes,
                           const std::map<std::string, std::vector<FeedbackRecord>>& round_fb,
                           bool numeric) {
    std::string text;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        const auto& lane = lanes[i];
        const auto& res = outcomes[i].result;
        text += "- Judge " + lane.letter + "'s lane, Code " + lane.candidate_id + ": status " +
                exec_status_name(res.status);
        if (res.status != ExecStatus::ok && !res.detail.empty()) text += " (" + res.detail + ")";
        if (res.debug_iterations_used > 0)
            text += ", after " + std::to_string(res.debug_iterations_used) + " debug iterations";
        text += "\n";
        auto diag = diagnostics_summary(res.diagnostics);
        if (!diag.empty()) text += "  diagnostics: " + diag + "\n";
        if (numeric) {
            auto fb = round_fb.find(lane.candidate_id);
            if (fb != round_fb.end() && !fb->second.empty())
                text += "  feedback: " + feedback_summary(fb->second) + "\n";
        }
        if (res.status != ExecStatus::ok && !res.stderr_trace.empty())
            text += "  stderr tail: " + stderr_tail(res.stderr_trace) + "\n";
        if (!lane.justification.empty())
            text += "  judge's stated intent: " + lane.justification + "\n";
    }
    while (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

nlohmann::json feedback_record_json(const FeedbackRecord& r) {
    nlohmann::json j{{"metric_id", r.metric_id}, {"value", r.value}};
    if (!r.metadata.empty()) j["metadata"] = r.metadata;
    return j;
}

void write_round_ledger(const std::filesystem::path& dir, int global_round, int cycle,
                        int round_in_cycle, const std::vector<JudgeVerdict>* verdicts,
                        const std::vector<Lane>& lanes, const std::vector<RunOutcome>& outcomes,
                        const std::map<std::string, std::vector<FeedbackRecord>>& round_fb,
                        const std::optional<double>& best_of_round, bool saturated) {
    auto round_dir = dir / ("round-" + std::to_string(global_round));
    std::filesystem::create_directories(round_dir);

    nlohmann::json j{{"cycle", cycle},
                     {"round_in_cycle", round_in_cycle},
                     {"global_round", global_round},
                     {"saturated", saturated}};
    auto lanes_json = nlohmann::json::array();
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        const auto& res = outcomes[i].result;
        nlohmann::json lane{{"judge", lanes[i].letter},
                            {"candidate_id", lanes[i].candidate_id},
                            {"status", exec_status_name(res.status)},
                            {"runtime_seconds", res.runtime_seconds},
                            {"debug_iterations_used", res.debug_iterations_used},
                            {"diagnostics", diagnostics_to_json(res.diagnostics)}};
        if (!res.detail.empty()) lane["detail"] = res.detail;
        lanes_json.push_back(std::move(lane));
    }
    j["lanes"] = std::move(lanes_json);
    auto fb_json = nlohmann::json::object();
    for (const auto& [id, records] : round_fb) {
        auto arr = nlohmann::json::array();
        for (const auto& r : records) arr.push_back(feedback_record_json(r));
        fb_json[id] = std::move(arr);
    }
    j["feedback"] = std::move(fb_json);
    if (best_of_round) j["best_of_round"] = *best_of_round;
    write_file_atomic(round_dir / "ledger.json", j.dump(2) + "\n");

    if (verdicts) {
        auto arr = nlohmann::json::array();
        for (const auto& v : *verdicts) arr.push_back(verdict_to_json(v));
        write_file_atomic(round_dir / "verdicts.json", arr.dump(2) + "\n");
    }
}

void write_patch_ledger(const std::filesystem::path& dir, int next_global_round,
                        const std::vector<PatchRecord>& patches) {
    auto round_dir = dir / ("round-" + std::to_string(next_global_round));
    std::filesystem::create_directories(round_dir);
    auto arr = nlohmann::json::array();
    for (const auto& p : patches) {
        nlohmann::json j{{"judge", p.judge},
                         {"base_candidate_id", p.base_id},
                         {"outcome", p.outcome},
                         {"justification", p.justification}};
        if (!p.new_id.empty()) j["new_candidate_id"] = p.new_id;
        if (!p.error.empty()) j["error"] = p.error;
        arr.push_back(std::move(j));
        if (!p.diff.empty()) {
            std::string letter;
            for (char ch : p.judge)
                letter += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            write_file_atomic(round_dir / ("patch-" + letter + ".diff"), p.diff);
        }
    }
    write_file_atomic(round_dir / "patches.json", arr.dump(2) + "\n");
}

std::string find_diff_block(const std::string& text) {
    for (const auto& b : fenced_blocks(text))
        if (b.info == "diff") return b.content;
    throw PatchError(PatchError::Kind::malformed, "response contains no fenced diff block");
}

}  // namespace

SynthesisResult run_synthesis(const std::vector<SolverCandidate>& pool, const PdeTask& task,
                              const TournamentConfig& config, Backend& backend,
                              NomineeRunner& runner, const PromptLibrary& prompts,
                              const FeedbackFn& feedback, const std::filesystem::path& ledger_dir) {
    config.validate();
    if (pool.size() < 2 || pool.size() % 2 != 0)
        throw TournamentError("initial pool must hold an even number (>= 2) of candidates, got " +
                              std::to_string(pool.size()));
    bool numeric = config.feedback_type != FeedbackType::none;
    if (numeric && !feedback)
        throw TournamentError(std::string("feedback function required for feedback type ") +
                              feedback_type_name(config.feedback_type));

    SynthesisResult out;
    TournamentState& st = out.state;
    st.config = config;
    for (const auto& c : pool) {
        c.validate();
        if (!st.pool.emplace(c.candidate_id, c).second)
            throw TournamentError("duplicate candidate id " + c.candidate_id);
    }

    bool keep_ledger = !ledger_dir.empty();
    if (keep_ledger) std::filesystem::create_directories(ledger_dir);

    std::map<std::string, std::string> notes;  // per-candidate history for rejudging
    double best_score = kUnscored;
    std::string best_id;
    int global_round = 0;
    std::vector<Lane> lanes;

    for (int cycle = 1; cycle <= config.max_cycles; ++cycle) {
        st.cycle = cycle;
        st.round = 0;
        auto convs = make_judge_conversations(config, cycle);
        auto verdicts =
            initial_judgment(st.pool, convs, task, config, backend, prompts,
                             cycle > 1 ? notes : std::map<std::string, std::string>{},
                             &out.warnings);

        lanes.clear();
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            Lane lane;
            lane.letter = verdicts[i].judge_id;
            lane.model_id = convs[i].model_id;
            lane.candidate_id = verdicts[i].nominee;
            lane.justification =
                "initial nominee (confidence " + std::string(confidence_name(verdicts[i].confidence)) +
                ")";
            lanes.push_back(std::move(lane));
        }

        std::vector<double> cycle_best;
        bool cycle_saturated = false;

        for (int r = 1; r <= config.max_rounds_per_cycle; ++r) {
            ++global_round;
            st.round = r;
            st.total_rounds = global_round;

            // Nominee executions. One per lane, debug loop inside the runner.
            std::vector<RunOutcome> outcomes;
            for (auto& lane : lanes) {
                auto outcome = runner.run(st.pool.at(lane.candidate_id));
                out.evaluations_used += 1;
                if (outcome.candidate.candidate_id != lane.candidate_id) {
                    st.pool.emplace(outcome.candidate.candidate_id, outcome.candidate);
                    lane.candidate_id = outcome.candidate.candidate_id;
                }
                outcomes.push_back(std::move(outcome));
            }

            st.feedback_history.emplace_back();
            auto& round_fb = st.feedback_history.back();
            std::optional<double> round_best;
            if (numeric) {
                for (std::size_t i = 0; i < lanes.size(); ++i) {
                    const auto& res = outcomes[i].result;
                    if (res.status != ExecStatus::ok) continue;
                    auto records = feedback(*res.solution);
                    double score = mean_score(records);
                    if (records.empty()) continue;
                    round_fb[lanes[i].candidate_id] = std::move(records);
                    if (!round_best || score < *round_best) round_best = score;
                    if (score < best_score) {
                        best_score = score;
                        best_id = lanes[i].candidate_id;
                    }
                }
            }
            if (round_best) cycle_best.push_back(*round_best);
            bool saturated = numeric && detect_saturation(cycle_best, config.saturation_rel_threshold,
                                                          config.saturation_window);
            bool final_round = saturated || r == config.max_rounds_per_cycle;

            for (std::size_t i = 0; i < lanes.size(); ++i) {
                const auto& res = outcomes[i].result;
                std::string note = "cycle " + std::to_string(cycle) + " round " + std::to_string(r) +
                                   ": " + exec_status_name(res.status);
                auto fb = round_fb.find(lanes[i].candidate_id);
                if (fb != round_fb.end()) note += "; " + feedback_summary(fb->second);
                if (!lanes[i].justification.empty())
                    note += "; justification: " + lanes[i].justification;
                notes[lanes[i].candidate_id] = note;
            }

            if (keep_ledger)
                write_round_ledger(ledger_dir, global_round, cycle, r, r == 1 ? &verdicts : nullptr,
                                   lanes, outcomes, round_fb, round_best, saturated);

            if (final_round) {
                cycle_saturated = saturated;
                break;
            }

            // Patch step: every judge sees every lane's results and rewrites
            // its own lane's solver as a unified diff.
            std::string results = broadcast_text(lanes, outcomes, round_fb, numeric);
            std::vector<PatchRecord> patches;
            for (std::size_t i = 0; i < lanes.size(); ++i) {
                Conversation& conv = convs[i];
                Lane& lane = lanes[i];
                const SolverCandidate& base = st.pool.at(lane.candidate_id);
                conv.add_user(prompts.render("hybridization_round",
                                             {{"round", std::to_string(r)},
                                              {"execution_results", results},
                                              {"base_candidate_id", base.candidate_id},
                                              {"base_source", base.source}}));
                auto reply = complete(conv, backend);
                conv.add_assistant(reply.text);

                PatchRecord record;
                record.judge = lane.letter;
                record.base_id = base.candidate_id;

                auto build_hybrid = [&](const std::string& reply_text,
                                        const std::string& outcome) {
                    std::string diff = find_diff_block(reply_text);
                    std::string patched = apply_patch(base.source, diff);
                    SolverCandidate hybrid;
                    hybrid.candidate_id = "h" + std::to_string(cycle) + "." +
                                          std::to_string(r + 1) +
                                          lower_letter(static_cast<std::size_t>(
                                              lane.letter.empty() ? 0 : lane.letter[0] - 'A'));
                    hybrid.source = patched;
                    hybrid.strategy = base.strategy;
                    hybrid.origin = Origin::hybridization;
                    hybrid.parent_ids = {base.candidate_id};
                    hybrid.patch = diff;
                    hybrid.generator_model = lane.model_id;
                    hybrid.reasoning = text_before_fence(reply_text);
                    hybrid.validate();
                    if (!st.pool.emplace(hybrid.candidate_id, hybrid).second)
                        throw TournamentError("hybrid id collision: " + hybrid.candidate_id);
                    record.new_id = hybrid.candidate_id;
                    record.outcome = outcome;
                    record.diff = diff;
                    record.justification = hybrid.reasoning;
                    lane.candidate_id = hybrid.candidate_id;
                    lane.justification = hybrid.reasoning;
                };

                try {
                    build_hybrid(reply.text, "applied");
                } catch (const Error& first) {
                    conv.add_user(prompts.render("corrected_diff", {{"error", first.what()}}));
                    auto retry = complete(conv, backend);
                    conv.add_assistant(retry.text);
                    try {
                        build_hybrid(retry.text, "corrected");
                    } catch (const Error& second) {
                        record.outcome = "carried";
                        record.error = second.what();
                        record.justification = text_before_fence(retry.text);
                        out.warnings.push_back("judge " + lane.letter + " round " +
                                               std::to_string(r) +
                                               ": patch failed twice, lane carries " +
                                               lane.candidate_id + " (" + second.what() + ")");
                        lane.justification =
                            "carried previous solver after a failed patch (" +
                            std::string(second.what()) + ")";
                    }
                }
                patches.push_back(std::move(record));
            }
            if (keep_ledger) write_patch_ledger(ledger_dir, global_round + 1, patches);
        }

        st.saturation = cycle_saturated;
        st.judge_ids.clear();
        st.lanes.clear();
        for (const auto& lane : lanes) {
            st.judge_ids.push_back(lane.letter);
            st.lanes.push_back(lane.candidate_id);
        }
    }

    if (numeric && !best_id.empty()) {
        out.best = st.pool.at(best_id);
    } else {
        out.best = st.pool.at(lanes.front().candidate_id);
        if (numeric)
            out.warnings.push_back(
                "no candidate produced a usable score; falling back to the senior judge's lane");
    }

    if (keep_ledger) {
        auto judges_json = nlohmann::json::array();
        for (const auto& lane : lanes)
            judges_json.push_back({{"judge", lane.letter}, {"model", lane.model_id}});
        nlohmann::json summary{{"judges", std::move(judges_json)},
                               {"feedback_type", feedback_type_name(config.feedback_type)},
                               {"cycles_run", st.cycle},
                               {"total_rounds", st.total_rounds},
                               {"evaluations_used", out.evaluations_used},
                               {"best_candidate_id", out.best.candidate_id},
                               {"saturation", st.saturation},
                               {"lanes", st.lanes},
                               {"warnings", out.warnings}};
        write_file_atomic(ledger_dir / "tournament.json", summary.dump(2) + "\n");
        std::vector<SolverCandidate> final_pool;
        for (const auto& [id, c] : st.pool) final_pool.push_back(c);
        persist_pool(final_pool, ledger_dir / "pool");
    }
    return out;
}

}  // namespace pdesharp
