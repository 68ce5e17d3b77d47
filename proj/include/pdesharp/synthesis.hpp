#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdesharp/harness.hpp"
#include "pdesharp/metrics.hpp"

// Stage 3: the selection-hybridization tournament. Judges shortlist the pool
// and nominate solvers; nominees run through the harness; results go back to
// every judge, each of which proposes a unified-diff patch to its own lane's
// solver. Cycles reset the judges' conversations and rejudge the pool grown
// by the hybrids.

namespace pdesharp {

struct TournamentError : Error {
    using Error::Error;
};

enum class Confidence { high, medium, low };
const char* confidence_name(Confidence c);
Confidence confidence_from_name(const std::string& s);

struct JudgeVerdict {
    std::string judge_id;  // "A", "B", ... in config order
    std::vector<std::string> shortlist;  // best first, exactly half the pool
    std::string nominee;                 // taken from the shortlist
    Confidence confidence = Confidence::medium;
    std::vector<std::string> risks;
    std::string reasoning;  // the judge's full write-up, verbatim
};

nlohmann::json verdict_to_json(const JudgeVerdict& v);

// Reads the fenced ```verdict block out of a judge response. Structure only;
// pool membership is validate_verdict's job.
JudgeVerdict parse_judge_verdict(const std::string& response);

// shortlist_size distinct ids, all drawn from pool_ids, nominee among them.
void validate_verdict(const JudgeVerdict& v, const std::vector<std::string>& pool_ids,
                      std::size_t shortlist_size);

struct PatchProposal {
    std::string judge_id;
    std::string base_candidate_id;
    std::string diff;
    std::string justification;
};

struct TournamentConfig {
    std::vector<std::string> judges = {"judge-a", "judge-b", "judge-c"};  // model ids
    int max_rounds_per_cycle = 4;
    int max_cycles = 2;
    FeedbackType feedback_type = FeedbackType::nrmse;
    double saturation_rel_threshold = 0.01;  // relative best-of-round improvement
    int saturation_window = 2;               // consecutive stalled rounds
    std::string conversation_key = "synthesis";
    ChatParams params;

    void validate() const;
};

// true iff each of the last `window` rounds improved on its predecessor by
// less than `rel_threshold`, relatively. Values are best-of-round, lower is
// better. Fewer than window+1 rounds can never saturate.
bool detect_saturation(const std::vector<double>& best_per_round, double rel_threshold,
                       int window);

// One nominee execution, debug loop included.
struct RunOutcome {
    SolverCandidate candidate;  // what finally ran (a debug fix when one was needed)
    ExecutionResult result;
    std::vector<SolverCandidate> debug_attempts;
};

class NomineeRunner {
  public:
    virtual ~NomineeRunner() = default;
    virtual RunOutcome run(const SolverCandidate& candidate) = 0;
};

// Child-process execution against fixed task inputs, with the LLM debug loop
// on failures. Repeat failures of one candidate get distinct debug
// conversation keys so transcripts never collide.
class HarnessRunner : public NomineeRunner {
  public:
    HarnessRunner(PdeTask task, GridSpec grid, std::map<std::string, Tensor> inputs,
                  HarnessConfig config, Backend& backend, const PromptLibrary& prompts,
                  DebugConfig debug = {});
    RunOutcome run(const SolverCandidate& candidate) override;

  private:
    PdeTask task_;
    GridSpec grid_;
    std::map<std::string, Tensor> inputs_;
    HarnessConfig config_;
    Backend& backend_;
    const PromptLibrary& prompts_;
    DebugConfig debug_;
    std::map<std::string, int> debug_runs_;
};

// Scores an ok solution; one or more records, lower values are better.
using FeedbackFn = std::function<std::vector<FeedbackRecord>(const SolutionField&)>;

struct TournamentState {
    int cycle = 1;        // last cycle entered
    int round = 0;        // completed rounds within that cycle
    int total_rounds = 0;  // across cycles
    std::map<std::string, SolverCandidate> pool;
    std::vector<std::string> judge_ids;  // surviving judges of the last cycle, senior first
    std::vector<std::string> lanes;      // each judge lane's current candidate id
    // per global round: executed candidate -> feedback records
    std::vector<std::map<std::string, std::vector<FeedbackRecord>>> feedback_history;
    bool saturation = false;  // whether the last cycle ended by saturation
    TournamentConfig config;
};

struct SynthesisResult {
    SolverCandidate best;
    TournamentState state;
    int evaluations_used = 0;
    std::vector<std::string> warnings;  // dropped judges, carried lanes, fallbacks
};

// Fresh judge conversations for one cycle, senior judge first. Keys look like
// "<base>/cycle-2/judge-a"; purpose is "judge".
std::vector<Conversation> make_judge_conversations(const TournamentConfig& config, int cycle);

// One verdict per judge. A verdict that fails to parse or validate gets one
// repair retry; a second failure drops that judge (conversation erased, note
// appended to *warnings). Fewer than two usable verdicts aborts.
// candidate_notes carries per-candidate tournament history shown to rejudging
// cycles.
std::vector<JudgeVerdict> initial_judgment(
    const std::map<std::string, SolverCandidate>& pool, std::vector<Conversation>& judges,
    const PdeTask& task, const TournamentConfig& config, Backend& backend,
    const PromptLibrary& prompts, const std::map<std::string, std::string>& candidate_notes = {},
    std::vector<std::string>* warnings = nullptr);

// The full tournament. Requires an even pool (checked before any model call)
// and a feedback function unless feedback_type is none. When ledger_dir is
// set, writes round-<k>/ ledgers, the final pool, and tournament.json there.
SynthesisResult run_synthesis(const std::vector<SolverCandidate>& pool, const PdeTask& task,
                              const TournamentConfig& config, Backend& backend,
                              NomineeRunner& runner, const PromptLibrary& prompts,
                              const FeedbackFn& feedback = {},
                              const std::filesystem::path& ledger_dir = {});

}  // namespace pdesharp
