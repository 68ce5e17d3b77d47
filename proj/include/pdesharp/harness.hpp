#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdesharp/genesis.hpp"
#include "pdesharp/task.hpp"
#include "pdesharp/tensor.hpp"

// Runs candidate solver programs in child processes. The guest gets a JSON
// manifest path as its only argument, reads the input tensors it names,
// and writes one output tensor; the harness enforces wall-clock and memory
// limits and checks the output against the task's shape contract. Guest code
// is never interpreted in-process.

namespace pdesharp {

struct HarnessError : Error {
    using Error::Error;
};

enum class ExecStatus { ok, guest_error, timeout, contract_violation, nonfinite_output };
const char* exec_status_name(ExecStatus s);

struct ExecutionLimits {
    double wall_clock_seconds = 120.0;
    long memory_bytes = 2147483648;  // RLIMIT_AS on the child
    int max_debug_iterations = 4;

    void validate() const;  // all fields positive
};

// Fields scraped from guest stdout. Absent when the guest never printed them.
struct Diagnostics {
    std::optional<double> dt_max;              // "Stability-based dt_max = 4.77e-07"
    std::optional<long> internal_steps;        // "Using 532 internal time steps"
    std::optional<long> total_internal_steps;  // running count from the last progress line
    std::vector<std::string> progress;         // "Time step i/T completed ..." lines, in order
};

Diagnostics parse_diagnostics(const std::string& stdout_text);
nlohmann::json diagnostics_to_json(const Diagnostics& d);

struct ExecutionResult {
    ExecStatus status = ExecStatus::guest_error;
    std::optional<SolutionField> solution;  // present iff status == ok
    std::string stdout_text;
    std::string stderr_trace;
    std::string detail;  // evidence for non-ok statuses (exit code, shape, offending value)
    double runtime_seconds = 0.0;
    Diagnostics diagnostics;
    int debug_iterations_used = 0;
};

struct HarnessConfig {
    std::vector<std::string> guest_command = {"python3"};  // argv prefix; script + manifest appended
    ExecutionLimits limits;
    std::filesystem::path work_root;  // per-execution dirs go here; empty = system temp
    bool keep_artifacts = false;      // leave solver.py/manifest/stdout/stderr behind
};

// Runs one candidate against the given inputs (name -> batched tensor, first
// axis = batch). Throws HarnessError only for caller mistakes (bad limits,
// inputs not matching the task signature); guest misbehavior comes back as a
// status.
ExecutionResult execute(const SolverCandidate& candidate, const PdeTask& task,
                        const GridSpec& grid, const std::map<std::string, Tensor>& inputs,
                        const HarnessConfig& config);

// Same inputs for every candidate, at most `parallelism` children at a time.
// Results line up with the candidates.
std::vector<ExecutionResult> execute_batch(const std::vector<SolverCandidate>& candidates,
                                           const PdeTask& task, const GridSpec& grid,
                                           const std::map<std::string, Tensor>& inputs,
                                           const HarnessConfig& config, int parallelism = 4);

struct DebugConfig {
    std::string model_id = "generator";
    std::string conversation_key = "debug";
    ChatParams params;
};

struct DebugOutcome {
    SolverCandidate candidate;  // the source behind `result` (the input candidate if no fix ran)
    ExecutionResult result;     // first ok, else the final failure
    std::vector<SolverCandidate> attempts;  // every corrected source tried, origin debug_fix
};

// Feeds the failing source and its stderr to the generator model, executes
// each corrected program, and stops at the first ok result or after
// max_debug_iterations. Exhaustion returns the last failure; this never
// throws for model or guest behavior. A passing input is a caller mistake.
DebugOutcome debug_loop(const SolverCandidate& candidate, const ExecutionResult& failure,
                        const PdeTask& task, const GridSpec& grid,
                        const std::map<std::string, Tensor>& inputs, Backend& backend,
                        const PromptLibrary& prompts, const HarnessConfig& config,
                        const DebugConfig& debug = {});

// Directory holding the bundled guest programs (env PDESHARP_GUESTS overrides).
std::filesystem::path default_guest_dir();

}  // namespace pdesharp
