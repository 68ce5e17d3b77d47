#include "pdesharp/harness.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <regex>
#include <thread>

#include "pdesharp/tensor_io.hpp"
#include "pdesharp/util.hpp"

namespace pdesharp {

const char* exec_status_name(ExecStatus s) {
    switch (s) {
        case ExecStatus::ok: return "ok";
        case ExecStatus::guest_error: return "guest_error";
        case ExecStatus::timeout: return "timeout";
        case ExecStatus::contract_violation: return "contract_violation";
        default: return "nonfinite_output";
    }
}

void ExecutionLimits::validate() const {
    if (!(wall_clock_seconds > 0.0)) throw HarnessError("wall clock limit must be positive");
    if (memory_bytes <= 0) throw HarnessError("memory limit must be positive");
    if (max_debug_iterations <= 0) throw HarnessError("debug iteration cap must be positive");
}

// ---- stdout diagnostics -----------------------------------------------------------

Diagnostics parse_diagnostics(const std::string& stdout_text) {
    static const std::regex dt_re(R"(Stability-based dt_max\s*=\s*([0-9][0-9.eE+-]*))");
    static const std::regex steps_re(R"(Using\s+([0-9]+)\s+internal time steps)");
    static const std::regex progress_re(
        R"(Time step\s+[0-9]+\s*/\s*[0-9]+\s+completed(?:.*internal steps:\s*([0-9]+)\))?)");

    Diagnostics d;
    std::size_t pos = 0;
    while (pos <= stdout_text.size()) {
        auto nl = stdout_text.find('\n', pos);
        std::string line = stdout_text.substr(pos, (nl == std::string::npos ? stdout_text.size() : nl) - pos);
        std::smatch m;
        if (!d.dt_max && std::regex_search(line, m, dt_re)) {
            d.dt_max = std::strtod(m[1].str().c_str(), nullptr);
        } else if (!d.internal_steps && std::regex_search(line, m, steps_re)) {
            d.internal_steps = std::stol(m[1].str());
        } else if (std::regex_search(line, m, progress_re)) {
            d.progress.push_back(line);
            if (m[1].matched) d.total_internal_steps = std::stol(m[1].str());
        }
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return d;
}

nlohmann::json diagnostics_to_json(const Diagnostics& d) {
    nlohmann::json j = nlohmann::json::object();
    if (d.dt_max) j["dt_max"] = *d.dt_max;
    if (d.internal_steps) j["internal_steps"] = *d.internal_steps;
    if (d.total_internal_steps) j["total_internal_steps"] = *d.total_internal_steps;
    j["progress"] = d.progress;
    return j;
}

// ---- child process plumbing -------------------------------------------------------

namespace {

struct RawExec {
    bool spawn_failed = false;
    bool timed_out = false;
    int exit_code = 0;       // valid when !signaled
    int term_signal = 0;     // nonzero when the child died by signal
    std::string out, err;
    double seconds = 0.0;
};

// Launches argv in cwd with the group-kill / rlimit / pipe-drain protocol.
// Never blocks past the wall-clock limit plus a short drain grace.
RawExec run_guest(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                  double wall_seconds, long memory_bytes) {
    RawExec r;
    int out_pipe[2], err_pipe[2];
    if (pipe2(out_pipe, O_CLOEXEC) != 0 || pipe2(err_pipe, O_CLOEXEC) != 0)
        throw HarnessError(std::string("pipe: ") + std::strerror(errno));

    std::vector<std::string> args = argv;
    std::vector<char*> cargv;
    cargv.reserve(args.size() + 1);
    for (auto& a : args) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    std::string cwd_str = cwd.string();

    auto start = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) throw HarnessError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        // child: own process group so the whole tree can be killed at once
        setpgid(0, 0);
        struct rlimit rl;
        rl.rlim_cur = rl.rlim_max = static_cast<rlim_t>(memory_bytes);
        setrlimit(RLIMIT_AS, &rl);
        dup2(out_pipe[1], 1);
        dup2(err_pipe[1], 2);
        if (chdir(cwd_str.c_str()) != 0) _exit(126);
        execvp(cargv[0], cargv.data());
        const char* msg = "exec failed: ";
        (void)!write(2, msg, std::strlen(msg));
        (void)!write(2, cargv[0], std::strlen(cargv[0]));
        (void)!write(2, "\n", 1);
        _exit(127);
    }

    setpgid(pid, pid);  // mirror the child's call; one of the two wins the race
    close(out_pipe[1]);
    close(err_pipe[1]);

    auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(wall_seconds));
    std::chrono::steady_clock::time_point kill_time{};
    int fds[2] = {out_pipe[0], err_pipe[0]};
    std::string* sinks[2] = {&r.out, &r.err};
    bool live[2] = {true, true};

    while (live[0] || live[1]) {
        auto now = std::chrono::steady_clock::now();
        if (!r.timed_out && now >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            r.timed_out = true;
            kill_time = now;
        }
        // after the kill, writers should close promptly; bound the drain anyway
        if (r.timed_out && now - kill_time > std::chrono::seconds(2)) break;

        struct pollfd pfds[2];
        nfds_t n = 0;
        for (int i = 0; i < 2; ++i)
            if (live[i]) pfds[n++] = {fds[i], POLLIN, 0};
        int timeout_ms = 100;
        if (!r.timed_out) {
            auto remain =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            timeout_ms = static_cast<int>(std::clamp<long long>(remain + 1, 1, 100));
        }
        int rc = poll(pfds, n, timeout_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) continue;
        for (nfds_t i = 0; i < n; ++i) {
            if (!(pfds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            int slot = pfds[i].fd == fds[0] ? 0 : 1;
            char buf[65536];
            ssize_t k = read(pfds[i].fd, buf, sizeof buf);
            if (k > 0) {
                sinks[slot]->append(buf, static_cast<std::size_t>(k));
            } else {
                close(fds[slot]);
                live[slot] = false;
            }
        }
    }
    for (int i = 0; i < 2; ++i)
        if (live[i]) close(fds[i]);

    int status = 0;
    waitpid(pid, &status, 0);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (WIFSIGNALED(status))
        r.term_signal = WTERMSIG(status);
    else if (WIFEXITED(status))
        r.exit_code = WEXITSTATUS(status);
    if (r.exit_code == 127 && r.err.rfind("exec failed:", 0) == 0) r.spawn_failed = true;
    return r;
}

std::string shape_string(const std::vector<std::size_t>& s) {
    std::string text = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) text += ", ";
        text += std::to_string(s[i]);
    }
    return text + "]";
}

std::filesystem::path fresh_exec_dir(const std::filesystem::path& root, const std::string& id) {
    static std::atomic<unsigned> counter{0};
    auto base = root.empty() ? std::filesystem::temp_directory_path() : root;
    auto dir = base / ("exec-" + id + "-" + std::to_string(::getpid()) + "-" +
                       std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

// ---- execution --------------------------------------------------------------------

ExecutionResult execute(const SolverCandidate& candidate, const PdeTask& task,
                        const GridSpec& grid, const std::map<std::string, Tensor>& inputs,
                        const HarnessConfig& config) {
    config.limits.validate();
    if (config.guest_command.empty()) throw HarnessError("guest command is empty");
    candidate.validate();

    if (inputs.size() != task.input_names.size())
        throw HarnessError(task.name + " expects " + std::to_string(task.input_names.size()) +
                           " input tensors, got " + std::to_string(inputs.size()));
    std::size_t batch = 0;
    for (const auto& name : task.input_names) {
        auto it = inputs.find(name);
        if (it == inputs.end()) throw HarnessError(task.name + ": missing input tensor " + name);
        if (it->second.rank() < 2)
            throw HarnessError("input " + name + " must carry a leading batch axis");
        if (batch == 0)
            batch = it->second.shape[0];
        else if (it->second.shape[0] != batch)
            throw HarnessError("input " + name + " disagrees on the batch size");
    }

    auto dir = fresh_exec_dir(config.work_root, candidate.candidate_id);
    struct Cleanup {
        std::filesystem::path dir;
        bool keep;
        ~Cleanup() {
            if (!keep) {
                std::error_code ec;
                std::filesystem::remove_all(dir, ec);
            }
        }
    } cleanup{dir, config.keep_artifacts};

    auto solver_path = dir / "solver.py";
    write_text_file(solver_path, candidate.source);

    nlohmann::json manifest{{"task_id", task.name},
                            {"params", task.params},
                            {"t_coordinates", grid.t},
                            {"output_path", (dir / "output.pdet").string()}};
    nlohmann::json paths = nlohmann::json::object();
    for (const auto& name : task.input_names) {
        auto p = dir / ("in_" + name + ".pdet");
        save_tensor(p, inputs.at(name));
        paths[name] = p.string();
    }
    manifest["input_paths"] = paths;
    auto manifest_path = dir / "manifest.json";
    write_text_file(manifest_path, manifest.dump(2) + "\n");

    auto argv = config.guest_command;
    argv.push_back(solver_path.string());
    argv.push_back(manifest_path.string());
    auto raw = run_guest(argv, dir, config.limits.wall_clock_seconds, config.limits.memory_bytes);

    ExecutionResult res;
    res.stdout_text = std::move(raw.out);
    res.stderr_trace = std::move(raw.err);
    res.runtime_seconds = raw.seconds;
    res.diagnostics = parse_diagnostics(res.stdout_text);
    if (config.keep_artifacts) {
        write_text_file(dir / "stdout.txt", res.stdout_text);
        write_text_file(dir / "stderr.txt", res.stderr_trace);
    }

    if (raw.timed_out) {
        res.status = ExecStatus::timeout;
        res.detail = "killed after " + format_double(config.limits.wall_clock_seconds) +
                     " s wall clock";
        return res;
    }
    if (raw.spawn_failed) {
        res.status = ExecStatus::guest_error;
        res.detail = "could not launch guest command " + config.guest_command[0];
        return res;
    }
    if (raw.term_signal != 0) {
        res.status = ExecStatus::guest_error;
        res.detail = "killed by signal " + std::to_string(raw.term_signal);
        return res;
    }
    if (raw.exit_code != 0) {
        res.status = ExecStatus::guest_error;
        res.detail = "exit code " + std::to_string(raw.exit_code);
        return res;
    }

    auto out_path = dir / "output.pdet";
    if (!std::filesystem::exists(out_path)) {
        res.status = ExecStatus::contract_violation;
        res.detail = "guest exited cleanly but wrote no output file";
        return res;
    }
    Tensor solution;
    try {
        solution = load_tensor(out_path);
    } catch (const TensorIoError& e) {
        res.status = ExecStatus::contract_violation;
        res.detail = std::string("unreadable output tensor: ") + e.what();
        return res;
    }
    auto expected = solution_shape(task, grid, batch);
    if (solution.shape != expected) {
        res.status = ExecStatus::contract_violation;
        res.detail = "expected output shape " + shape_string(expected) + ", guest wrote " +
                     shape_string(solution.shape);
        return res;
    }
    for (std::size_t i = 0; i < solution.size(); ++i) {
        if (!std::isfinite(solution.data[i])) {
            res.status = ExecStatus::nonfinite_output;
            res.detail = "non-finite value " + std::to_string(solution.data[i]) +
                         " at flat index " + std::to_string(i);
            return res;
        }
    }
    res.status = ExecStatus::ok;
    res.solution = SolutionField{std::move(solution), task.component_names};
    return res;
}

std::vector<ExecutionResult> execute_batch(const std::vector<SolverCandidate>& candidates,
                                           const PdeTask& task, const GridSpec& grid,
                                           const std::map<std::string, Tensor>& inputs,
                                           const HarnessConfig& config, int parallelism) {
    if (parallelism < 1) throw HarnessError("parallelism must be at least 1");
    std::vector<ExecutionResult> results(candidates.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&] {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= candidates.size() || failed.load()) return;
            try {
                results[i] = execute(candidates[i], task, grid, inputs, config);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::size_t n_threads = std::min<std::size_t>(parallelism, candidates.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

// ---- debug loop -------------------------------------------------------------------

namespace {

std::string failure_status_line(const ExecutionResult& r) {
    std::string s = exec_status_name(r.status);
    if (!r.detail.empty()) s += ": " + r.detail;
    return s;
}

std::string failure_trace(const ExecutionResult& r) {
    std::string trace = r.stderr_trace;
    if (trace.empty()) trace = r.detail;
    if (trace.empty()) trace = "(no output captured)";
    return trace;
}

}  // namespace

DebugOutcome debug_loop(const SolverCandidate& candidate, const ExecutionResult& failure,
                        const PdeTask& task, const GridSpec& grid,
                        const std::map<std::string, Tensor>& inputs, Backend& backend,
                        const PromptLibrary& prompts, const HarnessConfig& config,
                        const DebugConfig& debug) {
    if (failure.status == ExecStatus::ok)
        throw HarnessError("debug loop called on a passing execution");
    config.limits.validate();

    DebugOutcome outcome;
    outcome.candidate = candidate;
    outcome.result = failure;

    Conversation conv;
    conv.model_id = debug.model_id;
    conv.key = debug.conversation_key + "/" + candidate.candidate_id;
    conv.purpose = "debug";
    conv.params = debug.params;
    conv.add_system(prompts.text("system_stage12"));

    std::string user = prompts.render("debug_fix", {{"status", failure_status_line(failure)},
                                                    {"source", candidate.source},
                                                    {"stderr", failure_trace(failure)}});
    for (int iter = 1; iter <= config.limits.max_debug_iterations; ++iter) {
        conv.add_user(user);
        auto reply = complete(conv, backend);
        conv.add_assistant(reply.text);

        std::string fixed_source;
        try {
            fixed_source = extract_code(reply.text);
        } catch (const GenesisError&) {
            outcome.result.debug_iterations_used = iter;
            user = prompts.text("genesis_extract_retry");
            continue;
        }

        SolverCandidate fixed;
        fixed.candidate_id = candidate.candidate_id + "-d" + std::to_string(iter);
        fixed.source = fixed_source;
        fixed.strategy = candidate.strategy;
        fixed.origin = Origin::debug_fix;
        fixed.parent_ids = {candidate.candidate_id};
        fixed.generator_model = debug.model_id;
        outcome.attempts.push_back(fixed);

        auto run = execute(fixed, task, grid, inputs, config);
        run.debug_iterations_used = iter;
        outcome.candidate = fixed;
        outcome.result = run;
        if (run.status == ExecStatus::ok) return outcome;
        user = prompts.render("debug_fix", {{"status", failure_status_line(run)},
                                            {"source", fixed.source},
                                            {"stderr", failure_trace(run)}});
    }
    return outcome;
}

std::filesystem::path default_guest_dir() {
    if (const char* env = std::getenv("PDESHARP_GUESTS")) return env;
#ifdef PDESHARP_GUESTS_DIR
    return PDESHARP_GUESTS_DIR;
#else
    return "assets/guests";
#endif
}

}  // namespace pdesharp
