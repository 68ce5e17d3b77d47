#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <signal.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "pdesharp/harness.hpp"
#include "pdesharp/metrics.hpp"
#include "pdesharp/reference.hpp"
#include "pdesharp/sampling.hpp"
#include "support/test_util.hpp"

using namespace pdesharp;

namespace {

// Guests share a small prelude: read the manifest and all input tensors, run
// the body, write `result` if set.
const std::string kGuestPrelude = R"py(
import json, struct, sys
import numpy as np

def read_tensor(path):
    raw = open(path, 'rb').read()
    assert raw[:4] == b'PDET'
    ndim = raw[6]
    dims = struct.unpack_from('<%dQ' % ndim, raw, 7)
    return np.frombuffer(raw, dtype='<f8', offset=7 + 8 * ndim).reshape(dims).copy()

def write_tensor(path, arr):
    arr = np.ascontiguousarray(arr, dtype='<f8')
    with open(path, 'wb') as f:
        f.write(b'PDET' + bytes([1, 0, arr.ndim]) + struct.pack('<%dQ' % arr.ndim, *arr.shape) + arr.tobytes())

manifest = json.load(open(sys.argv[1]))
inputs = {k: read_tensor(p) for k, p in manifest['input_paths'].items()}
t = manifest['t_coordinates']
result = None
)py";

const std::string kGuestEpilogue = R"py(
if result is not None:
    write_tensor(manifest['output_path'], result)
)py";

SolverCandidate guest(const std::string& body, const std::string& id = "g1") {
    SolverCandidate c;
    c.candidate_id = id;
    c.source = kGuestPrelude + body + "\n" + kGuestEpilogue;
    c.strategy = Route::numerical;
    c.generator_model = "test";
    return c;
}

SolverCandidate raw_guest(const std::string& source, const std::string& id = "g1") {
    SolverCandidate c;
    c.candidate_id = id;
    c.source = source;
    c.strategy = Route::numerical;
    c.generator_model = "test";
    return c;
}

const std::string kEchoBody = "result = np.repeat(inputs['u0'][:, None, :], len(t), axis=1)";

struct RdSetup {
    PdeTask task = registry_get("reaction_diffusion");
    GridSpec grid;
    std::map<std::string, Tensor> inputs;
    std::size_t batch = 2, n = 16;

    RdSetup() {
        grid = make_grid(task, n, 2, 0.02);
        Tensor u0({batch, n});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < n; ++j)
                u0.at({b, j}) = 0.4 + 0.2 * std::sin(2.0 * M_PI * (double(j) / n + 0.3 * b));
        inputs["u0"] = u0;
    }
};

// Backend for the debug loop tests: replies come from a fixed list, in order.
struct ListBackend : Backend {
    std::vector<std::string> replies;
    std::vector<Conversation> seen;
    std::vector<std::string> keys;
    std::size_t next = 0;

    CompletionResult complete(const Conversation& conv, const std::string& key) override {
        seen.push_back(conv);
        keys.push_back(key);
        REQUIRE(next < replies.size());
        return {replies[next++], {}};
    }
};

std::string fenced(const std::string& code) { return "```python\n" + code + "```\n"; }

}  // namespace

TEST_CASE("stdout diagnostics parse the printed contract lines") {
    SUBCASE("the documented print formats") {
        auto d = parse_diagnostics(
            "Stability-based dt_max = 4.77e-07\n"
            "Using 532 internal time steps\n"
            "Time step 1/5 completed (internal steps: 532)\n"
            "Time step 2/5 completed (internal steps: 1064)\n");
        REQUIRE(d.dt_max.has_value());
        CHECK(*d.dt_max == 4.77e-7);
        REQUIRE(d.internal_steps.has_value());
        CHECK(*d.internal_steps == 532);
        CHECK(d.progress.size() == 2);
        CHECK(*d.total_internal_steps == 1064);
    }
    SUBCASE("empty stdout yields nothing") {
        auto d = parse_diagnostics("");
        CHECK_FALSE(d.dt_max.has_value());
        CHECK_FALSE(d.internal_steps.has_value());
        CHECK_FALSE(d.total_internal_steps.has_value());
        CHECK(d.progress.empty());
    }
    SUBCASE("unrelated chatter is ignored, first dt_max wins") {
        auto d = parse_diagnostics(
            "loading inputs\n"
            "Stability-based dt_max = 1.00e-03\n"
            "Stability-based dt_max = 9.99e-01\n"
            "done\n");
        CHECK(*d.dt_max == 1.0e-3);
        CHECK_FALSE(d.internal_steps.has_value());
    }
    SUBCASE("progress lines without step counts still count as progress") {
        auto d = parse_diagnostics("Time step 3/10 completed\n");
        CHECK(d.progress.size() == 1);
        CHECK_FALSE(d.total_internal_steps.has_value());
    }
    SUBCASE("json form") {
        auto j = diagnostics_to_json(parse_diagnostics("Stability-based dt_max = 2.50e-01\n"));
        CHECK(j["dt_max"] == 0.25);
        CHECK_FALSE(j.contains("internal_steps"));
    }
}

TEST_CASE("limits must be positive") {
    ExecutionLimits limits;
    CHECK_NOTHROW(limits.validate());
    SUBCASE("wall clock") {
        limits.wall_clock_seconds = 0.0;
        CHECK_THROWS_AS(limits.validate(), HarnessError);
    }
    SUBCASE("memory") {
        limits.memory_bytes = -1;
        CHECK_THROWS_AS(limits.validate(), HarnessError);
    }
    SUBCASE("debug cap") {
        limits.max_debug_iterations = 0;
        CHECK_THROWS_AS(limits.validate(), HarnessError);
    }
}

TEST_CASE("input tensors must match the task signature") {
    RdSetup rd;
    HarnessConfig config;
    SUBCASE("missing input") {
        std::map<std::string, Tensor> empty;
        CHECK_THROWS_AS(execute(guest(kEchoBody), rd.task, rd.grid, empty, config), HarnessError);
    }
    SUBCASE("wrongly named input") {
        std::map<std::string, Tensor> bad{{"v0", rd.inputs.at("u0")}};
        CHECK_THROWS_WITH_AS(execute(guest(kEchoBody), rd.task, rd.grid, bad, config),
                             doctest::Contains("u0"), HarnessError);
    }
    SUBCASE("no batch axis") {
        Tensor flat({rd.n});
        std::map<std::string, Tensor> bad{{"u0", flat}};
        CHECK_THROWS_WITH_AS(execute(guest(kEchoBody), rd.task, rd.grid, bad, config),
                             doctest::Contains("batch"), HarnessError);
    }
}

TEST_CASE("clean guest output passes the contract") {
    RdSetup rd;
    HarnessConfig config;
    auto res = execute(guest(kEchoBody), rd.task, rd.grid, rd.inputs, config);
    INFO(res.detail, " stderr: ", res.stderr_trace);
    REQUIRE(res.status == ExecStatus::ok);
    REQUIRE(res.solution.has_value());
    CHECK(res.solution->data.shape == std::vector<std::size_t>{2, 3, 16});
    CHECK(res.solution->component_names.empty());
    CHECK(res.solution->data.at({1, 2, 5}) == rd.inputs.at("u0").at({1, 5}));
    CHECK(res.runtime_seconds > 0.0);
    CHECK(res.debug_iterations_used == 0);
}

TEST_CASE("adversarial guests map to the right statuses") {
    RdSetup rd;
    HarnessConfig config;

    SUBCASE("NaN in the output field") {
        auto res = execute(guest(kEchoBody + "\nresult[0, 1, 3] = float('nan')"), rd.task, rd.grid,
                           rd.inputs, config);
        CHECK(res.status == ExecStatus::nonfinite_output);
        CHECK(res.detail.find("non-finite") != std::string::npos);
        CHECK_FALSE(res.solution.has_value());
    }
    SUBCASE("infinity is caught the same way") {
        auto res = execute(guest(kEchoBody + "\nresult[1, 0, 0] = float('inf')"), rd.task, rd.grid,
                           rd.inputs, config);
        CHECK(res.status == ExecStatus::nonfinite_output);
    }
    SUBCASE("missing initial slice") {
        auto res = execute(guest("result = np.repeat(inputs['u0'][:, None, :], len(t) - 1, axis=1)"),
                           rd.task, rd.grid, rd.inputs, config);
        CHECK(res.status == ExecStatus::contract_violation);
        CHECK(res.detail.find("[2, 3, 16]") != std::string::npos);
        CHECK(res.detail.find("[2, 2, 16]") != std::string::npos);
    }
    SUBCASE("partial file") {
        auto res = execute(guest(kEchoBody + R"py(
blob = open('/dev/null', 'wb')  # placeholder so the epilogue stays quiet
payload = result.tobytes()
with open(manifest['output_path'], 'wb') as f:
    f.write(b'PDET' + bytes([1, 0, 3]) + struct.pack('<3Q', *result.shape) + payload[:len(payload) // 2])
result = None)py"),
                           rd.task, rd.grid, rd.inputs, config);
        CHECK(res.status == ExecStatus::contract_violation);
        CHECK(res.detail.find("output tensor") != std::string::npos);
    }
    SUBCASE("no output at all") {
        auto res = execute(guest("pass"), rd.task, rd.grid, rd.inputs, config);
        CHECK(res.status == ExecStatus::contract_violation);
        CHECK(res.detail.find("no output file") != std::string::npos);
    }
    SUBCASE("nonzero exit with a traceback") {
        auto res = execute(guest("raise RuntimeError('blew up in step 3')"), rd.task, rd.grid,
                           rd.inputs, config);
        CHECK(res.status == ExecStatus::guest_error);
        CHECK(res.detail == "exit code 1");
        CHECK(res.stderr_trace.find("blew up in step 3") != std::string::npos);
    }
}

TEST_CASE("timeout kills the whole process tree") {
    RdSetup rd;
    HarnessConfig config;
    config.limits.wall_clock_seconds = 1.0;
    auto sleeper = raw_guest(
        "import subprocess, sys, time\n"
        "p = subprocess.Popen(['sleep', '60'])\n"
        "print('child', p.pid, flush=True)\n"
        "time.sleep(60)\n");

    auto t0 = std::chrono::steady_clock::now();
    auto res = execute(sleeper, rd.task, rd.grid, rd.inputs, config);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    CHECK(res.status == ExecStatus::timeout);
    CHECK(res.detail.find("1 s wall clock") != std::string::npos);
    CHECK(elapsed < 10.0);

    // the helper child printed its pid before both were killed
    auto pos = res.stdout_text.find("child ");
    REQUIRE(pos != std::string::npos);
    pid_t grandchild = static_cast<pid_t>(std::stol(res.stdout_text.substr(pos + 6)));
    bool gone = false;
    for (int i = 0; i < 20 && !gone; ++i) {
        gone = kill(grandchild, 0) == -1 && errno == ESRCH;
        if (!gone) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    CHECK(gone);
}

TEST_CASE("memory limit turns a huge allocation into a guest error") {
    RdSetup rd;
    HarnessConfig config;
    config.limits.memory_bytes = 256L * 1024 * 1024;
    auto hog = raw_guest(
        "x = bytearray(1 << 30)\n"
        "print('allocated', len(x))\n");
    auto res = execute(hog, rd.task, rd.grid, rd.inputs, config);
    CHECK(res.status == ExecStatus::guest_error);
    CHECK(res.stderr_trace.find("MemoryError") != std::string::npos);
}

TEST_CASE("a flooding guest cannot deadlock the pipes") {
    RdSetup rd;
    HarnessConfig config;
    auto res = execute(guest("sys.stdout.write('x' * (1 << 21) + '\\n')\n" + kEchoBody), rd.task,
                       rd.grid, rd.inputs, config);
    CHECK(res.status == ExecStatus::ok);
    CHECK(res.stdout_text.size() >= (1u << 21));
}

TEST_CASE("unlaunchable interpreter is reported, not thrown") {
    RdSetup rd;
    HarnessConfig config;
    config.guest_command = {"/no/such/interpreter"};
    auto res = execute(guest(kEchoBody), rd.task, rd.grid, rd.inputs, config);
    CHECK(res.status == ExecStatus::guest_error);
    CHECK(res.detail.find("could not launch") != std::string::npos);
}

TEST_CASE("bundled reaction-diffusion guest matches the reference solver") {
    auto task = registry_get("reaction_diffusion");
    auto grid = make_grid(task, 64, 5, 1.0);
    auto init = sample_initial_conditions(task, grid, 2, 2024);
    std::map<std::string, Tensor> inputs{{"u0", init.data}};

    SolverCandidate c = raw_guest(read_text_file(default_guest_dir() / "reaction_diffusion.py"),
                                  "bundled-rd");
    HarnessConfig config;
    auto res = execute(c, task, grid, inputs, config);
    INFO(res.detail, " stderr: ", res.stderr_trace);
    REQUIRE(res.status == ExecStatus::ok);

    auto ref = solve_reference(task, grid, init);
    auto rec = nrmse(res.solution->data, ref.data);
    CHECK(rec.value < 1e-6);

    // its stdout follows the diagnostics contract
    REQUIRE(res.diagnostics.dt_max.has_value());
    double dx = grid.dx[0];
    CHECK(*res.diagnostics.dt_max ==
          doctest::Approx(dt_max_diffusion(dx, task.param("nu"))).epsilon(5e-3));
    CHECK(res.diagnostics.internal_steps.has_value());
    CHECK(res.diagnostics.progress.size() == 5);
}

TEST_CASE("artifacts are kept only on request") {
    RdSetup rd;
    testsupport::TempDir tmp("harness-artifacts");
    HarnessConfig config;
    config.work_root = tmp.path;

    SUBCASE("default scrubs the execution directory") {
        execute(guest(kEchoBody), rd.task, rd.grid, rd.inputs, config);
        CHECK(std::filesystem::is_empty(tmp.path));
    }
    SUBCASE("keep_artifacts leaves the full record") {
        config.keep_artifacts = true;
        execute(guest(kEchoBody, "keepme"), rd.task, rd.grid, rd.inputs, config);
        std::filesystem::path dir;
        for (const auto& e : std::filesystem::directory_iterator(tmp.path)) dir = e.path();
        REQUIRE_FALSE(dir.empty());
        CHECK(dir.filename().string().find("keepme") != std::string::npos);
        for (const char* name : {"solver.py", "manifest.json", "stdout.txt", "stderr.txt",
                                 "in_u0.pdet", "output.pdet"})
            CHECK(std::filesystem::exists(dir / name));
        auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
        CHECK(manifest["task_id"] == "reaction_diffusion");
        CHECK(manifest["params"]["nu"] == 0.5);
        CHECK(manifest["t_coordinates"].size() == 3);
        CHECK(manifest["input_paths"].contains("u0"));
    }
}

TEST_CASE("batch execution preserves order under concurrency") {
    RdSetup rd;
    HarnessConfig config;
    std::vector<SolverCandidate> pool;
    for (int k = 0; k < 4; ++k)
        pool.push_back(guest(kEchoBody + " + " + std::to_string(k), "b" + std::to_string(k)));
    pool.push_back(guest("raise SystemExit(3)", "b4"));

    auto results = execute_batch(pool, rd.task, rd.grid, rd.inputs, config, 3);
    REQUIRE(results.size() == 5);
    for (int k = 0; k < 4; ++k) {
        REQUIRE(results[k].status == ExecStatus::ok);
        CHECK(results[k].solution->data.at({0, 0, 0}) ==
              rd.inputs.at("u0").at({0, 0}) + double(k));
    }
    CHECK(results[4].status == ExecStatus::guest_error);
    CHECK(results[4].detail == "exit code 3");
}

TEST_CASE("debug loop") {
    RdSetup rd;
    HarnessConfig config;
    PromptLibrary prompts(default_prompt_dir());
    auto broken = guest("raise ValueError('bad stencil width')", "c7");
    auto failure = execute(broken, rd.task, rd.grid, rd.inputs, config);
    REQUIRE(failure.status == ExecStatus::guest_error);

    SUBCASE("passing execution is rejected up front") {
        auto fine = execute(guest(kEchoBody), rd.task, rd.grid, rd.inputs, config);
        ListBackend backend;
        CHECK_THROWS_AS(
            debug_loop(broken, fine, rd.task, rd.grid, rd.inputs, backend, prompts, config),
            HarnessError);
        CHECK(backend.seen.empty());
    }

    SUBCASE("first correction fixes it") {
        ListBackend backend;
        backend.replies = {"The raise was stray.\n\n" + fenced(broken.source.substr(
                               0, broken.source.find("raise")) + kEchoBody + "\n" + kGuestEpilogue)};
        auto out = debug_loop(broken, failure, rd.task, rd.grid, rd.inputs, backend, prompts,
                              config);
        CHECK(out.result.status == ExecStatus::ok);
        CHECK(out.result.debug_iterations_used == 1);
        REQUIRE(out.attempts.size() == 1);
        CHECK(out.attempts[0].origin == Origin::debug_fix);
        CHECK(out.attempts[0].parent_ids == std::vector<std::string>{"c7"});
        CHECK(out.candidate.candidate_id == "c7-d1");

        // the model saw the failing source, its stderr, and the status
        const auto& first = backend.seen.at(0);
        CHECK(first.purpose == "debug");
        CHECK(backend.keys.at(0) == "debug/c7/0");
        const auto& prompt = first.messages.back().content;
        CHECK(prompt.find("bad stencil width") != std::string::npos);
        CHECK(prompt.find("guest_error: exit code 1") != std::string::npos);
        CHECK(prompt.find("read_tensor") != std::string::npos);
    }

    SUBCASE("never-fixed failure stops at the cap") {
        ListBackend backend;
        for (int i = 0; i < 8; ++i)
            backend.replies.push_back("Try this.\n\n" +
                                      fenced("raise ValueError('still broken " +
                                             std::to_string(i) + "')\n"));
        auto out = debug_loop(broken, failure, rd.task, rd.grid, rd.inputs, backend, prompts,
                              config);
        CHECK(out.result.status == ExecStatus::guest_error);
        CHECK(out.result.debug_iterations_used == 4);
        CHECK(out.attempts.size() == 4);
        CHECK(backend.seen.size() == 4);
        CHECK(out.candidate.candidate_id == "c7-d4");
        // each follow-up prompt carries the newest trace
        CHECK(backend.seen.at(3).messages.back().content.find("still broken 2") !=
              std::string::npos);
    }

    SUBCASE("a codeless reply burns an iteration but the loop recovers") {
        ListBackend backend;
        backend.replies = {"I think the stencil is fine, actually.",
                           fenced(kGuestPrelude + kEchoBody + "\n" + kGuestEpilogue)};
        auto out = debug_loop(broken, failure, rd.task, rd.grid, rd.inputs, backend, prompts,
                              config);
        CHECK(out.result.status == ExecStatus::ok);
        CHECK(out.result.debug_iterations_used == 2);
        CHECK(out.attempts.size() == 1);
        CHECK(out.candidate.candidate_id == "c7-d2");
        CHECK(backend.seen.at(1).messages.back().content.find("ONE properly formatted") !=
              std::string::npos);
    }
}
