#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "pdesharp/task.hpp"
#include "pdesharp/util.hpp"

namespace pdesharp {

struct PromptError : Error {
    using Error::Error;
};

// Loads prompt texts from a directory of .txt assets and fills {{name}}
// placeholders. Substitution is a single pass over the template, so braces
// inside substituted values (source code, diffs) are never reinterpreted.
class PromptLibrary {
 public:
    explicit PromptLibrary(std::filesystem::path dir);

    bool has(const std::string& name) const;
    const std::string& text(const std::string& name) const;
    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& subs) const;
    const std::filesystem::path& dir() const { return dir_; }

    // Every {{token}} in the template must have a binding; extra bindings
    // that the template does not mention are allowed.
    static std::string substitute(const std::string& tmpl,
                                  const std::map<std::string, std::string>& subs);

 private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::string> cache_;
};

// PDESHARP_PROMPTS env var when set, else the build-time asset directory.
std::filesystem::path default_prompt_dir();

// Shortest decimal form that round-trips the value, for embedding task
// parameters into prompt text.
std::string format_param(double value);

// The task's PDE description with its parameter values filled in.
std::string task_description(const PdeTask& task, const PromptLibrary& lib);

// The solver skeleton handed to Genesis for this task.
std::string solver_template_text(const PdeTask& task, const PromptLibrary& lib);

}  // namespace pdesharp
