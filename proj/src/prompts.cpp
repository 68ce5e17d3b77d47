#include "pdesharp/prompts.hpp"

#include <cctype>

#include "json.hpp"

namespace pdesharp {

namespace {

bool token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

PromptLibrary::PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
        throw PromptError("prompt directory does not exist: " + dir_.string());
}

bool PromptLibrary::has(const std::string& name) const {
    return std::filesystem::exists(dir_ / (name + ".txt"));
}

const std::string& PromptLibrary::text(const std::string& name) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    auto path = dir_ / (name + ".txt");
    if (!std::filesystem::exists(path))
        throw PromptError("missing prompt asset: " + path.string());
    return cache_.emplace(name, read_text_file(path)).first->second;
}

std::string PromptLibrary::substitute(const std::string& tmpl,
                                      const std::map<std::string, std::string>& subs) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            std::size_t j = i + 2;
            while (j < tmpl.size() && token_char(tmpl[j])) ++j;
            if (j > i + 2 && j + 1 < tmpl.size() && tmpl[j] == '}' && tmpl[j + 1] == '}') {
                std::string token = tmpl.substr(i + 2, j - (i + 2));
                auto it = subs.find(token);
                if (it == subs.end())
                    throw PromptError("unresolved placeholder {{" + token + "}}");
                out += it->second;
                i = j + 2;
                continue;
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& subs) const {
    try {
        return substitute(text(name), subs);
    } catch (const PromptError& e) {
        throw PromptError(std::string(e.what()) + " in asset " + name);
    }
}

std::filesystem::path default_prompt_dir() {
    if (const char* env = std::getenv("PDESHARP_PROMPTS")) return env;
#ifdef PDESHARP_ASSETS_DIR
    return PDESHARP_ASSETS_DIR;
#else
    return "assets/prompts";
#endif
}

std::string format_param(double value) { return nlohmann::json(value).dump(); }

std::string task_description(const PdeTask& task, const PromptLibrary& lib) {
    std::map<std::string, std::string> subs;
    for (const auto& [key, value] : task.params) subs[key] = format_param(value);
    if (task.id == TaskId::reaction_diffusion) {
        // The published description template uses the upstream benchmark's
        // parameter names.
        subs["reacdiff1d_nu"] = subs["nu"];
        subs["reacdiff1d_rho"] = subs["rho"];
    }
    return lib.render("desc_" + task.name, subs);
}

std::string solver_template_text(const PdeTask& task, const PromptLibrary& lib) {
    return lib.text("template_" + task.name);
}

}  // namespace pdesharp
