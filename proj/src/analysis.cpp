#include "pdesharp/analysis.hpp"

#include <algorithm>
#include <cctype>

namespace pdesharp {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool markup_char(char c) {
    // high-bit bytes cover typographic dashes and bullets in UTF-8 replies
    return c == '*' || c == '#' || c == '_' || c == '`' || c == '>' || c == '"' || c == '\'' ||
           c == '-' || static_cast<unsigned char>(c) >= 0x80 ||
           std::isspace(static_cast<unsigned char>(c));
}

std::string_view strip_markup(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && markup_char(s[i])) ++i;
    return s.substr(i);
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

Linearity linearity_from(const std::string& raw) {
    auto s = lower(trim(raw));
    std::replace(s.begin(), s.end(), '_', '-');
    if (s == "linear") return Linearity::linear;
    if (s == "quasi-linear" || s == "quasilinear") return Linearity::quasi_linear;
    if (s == "non-linear" || s == "nonlinear") return Linearity::non_linear;
    throw AnalysisError("unknown linearity: " + raw);
}

PdeType type_from(const std::string& raw) {
    auto s = lower(trim(raw));
    if (s == "elliptic") return PdeType::elliptic;
    if (s == "parabolic") return PdeType::parabolic;
    if (s == "hyperbolic") return PdeType::hyperbolic;
    if (s == "mixed") return PdeType::mixed;
    throw AnalysisError("unknown PDE type: " + raw);
}

Homogeneity homogeneity_from(const std::string& raw) {
    auto s = lower(trim(raw));
    std::replace(s.begin(), s.end(), '_', '-');
    if (s == "homogeneous") return Homogeneity::homogeneous;
    if (s == "non-homogeneous" || s == "nonhomogeneous" || s == "inhomogeneous")
        return Homogeneity::non_homogeneous;
    throw AnalysisError("unknown homogeneity: " + raw);
}

const char* linearity_name(Linearity l) {
    switch (l) {
        case Linearity::linear: return "linear";
        case Linearity::quasi_linear: return "quasi-linear";
        default: return "non-linear";
    }
}

const char* type_name(PdeType t) {
    switch (t) {
        case PdeType::elliptic: return "elliptic";
        case PdeType::parabolic: return "parabolic";
        case PdeType::hyperbolic: return "hyperbolic";
        default: return "mixed";
    }
}

const char* homogeneity_name(Homogeneity h) {
    return h == Homogeneity::homogeneous ? "homogeneous" : "non-homogeneous";
}

// Pulls string-or-number field content out of loosely structured lines:
// `key: value`, quoted keys allowed, values possibly spilling over following
// indented lines after a yaml-style "|-" marker.
std::map<std::string, std::string> scan_key_lines(const std::string& content,
                                                  const std::vector<std::string>& keys) {
    std::map<std::string, std::string> out;
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        auto nl = content.find('\n', pos);
        lines.push_back(content.substr(pos, (nl == std::string::npos ? content.size() : nl) - pos));
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line(lines[i]);
        std::size_t b = 0;
        while (b < line.size() && (line[b] == ' ' || line[b] == '\t' || line[b] == '-' ||
                                   line[b] == '*' || line[b] == '"'))
            ++b;
        for (const auto& key : keys) {
            if (line.substr(b, key.size()) != key) continue;
            std::size_t after = b + key.size();
            while (after < line.size() && (line[after] == '"' || line[after] == ' ')) ++after;
            if (after >= line.size() || line[after] != ':') continue;
            std::string value = trim(line.substr(after + 1));
            if (value == "|-" || value == "|") {
                std::string block;
                while (i + 1 < lines.size() && (lines[i + 1].empty() ||
                                                lines[i + 1][0] == ' ' || lines[i + 1][0] == '\t')) {
                    auto piece = trim(lines[i + 1]);
                    if (piece == "}" || piece == "},") break;  // object closer, not content
                    ++i;
                    if (!block.empty()) block += '\n';
                    block += piece;
                }
                value = block;
            } else {
                if (!value.empty() && value.back() == ',') value.pop_back();
                if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
                    value = value.substr(1, value.size() - 2);
                } else {
                    auto hash = value.find(" #");
                    if (hash != std::string::npos) value = trim(value.substr(0, hash));
                }
            }
            out[key] = value;
            break;
        }
    }
    return out;
}

Classification classification_from_fields(const std::map<std::string, std::string>& f) {
    std::vector<std::string> missing;
    for (const char* key : {"order", "linearity", "type", "homogeneity", "domain_bc",
                            "special_properties"})
        if (!f.count(key)) missing.push_back(key);
    if (!missing.empty()) {
        std::string what = "classification is missing";
        for (const auto& k : missing) what += " " + k;
        throw AnalysisError(what);
    }
    Classification c;
    try {
        c.order = std::stoi(f.at("order"));
    } catch (const std::exception&) {
        throw AnalysisError("classification order is not an integer: " + f.at("order"));
    }
    c.linearity = linearity_from(f.at("linearity"));
    c.type = type_from(f.at("type"));
    c.homogeneity = homogeneity_from(f.at("homogeneity"));
    c.domain_bc = f.at("domain_bc");
    c.special_properties = f.at("special_properties");
    auto it = f.find("char_polynomial");
    if (it != f.end() && !trim(it->second).empty()) c.char_polynomial = it->second;
    return c;
}

}  // namespace

std::string route_name(Route r) {
    switch (r) {
        case Route::analytical: return "analytical";
        case Route::transform: return "transform";
        case Route::hybrid: return "hybrid";
        default: return "numerical";
    }
}

Route route_from_name(const std::string& name) {
    if (name == "analytical") return Route::analytical;
    if (name == "transform") return Route::transform;
    if (name == "hybrid") return Route::hybrid;
    if (name == "numerical") return Route::numerical;
    throw AnalysisError("unknown route: " + name);
}

nlohmann::json classification_to_json(const Classification& c) {
    nlohmann::json j{{"order", c.order},
                     {"linearity", linearity_name(c.linearity)},
                     {"type", type_name(c.type)},
                     {"homogeneity", homogeneity_name(c.homogeneity)},
                     {"domain_bc", c.domain_bc},
                     {"special_properties", c.special_properties}};
    if (c.char_polynomial) j["char_polynomial"] = *c.char_polynomial;
    return j;
}

Classification classification_from_json(const nlohmann::json& j) {
    Classification c;
    c.order = j.at("order").get<int>();
    c.linearity = linearity_from(j.at("linearity").get<std::string>());
    c.type = type_from(j.at("type").get<std::string>());
    c.homogeneity = homogeneity_from(j.at("homogeneity").get<std::string>());
    c.domain_bc = j.at("domain_bc").get<std::string>();
    c.special_properties = j.at("special_properties").get<std::string>();
    if (j.contains("char_polynomial")) c.char_polynomial = j["char_polynomial"].get<std::string>();
    return c;
}

Verdict parse_verdict(const std::string& text) {
    auto body = strip_markup(text);
    auto upper_is = [&](std::string_view token) {
        if (body.size() < token.size()) return false;
        for (std::size_t i = 0; i < token.size(); ++i)
            if (std::toupper(static_cast<unsigned char>(body[i])) != token[i]) return false;
        // word boundary so NOTE/YESTERDAY do not count
        return body.size() == token.size() ||
               !std::isalpha(static_cast<unsigned char>(body[token.size()]));
    };
    Verdict v;
    v.raw_response = text;
    std::size_t token_len;
    if (upper_is("YES")) {
        v.decision = Verdict::Decision::yes;
        token_len = 3;
    } else if (upper_is("NO")) {
        v.decision = Verdict::Decision::no;
        token_len = 2;
    } else {
        throw AnalysisError("verdict does not start with YES or NO: " + text);
    }
    auto rest = body.substr(token_len);
    std::size_t i = 0;
    while (i < rest.size() &&
           (markup_char(rest[i]) || rest[i] == ',' || rest[i] == ':' || rest[i] == '.' ||
            rest[i] == ';' || rest[i] == '!' || static_cast<unsigned char>(rest[i]) >= 0x80))
        ++i;
    v.rationale = trim(rest.substr(i));
    return v;
}

Classification parse_classification(const std::string& text) {
    static const std::vector<std::string> keys = {
        "order",      "linearity",          "type",           "homogeneity",
        "domain_bc",  "special_properties", "char_polynomial"};

    std::vector<std::string> candidates;
    for (const auto& block : fenced_blocks(text))
        if (block.info.empty() || block.info == "json") candidates.push_back(block.content);
    candidates.push_back(text);

    std::string first_error;
    auto attempt = [&](const std::map<std::string, std::string>& fields)
        -> std::optional<Classification> {
        try {
            return classification_from_fields(fields);
        } catch (const AnalysisError& e) {
            if (first_error.empty()) first_error = e.what();
            return std::nullopt;
        }
    };
    for (const auto& content : candidates) {
        auto parsed = nlohmann::json::parse(content, nullptr, false);
        if (parsed.is_object()) {
            std::map<std::string, std::string> fields;
            for (const auto& key : keys) {
                if (!parsed.contains(key)) continue;
                const auto& v = parsed[key];
                fields[key] = v.is_string() ? v.get<std::string>() : v.dump();
            }
            if (!fields.empty())
                if (auto c = attempt(fields)) return *c;
        }
        auto fields = scan_key_lines(content, keys);
        if (fields.count("order"))
            if (auto c = attempt(fields)) return *c;
    }
    throw AnalysisError(first_error.empty() ? "no classification block found in response"
                                            : first_error);
}

StabilityPlan parse_stability(const std::string& text) {
    static const std::vector<std::string> keys = {"dt_bound_formula", "scheme_recommendation",
                                                  "constraints"};
    std::vector<std::string> candidates;
    for (const auto& block : fenced_blocks(text))
        if (block.info == "stability" || block.info.empty()) candidates.push_back(block.content);
    candidates.push_back(text);

    for (const auto& content : candidates) {
        auto fields = scan_key_lines(content, keys);
        if (fields.size() == keys.size()) {
            StabilityPlan plan;
            plan.dt_bound_formula = fields.at("dt_bound_formula");
            plan.scheme_recommendation = fields.at("scheme_recommendation");
            plan.constraints = fields.at("constraints");
            plan.raw_response = text;
            return plan;
        }
    }
    throw AnalysisError("stability response lacks dt_bound_formula/scheme_recommendation/"
                        "constraints fields");
}

Route decide_route(const std::optional<Verdict>& analytical,
                   const std::optional<Verdict>& transformation,
                   const std::optional<Verdict>& splitting) {
    if (analytical && analytical->is_yes()) return Route::analytical;
    if (transformation && transformation->is_yes()) return Route::transform;
    if (splitting && splitting->is_yes()) return Route::hybrid;
    return Route::numerical;
}

namespace {

nlohmann::json verdict_to_json(const Verdict& v) {
    return {{"decision", v.is_yes() ? "yes" : "no"},
            {"rationale", v.rationale},
            {"raw_response", v.raw_response}};
}

Verdict verdict_from_json(const nlohmann::json& j) {
    Verdict v;
    auto d = j.at("decision").get<std::string>();
    if (d == "yes") v.decision = Verdict::Decision::yes;
    else if (d == "no") v.decision = Verdict::Decision::no;
    else throw AnalysisError("unknown verdict decision: " + d);
    v.rationale = j.at("rationale").get<std::string>();
    v.raw_response = j.at("raw_response").get<std::string>();
    return v;
}

}  // namespace

nlohmann::json report_to_json(const AnalysisReport& r) {
    nlohmann::json j{{"classification", classification_to_json(r.classification)},
                     {"classification_raw", r.classification_raw},
                     {"route", route_name(r.route)}};
    if (r.analytical) j["analytical"] = verdict_to_json(*r.analytical);
    if (r.transformation) j["transformation"] = verdict_to_json(*r.transformation);
    if (r.splitting) j["splitting"] = verdict_to_json(*r.splitting);
    if (r.stability)
        j["stability"] = {{"dt_bound_formula", r.stability->dt_bound_formula},
                          {"scheme_recommendation", r.stability->scheme_recommendation},
                          {"constraints", r.stability->constraints},
                          {"raw_response", r.stability->raw_response}};
    return j;
}

AnalysisReport report_from_json(const nlohmann::json& j) {
    AnalysisReport r;
    r.classification = classification_from_json(j.at("classification"));
    r.classification_raw = j.at("classification_raw").get<std::string>();
    r.route = route_from_name(j.at("route").get<std::string>());
    if (j.contains("analytical")) r.analytical = verdict_from_json(j["analytical"]);
    if (j.contains("transformation")) r.transformation = verdict_from_json(j["transformation"]);
    if (j.contains("splitting")) r.splitting = verdict_from_json(j["splitting"]);
    if (j.contains("stability")) {
        StabilityPlan plan;
        plan.dt_bound_formula = j["stability"].at("dt_bound_formula").get<std::string>();
        plan.scheme_recommendation = j["stability"].at("scheme_recommendation").get<std::string>();
        plan.constraints = j["stability"].at("constraints").get<std::string>();
        plan.raw_response = j["stability"].at("raw_response").get<std::string>();
        r.stability = plan;
    }
    return r;
}

AnalysisReport run_analysis(const PdeTask& task, Backend& backend, const PromptLibrary& prompts,
                            const AnalysisConfig& config) {
    const std::string description = task_description(task, prompts);

    Conversation conv;
    conv.model_id = config.model_id;
    conv.key = config.conversation_key;
    conv.purpose = "analysis";
    conv.params = config.params;
    conv.add_system(prompts.text("system_stage12"));

    auto ask = [&](const std::string& prompt) {
        conv.add_user(prompt);
        auto res = complete(conv, backend);
        conv.add_assistant(res.text);
        return res.text;
    };

    AnalysisReport report;

    auto reply = ask(prompts.render("analysis_classify", {{"pde_description", description}}));
    try {
        report.classification = parse_classification(reply);
        report.classification_raw = reply;
    } catch (const AnalysisError&) {
        reply = ask(prompts.text("analysis_repair"));
        try {
            report.classification = parse_classification(reply);
            report.classification_raw = reply;
        } catch (const AnalysisError& e) {
            throw AnalysisError(std::string("classification unparseable after repair retry: ") +
                                e.what());
        }
    }

    report.analytical =
        parse_verdict(ask(prompts.render("analysis_analytical", {{"pde_description", description}})));
    if (!report.analytical->is_yes()) {
        report.transformation = parse_verdict(
            ask(prompts.render("analysis_transformation", {{"pde_description", description}})));
        if (!report.transformation->is_yes())
            report.splitting = parse_verdict(
                ask(prompts.render("analysis_splitting", {{"pde_description", description}})));
    }
    report.route = decide_route(report.analytical, report.transformation, report.splitting);

    if (report.route == Route::hybrid || report.route == Route::numerical)
        report.stability = parse_stability(
            ask(prompts.render("analysis_stability", {{"pde_description", description}})));

    return report;
}

TranslationResult translate_description(const std::string& free_text, Backend& backend,
                                        const PromptLibrary& prompts,
                                        const AnalysisConfig& config) {
    if (trim(free_text).empty())
        throw AnalysisError("translate_description requires a non-empty problem statement");

    Conversation conv;
    conv.model_id = config.model_id;
    conv.key = config.conversation_key;
    conv.purpose = "analysis";
    conv.params = config.params;
    conv.add_user(prompts.render("translate", {{"free_text", free_text}}));
    auto res = complete(conv, backend);

    TranslationResult out;
    auto body = strip_markup(res.text);
    const std::string_view marker = "CLARIFICATION NEEDED";
    if (body.substr(0, marker.size()) == marker) {
        out.outcome = TranslationResult::Outcome::clarification_needed;
        auto rest = body.substr(marker.size());
        std::size_t i = 0;
        while (i < rest.size() && (rest[i] == ':' || std::isspace(static_cast<unsigned char>(rest[i]))))
            ++i;
        out.text = trim(rest.substr(i));
    } else {
        out.outcome = TranslationResult::Outcome::translated;
        out.text = trim(res.text);
    }
    return out;
}

}  // namespace pdesharp
