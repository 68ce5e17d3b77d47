#include "pdesharp/diffpatch.hpp"

#include <charconv>
#include <cstdlib>
#include <optional>

namespace pdesharp {

namespace {

struct SplitText {
    std::vector<std::string> lines;
    bool trailing_newline = true;
};

SplitText split_lines(const std::string& text) {
    SplitText out;
    if (text.empty()) return out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            out.lines.push_back(text.substr(pos));
            out.trailing_newline = false;
            return out;
        }
        out.lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += lines[i];
        if (i + 1 < lines.size() || trailing_newline) out += '\n';
    }
    return out;
}

[[noreturn]] void malformed(const std::string& what) {
    throw PatchError(PatchError::Kind::malformed, "malformed diff: " + what);
}

// Parses "start[,count]" out of an @@ range; count defaults to 1.
std::optional<std::pair<long, long>> parse_range(std::string_view s) {
    long start = 0, count = 1;
    auto comma = s.find(',');
    auto head = s.substr(0, comma);
    auto r1 = std::from_chars(head.data(), head.data() + head.size(), start);
    if (r1.ec != std::errc() || r1.ptr != head.data() + head.size()) return std::nullopt;
    if (comma != std::string_view::npos) {
        auto tail = s.substr(comma + 1);
        auto r2 = std::from_chars(tail.data(), tail.data() + tail.size(), count);
        if (r2.ec != std::errc() || r2.ptr != tail.data() + tail.size()) return std::nullopt;
    }
    if (start < 0 || count < 0) return std::nullopt;
    return std::make_pair(start, count);
}

std::optional<Hunk> parse_hunk_header(const std::string& line) {
    // "@@ -l[,c] +l[,c] @@", optionally followed by a section heading.
    if (line.rfind("@@ -", 0) != 0) return std::nullopt;
    auto close = line.find(" @@", 4);
    if (close == std::string::npos) return std::nullopt;
    std::string_view body(line.data() + 4, close - 4);
    auto space = body.find(" +");
    if (space == std::string_view::npos) return std::nullopt;
    auto old_range = parse_range(body.substr(0, space));
    auto new_range = parse_range(body.substr(space + 2));
    if (!old_range || !new_range) return std::nullopt;
    Hunk h;
    h.old_start = old_range->first;
    h.old_count = old_range->second;
    h.new_start = new_range->first;
    h.new_count = new_range->second;
    return h;
}

// 0-based index of the first old-file line a hunk touches. A pure insertion
// states the line it follows, so its position is old_start itself.
long hunk_pos(const Hunk& h) { return h.old_count == 0 ? h.old_start : h.old_start - 1; }

bool context_matches(const std::vector<std::string>& lines, long at, const Hunk& h) {
    long k = at;
    for (const auto& dl : h.lines) {
        if (dl.tag == '+') continue;
        if (k >= static_cast<long>(lines.size()) || lines[k] != dl.text) return false;
        ++k;
    }
    return true;
}

}  // namespace

std::vector<Hunk> parse_unified_diff(const std::string& diff) {
    auto split = split_lines(diff);
    std::vector<Hunk> hunks;
    bool in_hunk = false;
    bool saw_old_header = false;
    long remaining_old = 0, remaining_new = 0;

    for (const std::string& line : split.lines) {
        if (auto h = parse_hunk_header(line)) {
            if (in_hunk && (remaining_old > 0 || remaining_new > 0))
                malformed("hunk is shorter than its header claims");
            if (h->old_start == 0 && h->old_count != 0)
                malformed("old range starts at line 0 in \"" + line + "\"");
            hunks.push_back(*h);
            remaining_old = h->old_count;
            remaining_new = h->new_count;
            in_hunk = true;
            continue;
        }
        if (!in_hunk) {
            if (line.empty() || line.rfind("--- ", 0) == 0 || line.rfind("+++ ", 0) == 0 ||
                line.rfind("diff ", 0) == 0 || line.rfind("index ", 0) == 0) {
                if (line.rfind("--- ", 0) == 0) {
                    if (saw_old_header) malformed("second file header; one file per patch");
                    saw_old_header = true;
                }
                continue;
            }
            malformed("unexpected line before first hunk: \"" + line + "\"");
        }
        // A marker may trail the final body line, after the counts are spent.
        if (!line.empty() && line[0] == '\\') {
            if (hunks.back().lines.empty()) malformed("stray no-newline marker");
            hunks.back().lines.back().no_newline = true;
            continue;
        }
        if (remaining_old == 0 && remaining_new == 0) {
            if (line.empty()) continue;  // separator between hunks
            if (line.rfind("--- ", 0) == 0)
                malformed("second file header; one file per patch");
            malformed("unexpected line after hunk: \"" + line + "\"");
        }
        char tag = line.empty() ? ' ' : line[0];  // some tools emit bare blank context lines
        if (tag != ' ' && tag != '-' && tag != '+')
            malformed("unexpected line inside hunk: \"" + line + "\"");
        if (tag != '+') {
            if (--remaining_old < 0) malformed("hunk body longer than its old range");
        }
        if (tag != '-') {
            if (--remaining_new < 0) malformed("hunk body longer than its new range");
        }
        hunks.back().lines.push_back({tag, line.empty() ? "" : line.substr(1), false});
    }
    if (in_hunk && (remaining_old > 0 || remaining_new > 0))
        malformed("final hunk is shorter than its header claims");

    for (std::size_t i = 1; i < hunks.size(); ++i) {
        long prev_end = hunk_pos(hunks[i - 1]) + hunks[i - 1].old_count;
        if (hunk_pos(hunks[i]) < prev_end)
            throw PatchError(PatchError::Kind::overlapping_hunks,
                             "hunks " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                 " overlap or are out of order in the original file");
    }
    return hunks;
}

std::string apply_patch(const std::string& source, const std::string& diff) {
    auto hunks = parse_unified_diff(diff);
    if (hunks.empty()) return source;

    auto src = split_lines(source);
    const long n = static_cast<long>(src.lines.size());
    std::vector<std::string> out;
    out.reserve(src.lines.size());
    bool out_trailing = src.trailing_newline;

    long cursor = 0;  // next unconsumed source line
    long shift = 0;   // where hunks have drifted relative to their stated positions

    for (std::size_t hi = 0; hi < hunks.size(); ++hi) {
        const Hunk& h = hunks[hi];
        long expected = hunk_pos(h) + shift;

        long found = -1;
        long max_radius = std::max(expected - cursor, n - h.old_count - expected);
        for (long radius = 0; radius <= std::max(max_radius, 0L); ++radius) {
            for (long cand : {expected - radius, expected + radius}) {
                if (cand < cursor || cand + h.old_count > n) continue;
                if (context_matches(src.lines, cand, h)) {
                    found = cand;
                    break;
                }
                if (radius == 0) break;  // both candidates identical
            }
            if (found >= 0) break;
        }
        if (found < 0)
            throw PatchError(PatchError::Kind::context_mismatch,
                             "hunk " + std::to_string(hi + 1) + " (old lines " +
                                 std::to_string(h.old_start) + ".." +
                                 std::to_string(h.old_start + std::max(h.old_count - 1, 0L)) +
                                 ") does not match the source");

        out.insert(out.end(), src.lines.begin() + cursor, src.lines.begin() + found);
        const DiffLine* last_emitted = nullptr;
        for (const auto& dl : h.lines) {
            if (dl.tag != '-') {
                out.push_back(dl.text);
                last_emitted = &dl;
            }
        }
        cursor = found + h.old_count;
        // All searches index the original lines, so only the displacement of
        // the latest hunk carries forward, not the length changes.
        shift = found - hunk_pos(h);

        if (cursor == n) out_trailing = last_emitted ? !last_emitted->no_newline : true;
    }
    out.insert(out.end(), src.lines.begin() + cursor, src.lines.end());
    return join_lines(out, out_trailing);
}

DiffStats diff_stats(const std::string& diff) {
    DiffStats s;
    for (const auto& h : parse_unified_diff(diff)) {
        ++s.hunks;
        for (const auto& dl : h.lines) {
            if (dl.tag == '+') ++s.added;
            if (dl.tag == '-') ++s.removed;
        }
    }
    return s;
}

}  // namespace pdesharp
