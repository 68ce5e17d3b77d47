#pragma once

// Unified-diff application for the hybridization rounds. Judges hand back
// patches as plain unified diffs; we apply them with exact context matching
// so a stale or hallucinated hunk is refused instead of silently landing in
// the wrong place.

#include <string>
#include <vector>

#include "pdesharp/util.hpp"

namespace pdesharp {

struct PatchError : Error {
    enum class Kind { malformed, context_mismatch, overlapping_hunks };
    Kind kind;
    PatchError(Kind k, const std::string& what) : Error(what), kind(k) {}
};

struct DiffLine {
    char tag;  // ' ' context, '-' removal, '+' addition
    std::string text;
    bool no_newline = false;  // "\ No newline at end of file" applied to this line
};

struct Hunk {
    long old_start = 0;  // 1-based; 0 only when old_count == 0 (insert at top)
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::vector<DiffLine> lines;
};

// Parses one single-file unified diff. File headers (---/+++) and the usual
// "diff"/"index" noise lines are tolerated before the first hunk. Throws
// PatchError{malformed} on anything unparseable, including hunk bodies whose
// line counts disagree with their @@ header, and PatchError{overlapping_hunks}
// when old-file ranges are unsorted or overlap.
std::vector<Hunk> parse_unified_diff(const std::string& diff);

// Applies a unified diff to `source` and returns the patched text. Context
// and removal lines must match the source exactly; each hunk is first tried
// at its stated position, then at nearby offsets (the GNU patch behaviour
// with fuzz disabled). An empty diff returns the source unchanged.
std::string apply_patch(const std::string& source, const std::string& diff);

struct DiffStats {
    int hunks = 0;
    int added = 0;
    int removed = 0;
};

// Cheap summary for round reports; parses but does not apply.
DiffStats diff_stats(const std::string& diff);

}  // namespace pdesharp
