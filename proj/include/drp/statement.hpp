#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "drp/errors.hpp"

namespace drp {

// Half-open byte range [start, end) into the source a statement came from.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const Span& a, const Span& b) {
        return a.start == b.start && a.end == b.end;
    }
};

// One `theorem` declaration, split into its header parts. `raw` is the exact
// source slice from the `theorem` keyword up to (not including) the proof
// body; `span` additionally covers whatever proof-body suffix the extractor
// consumed, so `source.substr(span.start, ...)` == raw + suffix.
struct TheoremStatement {
    std::string name;
    std::string binders; // trimmed; empty when the declaration has no binders
    std::string goal;    // verbatim text after the goal colon, untrimmed
    std::string raw;
    Span span;
};

// Whitespace-insensitive identity for a statement. `text` keeps the original
// name; `digest` is computed with the name blanked so that renames of the
// same statement collide.
struct CanonicalStatement {
    std::string text;   // "theorem <name> <binders> : <goal>", whitespace-collapsed
    std::string digest; // sha256 hex over text with <name> replaced by "_"
};

enum class ExtractionMode { Regex, Balanced };

struct ExtractionOptions {
    ExtractionMode mode = ExtractionMode::Balanced;
    // Balanced mode only: keep just declarations whose proof body is exactly
    // `by sorry`. Disable to ingest fully proved files (fixtures, datasets).
    bool require_sorry_body = true;
};

const char* extraction_mode_name(ExtractionMode mode);
ExtractionMode extraction_mode_from_name(std::string_view name); // throws ConfigError

// Scans free-form text (model output, .lean files) for theorem statements.
// Never throws on malformed input: regions that do not scan are skipped.
//
// Regex mode reproduces the naive published pattern `theorem (.*?):= by sorry`
// (dot matches newlines, lazy capture, leftmost match, scan resumes after each
// match). Balanced mode walks the text with a delimiter-aware scanner —
// tracking () [] {} and the Unicode anonymous-constructor brackets ⟨ ⟩ — and
// accepts a declaration only when a top-level goal colon is found before a
// top-level `:=` whose proof token sequence begins with `by`.
std::vector<TheoremStatement> extract_lemma_statements(std::string_view source,
                                                       const ExtractionOptions& options);
std::vector<TheoremStatement> extract_lemma_statements(std::string_view source,
                                                       ExtractionMode mode);

// Splits a single declaration (starting with the `theorem` keyword, proof body
// excluded) into name/binders/goal using the balanced scanner. Throws
// ParseError — with the byte offset where scanning failed — on missing name,
// unbalanced delimiters, or a missing top-level goal colon.
TheoremStatement parse_theorem_declaration(std::string_view raw);

// Whitespace-collapsed canonical form and its name-blind digest.
CanonicalStatement normalize_statement(const TheoremStatement& stmt);

// Copy of `stmt` carrying `new_name`, with `raw` regenerated from parts.
// Throws InvalidIdentifier when `new_name` is empty or contains whitespace.
TheoremStatement rename_theorem(const TheoremStatement& stmt, std::string_view new_name);

// --- text utilities shared across modules ---

// Collapses every run of whitespace to a single space and trims the ends.
std::string collapse_whitespace(std::string_view text);

std::string trim(std::string_view text);

bool is_valid_utf8(std::string_view text);

// True when `text` contains `sorry` or `admit` as a standalone token (the
// neighbouring bytes are not ASCII identifier characters). Non-ASCII
// neighbours do NOT shield a hit: the scan stays conservative and flags it.
bool contains_sorry_token(std::string_view text);

} // namespace drp
