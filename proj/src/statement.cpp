#include "drp/statement.hpp"

#include <utility>

#include "drp/hash.hpp"

namespace drp {

namespace {

constexpr std::string_view kKeyword = "theorem";
constexpr std::string_view kAngleOpen = "⟨";  // anonymous-constructor bracket
constexpr std::string_view kAngleClose = "⟩";

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ident_ascii(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '\'';
}

// If text[i] starts a tracked delimiter, reports its kind ('(', '[', '{' or
// '<' for the angle pair), whether it opens, and the delimiter's byte length.
// Returns 0 when text[i] is not a delimiter.
std::size_t delimiter_at(std::string_view text, std::size_t i, char& kind, bool& open) {
    switch (text[i]) {
    case '(': kind = '('; open = true; return 1;
    case ')': kind = '('; open = false; return 1;
    case '[': kind = '['; open = true; return 1;
    case ']': kind = '['; open = false; return 1;
    case '{': kind = '{'; open = true; return 1;
    case '}': kind = '{'; open = false; return 1;
    default: break;
    }
    if (text.compare(i, kAngleOpen.size(), kAngleOpen) == 0) {
        kind = '<';
        open = true;
        return kAngleOpen.size();
    }
    if (text.compare(i, kAngleClose.size(), kAngleClose) == 0) {
        kind = '<';
        open = false;
        return kAngleClose.size();
    }
    return 0;
}

struct HeaderParts {
    std::size_t name_begin = 0;
    std::size_t name_end = 0;
    std::size_t goal_colon = 0;  // position of the ':' introducing the goal
    std::size_t header_end = 0;  // position of the top-level ":=", or text end
    bool has_assign = false;     // header_end points at ":="
};

// Walks one declaration header starting at text[from] (which must be the
// `theorem` keyword). Throws ParseError with the offending byte offset.
HeaderParts scan_header(std::string_view text, std::size_t from) {
    std::size_t i = from;
    if (text.compare(i, kKeyword.size(), kKeyword) != 0) {
        throw ParseError("expected 'theorem' keyword", i);
    }
    i += kKeyword.size();
    if (i < text.size() && !is_space(text[i])) {
        throw ParseError("expected whitespace after 'theorem'", i);
    }
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) {
        throw ParseError("missing theorem name", i);
    }
    {
        char kind = 0;
        bool open = false;
        if (delimiter_at(text, i, kind, open) != 0 || text[i] == ':') {
            throw ParseError("missing theorem name", i);
        }
    }

    HeaderParts parts;
    parts.name_begin = i;
    while (i < text.size() && !is_space(text[i]) && text[i] != ':') {
        char kind = 0;
        bool open = false;
        if (delimiter_at(text, i, kind, open) != 0) break;
        ++i;
    }
    parts.name_end = i;
    if (text.substr(parts.name_begin, parts.name_end - parts.name_begin) == kKeyword) {
        // `theorem` is reserved in Lean, so a second keyword here means the
        // first one was prose (e.g. a comment ending "... theorem").
        throw ParseError("reserved keyword where name expected", parts.name_begin);
    }

    // Binders and goal: track delimiter nesting; the first colon at depth
    // zero introduces the goal, and a depth-zero ":=" ends the header.
    std::vector<std::pair<char, std::size_t>> stack;
    bool have_goal_colon = false;
    parts.header_end = text.size();
    while (i < text.size()) {
        char kind = 0;
        bool open = false;
        std::size_t n = delimiter_at(text, i, kind, open);
        if (n != 0) {
            if (open) {
                stack.emplace_back(kind, i);
            } else {
                if (stack.empty() || stack.back().first != kind) {
                    throw ParseError("mismatched delimiter", i);
                }
                stack.pop_back();
            }
            i += n;
            continue;
        }
        if (text[i] == ':' && stack.empty()) {
            if (i + 1 < text.size() && text[i + 1] == '=') {
                parts.header_end = i;
                parts.has_assign = true;
                break;
            }
            if (!have_goal_colon) {
                have_goal_colon = true;
                parts.goal_colon = i;
            }
        }
        ++i;
    }
    if (!stack.empty()) {
        throw ParseError("unbalanced delimiter", stack.back().second);
    }
    if (!have_goal_colon) {
        throw ParseError("missing top-level goal colon", parts.header_end);
    }
    return parts;
}

TheoremStatement make_statement(std::string_view text, std::size_t from, const HeaderParts& p,
                                std::size_t span_end) {
    TheoremStatement st;
    st.name = std::string(text.substr(p.name_begin, p.name_end - p.name_begin));
    st.binders = trim(text.substr(p.name_end, p.goal_colon - p.name_end));
    st.goal = std::string(text.substr(p.goal_colon + 1, p.header_end - (p.goal_colon + 1)));
    st.raw = std::string(text.substr(from, p.header_end - from));
    st.span = Span{from, span_end};
    return st;
}

// Next occurrence of the `theorem` keyword at a token boundary (previous byte
// is not an ASCII identifier character, next byte is whitespace).
std::size_t find_keyword(std::string_view s, std::size_t from) {
    std::size_t i = from;
    while ((i = s.find(kKeyword, i)) != std::string_view::npos) {
        bool left_ok = i == 0 || !is_ident_ascii(static_cast<unsigned char>(s[i - 1]));
        std::size_t after = i + kKeyword.size();
        bool right_ok = after < s.size() && is_space(static_cast<unsigned char>(s[after]));
        if (left_ok && right_ok) return i;
        ++i;
    }
    return std::string_view::npos;
}

// Reads the whitespace-delimited token starting at or after `i`; returns the
// token and leaves `i` just past it.
std::string_view next_token(std::string_view s, std::size_t& i) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t begin = i;
    while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(begin, i - begin);
}

std::vector<TheoremStatement> extract_balanced(std::string_view source, bool require_sorry) {
    std::vector<TheoremStatement> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t i = find_keyword(source, pos);
        if (i == std::string_view::npos) break;

        HeaderParts parts;
        try {
            parts = scan_header(source, i);
        } catch (const ParseError&) {
            pos = i + kKeyword.size();
            continue;
        }
        if (!parts.has_assign) {
            // Ran to end of input without a proof marker: not a declaration.
            pos = i + kKeyword.size();
            continue;
        }

        std::size_t cursor = parts.header_end + 2; // past ":="
        if (next_token(source, cursor) != "by") {
            // Term-mode proof (`:= <expr>`): not a tactic proof, skip it.
            pos = parts.header_end + 2;
            continue;
        }
        std::size_t body_cursor = cursor;
        bool sorry_body = next_token(source, body_cursor) == "sorry";

        if (sorry_body) {
            out.push_back(make_statement(source, i, parts, body_cursor));
            pos = body_cursor;
        } else {
            if (!require_sorry) {
                out.push_back(make_statement(source, i, parts, parts.header_end));
            }
            pos = parts.header_end + 2;
        }
    }
    return out;
}

std::vector<TheoremStatement> extract_regex(std::string_view source) {
    // Byte-equivalent to the ECMAScript pattern `theorem ([\s\S]*?):= by sorry`
    // scanned left to right: the match starts at the first "theorem " that has
    // a later ":= by sorry", the lazy capture ends at the first such
    // terminator, and scanning resumes after the full match.
    constexpr std::string_view kOpen = "theorem ";
    constexpr std::string_view kClose = ":= by sorry";

    std::vector<TheoremStatement> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t i = source.find(kOpen, pos);
        if (i == std::string_view::npos) break;
        std::size_t j = source.find(kClose, i + kOpen.size());
        if (j == std::string_view::npos) break;
        std::size_t match_end = j + kClose.size();
        std::string_view capture = source.substr(i + kOpen.size(), j - (i + kOpen.size()));

        TheoremStatement st;
        bool structured = false;
        try {
            HeaderParts parts = scan_header(source.substr(i, j - i), 0);
            if (!parts.has_assign) {
                st = make_statement(source.substr(i, j - i), 0, parts, j - i);
                structured = true;
            }
        } catch (const ParseError&) {
            // fall through to the token split below
        }
        if (!structured) {
            // Fidelity fallback for captures the balanced scanner rejects:
            // first whitespace-delimited token is the name, the rest is kept
            // verbatim as the goal.
            std::size_t c = 0;
            std::string_view name = next_token(capture, c);
            if (name.empty()) {
                pos = match_end;
                continue;
            }
            st.name = std::string(name);
            st.binders.clear();
            st.goal = std::string(capture.substr(c));
        }
        st.raw = std::string(source.substr(i, j - i));
        st.span = Span{i, match_end};
        out.push_back(std::move(st));
        pos = match_end;
    }
    return out;
}

} // namespace

const char* extraction_mode_name(ExtractionMode mode) {
    return mode == ExtractionMode::Regex ? "regex" : "balanced";
}

ExtractionMode extraction_mode_from_name(std::string_view name) {
    if (name == "regex") return ExtractionMode::Regex;
    if (name == "balanced") return ExtractionMode::Balanced;
    throw ConfigError("unknown extraction mode '" + std::string(name) +
                      "' (expected 'regex' or 'balanced')");
}

std::vector<TheoremStatement> extract_lemma_statements(std::string_view source,
                                                       const ExtractionOptions& options) {
    if (options.mode == ExtractionMode::Regex) return extract_regex(source);
    return extract_balanced(source, options.require_sorry_body);
}

std::vector<TheoremStatement> extract_lemma_statements(std::string_view source,
                                                       ExtractionMode mode) {
    return extract_lemma_statements(source, ExtractionOptions{mode, true});
}

TheoremStatement parse_theorem_declaration(std::string_view raw) {
    HeaderParts parts = scan_header(raw, 0);
    TheoremStatement st = make_statement(raw, 0, parts, raw.size());
    // Callers hand us the bare statement; keep their bytes as-is even if a
    // proof marker slipped in (goal splitting above already stopped there).
    st.raw = std::string(raw);
    return st;
}

CanonicalStatement normalize_statement(const TheoremStatement& stmt) {
    auto render = [&stmt](std::string_view name) {
        std::string s;
        s.reserve(stmt.binders.size() + stmt.goal.size() + name.size() + 16);
        s += "theorem ";
        s += name;
        s += ' ';
        s += stmt.binders;
        s += " : ";
        s += stmt.goal;
        return collapse_whitespace(s);
    };
    CanonicalStatement canonical;
    canonical.text = render(stmt.name);
    canonical.digest = sha256_hex(render("_"));
    return canonical;
}

TheoremStatement rename_theorem(const TheoremStatement& stmt, std::string_view new_name) {
    if (new_name.empty()) {
        throw InvalidIdentifier("theorem name must not be empty");
    }
    for (char c : new_name) {
        if (is_space(static_cast<unsigned char>(c))) {
            throw InvalidIdentifier("theorem name must not contain whitespace");
        }
    }
    TheoremStatement out = stmt;
    out.name = std::string(new_name);
    out.raw = "theorem ";
    out.raw += new_name;
    if (!stmt.binders.empty()) {
        out.raw += ' ';
        out.raw += stmt.binders;
    }
    out.raw += " :";
    out.raw += stmt.goal;
    return out;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending = false;
    for (char c : text) {
        if (is_space(static_cast<unsigned char>(c))) {
            pending = !out.empty();
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        out.push_back(c);
    }
    return out;
}

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            ++i;
            continue;
        }
        int trailing = 0;
        unsigned cp_min = 0;
        if ((c & 0xe0) == 0xc0) {
            trailing = 1;
            cp_min = 0x80;
        } else if ((c & 0xf0) == 0xe0) {
            trailing = 2;
            cp_min = 0x800;
        } else if ((c & 0xf8) == 0xf0) {
            trailing = 3;
            cp_min = 0x10000;
        } else {
            return false;
        }
        if (text.size() - i < static_cast<std::size_t>(trailing) + 1) return false;
        unsigned cp = c & (0x3fu >> trailing);
        for (int k = 1; k <= trailing; ++k) {
            unsigned char cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3fu);
        }
        if (cp < cp_min || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
        i += trailing + 1;
    }
    return true;
}

bool contains_sorry_token(std::string_view text) {
    // Deliberately tighter boundary class than identifier parsing: an
    // apostrophe neighbor does NOT hide the token, so the quoted form in
    // checker diagnostics ("declaration uses 'sorry'") is caught. The cost is
    // flagging identifiers like sorry' — a safe direction to err.
    auto blocks = [](unsigned char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_';
    };
    for (std::string_view word : {std::string_view("sorry"), std::string_view("admit")}) {
        std::size_t i = 0;
        while ((i = text.find(word, i)) != std::string_view::npos) {
            bool left_ok = i == 0 || !blocks(static_cast<unsigned char>(text[i - 1]));
            std::size_t after = i + word.size();
            bool right_ok =
                after == text.size() || !blocks(static_cast<unsigned char>(text[after]));
            if (left_ok && right_ok) return true;
            ++i;
        }
    }
    return false;
}

} // namespace drp
