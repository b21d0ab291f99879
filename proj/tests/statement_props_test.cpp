#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "drp/statement.hpp"
#include "support/reference_regex.hpp"

using namespace drp;
using drp::test::reference_regex_matches;

namespace {

struct Gen {
    std::mt19937_64 rng;

    explicit Gen(std::uint64_t seed) : rng(seed) {}

    std::size_t pick(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }

    bool chance(double p) { return std::uniform_real_distribution<>(0.0, 1.0)(rng) < p; }

    std::string name() {
        static const char* stems[] = {"aux",  "step",  "lemma_like", "bound",
                                      "prop", "claim", "bridge",     "final"};
        std::string n = stems[pick(8)];
        n += '_';
        n += std::to_string(pick(1000));
        if (chance(0.2)) n += "₁"; // subscript to stress unicode names
        if (chance(0.1)) n += '\'';
        return n;
    }

    std::string binders() {
        static const char* pool[] = {
            "(a : Nat)",
            "(x y : ℝ)",
            "{α : Type*}",
            "[DecidableEq α]",
            "(h : x ≤ y)",
            "(p : ℕ × ℕ)",
            "(h2 : p = ⟨1, 2⟩)",
            "(f : ℤ → ℤ)",
            "(hf : ∀ a b : ℤ, f (a + b) = f a + f b)",
            "(h3 : (let k := 2; k) = 2)",
        };
        std::string out;
        std::size_t n = pick(4);
        for (std::size_t i = 0; i < n; ++i) {
            if (!out.empty()) out += chance(0.3) ? "\n    " : " ";
            out += pool[pick(10)];
        }
        return out;
    }

    std::string goal() {
        static const char* pool[] = {
            "x = x",
            "a + 0 = a",
            "∀ n : ℕ, n ≤ n + 1",
            "(∃ m : ℤ, x = 2 * m) ↔ Even x",
            "f 0 = 0",
            "p.1 ≤ p.2 + 1",
            "⌊x⌋ = 0",
            "(x - y + z) * (y - z + x) ≤ x * y * z",
        };
        return pool[pick(8)];
    }

    std::string ws() {
        static const char* pool[] = {" ", "  ", "\n", "\n  ", "\t", " \n    "};
        return pool[pick(6)];
    }

    // Free-form filler that never contains the keyword or a proof terminator.
    std::string junk() {
        static const char* pool[] = {
            "-- strategy comment\n",
            "We first bound the sum.\n",
            "/- block note -/\n",
            "import Mathlib\n",
            "open BigOperators Real\n",
            "set_option maxHeartbeats 0\n",
            "#check Nat.succ\n",
            "example : True := trivial\n",
        };
        return pool[pick(8)];
    }
};

struct Rendered {
    std::string text;
    std::string name;
    std::string binders;
    std::string goal_slice; // verbatim bytes between ':' and ":="
};

Rendered render_statement(Gen& g, bool sorry_body) {
    Rendered r;
    r.name = g.name();
    r.binders = g.binders();
    std::string goal = g.goal();

    r.text = "theorem";
    r.text += g.ws();
    r.text += r.name;
    if (!r.binders.empty()) {
        r.text += g.ws();
        r.text += r.binders;
    }
    r.goal_slice = g.ws() + goal + g.ws();
    r.text += g.chance(0.2) ? ":" : " :";
    r.text += r.goal_slice;
    r.text += ":=";
    r.text += g.chance(0.8) ? " " : "";
    r.text += "by";
    if (sorry_body) {
        r.text += g.chance(0.7) ? " " : "\n  ";
        r.text += "sorry";
    } else {
        r.text += "\n  simp\n  linarith";
    }
    return r;
}

} // namespace

TEST_CASE("random statements extract with exact name, binders, and goal bytes") {
    Gen g(20240817);
    for (int iter = 0; iter < 500; ++iter) {
        auto r = render_statement(g, /*sorry_body=*/true);
        CAPTURE(iter);
        CAPTURE(r.text);
        auto got = extract_lemma_statements(r.text, ExtractionMode::Balanced);
        REQUIRE(got.size() == 1);
        CHECK(got[0].name == r.name);
        CHECK(got[0].binders == r.binders);
        CHECK(got[0].goal == r.goal_slice);

        auto reparsed = parse_theorem_declaration(got[0].raw);
        CHECK(reparsed.name == got[0].name);
        CHECK(reparsed.binders == got[0].binders);
        CHECK(reparsed.goal == got[0].goal);

        auto canonical = normalize_statement(got[0]);
        auto renamed = rename_theorem(got[0], "xx_" + std::to_string(iter));
        CHECK(normalize_statement(renamed).digest == canonical.digest);
    }
}

TEST_CASE("documents with many statements extract in order with junk between") {
    Gen g(99);
    for (int iter = 0; iter < 200; ++iter) {
        std::string doc;
        std::vector<std::string> names;
        std::size_t statements = 1 + g.pick(6);
        for (std::size_t i = 0; i < statements; ++i) {
            doc += g.junk();
            auto r = render_statement(g, /*sorry_body=*/true);
            names.push_back(r.name);
            doc += r.text;
            doc += "\n";
        }
        doc += g.junk();

        CAPTURE(iter);
        auto got = extract_lemma_statements(doc, ExtractionMode::Balanced);
        REQUIRE(got.size() == names.size());
        for (std::size_t i = 0; i < names.size(); ++i) {
            CHECK(got[i].name == names[i]);
        }
        std::size_t prev = 0;
        for (const auto& st : got) {
            CHECK(st.span.start >= prev);
            prev = st.span.end;
        }
    }
}

TEST_CASE("regex mode agrees with the reference engine on generated documents") {
    Gen g(4242);
    for (int iter = 0; iter < 300; ++iter) {
        std::string doc;
        std::size_t blocks = 1 + g.pick(8);
        for (std::size_t i = 0; i < blocks; ++i) {
            if (g.chance(0.4)) doc += g.junk();
            auto r = render_statement(g, /*sorry_body=*/g.chance(0.7));
            doc += r.text;
            doc += "\n";
        }

        CAPTURE(iter);
        auto mine = extract_lemma_statements(doc, ExtractionMode::Regex);
        auto ref = reference_regex_matches(doc);
        REQUIRE(mine.size() == ref.size());
        for (std::size_t i = 0; i < mine.size(); ++i) {
            CHECK(mine[i].span.start == ref[i].begin);
            CHECK(mine[i].span.end == ref[i].end);
            CHECK(mine[i].raw == "theorem " + ref[i].capture);
        }
    }
}

TEST_CASE("extraction never throws or goes out of bounds on byte fuzz") {
    std::mt19937_64 rng(777);
    const std::string alphabet =
        "theorem by sorry:=()[]{}⟨⟩ \n\tℝℕ_abc'";
    for (int iter = 0; iter < 2000; ++iter) {
        std::string doc;
        std::size_t len = rng() % 160;
        for (std::size_t i = 0; i < len; ++i) {
            if (rng() % 16 == 0) {
                doc.push_back(static_cast<char>(rng() & 0xff)); // raw byte noise
            } else {
                doc.push_back(alphabet[rng() % alphabet.size()]);
            }
        }
        for (auto mode : {ExtractionMode::Regex, ExtractionMode::Balanced}) {
            auto got = extract_lemma_statements(doc, mode);
            for (const auto& st : got) {
                CHECK(st.span.end <= doc.size());
                CHECK(st.span.start < st.span.end);
                CHECK_FALSE(st.name.empty());
            }
        }
        ExtractionOptions opts;
        opts.require_sorry_body = false;
        (void)extract_lemma_statements(doc, opts);
    }
}

TEST_CASE("parse failures always carry an in-range offset") {
    std::mt19937_64 rng(31337);
    const std::string alphabet = "theorem :=by()[]x \n";
    for (int iter = 0; iter < 2000; ++iter) {
        std::string doc = "theorem";
        std::size_t len = rng() % 40;
        for (std::size_t i = 0; i < len; ++i) {
            doc.push_back(alphabet[rng() % alphabet.size()]);
        }
        try {
            auto st = parse_theorem_declaration(doc);
            CHECK_FALSE(st.name.empty());
        } catch (const ParseError& e) {
            CHECK(e.offset() <= doc.size());
        }
    }
}

TEST_CASE("collapse_whitespace is idempotent and minimal") {
    std::mt19937_64 rng(5150);
    const std::string alphabet = "ab c\t\nd  eℝ";
    for (int iter = 0; iter < 1000; ++iter) {
        std::string s;
        std::size_t len = rng() % 60;
        for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        auto once = collapse_whitespace(s);
        CHECK(collapse_whitespace(once) == once);
        CHECK(once.find("  ") == std::string::npos);
        if (!once.empty()) {
            CHECK(once.front() != ' ');
            CHECK(once.back() != ' ');
        }
    }
}

TEST_CASE("token scan finds planted placeholders and skips embedded ones") {
    std::mt19937_64 rng(8080);
    static const char* shields = "abcdefghijklmnopqrstuvwxyz0123456789_'";
    for (int iter = 0; iter < 1000; ++iter) {
        bool plant = rng() % 2 == 0;
        const char* word = rng() % 2 == 0 ? "sorry" : "admit";
        std::string doc = "theorem x : T := by\n  nlinarith [sq_nonneg a]\n";
        if (plant) {
            doc += rng() % 2 == 0 ? " " : "(";
            doc += word;
            doc += rng() % 2 == 0 ? " " : ")";
        } else {
            doc += shields[rng() % 38];
            doc += word;
            doc += shields[rng() % 38];
        }
        CHECK(contains_sorry_token(doc) == plant);
    }
}
