#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "drp/checker.hpp"
#include "drp/prover.hpp"
#include "drp/statement.hpp"

using namespace drp;

namespace {

const std::string kPreamble = "import Mathlib\n\nopen Nat\n";

TheoremStatement make_lemma(const std::string& name, const std::string& tail) {
    return parse_theorem_declaration("theorem " + name + " " + tail);
}

CandidateLemma make_candidate(const std::string& name, const std::string& tail) {
    CandidateLemma c;
    c.statement = make_lemma(name, tail);
    c.canonical = normalize_statement(c.statement);
    c.provenance.reasoner_model = "mock";
    c.provenance.extraction_mode = "balanced";
    return c;
}

} // namespace

TEST_CASE("attempt budget defaults and validation") {
    AttemptBudget budget;
    CHECK(budget.k == 128);
    CHECK(budget.per_attempt_timeout == doctest::Approx(300.0));
    CHECK_FALSE(budget.total_deadline.has_value());
    CHECK_NOTHROW(budget.validate());

    budget.k = 0;
    CHECK_THROWS_AS(budget.validate(), ConfigError);
    budget = AttemptBudget{};
    budget.per_attempt_timeout = 0.0;
    CHECK_THROWS_AS(budget.validate(), ConfigError);
    budget = AttemptBudget{};
    budget.total_deadline = -1.0;
    CHECK_THROWS_AS(budget.validate(), ConfigError);
}

TEST_CASE("compose_check_source renders preamble, declaration, and body") {
    TheoremStatement lemma = make_lemma("lem_a", "(n : ℕ) : n + 0 = n");
    std::string source = compose_check_source("import Mathlib\n\n", lemma, "by\n  simp");
    CHECK(source == "import Mathlib\n\ntheorem lem_a (n : ℕ) : n + 0 = n := by\n  simp\n");
}

TEST_CASE("finalize_check maps replies through the soundness gate") {
    const std::string clean_source =
        "import Mathlib\n\ntheorem t (n : ℕ) : n = n := by\n  rfl\n";

    CheckerReply ok_reply{ReplyStatus::Reply, true, {}, 1234, ""};
    CheckResult ok = finalize_check("a:1", ok_reply, clean_source);
    CHECK(ok.verdict == Verdict::Ok);
    CHECK(ok.attempt_id == "a:1");
    CHECK(ok.elapsed_s == doctest::Approx(1.234));
    CHECK_FALSE(ok.contains_sorry);

    CheckerReply rejected{ReplyStatus::Reply, false,
                          {{"error", "unsolved goals"}}, 10, ""};
    CheckResult err = finalize_check("a:2", rejected, clean_source);
    CHECK(err.verdict == Verdict::ProofError);
    REQUIRE(err.messages.size() == 1);
    CHECK(err.messages[0] == "error: unsolved goals");

    // ok=true but an error-severity diagnostic still fails the gate.
    CheckerReply lying{ReplyStatus::Reply, true, {{"error", "kernel mismatch"}}, 10, ""};
    CHECK(finalize_check("a:3", lying, clean_source).verdict == Verdict::ProofError);

    // A warning alone does not fail it.
    CheckerReply warned{ReplyStatus::Reply, true, {{"warning", "slow elaboration"}}, 10, ""};
    CHECK(finalize_check("a:4", warned, clean_source).verdict == Verdict::Ok);

    CheckerReply timeout{ReplyStatus::TimedOut, false, {}, 0, "killed after 1s"};
    CHECK(finalize_check("a:5", timeout, clean_source).verdict == Verdict::Timeout);

    CheckerReply crashed{ReplyStatus::Crashed, false, {}, 0, "worker closed stdout"};
    CHECK(finalize_check("a:6", crashed, clean_source).verdict == Verdict::CheckerCrash);
}

TEST_CASE("the gate rejects placeholder tokens in source or diagnostics") {
    const std::string placeholder_source =
        "import Mathlib\n\ntheorem t (n : ℕ) : n = n := by\n  sorry\n";
    CheckerReply ok_reply{ReplyStatus::Reply, true, {}, 5, ""};

    CheckResult gated = finalize_check("a:1", ok_reply, placeholder_source);
    CHECK(gated.verdict == Verdict::ProofError);
    CHECK(gated.contains_sorry);

    const std::string admit_source =
        "import Mathlib\n\ntheorem t (n : ℕ) : n = n := by\n  admit\n";
    CHECK(finalize_check("a:2", ok_reply, admit_source).contains_sorry);

    // The token may also arrive only through a diagnostic.
    const std::string clean = "import Mathlib\n\ntheorem t (n : ℕ) : n = n := by\n  rfl\n";
    CheckerReply warned{ReplyStatus::Reply, true,
                        {{"warning", "declaration uses 'sorry'"}}, 5, ""};
    CheckResult via_diag = finalize_check("a:3", warned, clean);
    CHECK(via_diag.verdict == Verdict::ProofError);
    CHECK(via_diag.contains_sorry);

    // Identifier-embedded occurrences do not count...
    const std::string ident = "import Mathlib\n\ntheorem sorry_free (n : ℕ) : n = n := by\n  rfl\n";
    CHECK_FALSE(finalize_check("a:4", ok_reply, ident).contains_sorry);
    // ...but non-ASCII neighbors are treated conservatively as boundaries.
    const std::string uni = "import Mathlib\n\ntheorem t (n : ℕ) : n = n := by\n  sorry·next\n";
    CHECK(finalize_check("a:5", ok_reply, uni).contains_sorry);
}

TEST_CASE("the oracle gate scans only the generated body") {
    // Stub declarations in the surrounding context trigger placeholder
    // warnings by design; those must not veto an otherwise-clean attempt.
    CheckerReply warned{ReplyStatus::Reply, true,
                        {{"warning", "declaration uses 'sorry'"}}, 5, ""};
    CheckResult tolerated = finalize_oracle_check("o:1", warned, "by\n  nlinarith");
    CHECK(tolerated.verdict == Verdict::Ok);
    CHECK_FALSE(tolerated.contains_sorry);
    REQUIRE(tolerated.messages.size() == 1);
    CHECK(tolerated.messages[0] == "warning: declaration uses 'sorry'");

    // A placeholder in the generated body itself still rejects.
    CheckResult body_hit = finalize_oracle_check("o:2", warned, "by\n  sorry");
    CHECK(body_hit.verdict == Verdict::ProofError);
    CHECK(body_hit.contains_sorry);

    // So do error diagnostics and transport failures.
    CheckerReply errored{ReplyStatus::Reply, true, {{"error", "type mismatch"}}, 5, ""};
    CHECK(finalize_oracle_check("o:3", errored, "by rfl").verdict == Verdict::ProofError);
    CheckerReply crashed{ReplyStatus::Crashed, false, {}, 0, "worker exited"};
    CHECK(finalize_oracle_check("o:4", crashed, "by rfl").verdict == Verdict::CheckerCrash);
    CheckerReply late{ReplyStatus::TimedOut, false, {}, 0, "timed out"};
    CHECK(finalize_oracle_check("o:5", late, "by rfl").verdict == Verdict::Timeout);
}

TEST_CASE("mock checker follows scripted success, crash, and timeout attempts") {
    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockRule rule;
    rule.succeed_on_attempt = 3;
    rule.crash_on = {1};
    rule.timeout_on = {2};
    backend.set_rule("lem_a", rule);

    auto session = backend.open_session();
    TheoremStatement lemma = make_lemma("lem_a", "(n : ℕ) : n + 0 = n");
    std::string source = compose_check_source(kPreamble, lemma, "by simp");

    CheckerReply first = session->check("x:1", source, 10.0);
    CHECK(first.status == ReplyStatus::Crashed);
    CHECK(session->restarts() == 1);

    CheckerReply second = session->check("x:2", source, 10.0);
    CHECK(second.status == ReplyStatus::TimedOut);
    CHECK(session->restarts() == 2);

    CheckerReply third = session->check("x:3", source, 10.0);
    CHECK(third.status == ReplyStatus::Reply);
    CHECK(third.ok);

    // Unscripted declarations take the default.
    TheoremStatement other = make_lemma("lem_unscripted", "(n : ℕ) : n = n");
    CheckerReply fallback =
        session->check("x:4", compose_check_source(kPreamble, other, "by rfl"), 10.0);
    CHECK(fallback.status == ReplyStatus::Reply);
    CHECK_FALSE(fallback.ok);
}

TEST_CASE("mock checker simulated latency beyond the timeout reads as TimedOut") {
    MockCheckerBackend backend;
    backend.set_default_ok(true);
    MockRule rule;
    rule.succeed_on_attempt = 1;
    rule.latency_s = 5.0; // simulated — no real sleep
    backend.set_rule("lem_slow", rule);

    auto session = backend.open_session();
    TheoremStatement lemma = make_lemma("lem_slow", "(n : ℕ) : n = n");
    std::string source = compose_check_source(kPreamble, lemma, "by rfl");
    CheckerReply reply = session->check("x:1", source, 1.0);
    CHECK(reply.status == ReplyStatus::TimedOut);
}

TEST_CASE("verify_lemma stops at the first OK and reports true attempt counts") {
    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockRule rule;
    rule.succeed_on_attempt = 4;
    backend.set_rule("lem_a", rule);

    MockProofGenerator generator;
    generator.set_default_body("by\n  omega");

    TheoremStatement lemma = make_lemma("lem_a", "(n : ℕ) : n + 0 = n");
    AttemptBudget budget;
    budget.k = 8;
    auto session = backend.open_session();
    VerificationOutcome outcome = verify_lemma(lemma, budget, *session, generator, kPreamble);

    CHECK(outcome.status == LemmaStatus::Proved);
    CHECK(outcome.attempts_used == 4);
    CHECK(outcome.results.size() == 4);
    CHECK(outcome.winning_proof == std::optional<std::string>("by\n  omega"));
    CHECK(outcome.digest == normalize_statement(lemma).digest);
    // Generation is lazy: exactly one call per attempt, none beyond the win.
    CHECK(generator.calls() == 4);
    for (int i = 0; i < 3; ++i) CHECK(outcome.results[i].verdict == Verdict::ProofError);
    CHECK(outcome.results[3].verdict == Verdict::Ok);
    // Attempt ids embed the digest prefix and 1-based attempt number.
    CHECK(outcome.results[0].attempt_id == outcome.digest.substr(0, 12) + ":1");
    CHECK(outcome.results[3].attempt_id == outcome.digest.substr(0, 12) + ":4");
}

TEST_CASE("verify_lemma exhausts k without a win and stays UNPROVED") {
    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockProofGenerator generator;
    TheoremStatement lemma = make_lemma("lem_never", "(n : ℕ) : n = n + 1");
    AttemptBudget budget;
    budget.k = 5;
    auto session = backend.open_session();
    VerificationOutcome outcome = verify_lemma(lemma, budget, *session, generator, kPreamble);
    CHECK(outcome.status == LemmaStatus::Unproved);
    CHECK_FALSE(outcome.winning_proof.has_value());
    CHECK(outcome.attempts_used == 5);
    CHECK(outcome.results.size() == 5);
    CHECK(generator.calls() == 5);
}

TEST_CASE("poisoned generation attempts count against the budget as proof errors") {
    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockRule rule;
    rule.succeed_on_attempt = 3;
    backend.set_rule("lem_p", rule);

    MockProofGenerator generator;
    TheoremStatement lemma = make_lemma("lem_p", "(n : ℕ) : n ≤ n");
    std::string digest = normalize_statement(lemma).digest;
    generator.set_poison(digest, {1, 2});

    AttemptBudget budget;
    budget.k = 8;
    auto session = backend.open_session();
    VerificationOutcome outcome = verify_lemma(lemma, budget, *session, generator, kPreamble);

    // Attempts 1 and 2 never reach the checker, so the scripted success at
    // checker-attempt 3 lands on overall attempt 5.
    CHECK(outcome.status == LemmaStatus::Proved);
    CHECK(outcome.attempts_used == 5);
    CHECK(outcome.results[0].verdict == Verdict::ProofError);
    REQUIRE(!outcome.results[0].messages.empty());
    CHECK(outcome.results[0].messages[0].find("generation error") == 0);
    CHECK(outcome.results[4].verdict == Verdict::Ok);
}

TEST_CASE("a total deadline converts remaining attempts into EXHAUSTED_DEADLINE") {
    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockProofGenerator generator;
    TheoremStatement lemma = make_lemma("lem_d", "(n : ℕ) : n = n");

    AttemptBudget budget;
    budget.k = 100;
    budget.total_deadline = 0.0; // expires before the first dispatch
    auto session = backend.open_session();
    VerificationOutcome outcome = verify_lemma(lemma, budget, *session, generator, kPreamble);
    CHECK(outcome.status == LemmaStatus::ExhaustedDeadline);
    CHECK(outcome.attempts_used == 0);
    CHECK(outcome.results.empty());
    CHECK(generator.calls() == 0);
}

TEST_CASE("generator bodies advance per attempt and the last one repeats") {
    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockRule rule;
    rule.succeed_on_attempt = 4;
    backend.set_rule("lem_seq", rule);

    MockProofGenerator generator;
    TheoremStatement lemma = make_lemma("lem_seq", "(n : ℕ) : 0 + n = n");
    std::string digest = normalize_statement(lemma).digest;
    generator.set_bodies(digest, {"by simp", "by omega"});

    AttemptBudget budget;
    budget.k = 8;
    auto session = backend.open_session();
    VerificationOutcome outcome = verify_lemma(lemma, budget, *session, generator, kPreamble);
    REQUIRE(outcome.status == LemmaStatus::Proved);
    CHECK(outcome.attempts_used == 4);
    CHECK(outcome.winning_proof == std::optional<std::string>("by omega"));
    CHECK(generator.calls_for(digest) == 4);
}

TEST_CASE("check_proof never throws — failures become verdicts") {
    MockCheckerBackend backend;
    backend.set_default_ok(true);
    std::string source = "import Mathlib\n\ntheorem ok (n : ℕ) : n = n := by rfl\n";
    CheckResult fine = check_proof(source, backend, 10.0);
    CHECK(fine.verdict == Verdict::Ok);

    ExternalCheckerConfig broken;
    broken.command = "/nonexistent/worker/binary";
    ExternalCheckerBackend external(broken);
    CheckResult crashed = check_proof(source, external, 2.0);
    CHECK(crashed.verdict == Verdict::CheckerCrash);
}

TEST_CASE("verify_batch yields identical outcomes across parallelism levels") {
    std::vector<CandidateLemma> lemmas;
    lemmas.push_back(make_candidate("lem_one", "(n : ℕ) : n + 0 = n"));
    lemmas.push_back(make_candidate("lem_two", "(n : ℕ) : 0 + n = n"));
    lemmas.push_back(make_candidate("lem_three", "(n : ℕ) : n ≤ n + 1"));
    lemmas.push_back(make_candidate("lem_four", "(n : ℕ) : n * 1 = n"));
    lemmas.push_back(make_candidate("lem_five", "(n : ℕ) : n = n + 1"));

    auto run = [&](int parallelism) {
        MockCheckerBackend backend;
        backend.set_default_ok(false);
        MockRule r1;
        r1.succeed_on_attempt = 1;
        backend.set_rule("lem_one", r1);
        MockRule r2;
        r2.succeed_on_attempt = 3;
        backend.set_rule("lem_two", r2);
        MockRule r3;
        r3.succeed_on_attempt = 2;
        r3.crash_on = {1};
        backend.set_rule("lem_three", r3);
        MockRule r4;
        r4.succeed_on_attempt = 4;
        r4.timeout_on = {2};
        backend.set_rule("lem_four", r4);

        MockProofGenerator generator;
        AttemptBudget budget;
        budget.k = 6;
        return verify_batch(lemmas, budget, backend, generator, kPreamble, parallelism);
    };

    auto seq = run(1);
    auto par4 = run(4);
    auto par16 = run(16);

    REQUIRE(seq.size() == 5);
    CHECK(seq == par4);
    CHECK(seq == par16);

    const auto& one = seq.at(lemmas[0].canonical.digest);
    CHECK(one.status == LemmaStatus::Proved);
    CHECK(one.attempts_used == 1);
    const auto& three = seq.at(lemmas[2].canonical.digest);
    CHECK(three.status == LemmaStatus::Proved);
    CHECK(three.results[0].verdict == Verdict::CheckerCrash);
    const auto& five = seq.at(lemmas[4].canonical.digest);
    CHECK(five.status == LemmaStatus::Unproved);
    CHECK(five.attempts_used == 6);
}

TEST_CASE("a lemma that crashes the checker every time cannot poison its neighbors") {
    std::vector<CandidateLemma> lemmas;
    lemmas.push_back(make_candidate("lem_toxic", "(n : ℕ) : n < n"));
    lemmas.push_back(make_candidate("lem_fine", "(n : ℕ) : n + 0 = n"));

    MockCheckerBackend backend;
    backend.set_default_ok(false);
    MockRule toxic;
    toxic.crash_on = {1, 2, 3, 4};
    backend.set_rule("lem_toxic", toxic);
    MockRule fine;
    fine.succeed_on_attempt = 1;
    backend.set_rule("lem_fine", fine);

    MockProofGenerator generator;
    AttemptBudget budget;
    budget.k = 4;
    auto outcomes = verify_batch(lemmas, budget, backend, generator, kPreamble, 2);

    const auto& toxic_out = outcomes.at(lemmas[0].canonical.digest);
    CHECK(toxic_out.status == LemmaStatus::Unproved);
    CHECK(toxic_out.attempts_used == 4);
    for (const CheckResult& r : toxic_out.results) CHECK(r.verdict == Verdict::CheckerCrash);

    const auto& fine_out = outcomes.at(lemmas[1].canonical.digest);
    CHECK(fine_out.status == LemmaStatus::Proved);
    CHECK(fine_out.attempts_used == 1);
}
