#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drp/checker.hpp"
#include "drp/reasoner.hpp"
#include "drp/statement.hpp"
#include "drp/store.hpp"

namespace drp {

// Per-lemma verification budget: up to k attempts, each bounded by
// per_attempt_timeout, the whole lemma optionally bounded by total_deadline.
struct AttemptBudget {
    int k = 128;
    double per_attempt_timeout = 300.0; // seconds
    std::optional<double> total_deadline; // seconds per lemma

    void validate() const; // throws ConfigError
};

enum class Verdict { Ok, ProofError, Timeout, CheckerCrash };

const char* verdict_name(Verdict verdict);

// One attempt's outcome after the soundness gate. Ok requires: a clean reply,
// zero error-severity diagnostics, and no `sorry`/`admit` token anywhere in
// the submitted source or the diagnostics.
struct CheckResult {
    std::string attempt_id;
    Verdict verdict = Verdict::ProofError;
    std::vector<std::string> messages; // "severity: text" (plus transport notes)
    double elapsed_s = 0.0;
    bool contains_sorry = false;

    friend bool operator==(const CheckResult&, const CheckResult&) = default;
};

struct VerificationOutcome {
    std::string digest;
    LemmaStatus status = LemmaStatus::Unproved; // never OracleSorry here
    std::optional<std::string> winning_proof;   // tactic block, present iff Proved
    int attempts_used = 0;
    std::vector<CheckResult> results; // length == attempts_used

    friend bool operator==(const VerificationOutcome&, const VerificationOutcome&) = default;
};

// One generated proof candidate, or a poisoned entry describing why the
// service call failed. Poisoned entries count against k but are never checked.
struct GenOutcome {
    std::optional<std::string> body; // tactic block replacing `sorry`
    std::string error;               // nonempty iff poisoned
};

// Lazily pulled, one call per attempt; implementations must be safe to share
// across verify_batch worker threads.
class ProofGenerator {
public:
    virtual ~ProofGenerator() = default;
    virtual GenOutcome next_candidate(const TheoremStatement& lemma, int attempt) = 0;
    // Run-specific prompt text (e.g. the assembled final-proof request).
    // Scripted generators ignore it.
    virtual void set_prompt_context(const std::string&) {}
};

// Scripted generator: per-key body lists (key = statement name or name-blind
// digest), per-key poisoned attempts, a default body otherwise. Counts every
// call so tests can prove early exit is real.
class MockProofGenerator : public ProofGenerator {
public:
    void set_default_body(std::string body);
    void set_bodies(const std::string& key, std::vector<std::string> bodies);
    void set_poison(const std::string& key, std::set<int> attempts);
    void set_delay_ms(int ms) { delay_ms_ = ms; } // real sleep per call

    // Loads one section ("prover" or "final") of a mock_scripts.json file.
    void load_scripts_json(const std::filesystem::path& file,
                           const std::string& section = "prover");

    GenOutcome next_candidate(const TheoremStatement& lemma, int attempt) override;

    long long calls() const { return calls_.load(); }
    long long calls_for(const std::string& key) const;

private:
    mutable std::mutex mu_;
    std::string default_body_ = "by norm_num";
    std::map<std::string, std::vector<std::string>> bodies_;
    std::map<std::string, std::set<int>> poison_;
    std::map<std::string, long long> per_key_calls_;
    std::atomic<long long> calls_{0};
    int delay_ms_ = 0;
};

// Generator backed by a reasoning service: one request per attempt, the
// response text is adapted into a tactic block.
class ReasonerProofGenerator : public ProofGenerator {
public:
    ReasonerProofGenerator(ReasonerBackend& backend, ReasonerConfig config,
                           std::string prompt_prefix);
    GenOutcome next_candidate(const TheoremStatement& lemma, int attempt) override;
    void set_prompt_context(const std::string& prompt) override { prompt_prefix_ = prompt; }

private:
    ReasonerBackend& backend_;
    ReasonerConfig config_;
    std::string prompt_prefix_;
};

// Complete checkable source for one lemma attempt: preamble, blank line, the
// declaration with `body` in place of `sorry`.
std::string compose_check_source(const std::string& preamble, const TheoremStatement& lemma,
                                 const std::string& body);

// Applies the soundness gate to a transport-level reply.
CheckResult finalize_check(const std::string& attempt_id, const CheckerReply& reply,
                           const std::string& source);

// Gate variant for oracle-stub contexts: scans only the generated body for
// placeholder tokens (the surrounding source carries stubs by design) and
// tolerates diagnostics that mention them at sub-error severity.
CheckResult finalize_oracle_check(const std::string& attempt_id, const CheckerReply& reply,
                                  const std::string& generated_body);

// One-shot convenience: open a session, check, gate. Never throws — every
// failure shape is a verdict.
CheckResult check_proof(const std::string& source, CheckerBackend& backend, double timeout_s);

// Budgeted pass@k verification of one lemma against one session.
VerificationOutcome verify_lemma(const TheoremStatement& lemma, const AttemptBudget& budget,
                                 CheckerSession& session, ProofGenerator& generator,
                                 const std::string& preamble);

// Runs verify_lemma over all lemmas with at most `parallelism` in flight, one
// checker session per worker thread. The result map is keyed by canonical
// digest and is independent of scheduling.
std::map<std::string, VerificationOutcome> verify_batch(const std::vector<CandidateLemma>& lemmas,
                                                        const AttemptBudget& budget,
                                                        CheckerBackend& backend,
                                                        ProofGenerator& generator,
                                                        const std::string& preamble,
                                                        int parallelism);

} // namespace drp
