#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drp/checker.hpp"
#include "drp/prover.hpp"
#include "drp/reasoner.hpp"
#include "drp/statement.hpp"
#include "drp/store.hpp"

namespace drp {

// Version stamp of the context-assembly layout produced by assemble_context.
inline constexpr const char* kAssembleVersion = "assemble/v1";

struct Problem {
    std::string id;
    std::string preamble;    // verbatim text before the main declaration
    TheoremStatement main_theorem;
    std::string source_path;
    std::string source_text; // full file, verbatim

    // Preamble plus the full main declaration ending `:= by sorry` — the text
    // prompts are built from.
    std::string prompt_source() const;
};

// Reads a problem file: its single `:= by sorry` declaration becomes the main
// theorem, everything before it the preamble. Throws ConfigError when the file
// does not contain exactly one such declaration or has no preamble; IoError on
// unreadable files. `id` defaults to the file stem.
Problem load_problem(const std::filesystem::path& path, std::string id = "");

struct FinalLemma {
    std::string name;
    TheoremStatement statement;
    std::string proof; // tactic block
    bool oracle_stub = false;
    std::string digest;
};

struct FinalSource {
    std::string preamble;
    std::vector<FinalLemma> lemmas; // serialization order == list order
    TheoremStatement main_theorem;
    std::string template_version; // kAssembleVersion

    std::string serialize() const; // main theorem keeps its `:= by sorry` slot
    std::string serialize_with_body(const std::string& body) const;
};

struct RenameEvent {
    std::string from;
    std::string to;
    std::string digest;
};

struct AssembleResult {
    FinalSource source;
    std::vector<RenameEvent> renames;
};

// Builds the lemma-prepended context in the given record order. Every record
// must be PROVED — or ORACLE_SORRY when `allow_oracle_stubs` is set. Name
// collisions (against the main theorem or each other) are renamed with a
// `_dup<N>` suffix and reported. Throws UnverifiedLemma otherwise.
AssembleResult assemble_context(const Problem& problem, const std::vector<LemmaRecord>& records,
                                bool allow_oracle_stubs = false);

enum class RunStatus { Solved, Unsolved, Partial };
const char* run_status_name(RunStatus status);

struct StageOneReport {
    int rounds_executed = 0;
    std::vector<std::string> response_paths;
    std::size_t response_count = 0;
    std::size_t extracted = 0;       // statements seen before dedup
    std::size_t candidate_count = 0; // kept candidates across rounds
    std::size_t dedup_count = 0;     // dropped duplicates (in- and cross-round)
    std::size_t renamed = 0;
    std::size_t lemma_keyword_hits = 0;
    std::vector<RequestError> errors;
    double wall_ms = 0.0;
};

struct StageTwoReport {
    std::map<std::string, VerificationOutcome> outcomes; // by canonical digest
    int attempts_total = 0;
    std::size_t proved_count = 0;
    double wall_ms = 0.0;
};

struct StageThreeReport {
    std::string final_source_digest;
    std::string assembly_version;
    std::string prompt_version;
    int attempts_used = 0;
    bool solved = false;
    std::vector<CheckResult> results;
    double wall_ms = 0.0;
};

struct RunReport {
    std::string problem_id;
    RunStatus status = RunStatus::Partial;
    bool sound = true;  // false when oracle stubs were requested
    std::string error;  // nonempty iff status == Partial
    StageOneReport stage1;
    StageTwoReport stage2;
    StageThreeReport stage3;
    std::vector<RenameEvent> renames;
    std::string final_source; // serialized slot form; empty if assembly never ran
    std::optional<std::string> final_proof; // winning body when solved
    nlohmann::ordered_json config_snapshot; // secrets redacted
    std::string created_at;

    nlohmann::ordered_json to_json() const;
    // "<problem_id> <STATUS> candidates=<n> proved=<m> final_attempts=<a>"
    std::string summary_line() const;
};

// Non-owning wiring of the pipeline's collaborators.
struct PipelineDeps {
    ReasonerBackend* reasoner = nullptr;
    CheckerBackend* checker = nullptr;
    ProofGenerator* prover_gen = nullptr;
    ProofGenerator* final_gen = nullptr;
    LemmaStore* store = nullptr;
    std::filesystem::path runs_dir;
    std::function<std::string()> clock = &LemmaStore::now_utc;
};

struct PipelineSettings {
    ReasonerConfig reasoner;
    ReasonerConfig prover_model;
    ReasonerConfig final_model;   // defaults to `reasoner` at config load
    AttemptBudget stage2;
    AttemptBudget final_budget{4, 300.0, std::nullopt};
    int parallelism = 4;
    int rounds = 1;
    bool oracle_sorry = false;
    ExtractionOptions extraction; // Balanced + sorry-only by default
    std::string fault_injection;  // "", "stage1", "stage2", "stage3" (test hook)

    void validate() const;
};

// Stage 1 (and refinement rounds): prompt, request, persist raw responses
// under <runs_dir>/<problem>/round<r>/, then parse. Throws TransportError only
// when zero responses arrived.
std::vector<CandidateLemma> stage1_decompose(const Problem& problem, PipelineDeps& deps,
                                             const PipelineSettings& settings, int round,
                                             const std::vector<TheoremStatement>& feedback,
                                             RunReport& report);

// Stage 2: verify every candidate, persist a record for each (proved or not).
std::vector<LemmaRecord> stage2_filter(const std::vector<CandidateLemma>& candidates,
                                       const Problem& problem, PipelineDeps& deps,
                                       const PipelineSettings& settings, RunReport& report);

// Full run: stages 1→2→3 with optional refinement rounds. Never throws for
// in-pipeline failures — they yield a PARTIAL report with the error embedded.
// The report is also written to <runs_dir>/<problem>/report.json.
RunReport solve(const Problem& problem, PipelineDeps& deps, const PipelineSettings& settings);

} // namespace drp
