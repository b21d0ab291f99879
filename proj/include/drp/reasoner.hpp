#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drp/statement.hpp"
#include "drp/store.hpp"

namespace drp {

// Provider-neutral request shape; per-provider adapters translate it into the
// service's JSON dialect. `api_key_ref` names an environment variable — the
// resolved value exists only inside the HTTP call and is never serialized, and
// the reference itself is masked in every snapshot/log rendering.
struct ReasonerConfig {
    std::string provider = "mock"; // "openai" | "gemini" | "mock"
    std::string endpoint;          // full URL, e.g. https://host/v1/chat/completions
    std::string model;
    std::string api_key_ref;
    double temperature = 0.7;      // [0, 2]
    int max_output_tokens = 4096;
    double request_timeout = 120.0; // seconds, per request
    int samples = 1;                // independent requests per call
    int retries = 0;                // extra transport retries per request (0 or 1)

    void validate() const; // throws ConfigError
};

struct Usage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct ReasonerResponse {
    int index = 0;
    std::string text; // verbatim, for audit replay
    double latency_s = 0.0;
    std::optional<Usage> usage;
};

enum class RequestErrorKind { Transport, Service, Timeout };

const char* request_error_kind_name(RequestErrorKind kind);

struct RequestError {
    int index = 0;
    RequestErrorKind kind = RequestErrorKind::Transport;
    std::string detail;
};

// Partial results are first-class: whatever arrived is in `responses` (sorted
// by index), whatever failed is in `errors`.
struct RequestBatch {
    std::vector<ReasonerResponse> responses;
    std::vector<RequestError> errors;
};

struct RequestContext {
    std::string problem_id;
    int round = 1;
};

class ReasonerBackend {
public:
    virtual ~ReasonerBackend() = default;
    virtual RequestBatch request_samples(const std::string& prompt, const RequestContext& ctx,
                                         const ReasonerConfig& cfg) = 0;
};

// Deterministic fixture-backed backend. Layout under `root`:
//   <root>/<problem_id>/response<i>.txt          round 1 response i
//   <root>/<problem_id>/round<r>/response<i>.txt round r >= 2
//   response<i>.error                            instead of .txt: first token
//                                                timeout|service|transport,
//                                                optionally ": detail"
class MockReasoner : public ReasonerBackend {
public:
    explicit MockReasoner(std::filesystem::path root);
    RequestBatch request_samples(const std::string& prompt, const RequestContext& ctx,
                                 const ReasonerConfig& cfg) override;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

// HTTPS/HTTP backend. Issues `samples` independent requests concurrently.
class HttpReasoner : public ReasonerBackend {
public:
    RequestBatch request_samples(const std::string& prompt, const RequestContext& ctx,
                                 const ReasonerConfig& cfg) override;
};

// --- prompt rendering -------------------------------------------------------

// Frozen decomposition request: template asset + "\n" + problem source. The
// source must include the import preamble and the full statement ending
// `:= by sorry`.
std::string build_decomposition_prompt(const std::string& problem_source);

// Re-decomposition request for statements that resisted proof.
std::string build_refinement_prompt(const std::vector<TheoremStatement>& unproved);

// Final-proof request: header + verified lemma declarations (in the given
// order, each rendered with its stored proof) + the problem source. Throws
// UnverifiedLemma when any record is not PROVED or its proof carries a
// placeholder.
std::string build_final_proof_prompt(const std::string& problem_source,
                                     const std::vector<LemmaRecord>& verified);

// Shared declaration rendering: collapsed statement + " := " + proof body.
std::string render_lemma_declaration(const LemmaRecord& record);

// --- response parsing -------------------------------------------------------

struct CandidateLemma {
    TheoremStatement statement;
    CanonicalStatement canonical; // == normalize_statement(statement)
    Provenance provenance;
};

struct ParseStats {
    std::size_t responses = 0;
    std::size_t extracted = 0;          // statements found before dedup
    std::size_t deduped = 0;            // dropped as digest duplicates
    std::size_t renamed = 0;            // distinct statements renamed on name clash
    std::size_t lemma_keyword_hits = 0; // `lemma` keywords seen (logged, never parsed)
};

// Pure function of the response texts: extraction per response, name-blind
// digest dedup across responses keeping the earliest, collision-free naming
// via the `_r<responseIdx>_<ordinal>` suffix. Never throws on model output.
std::vector<CandidateLemma> parse_decomposition(const std::vector<ReasonerResponse>& responses,
                                                const ExtractionOptions& options,
                                                const std::string& model, int round,
                                                ParseStats* stats = nullptr);

// --- provider adapters (exposed for hermetic tests) -------------------------

std::string openai_request_body(const std::string& prompt, const ReasonerConfig& cfg);
std::string gemini_request_body(const std::string& prompt, const ReasonerConfig& cfg);
// Throw std::runtime_error on unparseable bodies; the caller maps that to a
// Service error carrying the body.
std::string parse_openai_response(const std::string& body, std::optional<Usage>& usage);
std::string parse_gemini_response(const std::string& body, std::optional<Usage>& usage);

// Masked single-line rendering for logs and report snapshots. Neither the key
// value nor the key reference appears.
std::string describe_config(const ReasonerConfig& cfg);

} // namespace drp
