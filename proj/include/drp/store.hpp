#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drp/errors.hpp"

namespace drp {

enum class LemmaStatus { Unproved, ExhaustedDeadline, Proved, OracleSorry };

// Wire names: UNPROVED, EXHAUSTED_DEADLINE, PROVED, ORACLE_SORRY.
const char* lemma_status_name(LemmaStatus status);
std::optional<LemmaStatus> lemma_status_from_name(std::string_view name);

// Proof body every ORACLE_SORRY record must carry, verbatim.
inline constexpr const char* kOracleStubBody = "by sorry";

// Where a lemma statement came from.
struct Provenance {
    std::string reasoner_model;
    int response_index = 0;
    int round = 1;
    std::string extraction_mode; // "regex" | "balanced"

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

// How (and how hard) verification was attempted.
struct Verification {
    std::string prover_model;
    int attempts_used = 0;
    int k = 0;
    double per_attempt_timeout = 0.0; // seconds

    friend bool operator==(const Verification&, const Verification&) = default;
};

struct LemmaRecord {
    std::string problem_id;
    std::string name;
    std::string statement; // canonical text: "theorem <name> <binders> : <goal>"
    std::string digest;    // name-blind sha256 of the statement
    LemmaStatus status = LemmaStatus::Unproved;
    std::optional<std::string> proof; // tactic block replacing `sorry`; see invariants
    Provenance provenance;
    Verification verification;
    std::string created_at; // "YYYY-MM-DDTHH:MM:SSZ"; empty lets the store stamp it

    friend bool operator==(const LemmaRecord&, const LemmaRecord&) = default;
};

enum class PutDisposition {
    Inserted,  // first record for this (problem_id, digest)
    Upgraded,  // status climbed the lattice (or left the oracle flag for PROVED)
    Updated,   // same standing, different content (or oracle-flag overwrite)
    Unchanged, // identical re-put: no-op, nothing appended
    Rejected,  // status downgrade refused; `stored` is the surviving record
};

const char* put_disposition_name(PutDisposition d);

struct PutResult {
    PutDisposition disposition;
    LemmaRecord stored; // what the store now holds for the key
};

struct DatasetManifest {
    int format_version = 1;
    std::size_t problem_count = 0;
    std::size_t record_count = 0;
    std::map<std::string, std::size_t> status_counts; // keyed by wire name
    std::string checksum_sha256;                      // of the record file bytes
};

// Append-log store with an in-memory index rebuilt on open.
//
// Status moves on the monotone lattice UNPROVED < EXHAUSTED_DEADLINE < PROVED;
// PROVED is sticky. ORACLE_SORRY sits off the lattice: it overwrites — and is
// overwritten by — any non-PROVED standing (last write wins), but never
// displaces PROVED.
//
// Handles are safe for concurrent put/query; export snapshots the index and
// blocks writers only for the instant of the copy.
class LemmaStore {
public:
    explicit LemmaStore(std::filesystem::path log_path); // creates or replays
    ~LemmaStore();

    LemmaStore(const LemmaStore&) = delete;
    LemmaStore& operator=(const LemmaStore&) = delete;

    // Validates, applies the lattice rules, appends to the log (unless the put
    // is a no-op or rejected). The first insert's created_at is retained for
    // the lifetime of the key. Throws InvariantViolation on malformed records.
    PutResult put_record(LemmaRecord record);

    // Deterministic order: (problem_id, created_at, digest).
    std::vector<LemmaRecord> query(const std::optional<std::string>& problem_id = std::nullopt,
                                   const std::optional<LemmaStatus>& status = std::nullopt) const;

    // Superseded versions for one key, oldest first (current record excluded).
    std::vector<LemmaRecord> history(const std::string& problem_id,
                                     const std::string& digest) const;

    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

    // Writes the JSONL dataset to `out` plus a `<out>.manifest.json` sidecar.
    DatasetManifest export_dataset(const std::filesystem::path& out) const;

    // Validates the manifest checksum and every line, then puts each record.
    // Returns the number of records read. Throws IoError, ChecksumMismatch, or
    // SchemaError carrying the offending 1-based line number.
    std::size_t import_dataset(const std::filesystem::path& in);

    static std::string now_utc();

    // Exposed for tests and the import path.
    static void validate_record(const LemmaRecord& record); // throws InvariantViolation
    static std::string record_to_json_line(const LemmaRecord& record);
    static LemmaRecord record_from_json_line(const std::string& line, std::size_t line_no);

private:
    using Key = std::pair<std::string, std::string>; // (problem_id, digest)

    PutResult put_locked(LemmaRecord record);
    void append_locked(const LemmaRecord& record);

    mutable std::mutex mu_;
    std::filesystem::path path_;
    std::ofstream log_;
    bool replaying_ = true; // suppresses appends while the log is re-read on open
    std::map<Key, LemmaRecord> index_;
    std::map<Key, std::vector<LemmaRecord>> history_;
};

} // namespace drp
