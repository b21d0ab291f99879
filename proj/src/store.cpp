#include "drp/store.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <sstream>

#include <json.hpp>

#include "drp/hash.hpp"
#include "drp/statement.hpp"

namespace drp {

using ordered_json = nlohmann::ordered_json;

const char* lemma_status_name(LemmaStatus status) {
    switch (status) {
    case LemmaStatus::Unproved: return "UNPROVED";
    case LemmaStatus::ExhaustedDeadline: return "EXHAUSTED_DEADLINE";
    case LemmaStatus::Proved: return "PROVED";
    case LemmaStatus::OracleSorry: return "ORACLE_SORRY";
    }
    return "UNPROVED";
}

std::optional<LemmaStatus> lemma_status_from_name(std::string_view name) {
    if (name == "UNPROVED") return LemmaStatus::Unproved;
    if (name == "EXHAUSTED_DEADLINE") return LemmaStatus::ExhaustedDeadline;
    if (name == "PROVED") return LemmaStatus::Proved;
    if (name == "ORACLE_SORRY") return LemmaStatus::OracleSorry;
    return std::nullopt;
}

const char* put_disposition_name(PutDisposition d) {
    switch (d) {
    case PutDisposition::Inserted: return "inserted";
    case PutDisposition::Upgraded: return "upgraded";
    case PutDisposition::Updated: return "updated";
    case PutDisposition::Unchanged: return "unchanged";
    case PutDisposition::Rejected: return "rejected";
    }
    return "unchanged";
}

namespace {

// Lattice rank; ORACLE_SORRY deliberately absent.
int lattice_rank(LemmaStatus s) {
    switch (s) {
    case LemmaStatus::Unproved: return 0;
    case LemmaStatus::ExhaustedDeadline: return 1;
    case LemmaStatus::Proved: return 2;
    case LemmaStatus::OracleSorry: break;
    }
    return -1;
}

bool created_at_well_formed(const std::string& ts) {
    // "YYYY-MM-DDTHH:MM:SSZ"
    if (ts.size() != 20) return false;
    static const char* pattern = "dddd-dd-ddTdd:dd:ddZ";
    for (std::size_t i = 0; i < 20; ++i) {
        char p = pattern[i];
        char c = ts[i];
        if (p == 'd') {
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        } else if (c != p) {
            return false;
        }
    }
    return true;
}

bool query_order_less(const LemmaRecord& a, const LemmaRecord& b) {
    if (a.problem_id != b.problem_id) return a.problem_id < b.problem_id;
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.digest < b.digest;
}

} // namespace

std::string LemmaStore::now_utc() {
    std::time_t now = std::time(nullptr);
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

void LemmaStore::validate_record(const LemmaRecord& r) {
    auto fail = [](const std::string& what) { throw InvariantViolation(what); };

    if (r.problem_id.empty()) fail("record has empty problem_id");
    if (r.name.empty()) fail("record has empty name");
    if (r.name.find_first_of(" \t\r\n") != std::string::npos)
        fail("record name contains whitespace: '" + r.name + "'");
    if (!is_valid_utf8(r.statement)) fail("record statement is not valid UTF-8");

    TheoremStatement parsed;
    try {
        parsed = parse_theorem_declaration(r.statement);
    } catch (const ParseError& e) {
        fail("record statement does not parse: " + std::string(e.what()));
    }
    if (parsed.name != r.name)
        fail("record name '" + r.name + "' does not match statement name '" + parsed.name + "'");
    CanonicalStatement canon = normalize_statement(parsed);
    if (canon.text != r.statement)
        fail("record statement is not in canonical (whitespace-collapsed) form");
    if (canon.digest != r.digest)
        fail("record digest does not recompute from its statement");

    switch (r.status) {
    case LemmaStatus::Proved:
        if (!r.proof || r.proof->empty()) fail("PROVED record lacks a proof");
        if (contains_sorry_token(*r.proof)) fail("PROVED record proof contains a placeholder");
        break;
    case LemmaStatus::OracleSorry:
        if (!r.proof || *r.proof != kOracleStubBody)
            fail("ORACLE_SORRY record proof must be exactly the stub body");
        break;
    case LemmaStatus::Unproved:
    case LemmaStatus::ExhaustedDeadline:
        if (r.proof) fail("record without a verified proof must omit the proof field");
        break;
    }

    if (r.provenance.extraction_mode != "regex" && r.provenance.extraction_mode != "balanced")
        fail("provenance extraction_mode must be 'regex' or 'balanced'");
    if (r.provenance.response_index < 0) fail("provenance response_index is negative");
    if (r.provenance.round < 1) fail("provenance round must be >= 1");
    if (r.verification.attempts_used < 0) fail("verification attempts_used is negative");
    if (r.verification.k < 0) fail("verification k is negative");
    if (r.verification.k > 0 && r.verification.attempts_used > r.verification.k)
        fail("verification attempts_used exceeds k");
    if (r.verification.per_attempt_timeout < 0) fail("verification timeout is negative");
    if (!r.created_at.empty() && !created_at_well_formed(r.created_at))
        fail("created_at must look like 2026-01-31T12:00:00Z, got '" + r.created_at + "'");
}

std::string LemmaStore::record_to_json_line(const LemmaRecord& r) {
    ordered_json j;
    j["problem_id"] = r.problem_id;
    j["name"] = r.name;
    j["statement"] = r.statement;
    j["digest"] = r.digest;
    j["status"] = lemma_status_name(r.status);
    if (r.proof)
        j["proof"] = *r.proof;
    else
        j["proof"] = nullptr;
    j["provenance"] = ordered_json{{"reasoner_model", r.provenance.reasoner_model},
                                   {"response_index", r.provenance.response_index},
                                   {"round", r.provenance.round},
                                   {"extraction_mode", r.provenance.extraction_mode}};
    j["verification"] = ordered_json{{"prover_model", r.verification.prover_model},
                                     {"attempts_used", r.verification.attempts_used},
                                     {"k", r.verification.k},
                                     {"per_attempt_timeout", r.verification.per_attempt_timeout}};
    j["created_at"] = r.created_at;
    return j.dump();
}

namespace {

void require_keys(const ordered_json& obj, const std::vector<const char*>& keys,
                  std::size_t line_no, const std::string& where) {
    if (!obj.is_object())
        throw SchemaError(where + " is not a JSON object", line_no);
    if (obj.size() != keys.size())
        throw SchemaError(where + " must have exactly " + std::to_string(keys.size()) + " keys",
                          line_no);
    std::size_t i = 0;
    for (auto it = obj.begin(); it != obj.end(); ++it, ++i) {
        if (it.key() != keys[i])
            throw SchemaError(where + " key " + std::to_string(i + 1) + " must be '" + keys[i] +
                                  "', got '" + it.key() + "'",
                              line_no);
    }
}

template <typename T>
T field_as(const ordered_json& obj, const char* key, std::size_t line_no) {
    try {
        return obj.at(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(std::string("field '") + key + "' has the wrong type", line_no);
    }
}

} // namespace

LemmaRecord LemmaStore::record_from_json_line(const std::string& line, std::size_t line_no) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("not valid JSON: ") + e.what(), line_no);
    }
    require_keys(j,
                 {"problem_id", "name", "statement", "digest", "status", "proof", "provenance",
                  "verification", "created_at"},
                 line_no, "record");

    LemmaRecord r;
    r.problem_id = field_as<std::string>(j, "problem_id", line_no);
    r.name = field_as<std::string>(j, "name", line_no);
    r.statement = field_as<std::string>(j, "statement", line_no);
    r.digest = field_as<std::string>(j, "digest", line_no);
    auto status = lemma_status_from_name(field_as<std::string>(j, "status", line_no));
    if (!status)
        throw SchemaError("unknown status '" + j.at("status").get<std::string>() + "'", line_no);
    r.status = *status;
    if (j.at("proof").is_null())
        r.proof = std::nullopt;
    else
        r.proof = field_as<std::string>(j, "proof", line_no);

    const ordered_json& prov = j.at("provenance");
    require_keys(prov, {"reasoner_model", "response_index", "round", "extraction_mode"}, line_no,
                 "provenance");
    r.provenance.reasoner_model = field_as<std::string>(prov, "reasoner_model", line_no);
    r.provenance.response_index = field_as<int>(prov, "response_index", line_no);
    r.provenance.round = field_as<int>(prov, "round", line_no);
    r.provenance.extraction_mode = field_as<std::string>(prov, "extraction_mode", line_no);

    const ordered_json& ver = j.at("verification");
    require_keys(ver, {"prover_model", "attempts_used", "k", "per_attempt_timeout"}, line_no,
                 "verification");
    r.verification.prover_model = field_as<std::string>(ver, "prover_model", line_no);
    r.verification.attempts_used = field_as<int>(ver, "attempts_used", line_no);
    r.verification.k = field_as<int>(ver, "k", line_no);
    r.verification.per_attempt_timeout = field_as<double>(ver, "per_attempt_timeout", line_no);

    r.created_at = field_as<std::string>(j, "created_at", line_no);
    if (r.created_at.empty())
        throw SchemaError("created_at must not be empty in a dataset", line_no);

    try {
        validate_record(r);
    } catch (const InvariantViolation& e) {
        throw SchemaError(e.what(), line_no);
    }
    return r;
}

LemmaStore::LemmaStore(std::filesystem::path log_path) : path_(std::move(log_path)) {
    namespace fs = std::filesystem;
    if (path_.has_parent_path() && !path_.parent_path().empty()) {
        std::error_code ec;
        fs::create_directories(path_.parent_path(), ec);
    }
    if (fs::exists(path_)) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw IoError("cannot open store log " + path_.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            LemmaRecord rec;
            try {
                rec = record_from_json_line(line, line_no);
            } catch (const SchemaError& e) {
                throw IoError("corrupt store log " + path_.string() + ": " + e.what());
            }
            put_locked(std::move(rec)); // replay never re-appends: see put_locked
        }
        replaying_ = false;
    } else {
        replaying_ = false;
    }
    log_.open(path_, std::ios::binary | std::ios::app);
    if (!log_) throw IoError("cannot open store log for append: " + path_.string());
}

LemmaStore::~LemmaStore() = default;

PutResult LemmaStore::put_record(LemmaRecord record) {
    std::lock_guard<std::mutex> lock(mu_);
    return put_locked(std::move(record));
}

void LemmaStore::append_locked(const LemmaRecord& record) {
    if (replaying_) return;
    log_ << record_to_json_line(record) << '\n';
    log_.flush();
    if (!log_) throw IoError("failed to append to store log " + path_.string());
}

PutResult LemmaStore::put_locked(LemmaRecord record) {
    if (record.created_at.empty()) record.created_at = now_utc();
    validate_record(record);

    Key key{record.problem_id, record.digest};
    auto it = index_.find(key);
    if (it == index_.end()) {
        append_locked(record);
        index_.emplace(key, record);
        return {PutDisposition::Inserted, std::move(record)};
    }

    LemmaRecord& existing = it->second;
    record.created_at = existing.created_at; // first insert wins the timestamp
    if (record == existing) return {PutDisposition::Unchanged, existing};

    if (existing.status == LemmaStatus::Proved && record.status != LemmaStatus::Proved)
        return {PutDisposition::Rejected, existing}; // StatusDowngrade refused

    PutDisposition disposition;
    if (record.status == LemmaStatus::OracleSorry || existing.status == LemmaStatus::OracleSorry) {
        // Off-lattice overwrites between the oracle flag and non-PROVED
        // standings; climbing to PROVED reads as an upgrade.
        disposition = record.status == LemmaStatus::Proved ? PutDisposition::Upgraded
                                                           : PutDisposition::Updated;
    } else {
        int delta = lattice_rank(record.status) - lattice_rank(existing.status);
        if (delta < 0) return {PutDisposition::Rejected, existing};
        disposition = delta > 0 ? PutDisposition::Upgraded : PutDisposition::Updated;
    }

    append_locked(record);
    history_[key].push_back(existing);
    existing = record;
    return {disposition, std::move(record)};
}

std::vector<LemmaRecord> LemmaStore::query(const std::optional<std::string>& problem_id,
                                           const std::optional<LemmaStatus>& status) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<LemmaRecord> out;
    out.reserve(index_.size());
    for (const auto& [key, rec] : index_) {
        if (problem_id && rec.problem_id != *problem_id) continue;
        if (status && rec.status != *status) continue;
        out.push_back(rec);
    }
    std::sort(out.begin(), out.end(), query_order_less);
    return out;
}

std::vector<LemmaRecord> LemmaStore::history(const std::string& problem_id,
                                             const std::string& digest) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = history_.find(Key{problem_id, digest});
    if (it == history_.end()) return {};
    return it->second;
}

std::size_t LemmaStore::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return index_.size();
}

DatasetManifest LemmaStore::export_dataset(const std::filesystem::path& out) const {
    std::vector<LemmaRecord> snapshot = query();

    std::string body;
    DatasetManifest manifest;
    manifest.record_count = snapshot.size();
    manifest.status_counts = {{"PROVED", 0}, {"UNPROVED", 0}, {"EXHAUSTED_DEADLINE", 0},
                              {"ORACLE_SORRY", 0}};
    std::vector<std::string> problems;
    for (const LemmaRecord& rec : snapshot) {
        body += record_to_json_line(rec);
        body += '\n';
        manifest.status_counts[lemma_status_name(rec.status)]++;
        problems.push_back(rec.problem_id);
    }
    std::sort(problems.begin(), problems.end());
    manifest.problem_count = std::unique(problems.begin(), problems.end()) - problems.begin();
    manifest.checksum_sha256 = sha256_hex(body);

    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write dataset " + out.string());
    f << body;
    f.close();
    if (!f) throw IoError("failed writing dataset " + out.string());

    ordered_json mj;
    mj["format_version"] = manifest.format_version;
    mj["problem_count"] = manifest.problem_count;
    mj["record_count"] = manifest.record_count;
    mj["status_counts"] =
        ordered_json{{"PROVED", manifest.status_counts["PROVED"]},
                     {"UNPROVED", manifest.status_counts["UNPROVED"]},
                     {"EXHAUSTED_DEADLINE", manifest.status_counts["EXHAUSTED_DEADLINE"]},
                     {"ORACLE_SORRY", manifest.status_counts["ORACLE_SORRY"]}};
    mj["checksum_sha256"] = manifest.checksum_sha256;

    std::filesystem::path mpath = out;
    mpath += ".manifest.json";
    std::ofstream mf(mpath, std::ios::binary | std::ios::trunc);
    if (!mf) throw IoError("cannot write manifest " + mpath.string());
    mf << mj.dump(2) << '\n';
    mf.close();
    if (!mf) throw IoError("failed writing manifest " + mpath.string());

    return manifest;
}

std::size_t LemmaStore::import_dataset(const std::filesystem::path& in) {
    namespace fs = std::filesystem;
    fs::path mpath = in;
    mpath += ".manifest.json";
    if (!fs::exists(mpath)) throw IoError("manifest not found: " + mpath.string());
    if (!fs::exists(in)) throw IoError("dataset not found: " + in.string());

    std::ifstream mf(mpath, std::ios::binary);
    std::stringstream mbuf;
    mbuf << mf.rdbuf();
    ordered_json mj;
    try {
        mj = ordered_json::parse(mbuf.str());
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("manifest is not valid JSON: ") + e.what(), 0);
    }
    if (!mj.is_object() || !mj.contains("format_version") || !mj.contains("record_count") ||
        !mj.contains("checksum_sha256"))
        throw SchemaError("manifest lacks required fields", 0);
    if (mj["format_version"].get<int>() != 1)
        throw SchemaError("unsupported dataset format_version", 0);

    std::ifstream f(in, std::ios::binary);
    std::stringstream buf;
    buf << f.rdbuf();
    std::string body = buf.str();

    std::string checksum = sha256_hex(body);
    if (checksum != mj["checksum_sha256"].get<std::string>())
        throw ChecksumMismatch("dataset checksum " + checksum + " does not match manifest " +
                               mj["checksum_sha256"].get<std::string>());

    std::vector<LemmaRecord> records;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t nl = body.find('\n', pos);
        std::string line =
            nl == std::string::npos ? body.substr(pos) : body.substr(pos, nl - pos);
        pos = nl == std::string::npos ? body.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        records.push_back(record_from_json_line(line, line_no));
    }

    if (records.size() != mj["record_count"].get<std::size_t>())
        throw SchemaError("record count " + std::to_string(records.size()) +
                              " does not match manifest " +
                              std::to_string(mj["record_count"].get<std::size_t>()),
                          0);

    for (LemmaRecord& rec : records) put_record(std::move(rec));
    return records.size();
}

} // namespace drp
