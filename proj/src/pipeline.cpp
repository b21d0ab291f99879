#include "drp/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "drp/hash.hpp"
#include "drp/templates.hpp"

namespace drp {

using nlohmann::ordered_json;

namespace {

std::string rtrim_copy(std::string text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return text;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << bytes;
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

ordered_json reasoner_config_json(const ReasonerConfig& cfg) {
    ordered_json j;
    j["provider"] = cfg.provider;
    j["endpoint"] = cfg.endpoint;
    j["model"] = cfg.model;
    j["api_key_ref"] = "***"; // never the reference, never the value
    j["temperature"] = cfg.temperature;
    j["max_output_tokens"] = cfg.max_output_tokens;
    j["request_timeout"] = cfg.request_timeout;
    j["samples"] = cfg.samples;
    j["retries"] = cfg.retries;
    return j;
}

ordered_json budget_json(const AttemptBudget& budget) {
    ordered_json j;
    j["k"] = budget.k;
    j["per_attempt_timeout"] = budget.per_attempt_timeout;
    if (budget.total_deadline)
        j["total_deadline"] = *budget.total_deadline;
    else
        j["total_deadline"] = nullptr;
    return j;
}

} // namespace

void PipelineSettings::validate() const {
    reasoner.validate();
    prover_model.validate();
    final_model.validate();
    stage2.validate();
    final_budget.validate();
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (!fault_injection.empty() && fault_injection != "stage1" && fault_injection != "stage2" &&
        fault_injection != "stage3")
        throw ConfigError("fault_injection must be one of stage1|stage2|stage3");
}

const char* run_status_name(RunStatus status) {
    switch (status) {
    case RunStatus::Solved: return "SOLVED";
    case RunStatus::Unsolved: return "UNSOLVED";
    case RunStatus::Partial: return "PARTIAL";
    }
    return "PARTIAL";
}

// --- problem loading -----------------------------------------------------------

std::string Problem::prompt_source() const {
    return source_text.substr(0, main_theorem.span.end);
}

Problem load_problem(const std::filesystem::path& path, std::string id) {
    std::string text = read_file_bytes(path);
    if (!is_valid_utf8(text)) throw ConfigError("problem file is not valid UTF-8: " + path.string());

    ExtractionOptions opts; // balanced, sorry-bodied only
    std::vector<TheoremStatement> stmts = extract_lemma_statements(text, opts);
    if (stmts.empty())
        throw ConfigError("no `theorem ... := by sorry` declaration found in " + path.string());
    if (stmts.size() > 1)
        throw ConfigError("expected exactly one open declaration in " + path.string() + ", found " +
                          std::to_string(stmts.size()));

    Problem problem;
    problem.main_theorem = stmts.front();
    problem.preamble = text.substr(0, problem.main_theorem.span.start);
    if (trim(problem.preamble).empty())
        throw ConfigError("problem file lacks an import preamble: " + path.string());
    problem.source_path = path.string();
    problem.source_text = std::move(text);
    problem.id = id.empty() ? path.stem().string() : std::move(id);
    return problem;
}

// --- final-source assembly -------------------------------------------------------

std::string FinalSource::serialize() const {
    return serialize_with_body("by sorry");
}

std::string FinalSource::serialize_with_body(const std::string& body) const {
    std::string out = rtrim_copy(preamble);
    out += "\n\n";
    for (const FinalLemma& lemma : lemmas) {
        out += rtrim_copy(lemma.statement.raw);
        out += " := ";
        out += lemma.proof;
        out += "\n\n";
    }
    out += rtrim_copy(main_theorem.raw);
    out += " := ";
    out += body;
    out += '\n';
    return out;
}

AssembleResult assemble_context(const Problem& problem, const std::vector<LemmaRecord>& records,
                                bool allow_oracle_stubs) {
    AssembleResult result;
    result.source.preamble = problem.preamble;
    result.source.main_theorem = problem.main_theorem;
    result.source.template_version = kAssembleVersion;

    std::set<std::string> names{problem.main_theorem.name};
    for (const LemmaRecord& record : records) {
        bool stub = record.status == LemmaStatus::OracleSorry;
        if (record.status != LemmaStatus::Proved && !(stub && allow_oracle_stubs))
            throw UnverifiedLemma("lemma '" + record.name + "' is " +
                                  lemma_status_name(record.status) + ", not PROVED");
        if (!record.proof || record.proof->empty())
            throw UnverifiedLemma("lemma '" + record.name + "' lacks a stored proof");
        if (!stub && contains_sorry_token(*record.proof))
            throw UnverifiedLemma("lemma '" + record.name + "' proof contains a placeholder");

        TheoremStatement statement = parse_theorem_declaration(record.statement);
        if (names.count(statement.name) != 0) {
            std::string renamed;
            for (int n = 1;; ++n) {
                renamed = statement.name + "_dup" + std::to_string(n);
                if (names.count(renamed) == 0) break;
            }
            result.renames.push_back({statement.name, renamed, record.digest});
            statement = rename_theorem(statement, renamed);
        }
        names.insert(statement.name);

        FinalLemma lemma;
        lemma.name = statement.name;
        lemma.statement = std::move(statement);
        lemma.proof = *record.proof;
        lemma.oracle_stub = stub;
        lemma.digest = record.digest;
        result.source.lemmas.push_back(std::move(lemma));
    }
    return result;
}

// --- stage 1 ---------------------------------------------------------------------

std::vector<CandidateLemma> stage1_decompose(const Problem& problem, PipelineDeps& deps,
                                             const PipelineSettings& settings, int round,
                                             const std::vector<TheoremStatement>& feedback,
                                             RunReport& report) {
    auto t0 = std::chrono::steady_clock::now();

    std::string prompt = round <= 1 ? build_decomposition_prompt(problem.prompt_source())
                                    : build_refinement_prompt(feedback);
    RequestContext ctx{problem.id, round};
    RequestBatch batch = deps.reasoner->request_samples(prompt, ctx, settings.reasoner);

    // Raw responses hit disk before parsing so a later crash loses nothing.
    std::filesystem::path round_dir =
        deps.runs_dir / problem.id / ("round" + std::to_string(round));
    for (const ReasonerResponse& resp : batch.responses) {
        std::filesystem::path out =
            round_dir / ("response" + std::to_string(resp.index) + ".txt");
        write_file_bytes(out, resp.text);
        report.stage1.response_paths.push_back(out.string());
    }
    for (const RequestError& err : batch.errors) report.stage1.errors.push_back(err);
    report.stage1.response_count += batch.responses.size();

    if (batch.responses.empty() && !batch.errors.empty()) {
        const RequestError& first = batch.errors.front();
        report.stage1.wall_ms += ms_since(t0);
        throw TransportError("round " + std::to_string(round) + ": all " +
                             std::to_string(batch.errors.size()) + " request(s) failed; first: " +
                             request_error_kind_name(first.kind) + ": " + first.detail);
    }

    ParseStats stats;
    std::vector<CandidateLemma> candidates = parse_decomposition(
        batch.responses, settings.extraction, settings.reasoner.model, round, &stats);
    report.stage1.extracted += stats.extracted;
    report.stage1.dedup_count += stats.deduped;
    report.stage1.renamed += stats.renamed;
    report.stage1.lemma_keyword_hits += stats.lemma_keyword_hits;
    report.stage1.rounds_executed = round;
    report.stage1.wall_ms += ms_since(t0);
    return candidates;
}

// --- stage 2 ---------------------------------------------------------------------

std::vector<LemmaRecord> stage2_filter(const std::vector<CandidateLemma>& candidates,
                                       const Problem& problem, PipelineDeps& deps,
                                       const PipelineSettings& settings, RunReport& report) {
    auto t0 = std::chrono::steady_clock::now();

    std::map<std::string, VerificationOutcome> outcomes =
        verify_batch(candidates, settings.stage2, *deps.checker, *deps.prover_gen,
                     problem.preamble, settings.parallelism);

    std::vector<LemmaRecord> records;
    records.reserve(candidates.size());
    for (const CandidateLemma& candidate : candidates) {
        const VerificationOutcome& outcome = outcomes.at(candidate.canonical.digest);

        LemmaRecord record;
        record.problem_id = problem.id;
        record.name = candidate.statement.name;
        record.statement = candidate.canonical.text;
        record.digest = candidate.canonical.digest;
        record.status = outcome.status;
        if (outcome.status == LemmaStatus::Proved) record.proof = outcome.winning_proof;
        record.provenance = candidate.provenance;
        record.verification.prover_model = settings.prover_model.model;
        record.verification.attempts_used = outcome.attempts_used;
        record.verification.k = settings.stage2.k;
        record.verification.per_attempt_timeout = settings.stage2.per_attempt_timeout;
        record.created_at = deps.clock();

        record = deps.store->put_record(std::move(record)).stored;
        records.push_back(std::move(record));

        report.stage2.outcomes[outcome.digest] = outcome;
        report.stage2.attempts_total += outcome.attempts_used;
        if (outcome.status == LemmaStatus::Proved) ++report.stage2.proved_count;
    }
    report.stage2.wall_ms += ms_since(t0);
    return records;
}

// --- report rendering --------------------------------------------------------------

std::string RunReport::summary_line() const {
    std::ostringstream out;
    out << problem_id << ' ' << run_status_name(status) << " candidates=" << stage1.candidate_count
        << " proved=" << stage2.proved_count << " final_attempts=" << stage3.attempts_used;
    return out.str();
}

ordered_json RunReport::to_json() const {
    ordered_json j;
    j["problem_id"] = problem_id;
    j["status"] = run_status_name(status);
    j["sound"] = sound;
    j["error"] = error;
    j["created_at"] = created_at;

    ordered_json s1;
    s1["rounds_executed"] = stage1.rounds_executed;
    s1["response_count"] = stage1.response_count;
    s1["response_paths"] = stage1.response_paths;
    s1["extracted"] = stage1.extracted;
    s1["candidate_count"] = stage1.candidate_count;
    s1["dedup_count"] = stage1.dedup_count;
    s1["renamed"] = stage1.renamed;
    s1["lemma_keyword_hits"] = stage1.lemma_keyword_hits;
    ordered_json errs = ordered_json::array();
    for (const RequestError& e : stage1.errors)
        errs.push_back(ordered_json{{"index", e.index},
                                    {"kind", request_error_kind_name(e.kind)},
                                    {"detail", e.detail}});
    s1["errors"] = errs;
    s1["wall_ms"] = stage1.wall_ms;
    j["stage1"] = s1;

    ordered_json s2;
    s2["attempts_total"] = stage2.attempts_total;
    s2["proved_count"] = stage2.proved_count;
    ordered_json outcomes = ordered_json::array();
    for (const auto& [digest, outcome] : stage2.outcomes)
        outcomes.push_back(ordered_json{{"digest", digest},
                                        {"status", lemma_status_name(outcome.status)},
                                        {"attempts_used", outcome.attempts_used}});
    s2["outcomes"] = outcomes;
    s2["wall_ms"] = stage2.wall_ms;
    j["stage2"] = s2;

    ordered_json s3;
    s3["final_source_digest"] = stage3.final_source_digest;
    s3["assembly_version"] = stage3.assembly_version;
    s3["prompt_version"] = stage3.prompt_version;
    s3["attempts_used"] = stage3.attempts_used;
    s3["solved"] = stage3.solved;
    ordered_json results = ordered_json::array();
    for (const CheckResult& r : stage3.results)
        results.push_back(ordered_json{{"attempt_id", r.attempt_id},
                                       {"verdict", verdict_name(r.verdict)},
                                       {"contains_sorry", r.contains_sorry}});
    s3["results"] = results;
    s3["wall_ms"] = stage3.wall_ms;
    j["stage3"] = s3;

    ordered_json renames_json = ordered_json::array();
    for (const RenameEvent& r : renames)
        renames_json.push_back(ordered_json{{"from", r.from}, {"to", r.to}, {"digest", r.digest}});
    j["renames"] = renames_json;
    j["final_source"] = final_source;
    if (final_proof)
        j["final_proof"] = *final_proof;
    else
        j["final_proof"] = nullptr;
    j["config"] = config_snapshot;
    return j;
}

// --- solve -----------------------------------------------------------------------

namespace {

ordered_json settings_snapshot(const PipelineSettings& settings) {
    ordered_json j;
    j["reasoner"] = reasoner_config_json(settings.reasoner);
    j["prover_model"] = reasoner_config_json(settings.prover_model);
    j["final_model"] = reasoner_config_json(settings.final_model);
    j["stage2_budget"] = budget_json(settings.stage2);
    j["final_budget"] = budget_json(settings.final_budget);
    j["parallelism"] = settings.parallelism;
    j["rounds"] = settings.rounds;
    j["oracle_sorry"] = settings.oracle_sorry;
    j["extraction_mode"] = extraction_mode_name(settings.extraction.mode);
    j["templates"] =
        ordered_json{{"stage1", stage1_template_version()},
                     {"stage3", stage3_template_version()},
                     {"refine", refine_template_version()},
                     {"assemble", kAssembleVersion}};
    return j;
}

void inject_fault(const PipelineSettings& settings, const char* stage) {
    if (settings.fault_injection == stage)
        throw IoError(std::string("injected fault before ") + stage);
}

} // namespace

RunReport solve(const Problem& problem, PipelineDeps& deps, const PipelineSettings& settings) {
    settings.validate();

    RunReport report;
    report.problem_id = problem.id;
    report.sound = !settings.oracle_sorry;
    report.created_at = deps.clock();
    report.config_snapshot = settings_snapshot(settings);
    report.stage3.assembly_version = kAssembleVersion;
    report.stage3.prompt_version = stage3_template_version();

    std::vector<CandidateLemma> kept; // stage-1 emission order across rounds
    std::set<std::string> seen_digests;
    std::map<std::string, LemmaRecord> record_by_digest;

    try {
        inject_fault(settings, "stage1");

        std::vector<TheoremStatement> feedback;
        for (int round = 1; round <= settings.rounds; ++round) {
            if (round > 1 && feedback.empty()) break;

            std::vector<CandidateLemma> candidates =
                stage1_decompose(problem, deps, settings, round, feedback, report);

            std::vector<CandidateLemma> fresh;
            for (CandidateLemma& candidate : candidates) {
                if (!seen_digests.insert(candidate.canonical.digest).second) {
                    ++report.stage1.dedup_count; // cross-round duplicate
                    continue;
                }
                fresh.push_back(std::move(candidate));
            }
            report.stage1.candidate_count += fresh.size();

            inject_fault(settings, "stage2");
            std::vector<LemmaRecord> records =
                stage2_filter(fresh, problem, deps, settings, report);

            feedback.clear();
            for (std::size_t i = 0; i < fresh.size(); ++i) {
                record_by_digest[records[i].digest] = records[i];
                kept.push_back(std::move(fresh[i]));
                if (records[i].status != LemmaStatus::Proved)
                    feedback.push_back(kept.back().statement);
            }
        }

        // Context records in stage-1 emission order; optionally stub the rest.
        std::vector<LemmaRecord> context_records;
        std::vector<LemmaRecord> proved_records;
        for (const CandidateLemma& candidate : kept) {
            LemmaRecord record = record_by_digest.at(candidate.canonical.digest);
            if (record.status == LemmaStatus::Proved) {
                context_records.push_back(record);
                proved_records.push_back(std::move(record));
            } else if (settings.oracle_sorry) {
                LemmaRecord stub = record;
                stub.status = LemmaStatus::OracleSorry;
                stub.proof = kOracleStubBody;
                stub.verification.attempts_used = 0;
                stub = deps.store->put_record(std::move(stub)).stored;
                context_records.push_back(std::move(stub));
            }
        }

        AssembleResult assembled =
            assemble_context(problem, context_records, settings.oracle_sorry);
        report.renames = assembled.renames;
        report.final_source = assembled.source.serialize();
        report.stage3.final_source_digest = sha256_hex(report.final_source);

        inject_fault(settings, "stage3");
        auto t0 = std::chrono::steady_clock::now();

        // The prompt is part of the run contract even when a scripted
        // generator ignores it; oracle runs render over the stubbed context.
        std::string final_prompt;
        if (settings.oracle_sorry) {
            final_prompt = stage3_header_template();
            final_prompt += "\n\nGoal:\n" + report.final_source;
        } else {
            final_prompt = build_final_proof_prompt(problem.prompt_source(), proved_records);
        }
        deps.final_gen->set_prompt_context(final_prompt);

        std::unique_ptr<CheckerSession> session = deps.checker->open_session();
        for (int attempt = 1; attempt <= settings.final_budget.k; ++attempt) {
            std::string attempt_id = "final:" + std::to_string(attempt);
            GenOutcome gen = deps.final_gen->next_candidate(problem.main_theorem, attempt);
            ++report.stage3.attempts_used;

            if (!gen.body) {
                CheckResult poisoned;
                poisoned.attempt_id = attempt_id;
                poisoned.verdict = Verdict::ProofError;
                poisoned.messages.push_back("generation error: " + gen.error);
                report.stage3.results.push_back(std::move(poisoned));
                continue;
            }

            std::string source = assembled.source.serialize_with_body(*gen.body);
            CheckerReply reply =
                session->check(attempt_id, source, settings.final_budget.per_attempt_timeout);
            CheckResult result = settings.oracle_sorry
                                     ? finalize_oracle_check(attempt_id, reply, *gen.body)
                                     : finalize_check(attempt_id, reply, source);
            bool won = result.verdict == Verdict::Ok;
            report.stage3.results.push_back(std::move(result));
            if (won) {
                report.stage3.solved = true;
                report.final_proof = *gen.body;
                break;
            }
        }
        report.stage3.wall_ms = ms_since(t0);
        report.status = report.stage3.solved ? RunStatus::Solved : RunStatus::Unsolved;
    } catch (const std::exception& e) {
        report.status = RunStatus::Partial;
        report.error = e.what();
    }

    write_file_bytes(deps.runs_dir / problem.id / "report.json", report.to_json().dump(2) + "\n");
    return report;
}

} // namespace drp
