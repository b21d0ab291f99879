// drp — decomposed reasoner/prover pipeline driver.
//
//   drp decompose <problem.lean>             stage 1 only: candidates to stdout
//   drp verify --problem <p.lean> <in.lean>  stage 2 only: verdict table
//   drp solve <problem.lean>                 full pipeline, summary line
//   drp export <out.jsonl>                   dataset export with manifest
//
// Configuration precedence: defaults < --config INI file < DRP_<SECTION>_<KEY>
// environment variables < flags. Human output goes to stdout, diagnostics to
// stderr. Exit codes: 0 = contract completed (an UNSOLVED run still counts),
// 1 = operational failure, 2 = usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "drp/config.hpp"
#include "drp/pipeline.hpp"

namespace {

using namespace drp;

std::string read_file_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Owns whichever backends the configuration selects.
struct Wiring {
    std::unique_ptr<ReasonerBackend> reasoner;
    std::unique_ptr<CheckerBackend> checker;
    std::unique_ptr<ProofGenerator> prover_gen;
    std::unique_ptr<ProofGenerator> final_gen;
};

std::unique_ptr<ReasonerBackend> make_reasoner(const AppConfig& app) {
    if (app.settings.reasoner.provider == "mock") {
        if (app.mock_fixtures.empty())
            throw ConfigError(
                "provider=mock needs a fixture root ([mock] fixtures= or DRP_MOCK_FIXTURES)");
        return std::make_unique<MockReasoner>(app.mock_fixtures);
    }
    return std::make_unique<HttpReasoner>();
}

std::unique_ptr<CheckerBackend> make_checker(const AppConfig& app,
                                             const std::string& problem_id) {
    if (app.checker_backend == "external")
        return std::make_unique<ExternalCheckerBackend>(app.external);
    auto mock = std::make_unique<MockCheckerBackend>();
    if (!app.mock_fixtures.empty()) {
        std::filesystem::path scripts =
            std::filesystem::path(app.mock_fixtures) / problem_id / "mock_scripts.json";
        if (std::filesystem::exists(scripts)) mock->load_scripts_json(scripts);
    }
    return mock;
}

std::unique_ptr<ProofGenerator> make_generator(const AppConfig& app, const ReasonerConfig& model,
                                               const std::string& section,
                                               const std::string& problem_id,
                                               ReasonerBackend& http_fallback) {
    if (model.provider == "mock") {
        auto gen = std::make_unique<MockProofGenerator>();
        if (!app.mock_fixtures.empty()) {
            std::filesystem::path scripts =
                std::filesystem::path(app.mock_fixtures) / problem_id / "mock_scripts.json";
            if (std::filesystem::exists(scripts)) gen->load_scripts_json(scripts, section);
        }
        return gen;
    }
    return std::make_unique<ReasonerProofGenerator>(http_fallback, model, "");
}

Wiring wire_up(const AppConfig& app, const std::string& problem_id) {
    Wiring w;
    w.reasoner = make_reasoner(app);
    w.checker = make_checker(app, problem_id);
    static HttpReasoner http; // shared transport for non-mock generators
    w.prover_gen = make_generator(app, app.settings.prover_model, "prover", problem_id, http);
    w.final_gen = make_generator(app, app.settings.final_model, "final", problem_id, http);
    return w;
}

void print_verdict_table(const std::vector<LemmaRecord>& records, const AttemptBudget& budget) {
    std::size_t name_width = 4;
    for (const LemmaRecord& r : records) name_width = std::max(name_width, r.name.size());
    std::cout << std::left << std::setw(static_cast<int>(name_width) + 2) << "name"
              << std::setw(10) << "digest" << std::setw(20) << "status"
              << "attempts\n";
    std::size_t proved = 0;
    for (const LemmaRecord& r : records) {
        std::cout << std::left << std::setw(static_cast<int>(name_width) + 2) << r.name
                  << std::setw(10) << r.digest.substr(0, 8) << std::setw(20)
                  << lemma_status_name(r.status) << r.verification.attempts_used << "/"
                  << budget.k << "\n";
        if (r.status == LemmaStatus::Proved) ++proved;
    }
    std::cout << "proved=" << proved << "/" << records.size() << "\n";
}

int cmd_decompose(const AppConfig& app, const std::string& problem_path) {
    Problem problem = load_problem(problem_path);
    Wiring w = wire_up(app, problem.id);
    PipelineDeps deps;
    deps.reasoner = w.reasoner.get();
    deps.runs_dir = app.runs_dir;

    RunReport report;
    report.problem_id = problem.id;
    std::vector<CandidateLemma> candidates =
        stage1_decompose(problem, deps, app.settings, 1, {}, report);

    for (const CandidateLemma& c : candidates)
        std::cout << c.statement.name << " " << c.canonical.digest.substr(0, 8) << "\n";
    std::cout << "responses=" << report.stage1.response_count
              << " extracted=" << report.stage1.extracted << " kept=" << candidates.size()
              << " deduped=" << report.stage1.dedup_count
              << " renamed=" << report.stage1.renamed << "\n";
    return 0;
}

int cmd_verify(const AppConfig& app, const std::string& problem_path,
               const std::string& input_path) {
    Problem problem = load_problem(problem_path);
    Wiring w = wire_up(app, problem.id);
    LemmaStore store(app.store_path);
    PipelineDeps deps;
    deps.checker = w.checker.get();
    deps.prover_gen = w.prover_gen.get();
    deps.store = &store;
    deps.runs_dir = app.runs_dir;

    ReasonerResponse response;
    response.index = 0;
    response.text = read_file_or_throw(input_path);
    std::vector<CandidateLemma> candidates = parse_decomposition(
        {response}, app.settings.extraction, app.settings.reasoner.model, 1);
    if (candidates.empty()) {
        std::cout << "no candidate statements found in " << input_path << "\n";
        return 0;
    }

    RunReport scratch;
    std::vector<LemmaRecord> records =
        stage2_filter(candidates, problem, deps, app.settings, scratch);
    print_verdict_table(records, app.settings.stage2);
    return 0;
}

int cmd_solve(const AppConfig& app, const std::string& problem_path) {
    Problem problem = load_problem(problem_path);
    Wiring w = wire_up(app, problem.id);
    LemmaStore store(app.store_path);
    PipelineDeps deps;
    deps.reasoner = w.reasoner.get();
    deps.checker = w.checker.get();
    deps.prover_gen = w.prover_gen.get();
    deps.final_gen = w.final_gen.get();
    deps.store = &store;
    deps.runs_dir = app.runs_dir;

    RunReport report = solve(problem, deps, app.settings);
    if (!report.sound)
        std::cout << "NON-SOUND: final context contains oracle placeholders\n";
    std::cout << report.summary_line() << "\n";
    if (report.status == RunStatus::Partial) {
        std::cerr << "error: " << report.error << "\n";
        return 1;
    }
    return 0;
}

int cmd_export(const AppConfig& app, const std::string& out_path) {
    LemmaStore store(app.store_path);
    std::filesystem::path out(out_path);
    if (out.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(out.parent_path(), ec);
    }
    DatasetManifest manifest = store.export_dataset(out);
    std::cout << "exported " << manifest.record_count << " record(s) across "
              << manifest.problem_count << " problem(s) to " << out.string() << "\n";
    std::cout << "manifest " << out.string() << ".manifest.json checksum "
              << manifest.checksum_sha256.substr(0, 12) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli_app{"decomposed reasoner/prover pipeline"};
    cli_app.fallthrough();
    cli_app.require_subcommand(1);

    std::string config_file;
    CliOverrides overrides;
    std::string mode_flag, backend_flag, store_flag;
    int k_flag = 0, parallelism_flag = 0, rounds_flag = 0;
    bool oracle_flag = false;

    cli_app.add_option("--config", config_file, "INI configuration file");
    auto* mode_opt = cli_app.add_option("--mode", mode_flag, "extraction mode: regex|balanced");
    auto* k_opt = cli_app.add_option("--k", k_flag, "stage-2 attempts per lemma");
    auto* par_opt = cli_app.add_option("--parallelism", parallelism_flag, "verification workers");
    auto* rounds_opt = cli_app.add_option("--rounds", rounds_flag, "decomposition rounds");
    auto* backend_opt =
        cli_app.add_option("--backend", backend_flag, "checker backend: external|mock");
    auto* oracle_opt = cli_app.add_flag("--oracle-sorry", oracle_flag,
                                        "admit unproved lemmas as placeholder stubs (non-sound)");
    auto* store_opt = cli_app.add_option("--store", store_flag, "lemma store path");

    std::string problem_path, input_path, out_path;
    CLI::App* decompose = cli_app.add_subcommand("decompose", "run stage 1 only");
    decompose->add_option("problem", problem_path, "problem .lean file")->required();
    CLI::App* verify = cli_app.add_subcommand("verify", "verify candidate statements");
    verify->add_option("--problem", problem_path, "problem .lean file")->required();
    verify->add_option("input", input_path, "file with candidate declarations")->required();
    CLI::App* solve_cmd = cli_app.add_subcommand("solve", "run the full pipeline");
    solve_cmd->add_option("problem", problem_path, "problem .lean file")->required();
    CLI::App* export_cmd = cli_app.add_subcommand("export", "export the lemma dataset");
    export_cmd->add_option("out", out_path, "output .jsonl path")->required();

    try {
        cli_app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = cli_app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (mode_opt->count()) overrides.mode = mode_flag;
        if (k_opt->count()) overrides.k = k_flag;
        if (par_opt->count()) overrides.parallelism = parallelism_flag;
        if (rounds_opt->count()) overrides.rounds = rounds_flag;
        if (backend_opt->count()) overrides.backend = backend_flag;
        if (oracle_opt->count()) overrides.oracle_sorry = true;
        if (store_opt->count()) overrides.store = store_flag;

        AppConfig app = AppConfig::load(config_file, overrides);
        if (const char* fault = std::getenv("DRP_INJECT_FAULT"))
            app.settings.fault_injection = fault;

        if (decompose->parsed()) return cmd_decompose(app, problem_path);
        if (verify->parsed()) return cmd_verify(app, problem_path, input_path);
        if (solve_cmd->parsed()) return cmd_solve(app, problem_path);
        if (export_cmd->parsed()) return cmd_export(app, out_path);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
