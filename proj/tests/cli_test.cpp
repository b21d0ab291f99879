#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

extern char** environ;

using drp::test::fixtures_dir;
using drp::test::read_file;
using drp::test::TempDir;
using drp::test::write_file;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI binary with a scrubbed environment: every inherited DRP_* knob
// is dropped, then the requested variables are applied.
CliResult run_cli(const std::vector<std::string>& args,
                  const std::map<std::string, std::string>& env = {}) {
    TempDir streams;
    std::filesystem::path out_path = streams.path() / "out";
    std::filesystem::path err_path = streams.path() / "err";

    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        std::vector<std::string> doomed;
        for (char** e = environ; *e != nullptr; ++e) {
            std::string entry(*e);
            if (entry.rfind("DRP_", 0) == 0) doomed.push_back(entry.substr(0, entry.find('=')));
        }
        for (const std::string& name : doomed) unsetenv(name.c_str());
        for (const auto& [name, value] : env) setenv(name.c_str(), value.c_str(), 1);

        FILE* out = std::fopen(out_path.c_str(), "w");
        FILE* err = std::fopen(err_path.c_str(), "w");
        if (!out || !err) _exit(127);
        dup2(fileno(out), STDOUT_FILENO);
        dup2(fileno(err), STDERR_FILENO);

        std::vector<std::string> argv_storage;
        argv_storage.push_back(DRP_CLI_BIN);
        for (const std::string& a : args) argv_storage.push_back(a);
        std::vector<char*> argv;
        for (std::string& a : argv_storage) argv.push_back(a.data());
        argv.push_back(nullptr);
        execv(DRP_CLI_BIN, argv.data());
        _exit(127);
    }

    int wstatus = 0;
    REQUIRE(waitpid(pid, &wstatus, 0) == pid);
    CliResult result;
    result.exit_code = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> tokens_of(const std::string& line) {
    std::istringstream stream(line);
    std::vector<std::string> tokens;
    std::string token;
    while (stream >> token) tokens.push_back(token);
    return tokens;
}

bool looks_like_digest8(const std::string& s) {
    if (s.size() != 8) return false;
    for (unsigned char c : s) {
        if (!std::isxdigit(c) || std::isupper(c)) return false;
    }
    return true;
}

std::string problems_dir() { return (fixtures_dir() / "problems").string(); }
std::string e2e_dir() { return (fixtures_dir() / "e2e").string(); }

// Standard scripted configuration: mock everything, paths under `dir`.
std::string write_config(const TempDir& dir, const std::string& extra = "") {
    std::string text = "[reasoner]\nprovider = mock\nmodel = mock-reasoner\nsamples = 2\n\n"
                       "[stage2]\nk = 8\nparallelism = 4\n\n"
                       "[final]\nk = 4\n\n"
                       "[checker]\nbackend = mock\n\n"
                       "[mock]\nfixtures = " +
                       e2e_dir() + "\n\n[store]\npath = " +
                       (dir.path() / "store.jsonl").string() + "\n" + extra;
    std::filesystem::path file = dir.path() / "drp.ini";
    write_file(file, text);
    return file.string();
}

} // namespace

TEST_CASE("decompose lists candidates with digests and counters") {
    TempDir dir;
    std::string config = write_config(dir);
    CliResult r = run_cli({"--config", config, "decompose",
                           problems_dir() + "/imo_2019_p1.lean"});
    CHECK(r.exit_code == 0);
    CHECK(r.err.empty());

    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 7);
    const std::vector<std::string> expected = {
        "prop_f_f_x",        "prop_f_2x",           "prop_cauchy_like",
        "cauchy_implies_linear_form", "bogus_periodicity", "overreach_injective"};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        auto tokens = tokens_of(lines[i]);
        REQUIRE(tokens.size() == 2);
        CHECK(tokens[0] == expected[i]);
        CHECK(looks_like_digest8(tokens[1]));
    }
    CHECK(lines[6] == "responses=2 extracted=7 kept=6 deduped=1 renamed=0");
}

TEST_CASE("the extraction mode flag changes what decompose keeps") {
    TempDir dir;
    std::string config = write_config(dir);
    std::string problem = problems_dir() + "/modes_demo.lean";

    CliResult balanced = run_cli({"--config", config, "decompose", problem});
    CHECK(balanced.exit_code == 0);
    auto balanced_lines = lines_of(balanced.out);
    REQUIRE(!balanced_lines.empty());
    CHECK(balanced_lines.back().find("kept=2") != std::string::npos);

    CliResult regex = run_cli({"--config", config, "--mode", "regex", "decompose", problem});
    CHECK(regex.exit_code == 0);
    auto regex_lines = lines_of(regex.out);
    REQUIRE(!regex_lines.empty());
    CHECK(regex_lines.back().find("kept=1") != std::string::npos);

    CliResult bogus = run_cli({"--config", config, "--mode", "fuzzy", "decompose", problem});
    CHECK(bogus.exit_code == 2);
    CHECK(bogus.err.find("config error:") != std::string::npos);
}

TEST_CASE("verify prints a verdict table over the scripted checker") {
    TempDir dir;
    std::string config = write_config(dir);
    std::filesystem::path input = dir.path() / "candidates.lean";
    write_file(input,
               "theorem sq_ge_two_mul (n : ℕ) (h : 2 ≤ n) : 2 * n ≤ n ^ 2 := by sorry\n\n"
               "theorem unknown_aux (n : ℕ) : n * 0 = 0 := by sorry\n");

    CliResult r = run_cli({"--config", config, "verify", "--problem",
                           problems_dir() + "/refine_demo.lean", input.string()});
    CHECK(r.exit_code == 0);

    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 4); // header, two rows, proved summary
    auto row1 = tokens_of(lines[1]);
    REQUIRE(row1.size() == 4);
    CHECK(row1[0] == "sq_ge_two_mul");
    CHECK(looks_like_digest8(row1[1]));
    CHECK(row1[2] == "PROVED");
    CHECK(row1[3] == "1/8");
    auto row2 = tokens_of(lines[2]);
    REQUIRE(row2.size() == 4);
    CHECK(row2[0] == "unknown_aux");
    CHECK(row2[2] == "UNPROVED");
    CHECK(row2[3] == "8/8");
    CHECK(lines[3] == "proved=1/2");
}

TEST_CASE("configuration precedence runs file then environment then flags") {
    TempDir dir;
    std::string config = write_config(dir, "\n[pipeline]\nrounds = 1\n");
    // Rewrite the stage-2 budget in the file copy to k = 4.
    std::string text = read_file(dir.path() / "drp.ini");
    auto at = text.find("k = 8");
    REQUIRE(at != std::string::npos);
    text.replace(at, 5, "k = 4");
    write_file(dir.path() / "drp.ini", text);

    std::filesystem::path input = dir.path() / "candidates.lean";
    write_file(input,
               "theorem sq_ge_two_mul (n : ℕ) (h : 2 ≤ n) : 2 * n ≤ n ^ 2 := by sorry\n");
    std::vector<std::string> base = {"--config", config, "verify", "--problem",
                                     problems_dir() + "/refine_demo.lean", input.string()};

    CliResult from_file = run_cli(base);
    REQUIRE(from_file.exit_code == 0);
    CHECK(tokens_of(lines_of(from_file.out)[1])[3] == "1/4");

    CliResult from_env = run_cli(base, {{"DRP_STAGE2_K", "6"}});
    REQUIRE(from_env.exit_code == 0);
    CHECK(tokens_of(lines_of(from_env.out)[1])[3] == "1/6");

    std::vector<std::string> with_flag = {"--config", config, "--k", "8", "verify",
                                          "--problem", problems_dir() + "/refine_demo.lean",
                                          input.string()};
    CliResult from_flag = run_cli(with_flag, {{"DRP_STAGE2_K", "6"}});
    REQUIRE(from_flag.exit_code == 0);
    CHECK(tokens_of(lines_of(from_flag.out)[1])[3] == "1/8");
}

TEST_CASE("solve prints the summary line and persists the run report") {
    TempDir dir;
    std::string config = write_config(dir);
    CliResult r = run_cli({"--config", config, "solve",
                           problems_dir() + "/imo_2019_p1.lean"});
    CHECK(r.exit_code == 0);
    CHECK(r.out == "imo_2019_p1 SOLVED candidates=6 proved=4 final_attempts=1\n");
    CHECK(r.err.empty());

    // Run artifacts land next to the store by default.
    std::filesystem::path report =
        dir.path() / "store.jsonl.runs" / "imo_2019_p1" / "report.json";
    REQUIRE(std::filesystem::exists(report));
    CHECK(read_file(report).find("\"status\": \"SOLVED\"") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path() / "store.jsonl"));
    CHECK(lines_of(read_file(dir.path() / "store.jsonl")).size() == 6);
}

TEST_CASE("export writes the dataset with its manifest sidecar") {
    TempDir dir;
    std::string config = write_config(dir);
    REQUIRE(run_cli({"--config", config, "solve", problems_dir() + "/imo_2019_p1.lean"})
                .exit_code == 0);

    std::filesystem::path out = dir.path() / "nested" / "dataset.jsonl";
    CliResult r = run_cli({"--config", config, "export", out.string()});
    CHECK(r.exit_code == 0);
    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "exported 6 record(s) across 1 problem(s) to " + out.string());
    CHECK(lines[1].rfind("manifest " + out.string() + ".manifest.json checksum ", 0) == 0);
    REQUIRE(std::filesystem::exists(out));

    nlohmann::json manifest =
        nlohmann::json::parse(read_file(out.string() + ".manifest.json"));
    CHECK(manifest["record_count"] == 6);
    CHECK(manifest["problem_count"] == 1);
    std::string checksum = manifest["checksum_sha256"].get<std::string>();
    CHECK(lines[1].substr(lines[1].size() - 12) == checksum.substr(0, 12));
}

TEST_CASE("oracle solve is bannered non-sound") {
    TempDir dir;
    std::string config = write_config(dir);
    CliResult r = run_cli({"--config", config, "--oracle-sorry", "solve",
                           problems_dir() + "/imo_2019_p1.lean"});
    CHECK(r.exit_code == 0);
    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "NON-SOUND: final context contains oracle placeholders");
    CHECK(lines[1] == "imo_2019_p1 SOLVED candidates=6 proved=4 final_attempts=1");
}

TEST_CASE("a dead reasoner exits 1 and still writes a PARTIAL report") {
    TempDir dir;
    std::string config = write_config(dir);
    CliResult r = run_cli({"--config", config, "solve",
                           problems_dir() + "/net_fail.lean"});
    CHECK(r.exit_code == 1);
    CHECK(r.out == "net_fail PARTIAL candidates=0 proved=0 final_attempts=0\n");
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("transport") != std::string::npos);

    std::string report =
        read_file(dir.path() / "store.jsonl.runs" / "net_fail" / "report.json");
    CHECK(report.find("\"status\": \"PARTIAL\"") != std::string::npos);
    CHECK(report.find("connection refused") != std::string::npos);
}

TEST_CASE("injected faults surface as operational failures") {
    TempDir dir;
    std::string config = write_config(dir);
    CliResult r = run_cli({"--config", config, "solve", problems_dir() + "/imo_2019_p1.lean"},
                          {{"DRP_INJECT_FAULT", "stage2"}});
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("injected fault before stage2") != std::string::npos);
}

TEST_CASE("usage and configuration mistakes exit 2") {
    TempDir dir;
    std::string config = write_config(dir);

    CHECK(run_cli({"--bogus-flag", "solve", "x.lean"}).exit_code == 2);
    CHECK(run_cli({"decompose"}).exit_code == 2); // missing required argument
    CHECK(run_cli({"--help"}).exit_code == 0);

    write_file(dir.path() / "typo.ini", "[reasoner]\nprovider = mock\nmodle = oops\n");
    CliResult typo = run_cli({"--config", (dir.path() / "typo.ini").string(), "decompose",
                              problems_dir() + "/modes_demo.lean"});
    CHECK(typo.exit_code == 2);
    CHECK(typo.err.find("config error:") != std::string::npos);

    // provider=mock without a fixture root is a configuration error.
    write_file(dir.path() / "nofix.ini",
               "[reasoner]\nprovider = mock\n[store]\npath = " +
                   (dir.path() / "s.jsonl").string() + "\n");
    CliResult nofix = run_cli({"--config", (dir.path() / "nofix.ini").string(), "decompose",
                               problems_dir() + "/modes_demo.lean"});
    CHECK(nofix.exit_code == 2);
    CHECK(nofix.err.find("fixture root") != std::string::npos);
}

TEST_CASE("secret material never reaches stdout or any artifact") {
    TempDir dir;
    const std::string secret_value = "hunter2-cli-secret-value";
    std::string config = write_config(dir, "\n# key reference exercised below\n");
    std::string text = read_file(dir.path() / "drp.ini");
    text.replace(text.find("provider = mock"), 15,
                 "provider = mock\napi_key_ref = DRP_CLI_TEST_SECRET");
    write_file(dir.path() / "drp.ini", text);

    CliResult r = run_cli({"--config", config, "solve", problems_dir() + "/imo_2019_p1.lean"},
                          {{"DRP_CLI_TEST_SECRET", secret_value}});
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find(secret_value) == std::string::npos);
    CHECK(r.err.find(secret_value) == std::string::npos);

    // Crawl everything the run wrote; neither the value nor the variable name
    // may appear, and the snapshot must carry the mask.
    std::string report =
        read_file(dir.path() / "store.jsonl.runs" / "imo_2019_p1" / "report.json");
    CHECK(report.find(secret_value) == std::string::npos);
    CHECK(report.find("DRP_CLI_TEST_SECRET") == std::string::npos);
    CHECK(report.find("\"api_key_ref\": \"***\"") != std::string::npos);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
        if (!entry.is_regular_file() || entry.path().filename() == "drp.ini") continue;
        CHECK(read_file(entry.path()).find(secret_value) == std::string::npos);
    }
}
