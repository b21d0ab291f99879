#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "drp/checker.hpp"
#include "drp/pipeline.hpp"

namespace drp {

// Parsed INI text: [section] headers, `key = value` lines, `#`/`;` comments.
// Section and key names are case-insensitive (stored lowercase); values keep
// their case. Duplicate keys take the last value.
struct IniFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static IniFile parse_text(const std::string& text);       // throws ConfigError
    static IniFile parse_file(const std::filesystem::path& path);

    const std::string* find(const std::string& section, const std::string& key) const;
};

// Command-line values that take precedence over file and environment.
struct CliOverrides {
    std::optional<std::string> mode;        // extraction: "regex" | "balanced"
    std::optional<int> k;                   // stage-2 attempt budget
    std::optional<int> parallelism;
    std::optional<int> rounds;
    std::optional<std::string> backend;     // checker: "external" | "mock"
    std::optional<bool> oracle_sorry;
    std::optional<std::string> store;       // dataset path
};

// Everything the CLI needs to wire a run. Precedence, lowest to highest:
// built-in defaults, config file, DRP_<SECTION>_<KEY> environment variables,
// command-line flags.
struct AppConfig {
    PipelineSettings settings;
    std::string checker_backend = "mock";   // "mock" | "external"
    ExternalCheckerConfig external;
    std::filesystem::path store_path = "drp_store.jsonl";
    std::filesystem::path runs_dir;         // default: <store_path>.runs
    std::string mock_fixtures;              // root for mock reasoner/checker scripts

    using GetEnv = std::function<const char*(const char*)>;

    static AppConfig load(const std::filesystem::path& config_file, const CliOverrides& cli,
                          const GetEnv& getenv_fn = default_getenv);
    static const char* default_getenv(const char* name);

    // Secrets masked; safe to print or embed in reports.
    nlohmann::ordered_json redacted_snapshot() const;
};

} // namespace drp
