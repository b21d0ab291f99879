#include "drp/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "drp/errors.hpp"

namespace drp {

using nlohmann::ordered_json;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

bool parse_bool(const std::string& value, const std::string& where) {
    std::string v = lower(trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(where + ": expected a boolean, got '" + value + "'");
}

int parse_int(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        int parsed = std::stoi(trim(value), &used);
        if (used != trim(value).size()) throw std::invalid_argument("trailing");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        double parsed = std::stod(trim(value), &used);
        if (used != trim(value).size()) throw std::invalid_argument("trailing");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + value + "'");
    }
}

std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> items;
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

// Every key the loader understands, per section. Unknown names are rejected
// so a typo fails loudly instead of silently keeping a default.
const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"reasoner",
         {"provider", "endpoint", "model", "api_key_ref", "temperature", "max_output_tokens",
          "request_timeout", "samples", "retries"}},
        {"prover",
         {"provider", "endpoint", "model", "api_key_ref", "temperature", "max_output_tokens",
          "request_timeout", "samples", "retries"}},
        {"final",
         {"provider", "endpoint", "model", "api_key_ref", "temperature", "max_output_tokens",
          "request_timeout", "samples", "retries", "k", "per_attempt_timeout"}},
        {"stage2", {"k", "per_attempt_timeout", "total_deadline", "parallelism"}},
        {"pipeline", {"rounds", "mode", "oracle_sorry"}},
        {"checker", {"backend", "command", "workdir", "env_passthrough"}},
        {"store", {"path", "runs_dir"}},
        {"mock", {"fixtures"}},
    };
    return keys;
}

// Resolves one value through the file-then-environment precedence chain.
class Lookup {
public:
    Lookup(const IniFile& file, const AppConfig::GetEnv& getenv_fn)
        : file_(file), getenv_(getenv_fn) {}

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        std::string env_name = "DRP_" + upper(section) + "_" + upper(key);
        if (const char* env_value = getenv_(env_name.c_str())) return std::string(env_value);
        if (const std::string* file_value = file_.find(section, key)) return *file_value;
        return std::nullopt;
    }

    void get_str(const std::string& s, const std::string& k, std::string& out) const {
        if (auto v = get(s, k)) out = trim(*v);
    }
    void get_int(const std::string& s, const std::string& k, int& out) const {
        if (auto v = get(s, k)) out = parse_int(*v, s + "." + k);
    }
    void get_double(const std::string& s, const std::string& k, double& out) const {
        if (auto v = get(s, k)) out = parse_double(*v, s + "." + k);
    }
    void get_bool(const std::string& s, const std::string& k, bool& out) const {
        if (auto v = get(s, k)) out = parse_bool(*v, s + "." + k);
    }

private:
    const IniFile& file_;
    const AppConfig::GetEnv& getenv_;
};

void load_model_section(const Lookup& lookup, const std::string& section, ReasonerConfig& cfg) {
    lookup.get_str(section, "provider", cfg.provider);
    lookup.get_str(section, "endpoint", cfg.endpoint);
    lookup.get_str(section, "model", cfg.model);
    lookup.get_str(section, "api_key_ref", cfg.api_key_ref);
    lookup.get_double(section, "temperature", cfg.temperature);
    lookup.get_int(section, "max_output_tokens", cfg.max_output_tokens);
    lookup.get_double(section, "request_timeout", cfg.request_timeout);
    lookup.get_int(section, "samples", cfg.samples);
    lookup.get_int(section, "retries", cfg.retries);
}

bool section_touched(const IniFile& file, const AppConfig::GetEnv& getenv_fn,
                     const std::string& section) {
    if (file.sections.count(section)) return true;
    for (const std::string& key : known_keys().at(section)) {
        std::string env_name = "DRP_" + upper(section) + "_" + upper(key);
        if (getenv_fn(env_name.c_str())) return true;
    }
    return false;
}

} // namespace

IniFile IniFile::parse_text(const std::string& text) {
    IniFile ini;
    std::string section;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            section = lower(trim(stripped.substr(1, stripped.size() - 2)));
            if (section.empty())
                throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            ini.sections[section]; // materialize even if the section stays empty
            continue;
        }
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected `key = value`");
        std::string key = lower(trim(stripped.substr(0, eq)));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key outside any [section]");
        ini.sections[section][key] = trim(stripped.substr(eq + 1));
    }
    return ini;
}

IniFile IniFile::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_text(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

const std::string* IniFile::find(const std::string& section, const std::string& key) const {
    auto sec = sections.find(section);
    if (sec == sections.end()) return nullptr;
    auto it = sec->second.find(key);
    return it == sec->second.end() ? nullptr : &it->second;
}

const char* AppConfig::default_getenv(const char* name) {
    return std::getenv(name);
}

AppConfig AppConfig::load(const std::filesystem::path& config_file, const CliOverrides& cli,
                          const GetEnv& getenv_fn) {
    IniFile file;
    if (!config_file.empty()) file = IniFile::parse_file(config_file);

    for (const auto& [section, keys] : file.sections) {
        auto known = known_keys().find(section);
        if (known == known_keys().end())
            throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : keys) {
            (void)value;
            if (!known->second.count(key))
                throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
        }
    }

    Lookup lookup(file, getenv_fn);
    AppConfig app;

    load_model_section(lookup, "reasoner", app.settings.reasoner);

    // Prover and final model configs inherit the reasoner's unless their own
    // section (or a matching environment variable) says otherwise.
    app.settings.prover_model = app.settings.reasoner;
    if (section_touched(file, getenv_fn, "prover"))
        load_model_section(lookup, "prover", app.settings.prover_model);
    app.settings.final_model = app.settings.reasoner;
    if (section_touched(file, getenv_fn, "final"))
        load_model_section(lookup, "final", app.settings.final_model);
    app.settings.final_model.samples = 1;
    app.settings.prover_model.samples = 1;

    lookup.get_int("stage2", "k", app.settings.stage2.k);
    lookup.get_double("stage2", "per_attempt_timeout", app.settings.stage2.per_attempt_timeout);
    if (auto deadline = lookup.get("stage2", "total_deadline")) {
        std::string v = lower(trim(*deadline));
        if (v.empty() || v == "none")
            app.settings.stage2.total_deadline.reset();
        else
            app.settings.stage2.total_deadline = parse_double(v, "stage2.total_deadline");
    }
    lookup.get_int("stage2", "parallelism", app.settings.parallelism);

    lookup.get_int("final", "k", app.settings.final_budget.k);
    lookup.get_double("final", "per_attempt_timeout",
                      app.settings.final_budget.per_attempt_timeout);

    lookup.get_int("pipeline", "rounds", app.settings.rounds);
    lookup.get_bool("pipeline", "oracle_sorry", app.settings.oracle_sorry);
    if (auto mode = lookup.get("pipeline", "mode"))
        app.settings.extraction.mode = extraction_mode_from_name(trim(*mode));

    lookup.get_str("checker", "backend", app.checker_backend);
    lookup.get_str("checker", "command", app.external.command);
    lookup.get_str("checker", "workdir", app.external.workdir);
    if (auto passthrough = lookup.get("checker", "env_passthrough"))
        app.external.env_passthrough = parse_list(*passthrough);

    std::string store_value = app.store_path.string();
    lookup.get_str("store", "path", store_value);
    app.store_path = store_value;
    std::string runs_value;
    lookup.get_str("store", "runs_dir", runs_value);
    lookup.get_str("mock", "fixtures", app.mock_fixtures);

    // Flags outrank everything.
    if (cli.mode) app.settings.extraction.mode = extraction_mode_from_name(*cli.mode);
    if (cli.k) app.settings.stage2.k = *cli.k;
    if (cli.parallelism) app.settings.parallelism = *cli.parallelism;
    if (cli.rounds) app.settings.rounds = *cli.rounds;
    if (cli.backend) app.checker_backend = *cli.backend;
    if (cli.oracle_sorry) app.settings.oracle_sorry = *cli.oracle_sorry;
    if (cli.store) app.store_path = *cli.store;

    app.runs_dir = runs_value.empty()
                       ? std::filesystem::path(app.store_path.string() + ".runs")
                       : std::filesystem::path(runs_value);

    if (app.checker_backend != "mock" && app.checker_backend != "external")
        throw ConfigError("checker.backend must be mock|external, got '" + app.checker_backend +
                          "'");
    if (app.checker_backend == "external" && app.external.command.empty())
        throw ConfigError("checker.backend=external requires checker.command");
    app.settings.validate();
    return app;
}

ordered_json AppConfig::redacted_snapshot() const {
    auto model_json = [](const ReasonerConfig& cfg) {
        ordered_json j;
        j["provider"] = cfg.provider;
        j["endpoint"] = cfg.endpoint;
        j["model"] = cfg.model;
        j["api_key_ref"] = "***";
        j["temperature"] = cfg.temperature;
        j["max_output_tokens"] = cfg.max_output_tokens;
        j["request_timeout"] = cfg.request_timeout;
        j["samples"] = cfg.samples;
        j["retries"] = cfg.retries;
        return j;
    };
    ordered_json j;
    j["reasoner"] = model_json(settings.reasoner);
    j["prover"] = model_json(settings.prover_model);
    j["final"] = model_json(settings.final_model);
    j["stage2"] = ordered_json{{"k", settings.stage2.k},
                               {"per_attempt_timeout", settings.stage2.per_attempt_timeout},
                               {"parallelism", settings.parallelism}};
    j["final_budget"] = ordered_json{{"k", settings.final_budget.k},
                                     {"per_attempt_timeout",
                                      settings.final_budget.per_attempt_timeout}};
    j["pipeline"] = ordered_json{{"rounds", settings.rounds},
                                 {"oracle_sorry", settings.oracle_sorry},
                                 {"mode", extraction_mode_name(settings.extraction.mode)}};
    j["checker"] = ordered_json{{"backend", checker_backend},
                                {"command", external.command},
                                {"workdir", external.workdir}};
    j["store"] = ordered_json{{"path", store_path.string()}, {"runs_dir", runs_dir.string()}};
    return j;
}

} // namespace drp
