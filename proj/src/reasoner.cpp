#include "drp/reasoner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "drp/templates.hpp"

namespace drp {

using nlohmann::json;

void ReasonerConfig::validate() const {
    if (provider != "openai" && provider != "gemini" && provider != "mock")
        throw ConfigError("reasoner provider must be openai, gemini, or mock; got '" + provider +
                          "'");
    if (temperature < 0.0 || temperature > 2.0)
        throw ConfigError("reasoner temperature must be in [0, 2]; got " +
                          std::to_string(temperature));
    if (max_output_tokens < 1) throw ConfigError("reasoner max_output_tokens must be >= 1");
    if (request_timeout <= 0.0) throw ConfigError("reasoner request_timeout must be > 0");
    if (samples < 1) throw ConfigError("reasoner samples must be >= 1");
    if (retries < 0 || retries > 1) throw ConfigError("reasoner retries must be 0 or 1");
    if (provider != "mock") {
        if (endpoint.empty()) throw ConfigError("reasoner endpoint is required for HTTP providers");
        if (api_key_ref.empty())
            throw ConfigError("reasoner api_key_ref is required for HTTP providers");
    }
}

const char* request_error_kind_name(RequestErrorKind kind) {
    switch (kind) {
    case RequestErrorKind::Transport: return "transport";
    case RequestErrorKind::Service: return "service";
    case RequestErrorKind::Timeout: return "timeout";
    }
    return "transport";
}

namespace {

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RequestErrorKind error_kind_from_token(std::string_view token) {
    if (token == "timeout") return RequestErrorKind::Timeout;
    if (token == "service") return RequestErrorKind::Service;
    return RequestErrorKind::Transport;
}

bool is_ident_byte(unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '\'';
}

// `lemma` keyword occurrences with the same boundary discipline as the
// `theorem` scanner: non-identifier byte (or start) on the left, whitespace on
// the right. These are logged for diagnostics but never parsed as candidates.
std::size_t count_lemma_keywords(std::string_view text) {
    static constexpr std::string_view kw = "lemma";
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(kw, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_ident_byte(static_cast<unsigned char>(text[pos - 1]));
        std::size_t after = pos + kw.size();
        bool right_ok =
            after < text.size() && std::isspace(static_cast<unsigned char>(text[after]));
        if (left_ok && right_ok) ++count;
        pos += kw.size();
    }
    return count;
}

} // namespace

MockReasoner::MockReasoner(std::filesystem::path root) : root_(std::move(root)) {
    if (root_.empty()) throw ConfigError("mock reasoner needs a fixture root directory");
}

RequestBatch MockReasoner::request_samples(const std::string& /*prompt*/,
                                           const RequestContext& ctx,
                                           const ReasonerConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::path dir = root_ / ctx.problem_id;
    if (ctx.round >= 2) dir /= "round" + std::to_string(ctx.round);

    RequestBatch batch;
    for (int i = 0; i < cfg.samples; ++i) {
        fs::path txt = dir / ("response" + std::to_string(i) + ".txt");
        fs::path err = dir / ("response" + std::to_string(i) + ".error");
        if (fs::exists(err)) {
            std::string spec = read_file_bytes(err);
            // Strip one trailing newline so `echo timeout > f.error` works.
            while (!spec.empty() && (spec.back() == '\n' || spec.back() == '\r')) spec.pop_back();
            std::string token = spec;
            std::string detail;
            if (std::size_t colon = spec.find(':'); colon != std::string::npos) {
                token = spec.substr(0, colon);
                detail = trim(spec.substr(colon + 1));
            }
            batch.errors.push_back({i, error_kind_from_token(trim(token)), detail});
        } else if (fs::exists(txt)) {
            batch.responses.push_back({i, read_file_bytes(txt), 0.0, std::nullopt});
        } else {
            batch.errors.push_back(
                {i, RequestErrorKind::Transport, "missing fixture " + txt.string()});
        }
    }
    return batch;
}

// --- HTTP backend ------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string base; // scheme://host[:port]
    std::string path; // begins with '/'
};

ParsedUrl parse_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must be an absolute http(s) URL: " + url);
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

struct SingleResult {
    std::optional<ReasonerResponse> response;
    std::optional<RequestError> error;
};

SingleResult issue_one(int index, const std::string& prompt, const ReasonerConfig& cfg,
                       const std::string& api_key) {
    ParsedUrl url = parse_url(cfg.endpoint);

    auto attempt_once = [&]() -> SingleResult {
        httplib::Client client(url.base);
        client.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg.request_timeout * 1000)));
        client.set_read_timeout(
            std::chrono::milliseconds(static_cast<long long>(cfg.request_timeout * 1000)));
        client.set_write_timeout(
            std::chrono::milliseconds(static_cast<long long>(cfg.request_timeout * 1000)));

        httplib::Headers headers;
        std::string body;
        if (cfg.provider == "openai") {
            headers.emplace("Authorization", "Bearer " + api_key);
            body = openai_request_body(prompt, cfg);
        } else {
            headers.emplace("x-goog-api-key", api_key);
            body = gemini_request_body(prompt, cfg);
        }

        auto t0 = std::chrono::steady_clock::now();
        httplib::Result res = client.Post(url.path, headers, body, "application/json");
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (!res) {
            bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             (res.error() == httplib::Error::Read &&
                              elapsed >= cfg.request_timeout * 0.9);
            RequestErrorKind kind =
                timed_out ? RequestErrorKind::Timeout : RequestErrorKind::Transport;
            return {std::nullopt, RequestError{index, kind, httplib::to_string(res.error())}};
        }
        if (res->status < 200 || res->status >= 300) {
            std::string detail = "HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 2048);
            return {std::nullopt, RequestError{index, RequestErrorKind::Service, detail}};
        }
        try {
            std::optional<Usage> usage;
            std::string text = cfg.provider == "openai"
                                   ? parse_openai_response(res->body, usage)
                                   : parse_gemini_response(res->body, usage);
            return {ReasonerResponse{index, std::move(text), elapsed, usage}, std::nullopt};
        } catch (const std::exception& e) {
            return {std::nullopt,
                    RequestError{index, RequestErrorKind::Service,
                                 std::string("unparseable response: ") + e.what()}};
        }
    };

    SingleResult result = attempt_once();
    if (result.error && result.error->kind == RequestErrorKind::Transport && cfg.retries > 0)
        result = attempt_once();
    return result;
}

} // namespace

RequestBatch HttpReasoner::request_samples(const std::string& prompt, const RequestContext&,
                                           const ReasonerConfig& cfg) {
    cfg.validate();
    if (cfg.provider == "mock")
        throw ConfigError("HTTP backend cannot serve the mock provider");

    RequestBatch batch;
    const char* key = std::getenv(cfg.api_key_ref.c_str());
    if (key == nullptr || *key == '\0') {
        // Fail fast: no request leaves the process without a resolvable key.
        for (int i = 0; i < cfg.samples; ++i)
            batch.errors.push_back(
                {i, RequestErrorKind::Service, "api key environment variable is unset"});
        return batch;
    }
    std::string api_key = key;

    std::vector<SingleResult> results(static_cast<std::size_t>(cfg.samples));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(cfg.samples));
    for (int i = 0; i < cfg.samples; ++i)
        workers.emplace_back(
            [&, i]() { results[static_cast<std::size_t>(i)] = issue_one(i, prompt, cfg, api_key); });
    for (std::thread& w : workers) w.join();

    for (SingleResult& r : results) {
        if (r.response) batch.responses.push_back(std::move(*r.response));
        if (r.error) batch.errors.push_back(std::move(*r.error));
    }
    std::sort(batch.responses.begin(), batch.responses.end(),
              [](const ReasonerResponse& a, const ReasonerResponse& b) { return a.index < b.index; });
    std::sort(batch.errors.begin(), batch.errors.end(),
              [](const RequestError& a, const RequestError& b) { return a.index < b.index; });
    return batch;
}

// --- prompt rendering --------------------------------------------------------

std::string build_decomposition_prompt(const std::string& problem_source) {
    return stage1_template() + "\n" + problem_source;
}

std::string build_refinement_prompt(const std::vector<TheoremStatement>& unproved) {
    std::string out = refine_header_template();
    out += "\n";
    for (const TheoremStatement& st : unproved) {
        out += "\n";
        out += normalize_statement(st).text;
        out += " := by sorry\n";
    }
    return out;
}

std::string render_lemma_declaration(const LemmaRecord& record) {
    if (!record.proof) throw UnverifiedLemma("lemma '" + record.name + "' has no proof to render");
    return record.statement + " := " + *record.proof;
}

std::string build_final_proof_prompt(const std::string& problem_source,
                                     const std::vector<LemmaRecord>& verified) {
    for (const LemmaRecord& rec : verified) {
        if (rec.status != LemmaStatus::Proved)
            throw UnverifiedLemma("lemma '" + rec.name + "' is " + lemma_status_name(rec.status) +
                                  ", not PROVED");
        if (!rec.proof || rec.proof->empty())
            throw UnverifiedLemma("lemma '" + rec.name + "' lacks a stored proof");
        if (contains_sorry_token(*rec.proof))
            throw UnverifiedLemma("lemma '" + rec.name + "' proof still contains a placeholder");
    }

    std::string out = stage3_header_template();
    out += "\n";
    if (verified.empty()) {
        out += "(none)\n";
    } else {
        for (const LemmaRecord& rec : verified) {
            out += "\n";
            out += render_lemma_declaration(rec);
            out += "\n";
        }
    }
    out += "\nGoal:\n";
    out += problem_source;
    return out;
}

// --- response parsing --------------------------------------------------------

std::vector<CandidateLemma> parse_decomposition(const std::vector<ReasonerResponse>& responses,
                                                const ExtractionOptions& options,
                                                const std::string& model, int round,
                                                ParseStats* stats) {
    ParseStats local;
    ParseStats& st = stats ? *stats : local;

    std::vector<CandidateLemma> out;
    std::set<std::string> digests;
    std::set<std::string> names;

    for (const ReasonerResponse& resp : responses) {
        ++st.responses;
        st.lemma_keyword_hits += count_lemma_keywords(resp.text);

        std::vector<TheoremStatement> stmts = extract_lemma_statements(resp.text, options);
        for (std::size_t ord = 0; ord < stmts.size(); ++ord) {
            TheoremStatement statement = stmts[ord];
            ++st.extracted;
            CanonicalStatement canon = normalize_statement(statement);
            if (!digests.insert(canon.digest).second) {
                ++st.deduped;
                continue;
            }
            if (names.count(statement.name) != 0) {
                std::string base = statement.name + "_r" + std::to_string(resp.index) + "_" +
                                   std::to_string(ord);
                std::string candidate = base;
                for (int bump = 2; names.count(candidate) != 0; ++bump)
                    candidate = base + "_" + std::to_string(bump);
                statement = rename_theorem(statement, candidate);
                canon = normalize_statement(statement);
                ++st.renamed;
            }
            names.insert(statement.name);

            Provenance prov;
            prov.reasoner_model = model;
            prov.response_index = resp.index;
            prov.round = round;
            prov.extraction_mode = extraction_mode_name(options.mode);
            out.push_back({std::move(statement), std::move(canon), std::move(prov)});
        }
    }
    return out;
}

// --- provider adapters -------------------------------------------------------

std::string openai_request_body(const std::string& prompt, const ReasonerConfig& cfg) {
    json j;
    j["model"] = cfg.model;
    j["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    j["temperature"] = cfg.temperature;
    j["max_tokens"] = cfg.max_output_tokens;
    return j.dump();
}

std::string gemini_request_body(const std::string& prompt, const ReasonerConfig& cfg) {
    json j;
    j["contents"] = json::array({json{{"parts", json::array({json{{"text", prompt}}})}}});
    j["generationConfig"] =
        json{{"temperature", cfg.temperature}, {"maxOutputTokens", cfg.max_output_tokens}};
    return j.dump();
}

std::string parse_openai_response(const std::string& body, std::optional<Usage>& usage) {
    json j = json::parse(body);
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw std::runtime_error("response has no choices");
    const json& msg = j["choices"][0].at("message");
    std::string text = msg.at("content").get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
        Usage u;
        u.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
        u.completion_tokens = j["usage"].value("completion_tokens", 0LL);
        usage = u;
    }
    return text;
}

std::string parse_gemini_response(const std::string& body, std::optional<Usage>& usage) {
    json j = json::parse(body);
    if (!j.contains("candidates") || !j["candidates"].is_array() || j["candidates"].empty())
        throw std::runtime_error("response has no candidates");
    const json& parts = j["candidates"][0].at("content").at("parts");
    std::string text;
    for (const json& part : parts)
        if (part.contains("text")) text += part["text"].get<std::string>();
    if (j.contains("usageMetadata") && j["usageMetadata"].is_object()) {
        Usage u;
        u.prompt_tokens = j["usageMetadata"].value("promptTokenCount", 0LL);
        u.completion_tokens = j["usageMetadata"].value("candidatesTokenCount", 0LL);
        usage = u;
    }
    return text;
}

std::string describe_config(const ReasonerConfig& cfg) {
    std::ostringstream out;
    out << "provider=" << cfg.provider << " model=" << cfg.model << " endpoint=" << cfg.endpoint
        << " temperature=" << cfg.temperature << " max_output_tokens=" << cfg.max_output_tokens
        << " request_timeout=" << cfg.request_timeout << " samples=" << cfg.samples
        << " api_key_ref=***";
    return out.str();
}

} // namespace drp
