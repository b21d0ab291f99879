#include "drp/checker.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "drp/statement.hpp"

namespace drp {

using nlohmann::json;

// --- scripted backend --------------------------------------------------------

namespace {

// The mock keys its script on the statement the source is "about": the last
// declaration in the text, looked up by digest first and plain name second.
struct SourceKey {
    std::string digest;
    std::string name;
};

std::optional<SourceKey> key_for_source(const std::string& source) {
    ExtractionOptions opts;
    opts.mode = ExtractionMode::Balanced;
    opts.require_sorry_body = false;
    std::vector<TheoremStatement> stmts = extract_lemma_statements(source, opts);
    if (stmts.empty()) return std::nullopt;
    const TheoremStatement& last = stmts.back();
    return SourceKey{normalize_statement(last).digest, last.name};
}

} // namespace

class MockCheckerSession : public CheckerSession {
public:
    explicit MockCheckerSession(const MockCheckerBackend* backend) : backend_(backend) {}

    CheckerReply check(const std::string&, const std::string& source, double timeout_s) override {
        std::optional<SourceKey> key = key_for_source(source);
        const MockRule* rule = nullptr;
        std::string counter_key = "<unparsed>";
        if (key) {
            auto it = backend_->rules_.find(key->digest);
            if (it == backend_->rules_.end()) it = backend_->rules_.find(key->name);
            if (it != backend_->rules_.end()) rule = &it->second;
            counter_key = key->digest;
        }
        int attempt = ++attempts_[counter_key];

        MockRule defaults;
        const MockRule& r = rule ? *rule : defaults;

        if (backend_->real_sleep_ && r.latency_s > 0.0) {
            double nap = std::min(r.latency_s, timeout_s);
            std::this_thread::sleep_for(std::chrono::duration<double>(nap));
        }

        if (r.timeout_on.count(attempt) != 0 || r.latency_s > timeout_s) {
            ++restarts_;
            return {ReplyStatus::TimedOut, false, {},
                    static_cast<long long>(timeout_s * 1000), "scripted timeout"};
        }
        if (r.crash_on.count(attempt) != 0) {
            ++restarts_;
            return {ReplyStatus::Crashed, false, {}, 0, "scripted crash"};
        }

        long long elapsed_ms = static_cast<long long>(r.latency_s * 1000);
        bool ok = (rule != nullptr && r.succeed_on_attempt == attempt) ||
                  (rule == nullptr && backend_->default_ok_);
        CheckerReply reply{ReplyStatus::Reply, ok, {}, elapsed_ms, ""};
        if (ok && contains_sorry_token(source)) {
            // Mirror a real toolchain: a placeholder elaborates with a warning.
            reply.messages.push_back({"warning", "declaration uses 'sorry'"});
        }
        if (!ok) reply.messages.push_back({"error", "proof attempt rejected (scripted)"});
        return reply;
    }

    int restarts() const override { return restarts_; }

private:
    const MockCheckerBackend* backend_;
    std::map<std::string, int> attempts_;
    int restarts_ = 0;
};

void MockCheckerBackend::set_rule(const std::string& key, MockRule rule) {
    rules_[key] = std::move(rule);
}

void MockCheckerBackend::load_scripts_json(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot read mock scripts " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("mock scripts " + file.string() + ": " + e.what());
    }
    if (!j.contains("checker")) return;
    const json& c = j["checker"];
    default_ok_ = c.value("default_ok", false);
    if (!c.contains("rules")) return;
    for (auto it = c["rules"].begin(); it != c["rules"].end(); ++it) {
        MockRule rule;
        rule.succeed_on_attempt = it.value().value("succeed_on_attempt", 0);
        rule.latency_s = it.value().value("latency_s", 0.0);
        for (const json& a : it.value().value("crash_on", json::array()))
            rule.crash_on.insert(a.get<int>());
        for (const json& a : it.value().value("timeout_on", json::array()))
            rule.timeout_on.insert(a.get<int>());
        rules_[it.key()] = std::move(rule);
    }
}

std::unique_ptr<CheckerSession> MockCheckerBackend::open_session() {
    return std::make_unique<MockCheckerSession>(this);
}

// --- external worker backend -------------------------------------------------

namespace {

struct WorkerProcess {
    pid_t pid = -1;
    int to_child = -1;   // we write requests here
    int from_child = -1; // we read replies here
    std::string buffer;  // bytes read past the last newline

    bool running() const { return pid > 0; }

    void close_fds() {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        to_child = from_child = -1;
    }

    void kill_and_reap() {
        if (pid <= 0) return;
        ::kill(pid, SIGKILL);
        int status = 0;
        ::waitpid(pid, &status, 0);
        pid = -1;
        close_fds();
        buffer.clear();
    }

    // Polite shutdown: close stdin so a well-behaved worker exits on EOF.
    void shutdown() {
        if (pid <= 0) return;
        if (to_child >= 0) ::close(to_child);
        to_child = -1;
        for (int i = 0; i < 50; ++i) {
            int status = 0;
            pid_t done = ::waitpid(pid, &status, WNOHANG);
            if (done == pid) {
                pid = -1;
                close_fds();
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        kill_and_reap();
    }
};

} // namespace

class ExternalCheckerSession : public CheckerSession {
public:
    explicit ExternalCheckerSession(ExternalCheckerConfig config) : config_(std::move(config)) {
        // Writes to a dead worker must surface as EPIPE, not kill the process.
        std::signal(SIGPIPE, SIG_IGN);
    }

    ~ExternalCheckerSession() override { worker_.shutdown(); }

    CheckerReply check(const std::string& id, const std::string& source,
                       double timeout_s) override {
        if (!worker_.running()) {
            std::string why;
            if (!spawn(why)) return {ReplyStatus::Crashed, false, {}, 0, "spawn failed: " + why};
        }

        json req;
        req["id"] = id;
        req["source"] = source;
        std::string line = req.dump();
        line += '\n';

        auto t0 = std::chrono::steady_clock::now();
        if (!write_all(line)) {
            worker_.kill_and_reap();
            ++restarts_;
            return {ReplyStatus::Crashed, false, {}, 0, "worker closed its input"};
        }

        std::string reply_line;
        ReadStatus rs = read_line(reply_line, timeout_s);
        long long elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        if (rs == ReadStatus::Timeout) {
            worker_.kill_and_reap();
            ++restarts_;
            return {ReplyStatus::TimedOut, false, {}, elapsed_ms,
                    "no reply within " + std::to_string(timeout_s) + "s; worker killed"};
        }
        if (rs == ReadStatus::Eof) {
            worker_.kill_and_reap();
            ++restarts_;
            return {ReplyStatus::Crashed, false, {}, elapsed_ms, "worker closed its output"};
        }

        return parse_reply(reply_line, id, elapsed_ms);
    }

    int restarts() const override { return restarts_; }

private:
    enum class ReadStatus { Line, Eof, Timeout };

    CheckerReply parse_reply(const std::string& line, const std::string& id,
                             long long fallback_elapsed_ms) {
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            worker_.kill_and_reap();
            ++restarts_;
            return {ReplyStatus::Crashed, false, {}, fallback_elapsed_ms,
                    "worker emitted a non-JSON line"};
        }
        auto protocol_violation = [&](const std::string& why) -> CheckerReply {
            worker_.kill_and_reap();
            ++restarts_;
            return {ReplyStatus::Crashed, false, {}, fallback_elapsed_ms, why};
        };
        if (!j.is_object() || !j.contains("id") || !j.contains("ok") || !j.contains("messages") ||
            !j.contains("elapsed_ms"))
            return protocol_violation("malformed reply object");
        if (!j["id"].is_string() || j["id"].get<std::string>() != id)
            return protocol_violation("reply id does not match request id");
        if (!j["ok"].is_boolean() || !j["messages"].is_array() ||
            !j["elapsed_ms"].is_number_integer())
            return protocol_violation("reply field types are wrong");

        CheckerReply reply;
        reply.status = ReplyStatus::Reply;
        reply.ok = j["ok"].get<bool>();
        reply.elapsed_ms = j["elapsed_ms"].get<long long>();
        for (const json& m : j["messages"]) {
            if (!m.is_object() || !m.contains("severity") || !m.contains("text") ||
                !m["severity"].is_string() || !m["text"].is_string())
                return protocol_violation("malformed diagnostic entry");
            std::string severity = m["severity"].get<std::string>();
            if (severity != "error" && severity != "warning" && severity != "info")
                return protocol_violation("unknown diagnostic severity '" + severity + "'");
            reply.messages.push_back({std::move(severity), m["text"].get<std::string>()});
        }
        return reply;
    }

    bool spawn(std::string& why) {
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0) {
            why = std::strerror(errno);
            return false;
        }
        if (::pipe(from_child) != 0) {
            why = std::strerror(errno);
            ::close(to_child[0]);
            ::close(to_child[1]);
            return false;
        }

        pid_t pid = ::fork();
        if (pid < 0) {
            why = std::strerror(errno);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            return false;
        }
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            if (!config_.workdir.empty() && ::chdir(config_.workdir.c_str()) != 0) ::_exit(127);
            if (!config_.env_passthrough.empty()) {
                std::vector<std::string> kept;
                kept.reserve(config_.env_passthrough.size() + 1);
                auto keep = [&](const char* name) {
                    if (const char* value = ::getenv(name))
                        kept.push_back(std::string(name) + "=" + value);
                };
                keep("PATH");
                for (const std::string& name : config_.env_passthrough)
                    if (name != "PATH") keep(name.c_str());
                std::vector<char*> envp;
                envp.reserve(kept.size() + 1);
                for (std::string& e : kept) envp.push_back(e.data());
                envp.push_back(nullptr);
                ::execle("/bin/sh", "sh", "-c", config_.command.c_str(),
                         static_cast<char*>(nullptr), envp.data());
            } else {
                ::execl("/bin/sh", "sh", "-c", config_.command.c_str(),
                        static_cast<char*>(nullptr));
            }
            ::_exit(127);
        }

        ::close(to_child[0]);
        ::close(from_child[1]);
        worker_.pid = pid;
        worker_.to_child = to_child[1];
        worker_.from_child = from_child[0];
        worker_.buffer.clear();
        return true;
    }

    bool write_all(const std::string& data) {
        std::size_t written = 0;
        while (written < data.size()) {
            ssize_t n = ::write(worker_.to_child, data.data() + written, data.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            written += static_cast<std::size_t>(n);
        }
        return true;
    }

    ReadStatus read_line(std::string& out, double timeout_s) {
        auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
        for (;;) {
            if (std::size_t nl = worker_.buffer.find('\n'); nl != std::string::npos) {
                out = worker_.buffer.substr(0, nl);
                worker_.buffer.erase(0, nl + 1);
                return ReadStatus::Line;
            }

            auto remaining = deadline - std::chrono::steady_clock::now();
            long long remaining_ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(remaining).count();
            if (remaining_ms <= 0) return ReadStatus::Timeout;

            struct pollfd pfd{};
            pfd.fd = worker_.from_child;
            pfd.events = POLLIN;
            int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining_ms, 100)));
            if (pr < 0) {
                if (errno == EINTR) continue;
                return ReadStatus::Eof;
            }
            if (pr == 0) continue; // poll slice elapsed; re-check the deadline

            char chunk[4096];
            ssize_t n = ::read(worker_.from_child, chunk, sizeof(chunk));
            if (n < 0) {
                if (errno == EINTR) continue;
                return ReadStatus::Eof;
            }
            if (n == 0) return ReadStatus::Eof;
            worker_.buffer.append(chunk, static_cast<std::size_t>(n));
        }
    }

    ExternalCheckerConfig config_;
    WorkerProcess worker_;
    int restarts_ = 0;
};

ExternalCheckerBackend::ExternalCheckerBackend(ExternalCheckerConfig config)
    : config_(std::move(config)) {
    if (config_.command.empty())
        throw ConfigError("external checker backend needs a non-empty command");
}

std::unique_ptr<CheckerSession> ExternalCheckerBackend::open_session() {
    return std::make_unique<ExternalCheckerSession>(config_);
}

} // namespace drp
