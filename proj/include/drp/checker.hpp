#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drp/errors.hpp"

namespace drp {

// One diagnostic from a checker worker.
struct WireMessage {
    std::string severity; // "error" | "warning" | "info"
    std::string text;

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

// Transport-level outcome of one check call. `Reply` means a well-formed
// protocol answer arrived (its `ok` may still be false); the other two states
// mean the worker broke the protocol or the clock.
enum class ReplyStatus { Reply, Crashed, TimedOut };

struct CheckerReply {
    ReplyStatus status = ReplyStatus::Crashed;
    bool ok = false;
    std::vector<WireMessage> messages;
    long long elapsed_ms = 0;
    std::string detail; // transport diagnostics (crash reason, timeout note)
};

// A session owns one worker (or one scripted cursor) and serves one check at a
// time. Sessions are not shared across threads; open one per worker thread.
class CheckerSession {
public:
    virtual ~CheckerSession() = default;
    virtual CheckerReply check(const std::string& id, const std::string& source,
                               double timeout_s) = 0;
    // Times the underlying worker was killed and replaced (timeout or crash).
    virtual int restarts() const { return 0; }
};

class CheckerBackend {
public:
    virtual ~CheckerBackend() = default;
    virtual std::unique_ptr<CheckerSession> open_session() = 0;
};

// --- scripted backend --------------------------------------------------------

// Outcome script for one statement, keyed by the name-blind digest (or, for
// hand-written fixtures, the plain theorem name) of the LAST declaration in
// the submitted source. Attempt numbers are 1-based and tracked per key within
// a session.
struct MockRule {
    int succeed_on_attempt = 0; // 0 = never succeed
    std::set<int> crash_on;     // worker "crashes" on these attempts
    std::set<int> timeout_on;   // worker "hangs" past any timeout on these
    double latency_s = 0.0;     // simulated elapsed; exceeding the timeout times out
};

// Deterministic stand-in for a Lean toolchain. Unknown keys fail every attempt
// unless default_ok is set (useful for adversarial always-accept scripting).
// The simulated clock never sleeps unless real_sleep is enabled.
class MockCheckerBackend : public CheckerBackend {
public:
    void set_rule(const std::string& key, MockRule rule);
    void set_default_ok(bool ok) { default_ok_ = ok; }
    void set_real_sleep(bool enabled) { real_sleep_ = enabled; }

    // Loads the "checker" object of a mock_scripts.json file.
    void load_scripts_json(const std::filesystem::path& file);

    std::unique_ptr<CheckerSession> open_session() override;

private:
    friend class MockCheckerSession;
    std::map<std::string, MockRule> rules_;
    bool default_ok_ = false;
    bool real_sleep_ = false;
};

// --- external worker backend -------------------------------------------------

struct ExternalCheckerConfig {
    std::string command;                     // run through /bin/sh -c
    std::string workdir;                     // empty = inherit
    std::vector<std::string> env_passthrough; // empty = inherit everything
};

// Spawns one worker process per session and speaks newline-delimited JSON:
//   -> {"id": "...", "source": "..."}
//   <- {"id": "...", "ok": true, "messages": [...], "elapsed_ms": 12}
// A non-JSON line, a wrong id, a malformed reply, or a closed pipe counts as a
// crash; a timeout kills the worker. Either way the next check respawns.
class ExternalCheckerBackend : public CheckerBackend {
public:
    explicit ExternalCheckerBackend(ExternalCheckerConfig config);
    std::unique_ptr<CheckerSession> open_session() override;

private:
    ExternalCheckerConfig config_;
};

} // namespace drp
