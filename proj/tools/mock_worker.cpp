// Stand-in proof-checker worker for protocol tests. Speaks the line-oriented
// JSON protocol on stdin/stdout and changes behavior when the incoming source
// carries a directive token:
//
//   MOCK_OK            reply ok=true (also the default)
//   MOCK_FAIL          reply ok=false with an error diagnostic
//   MOCK_WARN          reply ok=true with a warning diagnostic
//   MOCK_ECHO_LEN      reply ok=true with an info line "source_bytes=<n>"
//   MOCK_SLEEP_MS=<n>  sleep n milliseconds before replying
//   MOCK_CRASH         exit immediately without replying
//   MOCK_GARBAGE       emit a non-JSON line instead of a reply
//   MOCK_CLOSE         close stdout and exit without replying
//   MOCK_WRONG_ID      reply with a mangled id
//
// Any request that is not a JSON object with exactly the keys {id, source}
// (both strings) makes the worker exit with status 2 — harness bugs surface
// as crashes, not silent acceptance.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool has_directive(const std::string& source, const std::string& token) {
    return source.find(token) != std::string::npos;
}

int sleep_directive_ms(const std::string& source) {
    const std::string tag = "MOCK_SLEEP_MS=";
    std::size_t at = source.find(tag);
    if (at == std::string::npos) return 0;
    std::size_t start = at + tag.size();
    std::size_t end = start;
    while (end < source.size() && std::isdigit(static_cast<unsigned char>(source[end]))) ++end;
    if (end == start) return 0;
    return std::stoi(source.substr(start, end - start));
}

// Standalone-token scan mirroring the checker's own notion of `sorry`.
bool mentions_sorry(const std::string& source) {
    auto is_ident = [](unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; };
    std::size_t at = 0;
    while ((at = source.find("sorry", at)) != std::string::npos) {
        bool left_ok = at == 0 || !is_ident(static_cast<unsigned char>(source[at - 1]));
        std::size_t after = at + 5;
        bool right_ok = after >= source.size() || !is_ident(static_cast<unsigned char>(source[after]));
        if (left_ok && right_ok) return true;
        at = after;
    }
    return false;
}

} // namespace

int main() {
    std::signal(SIGPIPE, SIG_IGN);
    std::ios::sync_with_stdio(false);

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;

        json request = json::parse(line, nullptr, false);
        if (request.is_discarded() || !request.is_object() || request.size() != 2 ||
            !request.contains("id") || !request.contains("source") ||
            !request["id"].is_string() || !request["source"].is_string()) {
            std::cerr << "mock_worker: malformed request: " << line.substr(0, 200) << "\n";
            return 2;
        }
        const std::string id = request["id"].get<std::string>();
        const std::string source = request["source"].get<std::string>();

        auto t0 = std::chrono::steady_clock::now();
        if (int ms = sleep_directive_ms(source); ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));

        if (has_directive(source, "MOCK_CRASH")) return 3;
        if (has_directive(source, "MOCK_CLOSE")) {
            std::cout.flush();
            std::fclose(stdout);
            return 0;
        }
        if (has_directive(source, "MOCK_GARBAGE")) {
            std::cout << "this is not a protocol reply\n" << std::flush;
            continue;
        }

        ordered_json reply;
        reply["id"] = has_directive(source, "MOCK_WRONG_ID") ? id + "_x" : id;
        bool ok = !has_directive(source, "MOCK_FAIL");
        reply["ok"] = ok;
        ordered_json messages = ordered_json::array();
        if (!ok)
            messages.push_back(ordered_json{{"severity", "error"},
                                            {"text", "proof attempt rejected (scripted)"}});
        if (has_directive(source, "MOCK_WARN"))
            messages.push_back(ordered_json{{"severity", "warning"},
                                            {"text", "scripted warning"}});
        if (has_directive(source, "MOCK_ECHO_LEN"))
            messages.push_back(ordered_json{
                {"severity", "info"},
                {"text", "source_bytes=" + std::to_string(source.size())}});
        if (ok && mentions_sorry(source))
            messages.push_back(ordered_json{{"severity", "warning"},
                                            {"text", "declaration uses 'sorry'"}});
        reply["messages"] = messages;
        auto elapsed =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
        reply["elapsed_ms"] = static_cast<long long>(elapsed.count());

        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}
