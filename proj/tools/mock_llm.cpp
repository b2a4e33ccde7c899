// Standalone mock chat endpoint for offline pipeline runs.
#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

#include "mock_llm_server.hpp"

namespace {
std::atomic<bool> stop_requested{false};
extern "C" void on_signal(int) { stop_requested = true; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mock chat-completions endpoint", "mock_llm"};
    std::string rules = "fixtures/mock_llm/rules.json", host = "127.0.0.1";
    int port = 8089;
    app.add_option("--rules", rules, "override rules and marker phrases")->capture_default_str();
    app.add_option("--host", host)->capture_default_str();
    app.add_option("--port", port)->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        ctalab::tsupport::MockLlmServer server(ctalab::tsupport::load_mock_options(rules));
        int bound = server.start(host, port);
        std::cout << "mock endpoint at http://" << host << ":" << bound << "/v1" << std::endl;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
