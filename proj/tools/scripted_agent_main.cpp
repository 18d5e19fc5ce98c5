#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "togglebench/dynworld.hpp"
#include "togglebench/util.hpp"

// Reference stdio agent for the dynamic suite: one AgentRequest JSON object
// per stdin line, one {"action": "..."} reply per stdout line. Exits on EOF.

int main(int argc, char** argv) {
    using namespace togglebench;

    CLI::App app{"Scripted stdio agent for the dynamic toggle-world suite"};
    bool always_toggle = false;
    std::string dialect_name = "canonical";
    std::string tasks_file;
    app.add_flag("--always-toggle", always_toggle,
                 "Click every target toggle regardless of its rendered state");
    app.add_option("--dialect", dialect_name, "Action dialect to emit");
    app.add_option("--tasks-file", tasks_file,
                   "Task registry JSON (default: built-in registry)");
    CLI11_PARSE(app, argc, argv);

    try {
        const std::vector<DynTask> tasks =
            tasks_file.empty() ? default_tasks() : load_tasks(tasks_file);

        std::map<std::string, std::unique_ptr<ScriptedPolicyAgent>> agents;
        std::string line;
        while (std::getline(std::cin, line)) {
            if (trim(line).empty()) continue;
            const AgentRequest request = agent_request_from_json(line);

            auto& agent = agents[request.task_id];
            // A fresh episode (no history, not a retry) resets the policy.
            if (!agent || (request.history.empty() && request.error.empty())) {
                agent = std::make_unique<ScriptedPolicyAgent>(always_toggle, dialect_name);
                agent->episode_begin(find_task(tasks, request.task_id));
            }
            const std::string action = agent->act(request);
            std::cout << nlohmann::json{{"action", action}}.dump() << std::endl;
        }
    } catch (const Error& e) {
        std::cerr << "scripted-agent: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
