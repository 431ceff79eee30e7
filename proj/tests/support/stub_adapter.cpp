// Minimal external-scorer stand-in for adapter tests. Speaks the JSON-lines
// protocol on stdin/stdout. Behavior selected by argv[1]:
//   echo      reply raw = number parsed from the response payload
//   fixed     reply raw = argv[2] regardless of input
//   badrange  reply raw = 2.5 (outside [-1,1])
//   garbage   reply a non-JSON line
//   stall     read requests but never answer
#include <cstdio>
#include <iostream>
#include <string>

#include <json.hpp>

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "echo";
    double fixed = argc > 2 ? std::stod(argv[2]) : 0.0;

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        auto req = nlohmann::json::parse(line, nullptr, false);
        if (mode == "stall") continue;
        if (mode == "garbage") {
            std::cout << "not json at all\n" << std::flush;
            continue;
        }
        nlohmann::json reply;
        reply["id"] = req.value("id", 0ULL);
        if (mode == "badrange") {
            reply["raw"] = 2.5;
        } else if (mode == "fixed") {
            reply["raw"] = fixed;
        } else {
            double raw = 0.0;
            try {
                raw = std::stod(req.value("response", std::string{"0"}));
            } catch (...) {
            }
            reply["raw"] = raw;
        }
        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}
