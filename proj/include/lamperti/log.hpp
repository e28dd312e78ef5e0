#pragma once

// Diagnostic logging gated by the LAMPERTI_LOG environment variable:
// unset/0 = silent, 1 = info, 2 = debug. Output goes to stderr so it never
// mixes with report payloads on stdout.

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace lamperti {

inline int log_level() {
    static const int level = [] {
        const char* raw = std::getenv("LAMPERTI_LOG");
        if (!raw || !*raw) return 0;
        char* end = nullptr;
        long parsed = std::strtol(raw, &end, 10);
        if (end == raw) return 0;
        if (parsed < 0) return 0;
        if (parsed > 2) return 2;
        return static_cast<int>(parsed);
    }();
    return level;
}

inline void log_info(std::string_view message) {
    if (log_level() >= 1) std::cerr << "[info] " << message << "\n";
}

inline void log_debug(std::string_view message) {
    if (log_level() >= 2) std::cerr << "[debug] " << message << "\n";
}

}  // namespace lamperti
