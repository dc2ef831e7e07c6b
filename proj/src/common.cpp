#include "semgeom/error.hpp"
#include "semgeom/types.hpp"

namespace semgeom {

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::transport: return 4;
        case ErrorKind::numerical: return 5;
        case ErrorKind::leakage: return 6;
    }
    return 1;
}

std::string_view to_string(Paradigm p) { return p == Paradigm::fc ? "FC" : "FA"; }

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::averaged: return "averaged";
        case Strategy::meaning: return "meaning";
        case Strategy::task_fc: return "task_fc";
        case Strategy::task_fa: return "task_fa";
    }
    return "?";
}

std::string_view to_string(CenteringMode m) { return m == CenteringMode::centered ? "centered" : "raw"; }

Paradigm parse_paradigm(std::string_view text) {
    if (text == "FC" || text == "fc") return Paradigm::fc;
    if (text == "FA" || text == "fa") return Paradigm::fa;
    throw Error(ErrorKind::data, "BAD_PARADIGM", "unknown paradigm '" + std::string(text) + "'");
}

Strategy parse_strategy(std::string_view text) {
    for (auto s : {Strategy::averaged, Strategy::meaning, Strategy::task_fc, Strategy::task_fa})
        if (text == to_string(s)) return s;
    throw Error(ErrorKind::config, "BAD_STRATEGY",
                "unknown strategy '" + std::string(text) + "' (expected averaged|meaning|task_fc|task_fa)");
}

CenteringMode parse_centering(std::string_view text) {
    if (text == "centered") return CenteringMode::centered;
    if (text == "raw") return CenteringMode::raw;
    throw Error(ErrorKind::config, "BAD_CENTERING",
                "unknown centering mode '" + std::string(text) + "' (expected centered|raw)");
}

}  // namespace semgeom
