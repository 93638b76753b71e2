#include "batchbandit/error.hpp"

namespace batchbandit {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_input: return "invalid input";
        case ErrorKind::invalid_config: return "invalid config";
        case ErrorKind::uninformed: return "uninformed";
        case ErrorKind::insufficient_data: return "insufficient data";
        case ErrorKind::replay_coverage: return "replay coverage";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace batchbandit
