#pragma once
// Error taxonomy shared by the whole engine. The C API and the CLI map
// ErrorKind onto status/exit codes (usage=1, data=2, backend=3).

#include <stdexcept>
#include <string>
#include <utility>

namespace bimem {

enum class ErrorKind {
    usage,     // invalid arguments, bad config
    data,      // parse/validation/schema problems in inputs or bank files
    backend,   // LLM / embedding transport or protocol failures
    io,        // filesystem trouble
    internal,  // broken invariant inside the engine
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, int detail = 0)
        : std::runtime_error(std::move(message)), kind_(kind), detail_(detail) {}

    ErrorKind kind() const noexcept { return kind_; }

    // For backend errors this carries the HTTP status (0 when not applicable).
    int detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    int detail_;
};

inline Error usage_error(std::string msg) { return Error(ErrorKind::usage, std::move(msg)); }
inline Error data_error(std::string msg) { return Error(ErrorKind::data, std::move(msg)); }
inline Error backend_error(std::string msg, int http_status = 0) {
    return Error(ErrorKind::backend, std::move(msg), http_status);
}
inline Error io_error(std::string msg) { return Error(ErrorKind::io, std::move(msg)); }
inline Error internal_error(std::string msg) { return Error(ErrorKind::internal, std::move(msg)); }

}  // namespace bimem
