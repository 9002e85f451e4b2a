#ifndef TWPA_ERRORS_HPP
#define TWPA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace twpa {

/// File-system and input-file failures (distinct exit code in the CLI).
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace twpa

#endif
