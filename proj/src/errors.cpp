#include "mprelease/errors.hpp"

namespace mprelease {

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

}  // namespace mprelease
