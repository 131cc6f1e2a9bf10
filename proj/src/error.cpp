#include "sentinel/error.hpp"

#include <fmt/format.h>

namespace sentinel {

ParseError::ParseError(const std::string& source, int line, const std::string& what)
    : Error(line > 0 ? fmt::format("{}:{}: {}", source, line, what)
                     : fmt::format("{}: {}", source, what)),
      line_(line) {}

}  // namespace sentinel
