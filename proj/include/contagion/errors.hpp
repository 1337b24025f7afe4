#pragma once

#include <stdexcept>
#include <string>

namespace contagion {

// Exit categories used by the command-line tool.
enum class ErrorCategory { config = 1, model = 2, numeric = 3, io = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory cat, const std::string& what) : std::runtime_error(what), cat_(cat) {}
  ErrorCategory category() const noexcept { return cat_; }

private:
  ErrorCategory cat_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};
struct ModelError : Error {
  explicit ModelError(const std::string& w) : Error(ErrorCategory::model, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorCategory::numeric, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

} // namespace contagion
