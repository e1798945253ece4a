#pragma once

#include <stdexcept>
#include <string>

namespace aqmsim {

/// Invalid scenario or topology description.  `line` is 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string message, std::string field = {}, int line = 0)
      : std::runtime_error(compose(message, field, line)),
        message_(std::move(message)),
        field_(std::move(field)),
        line_(line) {}

  const std::string& message() const { return message_; }
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string compose(const std::string& m, const std::string& f, int line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!f.empty()) out += f + ": ";
    return out + m;
  }

  std::string message_;
  std::string field_;
  int line_;
};

}  // namespace aqmsim
