#pragma once

#include <stdexcept>
#include <string>

namespace taxisim {

// Every error carries a short machine-readable kind used in CLI error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

class MapBoundsError : public Error {
 public:
  explicit MapBoundsError(const std::string& message) : Error("MapBoundsError", message) {}
};

class NoRouteError : public Error {
 public:
  explicit NoRouteError(const std::string& message) : Error("NoRouteError", message) {}
};

class DispatchError : public Error {
 public:
  explicit DispatchError(const std::string& message) : Error("DispatchError", message) {}
};

class TimeoutError : public Error {
 public:
  explicit TimeoutError(const std::string& message) : Error("TimeoutError", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("IoError", message) {}
};

}  // namespace taxisim
