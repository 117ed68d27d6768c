#pragma once

#include <stdexcept>
#include <string>

namespace se3dif {

// All module errors derive from Error; `code()` is the stable machine-readable
// name that the CLI prints as "error: <code>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Rotation angle within 1e-6 of pi: principal-branch logmap is not reliable there.
class AngleNearPi : public Error {
 public:
  explicit AngleNearPi(const std::string& msg = "rotation angle within 1e-6 of pi")
      : Error("AngleNearPi", msg) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(const std::string& msg) : Error("NonFiniteLoss", msg) {}
};

class NonFiniteCost : public Error {
 public:
  NonFiniteCost(int particle, const std::string& msg)
      : Error("NonFiniteCost", msg), particle_(particle) {}
  int particle() const { return particle_; }

 private:
  int particle_;
};

class UnknownTerm : public Error {
 public:
  explicit UnknownTerm(const std::string& msg) : Error("UnknownTerm", msg) {}
};

// Bad config file, unknown keys, missing referenced files. CLI exits 2 on these.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("ConfigError", msg) {}
};

// Malformed data files, schema mismatches, I/O failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("IoError", msg) {}
};

}  // namespace se3dif
