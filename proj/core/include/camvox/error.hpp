#pragma once

#include <stdexcept>
#include <string>

namespace camvox {

enum class ErrorKind {
  kInput,                  // malformed file, bad argument, violated precondition
  kImuGap,                 // IMU stream does not cover a frame
  kInsufficientStructure,  // calibration scene lacks usable edges
  kNumeric,                // non-finite intermediate
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_input_error(const std::string& what) { throw Error(ErrorKind::kInput, what); }

}  // namespace camvox
