#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mve {

// Raised on invalid input data or configuration (bad files, bad flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when numerical state goes bad during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using LogSink = std::function<void(std::string_view)>;

inline LogSink& warning_sink() {
  static LogSink sink = [](std::string_view msg) { std::clog << "warning: " << msg << '\n'; };
  return sink;
}

inline LogSink& info_sink() {
  static LogSink sink = [](std::string_view msg) { std::clog << msg << '\n'; };
  return sink;
}

inline void warn(std::string_view msg) {
  if (warning_sink()) warning_sink()(msg);
}

inline void info(std::string_view msg) {
  if (info_sink()) info_sink()(msg);
}

// Silences both sinks for the lifetime of the object; restores them afterwards.
class ScopedQuietLog {
 public:
  ScopedQuietLog() : warning_(warning_sink()), info_(info_sink()) {
    warning_sink() = nullptr;
    info_sink() = nullptr;
  }
  ~ScopedQuietLog() {
    warning_sink() = std::move(warning_);
    info_sink() = std::move(info_);
  }
  ScopedQuietLog(const ScopedQuietLog&) = delete;
  ScopedQuietLog& operator=(const ScopedQuietLog&) = delete;

 private:
  LogSink warning_;
  LogSink info_;
};

}  // namespace mve
