#pragma once

#include <chrono>
#include <cstddef>
#include <string>

#include <json.hpp>

#include "portopt/errors.hpp"

namespace portopt {

enum class BudgetMode {
  WallClock,  // stop when elapsed wall time reaches the limit
  Work,       // stop when charged work reaches limit * work_units_per_second
};

/// Run budget. Work mode replays bit-for-bit because it never reads the clock.
struct TimeBudget {
  double limit_seconds = 60.0;
  BudgetMode mode = BudgetMode::WallClock;
  double work_units_per_second = 2e8;
  std::size_t max_samples = 0;  // 0 = unlimited

  void validate() const {
    if (!(limit_seconds > 0.0)) throw Error(ErrorCode::InvalidBudget, "time limit must be > 0");
    if (mode == BudgetMode::Work && !(work_units_per_second > 0.0)) {
      throw Error(ErrorCode::InvalidBudget, "work_units_per_second must be > 0");
    }
  }

  static TimeBudget seconds(double s) {
    TimeBudget b;
    b.limit_seconds = s;
    return b;
  }
  static TimeBudget work(double virtual_seconds, double rate = 2e8) {
    TimeBudget b;
    b.limit_seconds = virtual_seconds;
    b.mode = BudgetMode::Work;
    b.work_units_per_second = rate;
    return b;
  }
};

inline nlohmann::json to_json(const TimeBudget& b) {
  return {{"limit_seconds", b.limit_seconds},
          {"mode", b.mode == BudgetMode::Work ? "work" : "wall"},
          {"work_units_per_second", b.work_units_per_second},
          {"max_samples", b.max_samples}};
}

inline TimeBudget budget_from_json(const nlohmann::json& j) {
  TimeBudget b;
  b.limit_seconds = j.value("limit_seconds", b.limit_seconds);
  const std::string mode = j.value("mode", std::string("wall"));
  if (mode == "work") {
    b.mode = BudgetMode::Work;
  } else if (mode != "wall") {
    throw Error(ErrorCode::ParseError, "budget mode must be 'wall' or 'work'");
  }
  b.work_units_per_second = j.value("work_units_per_second", b.work_units_per_second);
  b.max_samples = j.value("max_samples", b.max_samples);
  b.validate();
  return b;
}

/// Tracks one run against a TimeBudget. Samplers charge work as they go and
/// poll expired() once per sweep, restart or solution.
class BudgetClock {
 public:
  explicit BudgetClock(const TimeBudget& budget)
      : budget_(budget), limit_(budget.limit_seconds), start_(Clock::now()) {
    budget_.validate();
  }

  void charge(double units) { work_ += units; }
  void count_sample() { ++samples_; }

  /// Seconds since start: wall time, or charged work converted to seconds.
  double now() const {
    if (budget_.mode == BudgetMode::Work) return work_ / budget_.work_units_per_second;
    return std::chrono::duration<double>(Clock::now() - start_).count();
  }
  double wall_elapsed() const {
    return std::chrono::duration<double>(Clock::now() - start_).count();
  }

  bool expired() const {
    if (budget_.max_samples != 0 && samples_ >= budget_.max_samples) return true;
    return now() >= limit_;
  }

  /// Temporarily lower the deadline (e.g. a training phase); seconds since start.
  void set_deadline(double seconds) { limit_ = std::min(seconds, budget_.limit_seconds); }
  void reset_deadline() { limit_ = budget_.limit_seconds; }
  double deadline() const { return limit_; }

  double limit_seconds() const { return budget_.limit_seconds; }
  std::size_t samples() const { return samples_; }
  double work() const { return work_; }
  const TimeBudget& budget() const { return budget_; }

 private:
  using Clock = std::chrono::steady_clock;
  TimeBudget budget_;
  double limit_;
  Clock::time_point start_;
  double work_ = 0.0;
  std::size_t samples_ = 0;
};

}  // namespace portopt
