#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "varpro/errors.hpp"

namespace varpro {

enum class ScheduleKind {
  Constant,     // eps_k = eps_0            (LSQR-b)
  Linear,       // eps_k = eps_0 / k        (LSQR-lb)
  Exponential,  // eps_k = eps_{k-1} / 2    (LSQR-ab)
  FixedSmall,   // eps_k = 1e-11            (LSQR-s)
};

/// Inner-solve tolerance as a function of the outer iteration index.
template <typename Scalar>
struct ToleranceSchedule {
  static constexpr Scalar kFixedSmall = Scalar(1e-11);

  ScheduleKind kind = ScheduleKind::Exponential;
  Scalar epsilon0 = Scalar(1e-4);
  Scalar floor = std::numeric_limits<Scalar>::epsilon();

  Scalar at(int k) const {
    if (k < 0) throw InvalidArgument("schedule: negative iteration index");
    if (!(epsilon0 > Scalar(0)) || !(floor > Scalar(0))) throw InvalidArgument("schedule: nonpositive tolerance");
    switch (kind) {
      case ScheduleKind::Constant:
        return epsilon0;
      case ScheduleKind::Linear:
        // eps_0 / k is undefined at k = 0
        return std::max(k == 0 ? epsilon0 : epsilon0 / Scalar(k), floor);
      case ScheduleKind::Exponential:
        return std::max(std::ldexp(epsilon0, -k), floor);
      case ScheduleKind::FixedSmall:
        return kFixedSmall;
    }
    return epsilon0;
  }
};

/// Short labels used in output files: b, lb, ab, s.
inline std::string_view schedule_label(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "b";
    case ScheduleKind::Linear: return "lb";
    case ScheduleKind::Exponential: return "ab";
    case ScheduleKind::FixedSmall: return "s";
  }
  return "?";
}

inline std::optional<ScheduleKind> parse_schedule_label(std::string_view s) {
  if (s == "b" || s == "constant") return ScheduleKind::Constant;
  if (s == "lb" || s == "linear") return ScheduleKind::Linear;
  if (s == "ab" || s == "exponential") return ScheduleKind::Exponential;
  if (s == "s" || s == "fixed-small") return ScheduleKind::FixedSmall;
  return std::nullopt;
}

}  // namespace varpro
