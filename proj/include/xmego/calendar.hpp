#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "xmego/error.hpp"

namespace xmego {

// Day-granular timestamps are plain YYYYMMDD integers.
using DayStamp = std::int32_t;

namespace calendar {

enum class Unit { Days, Weeks, Months, Years };

inline std::optional<std::chrono::year_month_day> to_ymd(DayStamp stamp) {
  if (stamp < 10000101 || stamp > 99991231) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{stamp / 10000},
                                        std::chrono::month{static_cast<unsigned>(stamp / 100 % 100)},
                                        std::chrono::day{static_cast<unsigned>(stamp % 100)}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

inline bool valid(DayStamp stamp) { return to_ymd(stamp).has_value(); }

inline DayStamp from_ymd(std::chrono::year_month_day ymd) {
  return static_cast<DayStamp>(static_cast<int>(ymd.year()) * 10000 +
                               static_cast<unsigned>(ymd.month()) * 100 + static_cast<unsigned>(ymd.day()));
}

inline std::chrono::year_month_day require(DayStamp stamp) {
  auto ymd = to_ymd(stamp);
  if (!ymd) throw Error(ErrorCode::InvalidTimestamp, "not a calendar date", std::to_string(stamp));
  return *ymd;
}

inline int month_of(DayStamp stamp) { return static_cast<int>(static_cast<unsigned>(require(stamp).month())); }

// Steps `amount` units back in time. Month and year steps that land past the
// end of a month are clamped to the month's last day (Mar 31 - 1 month = Feb 28).
inline DayStamp subtract(DayStamp stamp, int amount, Unit unit) {
  using namespace std::chrono;
  const year_month_day ymd = require(stamp);
  switch (unit) {
    case Unit::Days:
      return from_ymd(year_month_day{sys_days{ymd} - days{amount}});
    case Unit::Weeks:
      return from_ymd(year_month_day{sys_days{ymd} - days{7 * amount}});
    case Unit::Months:
    case Unit::Years: {
      year_month_day shifted = unit == Unit::Months ? ymd - months{amount} : ymd - years{amount};
      if (!shifted.ok()) shifted = year_month_day{year_month_day_last{shifted.year(), month_day_last{shifted.month()}}};
      return from_ymd(shifted);
    }
  }
  return stamp;
}

inline DayStamp today() {
  using namespace std::chrono;
  return from_ymd(year_month_day{floor<days>(system_clock::now())});
}

}  // namespace calendar
}  // namespace xmego
