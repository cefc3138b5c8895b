#pragma once

#include <string>
#include <vector>

#include "fedcast/calendar.hpp"

namespace fedcast {

// One building's gap-free monthly consumption history, in HCF
// (hundred cubic feet). Values are consecutive months from `start`.
struct TimeSeries {
    std::string building_id;
    YearMonth start{};
    std::vector<double> values;

    int length() const { return static_cast<int>(values.size()); }
    YearMonth month_at(int i) const { return start.plus_months(i); }
    YearMonth last_month() const { return start.plus_months(length() - 1); }

    bool operator==(const TimeSeries&) const = default;
};

} // namespace fedcast
