#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedcast/calendar.hpp"
#include "fedcast/timeseries.hpp"

#include "json.hpp"

namespace fedcast {

// Maps the logical CSV fields onto actual column names. `cost` is optional:
// it is validated when the column exists and ignored otherwise.
struct CsvSchema {
    std::string building_id = "building_id";
    std::string month = "month";
    std::string consumption = "consumption";
    std::string cost = "cost";
};

// What to do with interior missing months after grouping rows by building.
enum class GapPolicy {
    LinearInterpolate, // fill by linear interpolation between neighbors
    DropSeries,        // discard buildings that have any gap
    Fail,              // raise on any gap
};

GapPolicy gap_policy_from_string(const std::string& name);

// Turns a sparse month->value map into a contiguous monthly series from the
// first to the last observed month. Returns nullopt only under
// GapPolicy::DropSeries when a gap exists; throws DataError under
// GapPolicy::Fail when a gap exists.
std::optional<TimeSeries> fill_gaps(const std::string& building_id,
                                    const std::map<YearMonth, double>& observations,
                                    GapPolicy policy);

// Parses a consumption CSV (header row required) into one gap-free series per
// building, sorted by building id. Duplicate (building, month) rows are
// summed; rows are then sorted by month and gaps handled per `policy`.
// Throws DataError naming the offending line for malformed rows, negative
// consumption, missing columns, or an empty file.
std::vector<TimeSeries> parse_consumption_csv(std::istream& source,
                                              const CsvSchema& schema = {},
                                              GapPolicy policy = GapPolicy::LinearInterpolate);

// Writes the fleet back out in the same CSV schema (default column names).
// Values are printed with enough digits to round-trip exactly.
void write_fleet_csv(std::ostream& out, const std::vector<TimeSeries>& fleet);

// Desk-scale synthetic fleet: level + linear trend + annual sinusoid +
// gaussian noise, clamped at zero. A pure function of the config, so a fixed
// (config, seed) reproduces bit-identically.
struct SyntheticFleetConfig {
    int n_buildings = 0;
    int n_months = 0;
    double base_level_min = 0.0, base_level_max = 0.0;
    double seasonal_amplitude_min = 0.0, seasonal_amplitude_max = 0.0;
    double phase_months_min = 0.0, phase_months_max = 0.0;
    double noise_stddev = 0.0;
    double trend_slope_min = 0.0, trend_slope_max = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const; // throws DataError on bad ranges
};

SyntheticFleetConfig synthetic_config_from_json(const nlohmann::json& doc);
SyntheticFleetConfig load_synthetic_config(const std::string& path);

std::vector<TimeSeries> generate_synthetic_fleet(const SyntheticFleetConfig& config);

} // namespace fedcast
