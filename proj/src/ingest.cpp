#include "fedcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedcast/errors.hpp"
#include "fedcast/io.hpp"
#include "fedcast/rng.hpp"

namespace fedcast {

namespace {

// Minimal CSV line splitter with double-quote support.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& text, int line_no, const char* what) {
    const std::string t = trim(text);
    if (t.empty()) throw DataError("line " + std::to_string(line_no) + ": empty " + what);
    const char* begin = t.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + t.size() || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + t + "'");
    }
    return v;
}

} // namespace

GapPolicy gap_policy_from_string(const std::string& name) {
    if (name == "linear-interpolate") return GapPolicy::LinearInterpolate;
    if (name == "drop-series") return GapPolicy::DropSeries;
    if (name == "fail") return GapPolicy::Fail;
    throw DataError("unknown gap policy '" + name + "'");
}

std::optional<TimeSeries> fill_gaps(const std::string& building_id,
                                    const std::map<YearMonth, double>& observations,
                                    GapPolicy policy) {
    if (observations.empty()) throw DataError("no observations for building " + building_id);

    const YearMonth first = observations.begin()->first;
    const YearMonth last = observations.rbegin()->first;
    const int span = last.months_since(first) + 1;

    const bool has_gaps = span != static_cast<int>(observations.size());
    if (has_gaps) {
        if (policy == GapPolicy::Fail) {
            throw DataError("building " + building_id + ": gap in monthly series between " +
                            first.str() + " and " + last.str());
        }
        if (policy == GapPolicy::DropSeries) return std::nullopt;
    }

    TimeSeries series;
    series.building_id = building_id;
    series.start = first;
    series.values.resize(span);

    auto it = observations.begin();
    int prev_idx = 0;
    series.values[0] = it->second;
    ++it;
    for (; it != observations.end(); ++it) {
        const int idx = it->first.months_since(first);
        series.values[idx] = it->second;
        // linear interpolation across the gap, if any
        const double lo = series.values[prev_idx];
        const double hi = series.values[idx];
        for (int j = prev_idx + 1; j < idx; ++j) {
            const double frac = static_cast<double>(j - prev_idx) / (idx - prev_idx);
            series.values[j] = lo + frac * (hi - lo);
        }
        prev_idx = idx;
    }
    return series;
}

std::vector<TimeSeries> parse_consumption_csv(std::istream& source, const CsvSchema& schema,
                                              GapPolicy policy) {
    std::string line;
    if (!std::getline(source, line)) throw DataError("empty CSV: missing header row");

    const std::vector<std::string> header = split_csv_line(line);
    auto column = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return static_cast<int>(i);
        }
        return -1;
    };

    const int id_col = column(schema.building_id);
    const int month_col = column(schema.month);
    const int cons_col = column(schema.consumption);
    const int cost_col = column(schema.cost);
    if (id_col < 0) throw DataError("CSV header missing column '" + schema.building_id + "'");
    if (month_col < 0) throw DataError("CSV header missing column '" + schema.month + "'");
    if (cons_col < 0) throw DataError("CSV header missing column '" + schema.consumption + "'");

    std::map<std::string, std::map<YearMonth, double>> grouped;
    int line_no = 1;
    int data_rows = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        const int needed = std::max({id_col, month_col, cons_col});
        if (static_cast<int>(fields.size()) <= needed) {
            throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(needed + 1) + " columns, got " +
                            std::to_string(fields.size()));
        }
        const std::string id = trim(fields[id_col]);
        if (id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty building id");

        const std::string month_text = trim(fields[month_col]);
        const auto month = YearMonth::parse(month_text);
        if (!month) {
            throw DataError("line " + std::to_string(line_no) + ": bad month '" + month_text +
                            "' (expected YYYY-MM)");
        }

        const double consumption = parse_number(fields[cons_col], line_no, "consumption");
        if (consumption < 0.0) {
            throw DataError("line " + std::to_string(line_no) + ": negative consumption " +
                            std::to_string(consumption));
        }
        if (cost_col >= 0 && static_cast<int>(fields.size()) > cost_col &&
            !trim(fields[cost_col]).empty()) {
            const double cost = parse_number(fields[cost_col], line_no, "cost");
            if (cost < 0.0) {
                throw DataError("line " + std::to_string(line_no) + ": negative cost");
            }
        }

        grouped[id][*month] += consumption; // duplicate (building, month) rows sum
        ++data_rows;
    }
    if (data_rows == 0) throw DataError("empty CSV: no data rows");

    std::vector<TimeSeries> fleet;
    fleet.reserve(grouped.size());
    for (const auto& [id, observations] : grouped) {
        auto series = fill_gaps(id, observations, policy);
        if (series) fleet.push_back(std::move(*series));
    }
    // grouped map is id-ordered already; keep the fleet that way
    return fleet;
}

void write_fleet_csv(std::ostream& out, const std::vector<TimeSeries>& fleet) {
    out << "building_id,month,consumption\n";
    for (const TimeSeries& series : fleet) {
        for (int i = 0; i < series.length(); ++i) {
            out << series.building_id << ',' << series.month_at(i).str() << ','
                << format_double(series.values[i]) << '\n';
        }
    }
}

void SyntheticFleetConfig::validate() const {
    if (n_buildings < 1) throw DataError("synthetic config: n_buildings must be positive");
    if (n_months < 1) throw DataError("synthetic config: n_months must be positive");
    if (noise_stddev < 0.0) throw DataError("synthetic config: noise_stddev must be >= 0");
    auto check = [](double lo, double hi, const char* name) {
        if (lo > hi) throw DataError(std::string("synthetic config: ") + name +
                                     " range has lower bound > upper bound");
    };
    check(base_level_min, base_level_max, "base_level");
    check(seasonal_amplitude_min, seasonal_amplitude_max, "seasonal_amplitude");
    check(phase_months_min, phase_months_max, "phase_months");
    check(trend_slope_min, trend_slope_max, "trend_slope");
}

namespace {

std::pair<double, double> range_from_json(const nlohmann::json& doc, const std::string& key) {
    if (!doc.contains(key) || !doc[key].is_array() || doc[key].size() != 2) {
        throw DataError("synthetic config: '" + key + "' must be a [lo, hi] array");
    }
    return {doc[key][0].get<double>(), doc[key][1].get<double>()};
}

} // namespace

SyntheticFleetConfig synthetic_config_from_json(const nlohmann::json& doc) {
    static const char* known[] = {"n_buildings", "n_months",     "base_level", "seasonal_amplitude",
                                  "phase_months", "noise_stddev", "trend_slope", "rng_seed"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known)) {
            throw DataError("synthetic config: unknown field '" + key + "'");
        }
    }
    for (const char* k : known) {
        if (!doc.contains(k)) throw DataError(std::string("synthetic config: missing field '") + k + "'");
    }

    SyntheticFleetConfig config;
    config.n_buildings = doc["n_buildings"].get<int>();
    config.n_months = doc["n_months"].get<int>();
    std::tie(config.base_level_min, config.base_level_max) = range_from_json(doc, "base_level");
    std::tie(config.seasonal_amplitude_min, config.seasonal_amplitude_max) =
        range_from_json(doc, "seasonal_amplitude");
    std::tie(config.phase_months_min, config.phase_months_max) =
        range_from_json(doc, "phase_months");
    config.noise_stddev = doc["noise_stddev"].get<double>();
    std::tie(config.trend_slope_min, config.trend_slope_max) = range_from_json(doc, "trend_slope");
    config.rng_seed = doc["rng_seed"].get<std::uint64_t>();
    config.validate();
    return config;
}

SyntheticFleetConfig load_synthetic_config(const std::string& path) {
    return synthetic_config_from_json(load_json_file(path));
}

std::vector<TimeSeries> generate_synthetic_fleet(const SyntheticFleetConfig& config) {
    config.validate();
    const YearMonth start{2013, 1}; // the corpus span starts here; split ergonomics match
    const double two_pi = 6.283185307179586476925286766559;

    std::vector<TimeSeries> fleet;
    fleet.reserve(config.n_buildings);
    for (int b = 0; b < config.n_buildings; ++b) {
        std::mt19937_64 gen(rng::derive_seed(config.rng_seed, static_cast<std::uint64_t>(b)));
        const double base = rng::uniform_range(gen, config.base_level_min, config.base_level_max);
        const double amplitude =
            rng::uniform_range(gen, config.seasonal_amplitude_min, config.seasonal_amplitude_max);
        const double phase =
            rng::uniform_range(gen, config.phase_months_min, config.phase_months_max);
        const double trend = rng::uniform_range(gen, config.trend_slope_min, config.trend_slope_max);

        TimeSeries series;
        char id[16];
        std::snprintf(id, sizeof(id), "B%04d", b + 1);
        series.building_id = id;
        series.start = start;
        series.values.resize(config.n_months);
        for (int t = 0; t < config.n_months; ++t) {
            double v = base + trend * t + amplitude * std::sin(two_pi * (t + phase) / 12.0);
            if (config.noise_stddev > 0.0) v += config.noise_stddev * rng::gaussian(gen);
            series.values[t] = std::max(0.0, v);
        }
        fleet.push_back(std::move(series));
    }
    return fleet;
}

} // namespace fedcast
