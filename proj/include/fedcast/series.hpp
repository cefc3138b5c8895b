#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fedcast/timeseries.hpp"

namespace fedcast {

// Min-max scaling parameters, fit on a client's training span only.
struct NormalizationParams {
    double min = 0.0;
    double max = 0.0;

    bool operator==(const NormalizationParams&) const = default;
};

// Maps values to (x - min) / (max - min). A constant series maps to all 0.0.
std::pair<std::vector<double>, NormalizationParams> normalize(std::span<const double> values);

// Applies already-fit parameters (degenerate params map everything to 0.0).
double normalize_value(double x, const NormalizationParams& params);
std::vector<double> apply_normalization(std::span<const double> values,
                                        const NormalizationParams& params);

double denormalize_value(double x, const NormalizationParams& params);
std::vector<double> denormalize(std::span<const double> values, const NormalizationParams& params);

// One supervised sample: `lookback` consecutive normalized months and the
// value of the month that follows them.
struct WindowSample {
    std::vector<double> input;
    double target = 0.0;
};

struct WindowedDataset {
    int lookback = 0;
    std::vector<WindowSample> samples;

    std::size_t size() const { return samples.size(); }
};

// Sliding windows in chronological order: a series of length n yields n - L
// samples. Throws std::invalid_argument when the series is shorter than L+1.
WindowedDataset make_windows(std::span<const double> values, int lookback);

// train = months before split_month, test = months from split_month on.
// split_month must lie strictly inside the series' span.
std::pair<TimeSeries, TimeSeries> split_by_date(const TimeSeries& series, YearMonth split_month);

// Mean absolute percentage error over points with nonzero actuals; points
// with actual == 0 are excluded and counted through `excluded_out`.
// Throws when lengths differ, inputs are empty, or every point is excluded.
double mape(std::span<const double> actual, std::span<const double> predicted,
            int* excluded_out = nullptr);

double rmse(std::span<const double> actual, std::span<const double> predicted);

struct EvalReport {
    double mape = 0.0;     // percent
    double rmse = 0.0;     // HCF
    int n_points = 0;      // pairs evaluated
    int n_excluded = 0;    // zero-actual pairs excluded from MAPE

    bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate_forecast(std::span<const double> actual, std::span<const double> predicted);

} // namespace fedcast
