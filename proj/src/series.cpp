#include "fedcast/series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedcast/errors.hpp"

namespace fedcast {

std::pair<std::vector<double>, NormalizationParams> normalize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("normalize: empty series");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    NormalizationParams params{*lo, *hi};
    std::vector<double> out(values.size());
    const double range = params.max - params.min;
    if (range == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out[i] = (values[i] - params.min) / range;
        }
    }
    return {std::move(out), params};
}

double normalize_value(double x, const NormalizationParams& params) {
    const double range = params.max - params.min;
    return range == 0.0 ? 0.0 : (x - params.min) / range;
}

std::vector<double> apply_normalization(std::span<const double> values,
                                        const NormalizationParams& params) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = normalize_value(values[i], params);
    }
    return out;
}

double denormalize_value(double x, const NormalizationParams& params) {
    return x * (params.max - params.min) + params.min;
}

std::vector<double> denormalize(std::span<const double> values,
                                const NormalizationParams& params) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = denormalize_value(values[i], params);
    }
    return out;
}

WindowedDataset make_windows(std::span<const double> values, int lookback) {
    if (lookback < 1) throw std::invalid_argument("make_windows: lookback must be positive");
    const int n = static_cast<int>(values.size());
    if (n < lookback + 1) {
        throw std::invalid_argument("make_windows: series length " + std::to_string(n) +
                                    " is below the required minimum of " +
                                    std::to_string(lookback + 1) + " (lookback + 1)");
    }
    WindowedDataset dataset;
    dataset.lookback = lookback;
    dataset.samples.reserve(n - lookback);
    for (int t = 0; t + lookback < n; ++t) {
        WindowSample sample;
        sample.input.assign(values.begin() + t, values.begin() + t + lookback);
        sample.target = values[t + lookback];
        dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

std::pair<TimeSeries, TimeSeries> split_by_date(const TimeSeries& series, YearMonth split_month) {
    if (series.length() < 2) {
        throw std::invalid_argument("split_by_date: series too short to split");
    }
    if (split_month <= series.start || split_month > series.last_month()) {
        throw std::invalid_argument("split_by_date: split month " + split_month.str() +
                                    " outside series range (" + series.start.str() + ", " +
                                    series.last_month().str() + "]");
    }
    const int cut = split_month.months_since(series.start);
    TimeSeries train{series.building_id, series.start,
                     {series.values.begin(), series.values.begin() + cut}};
    TimeSeries test{series.building_id, split_month,
                    {series.values.begin() + cut, series.values.end()}};
    return {std::move(train), std::move(test)};
}

double mape(std::span<const double> actual, std::span<const double> predicted,
            int* excluded_out) {
    if (actual.size() != predicted.size()) {
        throw std::invalid_argument("mape: length mismatch");
    }
    if (actual.empty()) throw std::invalid_argument("mape: empty inputs");
    double sum = 0.0;
    int included = 0;
    int excluded = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] == 0.0) {
            ++excluded;
            continue;
        }
        sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
        ++included;
    }
    if (excluded_out) *excluded_out = excluded;
    if (included == 0) {
        throw std::invalid_argument("mape: every point has actual == 0");
    }
    return 100.0 * sum / included;
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) {
        throw std::invalid_argument("rmse: length mismatch");
    }
    if (actual.empty()) throw std::invalid_argument("rmse: empty inputs");
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = actual[i] - predicted[i];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(actual.size()));
}

EvalReport evaluate_forecast(std::span<const double> actual, std::span<const double> predicted) {
    EvalReport report;
    report.n_points = static_cast<int>(actual.size());
    report.mape = mape(actual, predicted, &report.n_excluded);
    report.rmse = rmse(actual, predicted);
    return report;
}

} // namespace fedcast
