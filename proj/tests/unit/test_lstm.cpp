#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "fedcast/lstm.hpp"
#include "fedcast/rng.hpp"

using namespace fedcast;

namespace {

ModelWeights zero_model(int hidden) {
    ModelWeights shape;
    shape.hidden_size = hidden;
    return unflatten(std::vector<double>(shape.param_count(), 0.0), hidden);
}

ModelWeights random_model(int hidden, std::uint64_t seed) {
    ModelWeights shape;
    shape.hidden_size = hidden;
    std::mt19937_64 g(seed);
    std::vector<double> flat(shape.param_count());
    for (double& v : flat) v = rng::uniform_range(g, -0.8, 0.8);
    return unflatten(flat, hidden);
}

std::vector<double> random_window(int length, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::vector<double> window(length);
    for (double& v : window) v = rng::unit_real(g);
    return window;
}

// Shared tolerance rule: absolute floor for vanishing pairs, relative above.
void check_gradient_pair(double analytic, double numeric) {
    if (std::abs(analytic) + std::abs(numeric) < 1e-8) {
        CHECK(std::abs(analytic - numeric) <= 1e-8);
    } else {
        const double rel =
            std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
        CHECK(rel <= 1e-4);
    }
}

} // namespace

TEST_CASE("parameter counts follow 4(H^2 + 2H) + H + 1") {
    ModelWeights w;
    w.hidden_size = 1;
    CHECK(w.param_count() == 14);
    w.hidden_size = 4;
    CHECK(w.param_count() == 101);
    w.hidden_size = 8;
    CHECK(w.param_count() == 329);
}

TEST_CASE("flatten and unflatten are exact inverses") {
    const ModelWeights w = random_model(4, 21);
    const std::vector<double> flat = flatten(w);
    REQUIRE(static_cast<int>(flat.size()) == w.param_count());
    const ModelWeights back = unflatten(flat, 4);
    CHECK(flatten(back) == flat);
    CHECK(back.gate_forget.recurrent == w.gate_forget.recurrent);
    CHECK(back.readout_bias == w.readout_bias);

    std::mt19937_64 g(3);
    std::vector<double> v(w.param_count());
    for (double& x : v) x = rng::uniform_range(g, -2.0, 2.0);
    CHECK(flatten(unflatten(v, 4)) == v);
}

TEST_CASE("unflatten rejects wrong lengths") {
    CHECK_THROWS_AS(unflatten(std::vector<double>(13, 0.0), 1), std::invalid_argument);
    CHECK_THROWS_AS(unflatten(std::vector<double>(14, 0.0), 2), std::invalid_argument);
}

TEST_CASE("init_weights is deterministic, bounded, forget-bias 1") {
    const ModelWeights a = init_weights(4, 99);
    const ModelWeights b = init_weights(4, 99);
    CHECK(flatten(a) == flatten(b));
    CHECK(flatten(a) != flatten(init_weights(4, 100)));

    const double k = 1.0 / std::sqrt(4.0);
    for (const GateWeights* gate :
         {&a.gate_input, &a.gate_forget, &a.gate_output, &a.gate_candidate}) {
        for (double v : gate->recurrent) CHECK(std::abs(v) <= k);
        for (double v : gate->input) CHECK(std::abs(v) <= k);
    }
    for (double v : a.gate_forget.bias) CHECK(v == 1.0);
}

TEST_CASE("zero weights predict 0 with gates at one half") {
    const ModelWeights w = zero_model(3);
    const ForwardTrace trace = forward(w, std::vector<double>{0.3, 0.9, 0.1});
    CHECK(trace.prediction == 0.0);
    for (double v : trace.gate_i) CHECK(v == 0.5);
    for (double v : trace.gate_f) CHECK(v == 0.5);
    for (double v : trace.gate_o) CHECK(v == 0.5);
    for (double v : trace.cand) CHECK(v == 0.0);
    for (double v : trace.cell) CHECK(v == 0.0);
    for (double v : trace.hidden) CHECK(v == 0.0);
}

TEST_CASE("golden single-step recurrence") {
    // H=1, saturated gates (bias 100 drives sigma to exactly 1.0 in doubles),
    // candidate path tanh(2 * 0.5): prediction = tanh(tanh(1)).
    ModelWeights w = zero_model(1);
    w.gate_input.bias[0] = 100.0;
    w.gate_forget.bias[0] = 100.0;
    w.gate_output.bias[0] = 100.0;
    w.gate_candidate.input[0] = 2.0;
    w.readout[0] = 1.0;

    const ForwardTrace trace = forward(w, std::vector<double>{0.5});
    CHECK(trace.gate_i[0] == 1.0);
    CHECK(trace.gate_f[0] == 1.0);
    CHECK(trace.gate_o[0] == 1.0);
    CHECK(trace.cand[0] == doctest::Approx(0.7615941559557649).epsilon(1e-15));
    CHECK(trace.cell[0] == doctest::Approx(0.7615941559557649).epsilon(1e-15));
    CHECK(trace.prediction == doctest::Approx(0.6420149920119997).epsilon(1e-15));
}

TEST_CASE("forward is pure: identical inputs give bit-identical outputs") {
    const ModelWeights w = random_model(4, 17);
    const std::vector<double> window = random_window(6, 18);
    const ForwardTrace a = forward(w, window);
    const ForwardTrace b = forward(w, window);
    CHECK(a.prediction == b.prediction);
    CHECK(a.hidden == b.hidden);
    CHECK(a.cell == b.cell);
}

TEST_CASE("forward rejects empty windows and malformed models") {
    const ModelWeights w = random_model(2, 5);
    CHECK_THROWS_AS(forward(w, std::vector<double>{}), std::invalid_argument);
    ModelWeights bad = w;
    bad.readout.pop_back();
    CHECK_THROWS_AS(forward(bad, std::vector<double>{0.5}), std::invalid_argument);
}

TEST_CASE("loss and gradient vanish when prediction equals target") {
    const ModelWeights w = zero_model(2);
    const ForwardTrace trace = forward(w, std::vector<double>{0.4, 0.6});
    REQUIRE(trace.prediction == 0.0);
    const BackwardResult result = backward(w, trace, 0.0);
    CHECK(result.loss == 0.0);
    for (double g : result.grad) CHECK(g == 0.0);
}

TEST_CASE("readout-bias gradient equals 2(prediction - target) exactly") {
    const ModelWeights w = random_model(3, 33);
    const std::vector<double> window = random_window(5, 34);
    const ForwardTrace trace = forward(w, window);
    const BackwardResult result = backward(w, trace, 0.25);
    CHECK(result.grad.back() == 2.0 * (trace.prediction - 0.25));
    CHECK(result.loss == (trace.prediction - 0.25) * (trace.prediction - 0.25));
}

TEST_CASE("backward matches central finite differences on random instances") {
    int instance = 0;
    for (int hidden : {1, 2, 4}) {
        for (int length : {1, 3, 6}) {
            const ModelWeights w = random_model(hidden, 100 + instance);
            const std::vector<double> window = random_window(length, 200 + instance);
            const double target = random_window(1, 300 + instance)[0];
            ++instance;

            const ForwardTrace trace = forward(w, window);
            const BackwardResult analytic = backward(w, trace, target);
            const GradientVector numeric = numerical_gradient(w, window, target, 1e-5);
            REQUIRE(analytic.grad.size() == numeric.size());
            for (std::size_t j = 0; j < numeric.size(); ++j) {
                check_gradient_pair(analytic.grad[j], numeric[j]);
            }
        }
    }
}

TEST_CASE("numerical gradient of the bias-only model matches the analytic line") {
    ModelWeights w = zero_model(1);
    w.readout_bias = 0.7;
    const std::vector<double> window{0.2, 0.4};
    // prediction is exactly the readout bias, so loss(b) = (b - t)^2
    CHECK(predict(w, window) == 0.7);
    const GradientVector numeric = numerical_gradient(w, window, 0.2, 1e-5);
    CHECK(numeric.back() == doctest::Approx(2.0 * (0.7 - 0.2)).epsilon(1e-8));
    for (std::size_t j = 0; j + 1 < numeric.size(); ++j) {
        CHECK(std::abs(numeric[j]) <= 1e-8);
    }
}

TEST_CASE("numerical gradient at the flat zero point is near zero") {
    const ModelWeights w = zero_model(2);
    const GradientVector numeric =
        numerical_gradient(w, std::vector<double>{0.5, 0.5}, 0.0, 1e-5);
    for (double g : numeric) CHECK(std::abs(g) < 1e-8);
}

TEST_CASE("average gradient of one sample equals that sample's backward") {
    const ModelWeights w = random_model(2, 41);
    WindowedDataset ds;
    ds.lookback = 3;
    ds.samples.push_back({random_window(3, 42), 0.6});

    const AverageGradient avg = average_gradient(w, ds);
    const BackwardResult single = backward(w, forward(w, ds.samples[0].input), 0.6);
    CHECK(avg.grad == single.grad);
    CHECK(avg.mean_loss == single.loss);
}

TEST_CASE("duplicating every sample leaves the average gradient unchanged") {
    const ModelWeights w = random_model(2, 43);
    WindowedDataset ds;
    ds.lookback = 3;
    for (int i = 0; i < 4; ++i) ds.samples.push_back({random_window(3, 50 + i), 0.1 * i});

    WindowedDataset doubled;
    doubled.lookback = 3;
    for (const WindowSample& s : ds.samples) {
        doubled.samples.push_back(s);
        doubled.samples.push_back(s);
    }
    const AverageGradient a = average_gradient(w, ds);
    const AverageGradient b = average_gradient(w, doubled);
    for (std::size_t j = 0; j < a.grad.size(); ++j) {
        CHECK(a.grad[j] == doctest::Approx(b.grad[j]).epsilon(1e-15));
    }
    CHECK(a.mean_loss == doctest::Approx(b.mean_loss).epsilon(1e-15));
}

TEST_CASE("two-sample average equals the hand-averaged pair") {
    const ModelWeights w = random_model(3, 44);
    WindowedDataset ds;
    ds.lookback = 4;
    ds.samples.push_back({random_window(4, 60), 0.3});
    ds.samples.push_back({random_window(4, 61), 0.8});

    const BackwardResult g0 = backward(w, forward(w, ds.samples[0].input), 0.3);
    const BackwardResult g1 = backward(w, forward(w, ds.samples[1].input), 0.8);
    const AverageGradient avg = average_gradient(w, ds);
    for (std::size_t j = 0; j < avg.grad.size(); ++j) {
        CHECK(avg.grad[j] == (g0.grad[j] + g1.grad[j]) * 0.5);
    }
    CHECK(avg.mean_loss == (g0.loss + g1.loss) * 0.5);
}

TEST_CASE("average_gradient rejects an empty dataset") {
    const ModelWeights w = zero_model(1);
    CHECK_THROWS_AS(average_gradient(w, WindowedDataset{}), std::invalid_argument);
    CHECK_THROWS_AS(mean_loss(w, WindowedDataset{}), std::invalid_argument);
}

TEST_CASE("sgd_step hand example and fixed points") {
    std::vector<double> flat{1.0, 2.0};
    apply_sgd_step(flat, std::vector<double>{0.5, -1.0}, 0.1);
    CHECK(flat[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(flat[1] == doctest::Approx(2.1).epsilon(1e-15));

    const ModelWeights w = random_model(2, 70);
    const GradientVector zero_grad(w.param_count(), 0.0);
    CHECK(flatten(sgd_step(w, zero_grad, 0.5)) == flatten(w));

    GradientVector g(w.param_count(), 0.25);
    CHECK(flatten(sgd_step(w, g, 0.0)) == flatten(w));

    g.pop_back();
    CHECK_THROWS_AS(sgd_step(w, g, 0.1), std::invalid_argument);
}

TEST_CASE("one small sgd step rarely increases the sample's loss") {
    int increases = 0;
    const int trials = 200;
    for (int i = 0; i < trials; ++i) {
        const ModelWeights w = random_model(2, 500 + i);
        const std::vector<double> window = random_window(4, 700 + i);
        const double target = random_window(1, 900 + i)[0];

        const BackwardResult before = backward(w, forward(w, window), target);
        const ModelWeights stepped = sgd_step(w, before.grad, 1e-3);
        const double diff = predict(stepped, window) - target;
        if (diff * diff > before.loss) ++increases;
    }
    CHECK(increases <= trials / 100);
}

TEST_CASE("forecast_horizon unrolls one-step predictions") {
    const ModelWeights w = random_model(2, 80);
    const std::vector<double> seed = random_window(4, 81);

    const std::vector<double> one = forecast_horizon(w, seed, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == predict(w, seed));

    const std::vector<double> two = forecast_horizon(w, seed, 2);
    std::vector<double> shifted(seed.begin() + 1, seed.end());
    shifted.push_back(one[0]);
    CHECK(two[0] == one[0]);
    CHECK(two[1] == predict(w, shifted));
}

TEST_CASE("zero model forecasts zeros at any horizon") {
    const ModelWeights w = zero_model(2);
    for (double p : forecast_horizon(w, std::vector<double>{0.4, 0.9}, 5)) {
        CHECK(p == 0.0);
    }
}

TEST_CASE("forecast_horizon rejects a nonpositive horizon") {
    const ModelWeights w = zero_model(1);
    CHECK_THROWS_AS(forecast_horizon(w, std::vector<double>{0.1}, 0), std::invalid_argument);
}
