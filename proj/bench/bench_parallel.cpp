// Times the OpenMP gradient kernel against the serial reference on one large
// dataset, and a federated round loop at several worker counts. Every timed
// variant is also checked bitwise against the serial result, so the benchmark
// doubles as a standing proof that parallelism never changes the numbers.
//
// Usage: bench_parallel [repeats]
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fedcast/experiment.hpp"
#include "fedcast/federation.hpp"
#include "fedcast/ingest.hpp"
#include "fedcast/lstm.hpp"
#include "fedcast/rng.hpp"

using namespace fedcast;
using Clock = std::chrono::steady_clock;

namespace {

double time_once(const std::function<void()>& fn) {
    const auto start = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double best_of(int repeats, const std::function<void()>& fn) {
    double best = time_once(fn);
    for (int i = 1; i < repeats; ++i) best = std::min(best, time_once(fn));
    return best;
}

WindowedDataset random_dataset(int n_samples, int lookback, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    WindowedDataset data;
    data.lookback = lookback;
    for (int i = 0; i < n_samples; ++i) {
        WindowSample sample;
        sample.input.resize(lookback);
        for (double& v : sample.input) v = rng::unit_real(gen);
        sample.target = rng::unit_real(gen);
        data.samples.push_back(std::move(sample));
    }
    return data;
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
    if (repeats < 1) {
        std::fprintf(stderr, "usage: bench_parallel [repeats >= 1]\n");
        return 1;
    }

    // Gradient kernel: one full-batch pass over 4096 windows at H=8.
    const ModelWeights model = init_weights(8, 42);
    const WindowedDataset data = random_dataset(4096, 12, 42);

    const AverageGradient reference = average_gradient(model, data);
    const double serial = best_of(repeats, [&] { average_gradient(model, data); });

    std::printf("gradient kernel: 4096 windows, lookback 12, hidden 8, best of %d\n", repeats);
    std::printf("  %-22s %8.1f ms   %7s   %s\n", "serial reference", serial * 1e3, "1.00x",
                "baseline");
    for (int threads : {2, 4, 8}) {
        const AverageGradient parallel = average_gradient_parallel(model, data, threads);
        const bool identical =
            parallel.grad == reference.grad && parallel.mean_loss == reference.mean_loss;
        const double elapsed =
            best_of(repeats, [&] { average_gradient_parallel(model, data, threads); });
        std::printf("  %-22s %8.1f ms   %6.2fx   %s\n",
                    ("openmp, " + std::to_string(threads) + " threads").c_str(), elapsed * 1e3,
                    serial / elapsed, identical ? "bitwise identical" : "RESULTS DIFFER");
        if (!identical) return 1;
    }

    // Round loop: 24 clients, 10 rounds of 8-client subsets, parallel across
    // the selected clients.
    SyntheticFleetConfig cfg;
    cfg.n_buildings = 24;
    cfg.n_months = 96;
    cfg.base_level_min = 30.0;
    cfg.base_level_max = 50.0;
    cfg.seasonal_amplitude_min = 8.0;
    cfg.seasonal_amplitude_max = 16.0;
    cfg.phase_months_min = 0.0;
    cfg.phase_months_max = 12.0;
    cfg.noise_stddev = 0.5;
    cfg.trend_slope_min = -0.02;
    cfg.trend_slope_max = 0.02;
    cfg.rng_seed = 42;

    ExperimentSpec spec;
    spec.hidden_size = 8;
    spec.lookback = 12;
    spec.split_month = YearMonth{2018, 1};
    const std::vector<ClientState> clients =
        build_clients(generate_synthetic_fleet(cfg), spec, Topology{});

    RoundConfig rc;
    rc.t_max = 10;
    rc.subset_size = 8;
    rc.eta = 0.3;
    rc.local_epochs = 5;
    rc.threshold = 0.05;
    rc.rng_seed = 42;
    const ModelWeights initial = init_weights(8, 42);

    TrainOptions serial_opts;
    serial_opts.eval_every = 0;
    const TrainResult round_reference = run_federated(clients, rc, initial, serial_opts);
    const double round_serial =
        best_of(repeats, [&] { run_federated(clients, rc, initial, serial_opts); });

    std::printf("round loop: 24 clients, 10 rounds, subsets of 8, best of %d\n", repeats);
    std::printf("  %-22s %8.1f ms   %7s   %s\n", "serial reference", round_serial * 1e3, "1.00x",
                "baseline");
    for (int threads : {2, 4, 8}) {
        TrainOptions opts;
        opts.eval_every = 0;
        opts.threads = threads;
        const TrainResult parallel = run_federated(clients, rc, initial, opts);
        const bool identical = flatten(parallel.weights) == flatten(round_reference.weights);
        const double elapsed = best_of(repeats, [&] { run_federated(clients, rc, initial, opts); });
        std::printf("  %-22s %8.1f ms   %6.2fx   %s\n",
                    ("openmp, " + std::to_string(threads) + " threads").c_str(), elapsed * 1e3,
                    round_serial / elapsed, identical ? "bitwise identical" : "RESULTS DIFFER");
        if (!identical) return 1;
    }
    return 0;
}
