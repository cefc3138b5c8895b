// Release gate for the whole pipeline. Each numbered check prints exactly one
// PASS or FAIL line with the measured numbers, and the process exits nonzero
// when any check fails. Checks 5, 8, and 9 drive the installed binary through
// real processes; the rest call the library directly against hand-derived
// oracles.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedcast/experiment.hpp"
#include "fedcast/federation.hpp"
#include "fedcast/ingest.hpp"
#include "fedcast/io.hpp"
#include "fedcast/lstm.hpp"
#include "fedcast/netload.hpp"
#include "fedcast/rng.hpp"

namespace fs = std::filesystem;
using namespace fedcast;
using nlohmann::json;

namespace {

bool g_all_passed = true;

void report(int n, bool pass, const std::string& detail) {
    std::printf("%s: criterion %d: %s\n", pass ? "PASS" : "FAIL", n, detail.c_str());
    std::fflush(stdout);
    if (!pass) g_all_passed = false;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

void criterion(int n, const std::function<Outcome()>& fn) {
    try {
        const Outcome outcome = fn();
        report(n, outcome.pass, outcome.detail);
    } catch (const std::exception& e) {
        report(n, false, std::string("unexpected exception: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

int run_cli(const std::string& args) {
    const std::string command =
        std::string(FEDCAST_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ModelWeights random_model(int hidden_size, std::mt19937_64& gen) {
    ModelWeights shape;
    shape.hidden_size = hidden_size;
    std::vector<double> flat(shape.param_count());
    for (double& v : flat) v = rng::uniform_range(gen, -0.7, 0.7);
    return unflatten(flat, hidden_size);
}

// The gradient tolerance: tiny pairs are compared absolutely, everything
// else relatively against the larger magnitude.
bool gradient_close(double analytic, double numeric, double* rel_out) {
    if (std::fabs(analytic) + std::fabs(numeric) < 1e-8) {
        return std::fabs(analytic - numeric) <= 1e-8;
    }
    const double rel =
        std::fabs(analytic - numeric) / std::max(std::fabs(analytic), std::fabs(numeric));
    if (rel > *rel_out) *rel_out = rel;
    return rel <= 1e-4;
}

// The 20-building benchmark fleet. Criterion 5 writes this as a spec for the
// binary, criterion 8 regenerates the same fleet in-process to know exactly
// which raw values must stay out of the artifacts.
json benchmark_synth_json() {
    json synth;
    synth["n_buildings"] = 20;
    synth["n_months"] = 96;
    synth["base_level"] = {30.0, 50.0};
    synth["seasonal_amplitude"] = {8.0, 16.0};
    synth["phase_months"] = {0.0, 12.0};
    synth["noise_stddev"] = 0.5;
    synth["trend_slope"] = {-0.02, 0.02};
    synth["rng_seed"] = 7;
    return synth;
}

json benchmark_spec_json() {
    json rounds;
    rounds["t_max"] = 50;
    rounds["subset_size"] = 5;
    rounds["eta"] = 0.5;
    rounds["local_epochs"] = 5;
    rounds["threshold"] = 0.05;
    rounds["rng_seed"] = 7;

    json spec;
    spec["synthetic"] = benchmark_synth_json();
    spec["hidden_size"] = 8;
    spec["lookback"] = 12;
    spec["split_month"] = "2018-01"; // month 60 of a span starting 2013-01
    spec["rounds"] = rounds;
    spec["eval_every"] = 0;
    spec["out_dir"] = "fed";
    return spec;
}

ExperimentSpec in_process_spec() {
    ExperimentSpec spec;
    spec.hidden_size = 8;
    spec.lookback = 12;
    spec.split_month = YearMonth{2018, 1};
    return spec;
}

struct SharedState {
    fs::path scratch;
    fs::path spec_path;
    fs::path fed_dir;
    fs::path cen_dir;
    bool benchmark_ran = false;
};

Outcome check_gradients() {
    const auto start = std::chrono::steady_clock::now();
    int instances = 0;
    int failures = 0;
    double worst_rel = 0.0;
    for (int hidden : {1, 2, 4, 8}) {
        for (int lookback : {1, 3, 6, 12}) {
            for (int rep = 0; rep < 7; ++rep) {
                std::mt19937_64 gen(
                    rng::derive_seed(90210, static_cast<std::uint64_t>(
                                                hidden * 1000 + lookback * 10 + rep)));
                const ModelWeights w = random_model(hidden, gen);
                std::vector<double> window(lookback);
                for (double& v : window) v = rng::unit_real(gen);
                const double target = rng::unit_real(gen);

                const BackwardResult analytic = backward(w, forward(w, window), target);
                const GradientVector numeric = numerical_gradient(w, window, target, 1e-5);
                for (std::size_t i = 0; i < numeric.size(); ++i) {
                    if (!gradient_close(analytic.grad[i], numeric[i], &worst_rel)) ++failures;
                }
                ++instances;
            }
        }
    }
    const double elapsed = seconds_since(start);
    const bool pass = failures == 0 && instances >= 100 && elapsed < 60.0;
    return {pass, fmt("gradients vs finite differences: %d instances, %d mismatches, "
                      "worst rel err %.2e, %.1f s (limit 60)",
                      instances, failures, worst_rel, elapsed)};
}

Outcome check_aggregation() {
    // Hand oracle: counts (1,3) over constant models 1 and 5 average to
    // (1*1 + 3*5) / 4 = 4 in every coordinate, exactly.
    const ModelWeights ones = unflatten(std::vector<double>(14, 1.0), 1);
    const ModelWeights fives = unflatten(std::vector<double>(14, 5.0), 1);
    const ClientUpdate u1{"c1", ones, 1, 0.0};
    const ClientUpdate u2{"c2", fives, 3, 0.0};

    const std::vector<double> mean = flatten(aggregate({u1, u2}));
    for (double v : mean) {
        if (v != 4.0) return {false, fmt("weighted mean expected exactly 4.0, got %.17g", v)};
    }
    if (flatten(aggregate({u2, u1})) != mean) {
        return {false, "aggregation changed under input reordering"};
    }

    // Random-model order invariance at a larger width, three orderings.
    std::mt19937_64 gen(404);
    const ClientUpdate a{"alpha", random_model(2, gen), 2, 0.0};
    const ClientUpdate b{"beta", random_model(2, gen), 7, 0.0};
    const ClientUpdate c{"gamma", random_model(2, gen), 11, 0.0};
    const std::vector<double> abc = flatten(aggregate({a, b, c}));
    if (flatten(aggregate({c, a, b})) != abc || flatten(aggregate({b, c, a})) != abc) {
        return {false, "aggregation of three random updates depends on order"};
    }

    const ClientUpdate solo{"solo", random_model(4, gen), 9, 0.0};
    if (flatten(aggregate({solo})) != flatten(solo.weights)) {
        return {false, "single-client aggregation is not the identity"};
    }
    return {true, "weighted mean (1,3)x(1,5) = 4.0 exact; order-invariant and "
                  "single-client identity bit-exact"};
}

Outcome check_degenerate_equivalence() {
    const auto start = std::chrono::steady_clock::now();

    SyntheticFleetConfig cfg = synthetic_config_from_json(benchmark_synth_json());
    cfg.n_buildings = 1;
    ExperimentSpec spec = in_process_spec();
    spec.hidden_size = 4;
    const std::vector<ClientState> clients =
        build_clients(generate_synthetic_fleet(cfg), spec, Topology{});

    RoundConfig rc;
    rc.t_max = 20;
    rc.subset_size = 1;
    rc.eta = 0.3;
    rc.local_epochs = 5;
    rc.threshold = 0.0;
    rc.rng_seed = 7;
    const ModelWeights initial = init_weights(4, 7);
    const TrainResult fed = run_federated(clients, rc, initial);

    // Oracle: the protocol collapses to plain local SGD, open-coded here
    // without touching the federation module.
    std::vector<double> flat = flatten(initial);
    for (int epoch = 0; epoch < rc.t_max * rc.local_epochs; ++epoch) {
        const AverageGradient g = average_gradient(unflatten(flat, 4), clients[0].train_data);
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= rc.eta * g.grad[i];
    }

    const double elapsed = seconds_since(start);
    if (flatten(fed.weights) != flat) {
        return {false, fmt("single-client federated run differs from %d plain SGD epochs",
                           rc.t_max * rc.local_epochs)};
    }
    return {elapsed < 10.0,
            fmt("single-client federated run equals %d plain SGD epochs bit-exactly, "
                "%.2f s (limit 10)",
                rc.t_max * rc.local_epochs, elapsed)};
}

Outcome check_netload_oracles() {
    Topology topo;
    topo.hops = {{"a", 2}, {"b", 3}};
    topo.explicit_map = true;
    const double q_c = centralized_load_bytes({{"a", 10}, {"b", 20}}, topo);
    if (q_c != 80.0) return {false, fmt("Q_C expected exactly 80, got %.17g", q_c)};

    TrainingLog log;
    RoundRecord round;
    round.round = 0;
    round.selected = {"a", "b"};
    round.hops = {2, 3};
    log.rounds.push_back(round);
    const double q_f = federated_load(log, 5, Accounting::Paper);
    if (q_f != 25.0) return {false, fmt("Q_F expected exactly 25, got %.17g", q_f)};

    const double r = reward(q_f, q_c);
    if (r != 0.6875) return {false, fmt("R expected exactly 0.6875, got %.17g", r)};

    // Doubling every hop scales both loads by two and leaves R untouched.
    Topology doubled_topo;
    doubled_topo.hops = {{"a", 4}, {"b", 6}};
    doubled_topo.explicit_map = true;
    TrainingLog doubled_log = log;
    doubled_log.rounds[0].hops = {4, 6};
    const double q_c2 = centralized_load_bytes({{"a", 10}, {"b", 20}}, doubled_topo);
    const double q_f2 = federated_load(doubled_log, 5, Accounting::Paper);
    if (q_c2 != 160.0 || q_f2 != 50.0 || reward(q_f2, q_c2) != r) {
        return {false, fmt("hop doubling broke scale invariance: Q_C=%.17g Q_F=%.17g R=%.17g",
                           q_c2, q_f2, reward(q_f2, q_c2))};
    }
    return {true, "Q_C=80, Q_F=25, R=0.6875 all exact; R invariant under hop doubling"};
}

Outcome check_benchmark(SharedState& state) {
    const auto start = std::chrono::steady_clock::now();

    state.scratch = fs::temp_directory_path() /
                    ("fedcast_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(state.scratch);
    fs::create_directories(state.scratch);
    state.spec_path = state.scratch / "benchmark.json";
    state.fed_dir = state.scratch / "fed";
    state.cen_dir = state.scratch / "cen";
    write_text_file(state.spec_path, benchmark_spec_json().dump(2) + "\n");

    if (run_cli("train --spec " + state.spec_path.string()) != 0) {
        return {false, "federated training run failed"};
    }
    if (run_cli("train --mode centralized --spec " + state.spec_path.string() + " --out cen") !=
        0) {
        return {false, "centralized training run failed"};
    }

    const json fed_eval = load_json_file(state.fed_dir / "eval.json");
    const json cen_eval = load_json_file(state.cen_dir / "eval.json");
    const double fed_mape = fed_eval["model"]["aggregate"]["mape_percent"].get<double>();
    const double cen_mape = cen_eval["model"]["aggregate"]["mape_percent"].get<double>();
    const double persistence =
        fed_eval["persistence"]["aggregate"]["mape_percent"].get<double>();
    const double elapsed = seconds_since(start);

    const bool ratio_ok = fed_mape <= 1.5 * cen_mape;
    const bool beats = fed_mape < persistence && cen_mape < persistence;
    const bool in_time = elapsed < 300.0;
    state.benchmark_ran = true;
    return {ratio_ok && beats && in_time,
            fmt("test MAPE federated %.2f%%, centralized %.2f%% (ratio %.2f, limit 1.5), "
                "persistence %.2f%%, %.1f s (limit 300)",
                fed_mape, cen_mape, fed_mape / cen_mape, persistence, elapsed)};
}

Outcome check_personalization() {
    // 15 buildings with in-phase seasonality plus 5 whose seasonal term is
    // shifted half a year. Both fleets share per-building RNG streams, so
    // building k differs from its counterpart only in phase.
    SyntheticFleetConfig normal = synthetic_config_from_json(benchmark_synth_json());
    normal.phase_months_min = 0.0;
    normal.phase_months_max = 0.0;
    SyntheticFleetConfig shifted = normal;
    shifted.phase_months_min = 6.0;
    shifted.phase_months_max = 6.0;

    const std::vector<TimeSeries> fleet_normal = generate_synthetic_fleet(normal);
    const std::vector<TimeSeries> fleet_shifted = generate_synthetic_fleet(shifted);
    std::vector<TimeSeries> fleet(fleet_normal.begin(), fleet_normal.begin() + 15);
    fleet.insert(fleet.end(), fleet_shifted.begin() + 15, fleet_shifted.end());

    const ExperimentSpec spec = in_process_spec();
    const std::vector<ClientState> clients = build_clients(fleet, spec, Topology{});

    RoundConfig rc;
    rc.t_max = 50;
    rc.subset_size = 5;
    rc.eta = 0.5;
    rc.local_epochs = 5;
    rc.threshold = 0.05;
    rc.rng_seed = 7;
    const TrainResult global = run_federated(clients, rc, init_weights(spec.hidden_size, 7));

    int improved = 0;
    std::ostringstream deltas;
    for (std::size_t i = 15; i < clients.size(); ++i) {
        const std::vector<ClientState> one{clients[i]};
        const double before = evaluate_model(one, global.weights).aggregate.mape;
        const ModelWeights personal = personalize(global.weights, clients[i], 0.5, 50);
        const double after = evaluate_model(one, personal).aggregate.mape;
        if (after < before) ++improved;
        deltas << (i == 15 ? "" : ", ") << clients[i].client_id << " "
               << fmt("%.2f->%.2f", before, after);
    }
    const bool pass = improved >= 4; // 80% of the 5 shifted clients
    return {pass, fmt("personalization lowered MAPE for %d/5 shifted clients (need 4): %s",
                      improved, deltas.str().c_str())};
}

Outcome check_reward_positivity() {
    // A fleet large enough that shipping every raw series dwarfs 20 rounds of
    // model exchange; 500 rounds then overshoots it, so the reward must go
    // negative rather than clamp.
    SyntheticFleetConfig cfg = synthetic_config_from_json(benchmark_synth_json());
    cfg.n_buildings = 1000;
    const ExperimentSpec spec = in_process_spec();
    const std::vector<ClientState> clients =
        build_clients(generate_synthetic_fleet(cfg), spec, Topology{});

    RoundConfig rc;
    rc.t_max = 20;
    rc.subset_size = 5;
    rc.eta = 0.2;
    rc.local_epochs = 1;
    rc.threshold = 0.05;
    rc.rng_seed = 7;

    const ModelWeights initial = init_weights(spec.hidden_size, 7);
    const TrainResult short_run = run_federated(clients, rc, initial);
    const NetLoadReport short_report =
        compute_netload(clients, Topology{}, short_run.log, short_run.weights, Accounting::Paper);

    rc.t_max = 500;
    const TrainResult long_run = run_federated(clients, rc, initial);
    const NetLoadReport long_report =
        compute_netload(clients, Topology{}, long_run.log, long_run.weights, Accounting::Paper);

    const bool pass = short_report.r > 0.0 && long_report.r < 0.0;
    return {pass, fmt("paper accounting over %zu clients: R=%+.4f at t_max=20 (need >0), "
                      "R=%+.2f at t_max=500 (need <0)",
                      clients.size(), short_report.r, long_report.r)};
}

void collect_keys(const json& node, std::set<std::string>& keys) {
    if (node.is_object()) {
        for (const auto& [key, value] : node.items()) {
            keys.insert(key);
            collect_keys(value, keys);
        }
    } else if (node.is_array()) {
        for (const auto& value : node) collect_keys(value, keys);
    }
}

Outcome check_privacy(const SharedState& state) {
    if (!state.benchmark_ran) return {false, "benchmark artifacts unavailable (criterion 5)"};

    // Everything the server writes. The log is JSONL, the rest plain JSON.
    const std::vector<fs::path> artifacts = {
        state.fed_dir / "model.json",
        state.fed_dir / "training_log.jsonl",
        state.fed_dir / "eval.json",
        state.fed_dir / "clients.json",
    };
    static const std::set<std::string> allowed = {
        "t",          "selected",    "hops",        "mean_local_loss", "global_eval",
        "stopped_early", "mape_percent", "rmse",    "n_points",        "n_excluded",
        "hidden_size", "flat",       "model",       "persistence",     "aggregate",
        "per_client", "client_id",   "train_months", "test_months",    "train_samples",
    };

    std::set<std::string> seen;
    for (const fs::path& path : artifacts) {
        const std::string text = read_text_file(path);
        if (path.extension() == ".jsonl") {
            std::istringstream lines(text);
            std::string line;
            while (std::getline(lines, line)) {
                if (!line.empty()) collect_keys(json::parse(line), seen);
            }
        } else {
            collect_keys(json::parse(text), seen);
        }
    }
    for (const std::string& key : seen) {
        if (!allowed.contains(key)) {
            return {false, "unexpected field '" + key + "' in server artifacts"};
        }
    }

    // The artifacts must not contain any raw consumption value. The fleet is
    // regenerated from the same config, and every serialized monthly value is
    // searched for as a literal substring.
    const std::vector<TimeSeries> fleet =
        generate_synthetic_fleet(synthetic_config_from_json(benchmark_synth_json()));
    std::vector<std::string> needles;
    for (const TimeSeries& series : fleet) {
        for (double v : series.values) {
            std::string s = format_double(v);
            if (s.size() >= 8) needles.push_back(std::move(s));
        }
    }
    for (const fs::path& path : artifacts) {
        const std::string text = read_text_file(path);
        for (const std::string& needle : needles) {
            if (text.find(needle) != std::string::npos) {
                return {false,
                        "raw consumption value " + needle + " leaked into " +
                            path.filename().string()};
            }
        }
    }
    return {true, fmt("%zu artifact fields all whitelisted; none of %zu raw consumption "
                      "values appear in any server artifact",
                      seen.size(), needles.size())};
}

Outcome check_determinism(const SharedState& state) {
    if (!state.benchmark_ran) return {false, "benchmark artifacts unavailable (criterion 5)"};

    if (run_cli("train --spec " + state.spec_path.string() + " --out fed_repeat") != 0) {
        return {false, "repeat federated training run failed"};
    }
    const fs::path repeat_dir = state.scratch / "fed_repeat";
    for (const char* name : {"model.json", "training_log.jsonl", "eval.json", "clients.json"}) {
        if (read_text_file(state.fed_dir / name) != read_text_file(repeat_dir / name)) {
            return {false, std::string("repeat run produced a different ") + name};
        }
    }
    return {true, "repeat benchmark run byte-identical across model.json, "
                  "training_log.jsonl, eval.json, clients.json"};
}

} // namespace

int main() {
    SharedState state;
    criterion(1, check_gradients);
    criterion(2, check_aggregation);
    criterion(3, check_degenerate_equivalence);
    criterion(4, check_netload_oracles);
    criterion(5, [&] { return check_benchmark(state); });
    criterion(6, check_personalization);
    criterion(7, check_reward_positivity);
    criterion(8, [&] { return check_privacy(state); });
    criterion(9, [&] { return check_determinism(state); });

    if (!state.scratch.empty() && g_all_passed) fs::remove_all(state.scratch);
    std::printf("%s\n", g_all_passed ? "all 9 criteria passed"
                                     : "ACCEPTANCE FAILED: see FAIL lines above");
    return g_all_passed ? 0 : 1;
}
