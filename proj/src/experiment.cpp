#include "fedcast/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fedcast/errors.hpp"
#include "fedcast/io.hpp"

namespace fedcast {

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "federated") return TrainMode::Federated;
    if (name == "centralized") return TrainMode::Centralized;
    throw DataError("mode: expected 'federated' or 'centralized', got '" + name + "'");
}

std::filesystem::path ExperimentSpec::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

namespace {

// Every key a spec file may carry. Unknown keys are rejected so that a typo
// (say "treshold") degrades loudly instead of silently using a default.
const char* const kSpecKeys[] = {
    "data_csv",      "synthetic",          "hidden_size",        "lookback",
    "split_month",   "rounds",             "topology",           "csv_columns",
    "gap_policy",    "eval_every",         "centralized_epochs", "personalize_epochs",
    "personalize_eta", "out_dir",
};

const char* const kRoundKeys[] = {
    "t_max",     "subset_size",        "eta",         "local_epochs",
    "threshold", "rng_seed",           "eligibility_window",
    "post_filter", "early_stop",
};

void reject_unknown_keys(const nlohmann::json& doc, const char* const* keys, std::size_t n,
                         const std::string& where) {
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        bool known = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (key == keys[i]) {
                known = true;
                break;
            }
        }
        if (!known) throw DataError(where + ": unknown key '" + key + "'");
    }
}

int get_int(const nlohmann::json& doc, const char* key, int fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_number_integer()) {
        throw DataError(std::string("spec: '") + key + "' must be an integer");
    }
    return doc[key].get<int>();
}

double get_double(const nlohmann::json& doc, const char* key, double fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_number()) {
        throw DataError(std::string("spec: '") + key + "' must be a number");
    }
    return doc[key].get<double>();
}

bool get_bool(const nlohmann::json& doc, const char* key, bool fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_boolean()) {
        throw DataError(std::string("spec: '") + key + "' must be a boolean");
    }
    return doc[key].get<bool>();
}

RoundConfig rounds_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw DataError("spec: 'rounds' must be an object");
    reject_unknown_keys(doc, kRoundKeys, std::size(kRoundKeys), "spec: rounds");
    RoundConfig rc;
    rc.t_max = get_int(doc, "t_max", rc.t_max);
    rc.subset_size = get_int(doc, "subset_size", rc.subset_size);
    rc.eta = get_double(doc, "eta", rc.eta);
    rc.local_epochs = get_int(doc, "local_epochs", rc.local_epochs);
    rc.threshold = get_double(doc, "threshold", rc.threshold);
    if (doc.contains("rng_seed")) {
        if (!doc["rng_seed"].is_number_unsigned() && !doc["rng_seed"].is_number_integer()) {
            throw DataError("spec: 'rounds.rng_seed' must be an integer");
        }
        rc.rng_seed = doc["rng_seed"].get<std::uint64_t>();
    }
    rc.eligibility_window = get_int(doc, "eligibility_window", rc.eligibility_window);
    rc.post_filter = get_bool(doc, "post_filter", rc.post_filter);
    rc.early_stop = get_bool(doc, "early_stop", rc.early_stop);
    rc.validate();
    return rc;
}

} // namespace

ExperimentSpec experiment_spec_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw DataError("spec: expected a JSON object");
    reject_unknown_keys(doc, kSpecKeys, std::size(kSpecKeys), "spec");

    ExperimentSpec spec;
    if (doc.contains("data_csv")) {
        if (!doc["data_csv"].is_string()) throw DataError("spec: 'data_csv' must be a string");
        spec.data_csv = doc["data_csv"].get<std::string>();
    }
    if (doc.contains("synthetic")) {
        spec.synthetic = synthetic_config_from_json(doc["synthetic"]);
    }
    if (spec.data_csv.has_value() == spec.synthetic.has_value()) {
        throw DataError("spec: exactly one of 'data_csv' and 'synthetic' is required");
    }

    spec.hidden_size = get_int(doc, "hidden_size", spec.hidden_size);
    if (spec.hidden_size < 1) throw DataError("spec: 'hidden_size' must be >= 1");
    spec.lookback = get_int(doc, "lookback", spec.lookback);
    if (spec.lookback < 1) throw DataError("spec: 'lookback' must be >= 1");

    if (doc.contains("split_month")) {
        if (!doc["split_month"].is_string()) {
            throw DataError("spec: 'split_month' must be a 'YYYY-MM' string");
        }
        const auto parsed = YearMonth::parse(doc["split_month"].get<std::string>());
        if (!parsed) {
            throw DataError("spec: cannot parse 'split_month' value '" +
                            doc["split_month"].get<std::string>() + "'");
        }
        spec.split_month = *parsed;
    }

    if (doc.contains("rounds")) spec.rounds = rounds_from_json(doc["rounds"]);

    if (doc.contains("topology")) {
        if (!doc["topology"].is_string()) throw DataError("spec: 'topology' must be a path");
        spec.topology_path = doc["topology"].get<std::string>();
    }

    if (doc.contains("csv_columns")) {
        const auto& cols = doc["csv_columns"];
        if (!cols.is_object()) throw DataError("spec: 'csv_columns' must be an object");
        for (const auto& [key, value] : cols.items()) {
            if (!value.is_string()) {
                throw DataError("spec: csv_columns." + key + " must be a string");
            }
            const std::string name = value.get<std::string>();
            if (key == "building_id") spec.csv_schema.building_id = name;
            else if (key == "month") spec.csv_schema.month = name;
            else if (key == "consumption") spec.csv_schema.consumption = name;
            else if (key == "cost") spec.csv_schema.cost = name;
            else throw DataError("spec: unknown csv_columns key '" + key + "'");
        }
    }

    if (doc.contains("gap_policy")) {
        if (!doc["gap_policy"].is_string()) throw DataError("spec: 'gap_policy' must be a string");
        spec.gap_policy = gap_policy_from_string(doc["gap_policy"].get<std::string>());
    }

    spec.eval_every = get_int(doc, "eval_every", spec.eval_every);
    if (spec.eval_every < 0) throw DataError("spec: 'eval_every' must be >= 0");
    if (doc.contains("centralized_epochs")) {
        const int e = get_int(doc, "centralized_epochs", 0);
        if (e < 0) throw DataError("spec: 'centralized_epochs' must be >= 0");
        spec.centralized_epochs = e;
    }
    spec.personalize_epochs = get_int(doc, "personalize_epochs", spec.personalize_epochs);
    if (spec.personalize_epochs < 0) throw DataError("spec: 'personalize_epochs' must be >= 0");
    if (doc.contains("personalize_eta")) {
        const double eta = get_double(doc, "personalize_eta", 0.0);
        if (!(eta > 0.0)) throw DataError("spec: 'personalize_eta' must be positive");
        spec.personalize_eta = eta;
    }
    if (doc.contains("out_dir")) {
        if (!doc["out_dir"].is_string()) throw DataError("spec: 'out_dir' must be a string");
        spec.out_dir = doc["out_dir"].get<std::string>();
    }
    return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    ExperimentSpec spec = experiment_spec_from_json(load_json_file(path));
    spec.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return spec;
}

std::vector<TimeSeries> load_fleet(const ExperimentSpec& spec) {
    if (spec.synthetic) return generate_synthetic_fleet(*spec.synthetic);
    const std::filesystem::path csv = spec.resolve(*spec.data_csv);
    std::ifstream in(csv);
    if (!in) throw DataError("cannot open " + csv.string());
    return parse_consumption_csv(in, spec.csv_schema, spec.gap_policy);
}

Topology load_spec_topology(const ExperimentSpec& spec) {
    if (!spec.topology_path) return Topology{};
    return load_topology(spec.resolve(*spec.topology_path));
}

std::vector<ClientState> build_clients(const std::vector<TimeSeries>& fleet,
                                       const ExperimentSpec& spec, const Topology& topology) {
    std::vector<ClientState> clients;
    clients.reserve(fleet.size());
    for (const TimeSeries& series : fleet) {
        if (series.values.empty()) continue;
        if (!(series.start < spec.split_month) || !(spec.split_month <= series.last_month())) {
            std::cerr << "note: skipping " << series.building_id
                      << ": split month outside its span\n";
            continue;
        }
        ClientState client;
        client.client_id = series.building_id;
        std::tie(client.train_series, client.test_series) = split_by_date(series, spec.split_month);
        if (static_cast<int>(client.train_series.values.size()) < spec.lookback + 1) {
            std::cerr << "note: skipping " << series.building_id
                      << ": training span shorter than lookback + 1\n";
            continue;
        }
        auto [train_norm, params] = normalize(client.train_series.values);
        client.norm = params;
        client.train_data = make_windows(train_norm, spec.lookback);
        // teacher-forced test windows: last training window rolls into the
        // test span, all scaled with the train-span parameters
        std::vector<double> combined(train_norm.end() - spec.lookback, train_norm.end());
        const std::vector<double> test_norm =
            apply_normalization(client.test_series.values, params);
        combined.insert(combined.end(), test_norm.begin(), test_norm.end());
        client.test_data = make_windows(combined, spec.lookback);
        client.hops = topology.hops_for(client.client_id);
        clients.push_back(std::move(client));
    }
    std::sort(clients.begin(), clients.end(),
              [](const ClientState& a, const ClientState& b) { return a.client_id < b.client_id; });
    for (std::size_t i = 1; i < clients.size(); ++i) {
        if (clients[i - 1].client_id == clients[i].client_id) {
            throw DataError("fleet: duplicate building id " + clients[i].client_id);
        }
    }
    if (clients.empty()) throw DataError("fleet: no usable building after the split");
    return clients;
}

std::vector<double> client_forecast_hcf(const ClientState& client, const ModelWeights& w) {
    const int lookback = client.train_data.lookback;
    const std::vector<double> normalized_train =
        apply_normalization(client.train_series.values, client.norm);
    const std::vector<double> seed(normalized_train.end() - lookback, normalized_train.end());
    const int horizon = static_cast<int>(client.test_series.values.size());
    const std::vector<double> normalized_pred = forecast_horizon(w, seed, horizon);
    return denormalize(normalized_pred, client.norm);
}

namespace {

EvalSummary summarize(const std::vector<ClientState>& clients,
                      const std::vector<std::vector<double>>& forecasts) {
    EvalSummary summary;
    std::vector<double> all_actual;
    std::vector<double> all_pred;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const auto& actual = clients[i].test_series.values;
        const auto& pred = forecasts[i];
        summary.per_client.emplace_back(clients[i].client_id, evaluate_forecast(actual, pred));
        all_actual.insert(all_actual.end(), actual.begin(), actual.end());
        all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    }
    summary.aggregate = evaluate_forecast(all_actual, all_pred);
    return summary;
}

} // namespace

EvalSummary evaluate_model(const std::vector<ClientState>& clients, const ModelWeights& w) {
    std::vector<std::vector<double>> forecasts;
    forecasts.reserve(clients.size());
    for (const ClientState& client : clients) forecasts.push_back(client_forecast_hcf(client, w));
    return summarize(clients, forecasts);
}

EvalSummary persistence_baseline(const std::vector<ClientState>& clients) {
    std::vector<std::vector<double>> forecasts;
    forecasts.reserve(clients.size());
    for (const ClientState& client : clients) {
        const double last = client.train_series.values.back();
        forecasts.emplace_back(client.test_series.values.size(), last);
    }
    return summarize(clients, forecasts);
}

ExperimentOutcome train_experiment(const ExperimentSpec& spec,
                                   const std::vector<ClientState>& clients, TrainMode mode,
                                   int threads) {
    const ModelWeights initial = init_weights(spec.hidden_size, spec.rounds.rng_seed);

    TrainOptions options;
    options.threads = threads;
    options.eval_every = spec.eval_every;
    if (spec.eval_every > 0) {
        options.evaluator = [&clients](const ModelWeights& w) {
            return evaluate_model(clients, w).aggregate;
        };
    }

    TrainResult trained;
    if (mode == TrainMode::Federated) {
        trained = run_federated(clients, spec.rounds, initial, options);
    } else {
        trained = run_centralized(clients, spec.rounds.eta, spec.centralized_epoch_count(),
                                  initial, options);
    }

    ExperimentOutcome outcome;
    outcome.weights = std::move(trained.weights);
    outcome.log = std::move(trained.log);
    outcome.eval = evaluate_model(clients, outcome.weights);
    outcome.persistence = persistence_baseline(clients);
    return outcome;
}

void write_train_artifacts(const ExperimentOutcome& outcome,
                           const std::vector<ClientState>& clients,
                           const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    save_model(outcome.weights, out_dir / "model.json");
    save_training_log(outcome.log, out_dir / "training_log.jsonl");

    nlohmann::json per_client = nlohmann::json::array();
    for (const auto& [id, report] : outcome.eval.per_client) {
        nlohmann::json entry = eval_report_to_json(report);
        entry["client_id"] = id;
        per_client.push_back(std::move(entry));
    }
    nlohmann::json per_client_persistence = nlohmann::json::array();
    for (const auto& [id, report] : outcome.persistence.per_client) {
        nlohmann::json entry = eval_report_to_json(report);
        entry["client_id"] = id;
        per_client_persistence.push_back(std::move(entry));
    }
    const nlohmann::json eval{
        {"model", {{"aggregate", eval_report_to_json(outcome.eval.aggregate)},
                   {"per_client", std::move(per_client)}}},
        {"persistence", {{"aggregate", eval_report_to_json(outcome.persistence.aggregate)},
                         {"per_client", std::move(per_client_persistence)}}}};
    write_text_file(out_dir / "eval.json", eval.dump(2) + "\n");

    // Server-side fleet summary: ids, counts, and hops only.
    nlohmann::json fleet = nlohmann::json::array();
    for (const ClientState& c : clients) {
        fleet.push_back(nlohmann::json{{"client_id", c.client_id},
                                       {"train_months", c.train_series.values.size()},
                                       {"test_months", c.test_series.values.size()},
                                       {"train_samples", c.sample_count()},
                                       {"hops", c.hops}});
    }
    write_text_file(out_dir / "clients.json", fleet.dump(2) + "\n");
}

} // namespace fedcast
