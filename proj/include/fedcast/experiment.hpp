#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedcast/federation.hpp"
#include "fedcast/ingest.hpp"
#include "fedcast/netload.hpp"

namespace fedcast {

enum class TrainMode { Federated, Centralized };

TrainMode train_mode_from_string(const std::string& name);

// A reproducible experiment: data source, model hyperparameters, round
// configuration, split, and output paths. Loaded from a flat JSON document.
struct ExperimentSpec {
    // exactly one data source
    std::optional<std::string> data_csv;
    std::optional<SyntheticFleetConfig> synthetic;

    int hidden_size = 8;
    int lookback = 12;
    YearMonth split_month{2018, 1};
    RoundConfig rounds{};
    std::optional<std::string> topology_path;
    CsvSchema csv_schema{};
    GapPolicy gap_policy = GapPolicy::LinearInterpolate;

    int eval_every = 1;                     // per-round snapshot cadence; 0 disables
    std::optional<int> centralized_epochs;  // default t_max * local_epochs
    int personalize_epochs = 50;
    std::optional<double> personalize_eta;  // default rounds.eta
    std::string out_dir = "out";

    // directory of the spec file, for resolving relative paths
    std::filesystem::path base_dir = ".";

    int centralized_epoch_count() const {
        return centralized_epochs ? *centralized_epochs : rounds.t_max * rounds.local_epochs;
    }
    double personalization_eta() const {
        return personalize_eta ? *personalize_eta : rounds.eta;
    }
    std::filesystem::path resolve(const std::string& path) const;
};

ExperimentSpec experiment_spec_from_json(const nlohmann::json& doc);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

std::vector<TimeSeries> load_fleet(const ExperimentSpec& spec);

// Splits, normalizes (train-span fit), windows, and attaches hops. Series
// that cannot produce at least one training sample and one test month are
// skipped with a note on stderr. Clients come back sorted by id.
std::vector<ClientState> build_clients(const std::vector<TimeSeries>& fleet,
                                       const ExperimentSpec& spec, const Topology& topology);

Topology load_spec_topology(const ExperimentSpec& spec);

struct EvalSummary {
    EvalReport aggregate;
    std::vector<std::pair<std::string, EvalReport>> per_client; // ascending id
};

// Iterated one-step forecasts over each client's test span, seeded by the
// last training window; pooled points form the aggregate report.
EvalSummary evaluate_model(const std::vector<ClientState>& clients, const ModelWeights& w);

// Naive baseline: every test month predicted as the last training value.
EvalSummary persistence_baseline(const std::vector<ClientState>& clients);

// Per-client forecasts for one model, as denormalized HCF values.
std::vector<double> client_forecast_hcf(const ClientState& client, const ModelWeights& w);

struct ExperimentOutcome {
    ModelWeights weights;
    TrainingLog log;
    EvalSummary eval;
    EvalSummary persistence;
};

// Runs one training experiment end to end (initial weights derived from the
// spec seed, per-round evaluation snapshots per eval_every).
ExperimentOutcome train_experiment(const ExperimentSpec& spec,
                                   const std::vector<ClientState>& clients, TrainMode mode,
                                   int threads = 1);

// model.json, training_log.jsonl, eval.json, clients.json under out_dir.
void write_train_artifacts(const ExperimentOutcome& outcome,
                           const std::vector<ClientState>& clients,
                           const std::filesystem::path& out_dir);

} // namespace fedcast
