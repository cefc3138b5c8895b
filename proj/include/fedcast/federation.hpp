#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedcast/lstm.hpp"
#include "fedcast/series.hpp"
#include "fedcast/timeseries.hpp"

namespace fedcast {

// One client's private view: raw train/test spans, its normalization
// parameters (fit on the train span), the windowed datasets, and its hop
// distance to the server. Raw values never leave operations on this struct;
// only weights, counts, ids, and hops reach server-side records.
struct ClientState {
    std::string client_id;
    TimeSeries train_series;
    TimeSeries test_series;
    NormalizationParams norm{};
    WindowedDataset train_data;
    WindowedDataset test_data;
    int hops = 1;

    int sample_count() const { return static_cast<int>(train_data.size()); }
};

struct RoundConfig {
    int t_max = 20;              // rounds to run
    int subset_size = 5;         // clients per round
    double eta = 0.5;            // SGD learning rate
    int local_epochs = 5;        // full-batch epochs per selected client
    double threshold = 0.05;     // eligibility bound on the monthly-load range
    std::uint64_t rng_seed = 0;
    int eligibility_window = 12; // trailing months for the eligibility statistic
    bool post_filter = false;    // sample first, then apply the threshold inside the round
    bool early_stop = false;     // stop when relative weight change < 1e-5

    void validate() const; // throws DataError on out-of-range fields
};

// What a client sends back: updated weights, its sample count, and the mean
// full-batch loss it observed across its local epochs. No data.
struct ClientUpdate {
    std::string client_id;
    ModelWeights weights;
    int sample_count = 0;
    double mean_epoch_loss = 0.0; // loss at the broadcast weights when epochs == 0
};

struct RoundRecord {
    int round = 0;
    std::vector<std::string> selected; // client ids, ascending
    std::vector<int> hops;             // hop count per selected client
    double mean_local_loss = 0.0;      // NaN for an empty round
    std::optional<EvalReport> global_eval;
};

struct TrainingLog {
    std::vector<RoundRecord> rounds;
    bool stopped_early = false;
};

// Range (max - min) of the client's normalized consumption over the trailing
// window_months of its training span (whole span when shorter). The
// eligibility statistic compared against RoundConfig::threshold.
double monthly_load_delta(const ClientState& client, int window_months);

// Uniform sample without replacement from the eligible clients (delta >
// threshold and at least one training sample), drawn from an rng derived from
// (rng_seed, round). Returns indices into `clients`, sorted by client id.
// With post_filter the sample is drawn from all clients first and the
// threshold test applied afterwards, shrinking the round.
std::vector<std::size_t> select_clients(const std::vector<ClientState>& clients,
                                        const RoundConfig& config, int round);

// E full-batch epochs of (average gradient, SGD step) from the broadcast
// weights. Only weights and the sample count leave the client.
ClientUpdate local_update(const ClientState& client, const ModelWeights& global_weights,
                          double eta, int epochs);

// Sample-count weighted mean of the updates (weights m_s / M), folded in
// ascending client-id order regardless of input order.
ModelWeights aggregate(const std::vector<ClientUpdate>& updates);

using GlobalEvaluator = std::function<EvalReport(const ModelWeights&)>;

struct TrainOptions {
    int threads = 1;      // intra-round parallelism; results are thread-count invariant
    int eval_every = 1;   // snapshot cadence for the log; 0 disables
    GlobalEvaluator evaluator; // optional global-model snapshot hook
};

struct TrainResult {
    ModelWeights weights;
    TrainingLog log;
};

// The full round loop: select -> broadcast -> local updates -> aggregate,
// for t_max rounds (or until the early-stop criterion fires). Deterministic
// per (clients, config, initial). Throws DataError when every round was empty.
TrainResult run_federated(const std::vector<ClientState>& clients, const RoundConfig& config,
                          const ModelWeights& initial, const TrainOptions& options = {});

// Baseline: pools every client's samples (ascending client id, chronological
// within a client) and trains full-batch SGD for `epochs` epochs.
TrainResult run_centralized(const std::vector<ClientState>& clients, double eta, int epochs,
                            const ModelWeights& initial, const TrainOptions& options = {});

// Fine-tunes the trained global model on one client's data; identical
// procedure to local_update, global model untouched.
ModelWeights personalize(const ModelWeights& global_weights, const ClientState& client,
                         double eta, int epochs);

} // namespace fedcast
