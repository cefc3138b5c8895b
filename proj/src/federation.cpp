#include "fedcast/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedcast/errors.hpp"
#include "fedcast/rng.hpp"

namespace fedcast {

void RoundConfig::validate() const {
    if (t_max < 0) throw DataError("rounds: t_max must be >= 0");
    if (subset_size < 1) throw DataError("rounds: subset_size must be >= 1");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DataError("rounds: eta must be positive");
    if (local_epochs < 0) throw DataError("rounds: local_epochs must be >= 0");
    if (threshold < 0.0 || !std::isfinite(threshold)) {
        throw DataError("rounds: threshold must be >= 0");
    }
    if (eligibility_window < 1) throw DataError("rounds: eligibility_window must be >= 1");
}

double monthly_load_delta(const ClientState& client, int window_months) {
    const std::vector<double>& values = client.train_series.values;
    if (values.empty()) return 0.0;
    const auto [normalized, params] = normalize(values);
    const std::size_t n = normalized.size();
    const std::size_t window =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::max(window_months, 1)));
    const auto tail_begin = normalized.end() - static_cast<std::ptrdiff_t>(window);
    const auto [lo, hi] = std::minmax_element(tail_begin, normalized.end());
    return *hi - *lo;
}

namespace {

// Ascending client-id sort for index lists; ids are unique per fleet.
void sort_by_id(std::vector<std::size_t>& indices, const std::vector<ClientState>& clients) {
    std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
        return clients[a].client_id < clients[b].client_id;
    });
}

bool usable(const ClientState& c) { return !c.train_data.samples.empty(); }

} // namespace

std::vector<std::size_t> select_clients(const std::vector<ClientState>& clients,
                                        const RoundConfig& config, int round) {
    config.validate();
    std::mt19937_64 gen(rng::derive_seed(config.rng_seed, static_cast<std::uint64_t>(round)));
    std::vector<std::size_t> chosen;

    if (config.post_filter) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < clients.size(); ++i) {
            if (usable(clients[i])) pool.push_back(i);
        }
        const auto draw = rng::sample_without_replacement(
            gen, pool.size(), static_cast<std::size_t>(config.subset_size));
        for (std::size_t d : draw) {
            const std::size_t idx = pool[d];
            if (monthly_load_delta(clients[idx], config.eligibility_window) > config.threshold) {
                chosen.push_back(idx);
            }
        }
    } else {
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < clients.size(); ++i) {
            if (usable(clients[i]) &&
                monthly_load_delta(clients[i], config.eligibility_window) > config.threshold) {
                eligible.push_back(i);
            }
        }
        const auto draw = rng::sample_without_replacement(
            gen, eligible.size(), static_cast<std::size_t>(config.subset_size));
        for (std::size_t d : draw) chosen.push_back(eligible[d]);
    }

    sort_by_id(chosen, clients);
    return chosen;
}

ClientUpdate local_update(const ClientState& client, const ModelWeights& global_weights,
                          double eta, int epochs) {
    if (client.train_data.samples.empty()) {
        throw DataError("local_update: client " + client.client_id + " has no training samples");
    }
    ClientUpdate update;
    update.client_id = client.client_id;
    update.sample_count = client.sample_count();

    std::vector<double> flat = flatten(global_weights);
    double loss_sum = 0.0;
    for (int e = 0; e < epochs; ++e) {
        const ModelWeights current = unflatten(flat, global_weights.hidden_size);
        const AverageGradient g = average_gradient(current, client.train_data);
        loss_sum += g.mean_loss;
        apply_sgd_step(flat, g.grad, eta);
    }
    update.weights = unflatten(flat, global_weights.hidden_size);
    update.mean_epoch_loss = (epochs == 0) ? mean_loss(global_weights, client.train_data)
                                           : loss_sum / static_cast<double>(epochs);
    return update;
}

ModelWeights aggregate(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw DataError("aggregate: no updates");

    std::vector<std::size_t> order(updates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return updates[a].client_id < updates[b].client_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (updates[order[i - 1]].client_id == updates[order[i]].client_id) {
            throw DataError("aggregate: duplicate client id " + updates[order[i]].client_id);
        }
    }

    const int hidden = updates[order[0]].weights.hidden_size;
    std::int64_t total = 0;
    for (const ClientUpdate& u : updates) {
        if (u.weights.hidden_size != hidden) {
            throw DataError("aggregate: mixed hidden sizes across updates");
        }
        if (u.sample_count <= 0) {
            throw DataError("aggregate: client " + u.client_id +
                            " reports a non-positive sample count");
        }
        total += u.sample_count;
    }

    std::vector<double> acc;
    bool first = true;
    for (std::size_t idx : order) {
        const ClientUpdate& u = updates[idx];
        const double coef = static_cast<double>(u.sample_count) / static_cast<double>(total);
        const std::vector<double> flat = flatten(u.weights);
        if (first) {
            acc.assign(flat.size(), 0.0);
            first = false;
        }
        for (std::size_t j = 0; j < flat.size(); ++j) acc[j] += coef * flat[j];
    }
    return unflatten(acc, hidden);
}

namespace {

// Divergence (eta too large for the data) shows up as non-finite weights.
void ensure_finite(const std::vector<double>& flat, const std::string& where) {
    for (double v : flat) {
        if (!std::isfinite(v)) {
            throw NumericError(where + ": weights became non-finite; lower eta");
        }
    }
}

double relative_change(const std::vector<double>& prev, const std::vector<double>& next) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const double d = next[i] - prev[i];
        num += d * d;
        den += prev[i] * prev[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

} // namespace

TrainResult run_federated(const std::vector<ClientState>& clients, const RoundConfig& config,
                          const ModelWeights& initial, const TrainOptions& options) {
    config.validate();

    TrainResult result;
    result.weights = initial;
    bool any_nonempty = false;

    for (int t = 0; t < config.t_max; ++t) {
        const std::vector<std::size_t> selected = select_clients(clients, config, t);

        RoundRecord record;
        record.round = t;

        if (selected.empty()) {
            record.mean_local_loss = std::numeric_limits<double>::quiet_NaN();
            result.log.rounds.push_back(std::move(record));
            continue;
        }
        any_nonempty = true;

        const std::size_t k = selected.size();
        std::vector<ClientUpdate> updates(k);

        // Selected clients run independently; the slot layout plus the
        // id-ordered aggregate keeps results identical for any thread count.
#pragma omp parallel for num_threads(options.threads) schedule(dynamic) if (options.threads > 1)
        for (long long i = 0; i < static_cast<long long>(k); ++i) {
            const ClientState& client = clients[selected[static_cast<std::size_t>(i)]];
            updates[static_cast<std::size_t>(i)] =
                local_update(client, result.weights, config.eta, config.local_epochs);
        }

        double loss_sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const ClientState& client = clients[selected[i]];
            record.selected.push_back(client.client_id);
            record.hops.push_back(client.hops);
            loss_sum += updates[i].mean_epoch_loss;
        }
        record.mean_local_loss = loss_sum / static_cast<double>(k);

        const std::vector<double> before = flatten(result.weights);
        result.weights = aggregate(updates);
        ensure_finite(flatten(result.weights), "round " + std::to_string(t));

        if (options.eval_every > 0 && options.evaluator &&
            ((t + 1) % options.eval_every == 0 || t + 1 == config.t_max)) {
            record.global_eval = options.evaluator(result.weights);
        }
        result.log.rounds.push_back(std::move(record));

        if (config.early_stop) {
            const double change = relative_change(before, flatten(result.weights));
            if (change < 1e-5) {
                result.log.stopped_early = true;
                break;
            }
        }
    }

    if (config.t_max > 0 && !any_nonempty) {
        throw DataError("run_federated: no eligible clients in any round");
    }
    return result;
}

TrainResult run_centralized(const std::vector<ClientState>& clients, double eta, int epochs,
                            const ModelWeights& initial, const TrainOptions& options) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DataError("centralized: eta must be positive");
    if (epochs < 0) throw DataError("centralized: epochs must be >= 0");

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (usable(clients[i])) order.push_back(i);
    }
    if (order.empty()) throw DataError("centralized: no client has training samples");
    sort_by_id(order, clients);

    WindowedDataset pooled;
    pooled.lookback = clients[order[0]].train_data.lookback;
    for (std::size_t idx : order) {
        const WindowedDataset& d = clients[idx].train_data;
        if (d.lookback != pooled.lookback) {
            throw DataError("centralized: clients disagree on lookback");
        }
        pooled.samples.insert(pooled.samples.end(), d.samples.begin(), d.samples.end());
    }

    TrainResult result;
    std::vector<double> flat = flatten(initial);
    for (int e = 0; e < epochs; ++e) {
        const ModelWeights current = unflatten(flat, initial.hidden_size);
        const AverageGradient g =
            average_gradient_parallel(current, pooled, std::max(options.threads, 1));
        apply_sgd_step(flat, g.grad, eta);
        ensure_finite(flat, "epoch " + std::to_string(e));

        RoundRecord record;
        record.round = e;
        record.mean_local_loss = g.mean_loss;
        if (options.eval_every > 0 && options.evaluator &&
            ((e + 1) % options.eval_every == 0 || e + 1 == epochs)) {
            record.global_eval =
                options.evaluator(unflatten(flat, initial.hidden_size));
        }
        result.log.rounds.push_back(std::move(record));
    }
    result.weights = unflatten(flat, initial.hidden_size);
    return result;
}

ModelWeights personalize(const ModelWeights& global_weights, const ClientState& client,
                         double eta, int epochs) {
    return local_update(client, global_weights, eta, epochs).weights;
}

} // namespace fedcast
