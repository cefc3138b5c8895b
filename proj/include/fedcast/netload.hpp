#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fedcast/federation.hpp"

namespace fedcast {

// Per-client hop distances to the server. Without an explicit map every
// client is one hop away; with one, every referenced client must be covered.
struct Topology {
    std::map<std::string, int> hops;
    bool explicit_map = false;

    int hops_for(const std::string& client_id) const; // throws DataError when missing
};

enum class Accounting {
    Paper,         // one model transfer per participation
    Bidirectional, // download + upload, two transfers per participation
};

Accounting accounting_from_string(const std::string& name);
std::string to_string(Accounting mode);

// Bytes of the client's raw training series at 8 bytes per monthly value.
std::int64_t data_length(const ClientState& client);

// Bytes of the flattened model at 8 bytes per parameter.
std::int64_t model_length(const ModelWeights& w);

// Centralized network load: every client ships its training data once,
// paying its byte length times its hop count.
double centralized_load_bytes(const std::vector<std::pair<std::string, std::int64_t>>& data_lengths,
                              const Topology& topology);
double centralized_load(const std::vector<ClientState>& clients, const Topology& topology);

// Federated network load: one model transfer (two under bidirectional
// accounting) per (round, selected client) participation, each weighted by
// the hop count recorded in the log.
double federated_load(const TrainingLog& log, std::int64_t model_len,
                      Accounting mode = Accounting::Bidirectional);

// Reward of federation: 1 - q_f / q_c. Negative when federation moves more
// byte-hops than centralization; never clamped. q_c must be positive.
double reward(double q_f, double q_c);

struct NetLoadReport {
    double q_c = 0.0;
    double q_f = 0.0;
    double r = 0.0;
    std::int64_t model_length_bytes = 0;
    Accounting accounting = Accounting::Bidirectional;
    std::vector<std::pair<std::string, std::int64_t>> data_lengths; // per client, ascending id
};

NetLoadReport compute_netload(const std::vector<ClientState>& clients, const Topology& topology,
                              const TrainingLog& log, const ModelWeights& w, Accounting mode);

} // namespace fedcast
