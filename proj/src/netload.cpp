#include "fedcast/netload.hpp"

#include <algorithm>

#include "fedcast/errors.hpp"

namespace fedcast {

int Topology::hops_for(const std::string& client_id) const {
    const auto it = hops.find(client_id);
    if (it != hops.end()) return it->second;
    if (explicit_map) {
        throw DataError("topology: no hop count for client " + client_id);
    }
    return 1;
}

Accounting accounting_from_string(const std::string& name) {
    if (name == "paper") return Accounting::Paper;
    if (name == "bidirectional") return Accounting::Bidirectional;
    throw DataError("accounting: expected 'paper' or 'bidirectional', got '" + name + "'");
}

std::string to_string(Accounting mode) {
    return mode == Accounting::Paper ? "paper" : "bidirectional";
}

std::int64_t data_length(const ClientState& client) {
    return 8 * static_cast<std::int64_t>(client.train_series.values.size());
}

std::int64_t model_length(const ModelWeights& w) {
    return 8 * static_cast<std::int64_t>(w.param_count());
}

double centralized_load_bytes(const std::vector<std::pair<std::string, std::int64_t>>& data_lengths,
                              const Topology& topology) {
    double total = 0.0;
    for (const auto& [id, len] : data_lengths) {
        if (len < 0) throw DataError("netload: negative data length for client " + id);
        total += static_cast<double>(len) * static_cast<double>(topology.hops_for(id));
    }
    return total;
}

double centralized_load(const std::vector<ClientState>& clients, const Topology& topology) {
    std::vector<std::pair<std::string, std::int64_t>> lengths;
    lengths.reserve(clients.size());
    for (const ClientState& c : clients) lengths.emplace_back(c.client_id, data_length(c));
    return centralized_load_bytes(lengths, topology);
}

double federated_load(const TrainingLog& log, std::int64_t model_len, Accounting mode) {
    if (model_len < 0) throw DataError("netload: negative model length");
    double hop_sum = 0.0;
    for (const RoundRecord& round : log.rounds) {
        for (int h : round.hops) hop_sum += static_cast<double>(h);
    }
    const double transfers = mode == Accounting::Bidirectional ? 2.0 : 1.0;
    return transfers * static_cast<double>(model_len) * hop_sum;
}

double reward(double q_f, double q_c) {
    if (!(q_c > 0.0)) {
        throw DataError("netload: centralized load must be positive to compute the reward");
    }
    return 1.0 - q_f / q_c;
}

NetLoadReport compute_netload(const std::vector<ClientState>& clients, const Topology& topology,
                              const TrainingLog& log, const ModelWeights& w, Accounting mode) {
    NetLoadReport report;
    report.accounting = mode;
    report.model_length_bytes = model_length(w);

    report.data_lengths.reserve(clients.size());
    for (const ClientState& c : clients) {
        report.data_lengths.emplace_back(c.client_id, data_length(c));
    }
    std::sort(report.data_lengths.begin(), report.data_lengths.end());

    report.q_c = centralized_load_bytes(report.data_lengths, topology);
    report.q_f = federated_load(log, report.model_length_bytes, mode);
    report.r = reward(report.q_f, report.q_c);
    return report;
}

} // namespace fedcast
