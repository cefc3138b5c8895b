#include "fedcast/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fedcast/errors.hpp"

namespace fedcast {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string model_to_json_string(const ModelWeights& w) {
    const std::vector<double> flat = flatten(w);
    std::ostringstream out;
    out << "{\"hidden_size\": " << w.hidden_size << ", \"flat\": [";
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (i) out << ", ";
        out << format_double(flat[i]);
    }
    out << "]}\n";
    return out.str();
}

ModelWeights model_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("hidden_size") || !doc.contains("flat")) {
        throw DataError("model file: expected an object with 'hidden_size' and 'flat'");
    }
    if (!doc["hidden_size"].is_number_integer()) {
        throw DataError("model file: 'hidden_size' must be an integer");
    }
    const int hidden = doc["hidden_size"].get<int>();
    if (hidden < 1) throw DataError("model file: 'hidden_size' must be positive");
    if (!doc["flat"].is_array()) throw DataError("model file: 'flat' must be an array");
    std::vector<double> flat;
    flat.reserve(doc["flat"].size());
    for (const auto& v : doc["flat"]) {
        if (!v.is_number()) throw DataError("model file: 'flat' must contain only numbers");
        flat.push_back(v.get<double>());
    }
    ModelWeights shape;
    shape.hidden_size = hidden;
    if (static_cast<int>(flat.size()) != shape.param_count()) {
        throw DataError("model file: expected " + std::to_string(shape.param_count()) +
                        " parameters for hidden_size " + std::to_string(hidden) + ", found " +
                        std::to_string(flat.size()));
    }
    return unflatten(flat, hidden);
}

void save_model(const ModelWeights& w, const std::filesystem::path& path) {
    write_text_file(path, model_to_json_string(w));
}

ModelWeights load_model(const std::filesystem::path& path) {
    return model_from_json(load_json_file(path));
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
    return nlohmann::json{{"mape_percent", report.mape},
                          {"rmse", report.rmse},
                          {"n_points", report.n_points},
                          {"n_excluded", report.n_excluded}};
}

EvalReport eval_report_from_json(const nlohmann::json& doc) {
    EvalReport report;
    try {
        report.mape = doc.at("mape_percent").get<double>();
        report.rmse = doc.at("rmse").get<double>();
        report.n_points = doc.at("n_points").get<int>();
        report.n_excluded = doc.at("n_excluded").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("eval report: ") + e.what());
    }
    return report;
}

std::string round_record_to_json_line(const RoundRecord& record) {
    nlohmann::json line{{"t", record.round},
                        {"selected", record.selected},
                        {"hops", record.hops}};
    // nlohmann serializes NaN as null; keep that as the empty-round marker.
    if (std::isnan(record.mean_local_loss)) {
        line["mean_local_loss"] = nullptr;
    } else {
        line["mean_local_loss"] = record.mean_local_loss;
    }
    if (record.global_eval) line["global_eval"] = eval_report_to_json(*record.global_eval);
    return line.dump();
}

void save_training_log(const TrainingLog& log, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const RoundRecord& record : log.rounds) out << round_record_to_json_line(record) << "\n";
    if (log.stopped_early) out << nlohmann::json{{"stopped_early", true}}.dump() << "\n";
    write_text_file(path, out.str());
}

TrainingLog load_training_log(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    TrainingLog log;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (doc.contains("stopped_early")) {
            log.stopped_early = doc["stopped_early"].get<bool>();
            continue;
        }
        RoundRecord record;
        try {
            record.round = doc.at("t").get<int>();
            record.selected = doc.at("selected").get<std::vector<std::string>>();
            record.hops = doc.at("hops").get<std::vector<int>>();
            const auto& loss = doc.at("mean_local_loss");
            record.mean_local_loss = loss.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                    : loss.get<double>();
            if (doc.contains("global_eval")) {
                record.global_eval = eval_report_from_json(doc["global_eval"]);
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (record.selected.size() != record.hops.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) +
                            ": 'selected' and 'hops' lengths differ");
        }
        log.rounds.push_back(std::move(record));
    }
    return log;
}

Topology topology_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw DataError("topology: expected a JSON object of client hop counts");
    Topology topo;
    topo.explicit_map = true;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_number_integer()) {
            throw DataError("topology: hop count for '" + key + "' must be an integer");
        }
        const int h = value.get<int>();
        if (h < 1) throw DataError("topology: hop count for '" + key + "' must be >= 1");
        topo.hops[key] = h;
    }
    return topo;
}

Topology load_topology(const std::filesystem::path& path) {
    return topology_from_json(load_json_file(path));
}

nlohmann::json netload_report_to_json(const NetLoadReport& report) {
    nlohmann::json lengths = nlohmann::json::array();
    for (const auto& [id, len] : report.data_lengths) {
        lengths.push_back(nlohmann::json{{"client_id", id}, {"data_length_bytes", len}});
    }
    return nlohmann::json{{"q_c", report.q_c},
                          {"q_f", report.q_f},
                          {"r", report.r},
                          {"model_length_bytes", report.model_length_bytes},
                          {"accounting", to_string(report.accounting)},
                          {"clients", std::move(lengths)}};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw DataError("read failed on " + path.string());
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed on " + path.string());
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

} // namespace fedcast
