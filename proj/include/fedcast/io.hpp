#pragma once

#include <filesystem>
#include <string>

#include "fedcast/federation.hpp"
#include "fedcast/lstm.hpp"
#include "fedcast/netload.hpp"
#include "fedcast/series.hpp"

#include "json.hpp"

namespace fedcast {

// Model files: {"hidden_size": H, "flat": [...]} with every value printed at
// 17 significant digits so save/load round-trips bit-exactly.
std::string model_to_json_string(const ModelWeights& w);
ModelWeights model_from_json(const nlohmann::json& doc);
void save_model(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_model(const std::filesystem::path& path);

nlohmann::json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);

// Training logs: JSON-lines, one record per round.
std::string round_record_to_json_line(const RoundRecord& record);
void save_training_log(const TrainingLog& log, const std::filesystem::path& path);
TrainingLog load_training_log(const std::filesystem::path& path);

// Topology files: a flat JSON map {client_id: hops}.
Topology topology_from_json(const nlohmann::json& doc);
Topology load_topology(const std::filesystem::path& path);

nlohmann::json netload_report_to_json(const NetLoadReport& report);

// Reads a whole file or throws DataError naming the path.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
nlohmann::json load_json_file(const std::filesystem::path& path);

// 17-significant-digit decimal form that strtod parses back to the same bits.
std::string format_double(double value);

} // namespace fedcast
