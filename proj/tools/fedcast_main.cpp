#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedcast/errors.hpp"
#include "fedcast/experiment.hpp"
#include "fedcast/io.hpp"

namespace {

using namespace fedcast;

// "--csv-columns building_id=bid,month=period" style overrides.
void apply_column_mapping(CsvSchema& schema, const std::string& mapping) {
    std::istringstream in(mapping);
    std::string pair;
    while (std::getline(in, pair, ',')) {
        if (pair.empty()) continue;
        const auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == pair.size()) {
            throw DataError("--csv-columns: expected key=name pairs, got '" + pair + "'");
        }
        const std::string key = pair.substr(0, eq);
        const std::string name = pair.substr(eq + 1);
        if (key == "building_id") schema.building_id = name;
        else if (key == "month") schema.month = name;
        else if (key == "consumption") schema.consumption = name;
        else if (key == "cost") schema.cost = name;
        else throw DataError("--csv-columns: unknown field '" + key + "'");
    }
}

struct CommonArgs {
    std::string spec_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> csv_columns;
    int threads = 1;
};

ExperimentSpec load_spec_with_overrides(const CommonArgs& args) {
    ExperimentSpec spec = load_experiment_spec(args.spec_path);
    if (args.seed) {
        spec.rounds.rng_seed = *args.seed;
        if (spec.synthetic) spec.synthetic->rng_seed = *args.seed;
    }
    if (args.out) spec.out_dir = *args.out;
    if (args.csv_columns) apply_column_mapping(spec.csv_schema, *args.csv_columns);
    return spec;
}

std::vector<ClientState> clients_for_spec(const ExperimentSpec& spec) {
    const std::vector<TimeSeries> fleet = load_fleet(spec);
    const Topology topology = load_spec_topology(spec);
    return build_clients(fleet, spec, topology);
}

const ClientState& find_client(const std::vector<ClientState>& clients, const std::string& id) {
    for (const ClientState& c : clients) {
        if (c.client_id == id) return c;
    }
    throw DataError("no client with id '" + id + "'");
}

void print_eval(const char* label, const EvalReport& report) {
    std::cout << label << ": MAPE " << report.mape << "%  RMSE " << report.rmse << "  ("
              << report.n_points << " points";
    if (report.n_excluded > 0) std::cout << ", " << report.n_excluded << " zero-actual excluded";
    std::cout << ")\n";
}

int cmd_synth(const std::string& config_path, const std::string& out_path,
              std::optional<std::uint64_t> seed) {
    SyntheticFleetConfig config = load_synthetic_config(config_path);
    if (seed) config.rng_seed = *seed;
    const std::vector<TimeSeries> fleet = generate_synthetic_fleet(config);
    std::ostringstream buf;
    write_fleet_csv(buf, fleet);
    write_text_file(out_path, buf.str());
    std::cout << "wrote " << fleet.size() << " buildings x " << config.n_months << " months to "
              << out_path << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& mode_name) {
    const TrainMode mode = train_mode_from_string(mode_name);
    const ExperimentSpec spec = load_spec_with_overrides(args);
    const std::vector<ClientState> clients = clients_for_spec(spec);

    const ExperimentOutcome outcome = train_experiment(spec, clients, mode, args.threads);
    const std::filesystem::path out_dir = spec.resolve(spec.out_dir);
    write_train_artifacts(outcome, clients, out_dir);

    std::cout << mode_name << " training: " << clients.size() << " clients, "
              << outcome.log.rounds.size()
              << (mode == TrainMode::Federated ? " rounds" : " epochs");
    if (outcome.log.stopped_early) std::cout << " (stopped early)";
    std::cout << "\n";
    print_eval("model", outcome.eval.aggregate);
    print_eval("persistence", outcome.persistence.aggregate);
    std::cout << "artifacts in " << out_dir.string() << "\n";
    return 0;
}

int cmd_personalize(const CommonArgs& args, const std::string& model_path,
                    const std::string& client_id, std::optional<int> epochs,
                    std::optional<double> eta) {
    const ExperimentSpec spec = load_spec_with_overrides(args);
    const std::vector<ClientState> clients = clients_for_spec(spec);
    const ClientState& client = find_client(clients, client_id);
    const ModelWeights global = load_model(model_path);

    const int n_epochs = epochs ? *epochs : spec.personalize_epochs;
    const double n_eta = eta ? *eta : spec.personalization_eta();
    const ModelWeights personal = personalize(global, client, n_eta, n_epochs);

    const std::vector<ClientState> just_client{client};
    const EvalReport before = evaluate_model(just_client, global).aggregate;
    const EvalReport after = evaluate_model(just_client, personal).aggregate;

    const std::filesystem::path out_dir = spec.resolve(spec.out_dir);
    std::filesystem::create_directories(out_dir);
    save_model(personal, out_dir / ("personalized_" + client_id + ".json"));
    const nlohmann::json report{{"client_id", client_id},
                                {"epochs", n_epochs},
                                {"eta", n_eta},
                                {"global", eval_report_to_json(before)},
                                {"personalized", eval_report_to_json(after)}};
    write_text_file(out_dir / ("personalize_report_" + client_id + ".json"),
                    report.dump(2) + "\n");

    std::cout << "personalized " << client_id << " for " << n_epochs << " epochs\n";
    print_eval("global", before);
    print_eval("personalized", after);
    return 0;
}

int cmd_forecast(const CommonArgs& args, const std::string& model_path,
                 const std::string& client_id, std::optional<int> horizon_arg) {
    const ExperimentSpec spec = load_spec_with_overrides(args);
    const std::vector<ClientState> clients = clients_for_spec(spec);
    const ClientState& client = find_client(clients, client_id);
    const ModelWeights model = load_model(model_path);

    const int horizon =
        horizon_arg ? *horizon_arg : static_cast<int>(client.test_series.values.size());
    if (horizon < 1) throw DataError("forecast: horizon must be >= 1");

    std::vector<double> window(client.train_data.lookback);
    {
        const std::vector<double> normalized =
            apply_normalization(client.train_series.values, client.norm);
        std::copy(normalized.end() - client.train_data.lookback, normalized.end(), window.begin());
    }
    const std::vector<double> normalized_pred = forecast_horizon(model, window, horizon);
    const std::vector<double> predicted = denormalize(normalized_pred, client.norm);

    std::ostringstream out;
    out << "month,actual,predicted\n";
    const YearMonth first = client.train_series.last_month().plus_months(1);
    for (int i = 0; i < horizon; ++i) {
        out << first.plus_months(i).str() << ",";
        if (i < static_cast<int>(client.test_series.values.size())) {
            out << format_double(client.test_series.values[i]);
        }
        out << "," << format_double(predicted[i]) << "\n";
    }

    if (args.out) {
        write_text_file(*args.out, out.str());
        std::cout << "wrote " << horizon << " forecast rows for " << client_id << " to "
                  << *args.out << "\n";
    } else {
        std::cout << out.str();
    }
    return 0;
}

int cmd_netload(const CommonArgs& args, const std::string& log_path,
                const std::string& model_path, const std::string& topology_path,
                const std::string& accounting_name) {
    const ExperimentSpec spec = load_spec_with_overrides(args);
    const std::vector<TimeSeries> fleet = load_fleet(spec);
    const Topology topology =
        topology_path.empty() ? load_spec_topology(spec) : load_topology(topology_path);
    const std::vector<ClientState> clients = build_clients(fleet, spec, topology);

    const TrainingLog log = load_training_log(log_path);
    const ModelWeights model = load_model(model_path);
    const Accounting mode = accounting_from_string(accounting_name);

    const NetLoadReport report = compute_netload(clients, topology, log, model, mode);
    const std::string text = netload_report_to_json(report).dump(2) + "\n";
    if (args.out) {
        write_text_file(*args.out, text);
    } else {
        std::cout << text;
    }
    std::cerr << "q_c=" << report.q_c << " q_f=" << report.q_f << " r=" << report.r << " ("
              << to_string(report.accounting) << ")\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_path) {
    const ExperimentSpec spec = load_spec_with_overrides(args);
    const std::vector<ClientState> clients = clients_for_spec(spec);
    const ModelWeights model = load_model(model_path);

    const EvalSummary eval = evaluate_model(clients, model);
    const EvalSummary persistence = persistence_baseline(clients);

    nlohmann::json per_client = nlohmann::json::array();
    for (const auto& [id, report] : eval.per_client) {
        nlohmann::json entry = eval_report_to_json(report);
        entry["client_id"] = id;
        per_client.push_back(std::move(entry));
    }
    const nlohmann::json doc{
        {"model", {{"aggregate", eval_report_to_json(eval.aggregate)},
                   {"per_client", std::move(per_client)}}},
        {"persistence", {{"aggregate", eval_report_to_json(persistence.aggregate)}}}};
    const std::string text = doc.dump(2) + "\n";
    if (args.out) {
        write_text_file(*args.out, text);
    } else {
        std::cout << text;
    }
    print_eval("model", eval.aggregate);
    print_eval("persistence", persistence.aggregate);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated monthly water-consumption forecasting"};
    app.require_subcommand(1);

    CommonArgs common;

    std::string synth_config, synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic fleet CSV");
    synth->add_option("--config", synth_config, "Synthetic fleet config JSON")->required();
    synth->add_option("--out", synth_out, "Output CSV path")->required();
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--seed", synth_seed, "Override the config rng_seed");

    std::string train_mode = "federated";
    auto* train = app.add_subcommand("train", "Train a model from an experiment spec");
    train->add_option("--spec", common.spec_path, "Experiment spec JSON")->required();
    train->add_option("--mode", train_mode, "federated | centralized")
        ->check(CLI::IsMember({"federated", "centralized"}));
    train->add_option("--seed", common.seed, "Override the spec rng seed");
    train->add_option("--out", common.out, "Override the spec output directory");
    train->add_option("--threads", common.threads, "Intra-round worker threads")
        ->check(CLI::PositiveNumber);
    train->add_option("--csv-columns", common.csv_columns,
                      "Column overrides, e.g. building_id=bid,month=period");

    std::string model_path, client_id;
    std::optional<int> pers_epochs;
    std::optional<double> pers_eta;
    auto* pers = app.add_subcommand("personalize", "Fine-tune a trained model for one client");
    pers->add_option("--model", model_path, "Trained model JSON")->required();
    pers->add_option("--spec", common.spec_path, "Experiment spec JSON")->required();
    pers->add_option("--client", client_id, "Client id to personalize for")->required();
    pers->add_option("--epochs", pers_epochs, "Fine-tuning epochs (spec default)");
    pers->add_option("--eta", pers_eta, "Fine-tuning learning rate (spec default)");
    pers->add_option("--seed", common.seed, "Override the spec rng seed");
    pers->add_option("--out", common.out, "Override the spec output directory");
    pers->add_option("--csv-columns", common.csv_columns, "Column overrides");

    std::string fc_model, fc_client;
    std::optional<int> fc_horizon;
    auto* forecast = app.add_subcommand("forecast", "Emit a forecast CSV for one client");
    forecast->add_option("--model", fc_model, "Trained model JSON")->required();
    forecast->add_option("--spec", common.spec_path, "Experiment spec JSON")->required();
    forecast->add_option("--client", fc_client, "Client id to forecast")->required();
    forecast->add_option("--horizon", fc_horizon, "Months to forecast (default: test span)");
    forecast->add_option("--out", common.out, "Output CSV path (default: stdout)");
    forecast->add_option("--csv-columns", common.csv_columns, "Column overrides");

    std::string nl_log, nl_model, nl_topology;
    std::string nl_accounting = "bidirectional";
    auto* netload = app.add_subcommand("netload", "Network-load report for a training run");
    netload->add_option("--log", nl_log, "Training log JSONL")->required();
    netload->add_option("--model", nl_model, "Model JSON")->required();
    netload->add_option("--spec", common.spec_path, "Experiment spec JSON (for data lengths)")
        ->required();
    netload->add_option("--topology", nl_topology, "Topology JSON (default: spec topology)");
    netload->add_option("--netload-accounting", nl_accounting, "paper | bidirectional")
        ->check(CLI::IsMember({"paper", "bidirectional"}));
    netload->add_option("--out", common.out, "Output JSON path (default: stdout)");
    netload->add_option("--csv-columns", common.csv_columns, "Column overrides");

    std::string eval_model;
    auto* eval = app.add_subcommand("eval", "Evaluate a saved model against a spec's fleet");
    eval->add_option("--model", eval_model, "Model JSON")->required();
    eval->add_option("--spec", common.spec_path, "Experiment spec JSON")->required();
    eval->add_option("--out", common.out, "Output JSON path (default: stdout)");
    eval->add_option("--csv-columns", common.csv_columns, "Column overrides");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_config, synth_out, synth_seed);
        if (train->parsed()) return cmd_train(common, train_mode);
        if (pers->parsed()) return cmd_personalize(common, model_path, client_id, pers_epochs,
                                                   pers_eta);
        if (forecast->parsed()) return cmd_forecast(common, fc_model, fc_client, fc_horizon);
        if (netload->parsed()) return cmd_netload(common, nl_log, nl_model, nl_topology,
                                                  nl_accounting);
        if (eval->parsed()) return cmd_eval(common, eval_model);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
