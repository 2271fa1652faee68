// Command-line front end: gen / run / post-eval / report.
// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttd/config.hpp"
#include "ttd/harness.hpp"
#include "ttd/io.hpp"
#include "ttd/snapshot.hpp"
#include "ttd/synthetic.hpp"

namespace {

int exit_code_for(const ttd::Error& error) {
  switch (error.code()) {
    case ttd::ErrorCode::invalid_argument:
      return 2;
    case ttd::ErrorCode::format_error:
    case ttd::ErrorCode::corrupt_file:
    case ttd::ErrorCode::invalid_feature:
    case ttd::ErrorCode::generation_failure:
    case ttd::ErrorCode::insufficient_rank:
    case ttd::ErrorCode::incompatible_snapshot:
      return 3;
    default:
      return 4;
  }
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ttd::Error(ttd::ErrorCode::invalid_argument, "cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ttd::Error(ttd::ErrorCode::invalid_argument,
                     "bad json in " + path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ttd::Error(ttd::ErrorCode::format_error, "cannot open for writing: " + path);
  out << text;
}

void write_features_any(const std::string& path, const ttd::LabeledFeatures& features) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv")
    ttd::write_features_csv(path, features);
  else
    ttd::write_ttdf(path, features);
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
    return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

struct TauGrid {
  double lo = 0.0, hi = 0.0;
  int n = 0;
};

TauGrid parse_tau_grid(const std::string& text) {
  TauGrid grid;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> grid.lo >> c1 >> grid.hi >> c2 >> grid.n) || c1 != ':' || c2 != ':' ||
      grid.n < 1)
    throw ttd::Error(ttd::ErrorCode::invalid_argument, "tau grid must be lo:hi:n");
  return grid;
}

int cmd_gen(const std::string& spec_path, const std::string& out_path,
            std::string seed_out_path, std::uint64_t seed) {
  const nlohmann::json j = load_json(spec_path);
  const ttd::SyntheticSpec spec =
      ttd::synthetic_from_json(j.contains("synthetic") ? j.at("synthetic") : j);
  const ttd::SyntheticData data = ttd::generate_synthetic(spec, seed);
  if (seed_out_path.empty()) seed_out_path = with_suffix(out_path, ".seed");
  write_features_any(out_path, data.stream);
  write_features_any(seed_out_path, data.seed_set);
  std::cout << "stream: " << out_path << " (" << data.stream.size() << " samples)\n"
            << "seed set: " << seed_out_path << " (" << data.seed_set.size() << " samples)\n";
  return 0;
}

double metric_or_nan(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nan("");
  return j.at(key).get<double>();
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& curves_path, const std::string& records_path,
            const std::string& snapshot_path, const std::string& method_override,
            std::optional<double> tau_override, const std::string& tau_grid_text) {
  nlohmann::json config_json = load_json(config_path);
  if (!method_override.empty()) config_json["method"]["name"] = method_override;
  if (tau_override.has_value()) config_json["method"]["tau"] = *tau_override;

  std::vector<double> taus;
  if (!tau_grid_text.empty()) {
    const TauGrid grid = parse_tau_grid(tau_grid_text);
    for (int i = 0; i < grid.n; ++i)
      taus.push_back(grid.n == 1 ? grid.lo
                                 : grid.lo + (grid.hi - grid.lo) * i / (grid.n - 1));
  }

  if (taus.empty()) {
    const ttd::ExperimentConfig config = ttd::config_from_json(config_json);
    if (!snapshot_path.empty() && config.is_baseline())
      throw ttd::Error(ttd::ErrorCode::invalid_argument,
                       "state snapshots cover the hash-memory method only");
    ttd::RunResult result = ttd::run_experiment(config);
    write_text(out_path, ttd::report_to_json(result.report).dump(2) + "\n");
    if (!curves_path.empty()) ttd::write_curves_csv(curves_path, result.report.curves);
    if (!records_path.empty()) ttd::write_records_csv(records_path, result.records);
    if (!snapshot_path.empty()) ttd::save_snapshot_file(*result.engine, snapshot_path);
    const nlohmann::json post = ttd::report_to_json(result.report)["post"];
    std::cout << "report: " << out_path << "\n"
              << "discovered " << result.report.discovered_classes
              << " classes; post ka=" << metric_or_nan(post, "ka")
              << " ta=" << metric_or_nan(post, "ta") << " ca=" << metric_or_nan(post, "ca")
              << " hca=" << metric_or_nan(post, "hca") << "\n";
    return 0;
  }

  // Sweep: one report per tau.
  for (std::size_t i = 0; i < taus.size(); ++i) {
    config_json["method"]["tau"] = taus[i];
    const ttd::ExperimentConfig config = ttd::config_from_json(config_json);
    ttd::RunResult result = ttd::run_experiment(config);
    const std::string path = with_suffix(out_path, "_tau" + std::to_string(i));
    write_text(path, ttd::report_to_json(result.report).dump(2) + "\n");
    const nlohmann::json post = ttd::report_to_json(result.report)["post"];
    std::cout << "tau=" << taus[i] << " -> " << path
              << " post ta=" << metric_or_nan(post, "ta")
              << " ca=" << metric_or_nan(post, "ca") << "\n";
  }
  return 0;
}

int cmd_post_eval(const std::string& snapshot_path, const std::string& data_path,
                  const std::string& out_path) {
  const ttd::TtdEngine engine = ttd::load_snapshot_file(snapshot_path);
  const ttd::LabeledFeatures data = ttd::load_features(data_path);

  std::vector<ttd::LabeledOutcome> all, known;
  for (const auto& [label, feature] : data) {
    const auto rec = engine.predict_frozen(
        feature, label >= 0 ? std::optional<std::int32_t>(label) : std::nullopt, 0);
    if (label < 0) continue;
    all.push_back({label, rec.predicted});
    if (engine.known_class_ids().count(label)) known.push_back({label, rec.predicted});
  }

  nlohmann::json j;
  j["samples"] = all.size();
  j["post"]["ka"] = ttd::known_accuracy(known).has_value()
                        ? nlohmann::json(*ttd::known_accuracy(known))
                        : nlohmann::json(nullptr);
  const ttd::AgreementMetrics agreement =
      ttd::agreement_metrics(all, engine.known_class_ids());
  auto opt = [](const std::optional<double>& v) {
    return v.has_value() ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["post"]["ta"] = opt(agreement.ta);
  j["post"]["te"] = opt(agreement.te);
  j["post"]["ca"] = opt(agreement.ca);
  j["post"]["ce"] = opt(agreement.ce);
  if (!all.empty()) {
    const ttd::NcdMetrics ncd = ttd::ncd_metrics(all);
    j["post"]["hca"] = ncd.hca;
    j["post"]["ari"] = ncd.ari;
    j["post"]["nmi"] = ncd.nmi;
    j["post"]["vm"] = ncd.vm;
  }
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
  return 0;
}

std::string percent(const nlohmann::json& section, const std::string& key) {
  if (!section.contains(key) || section.at(key).is_null()) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << section.at(key).get<double>() * 100.0;
  return out.str();
}

int cmd_report(const std::string& in_path, const std::string& format) {
  const nlohmann::json j = load_json(in_path);
  const nlohmann::json realtime = j.value("realtime", nlohmann::json::object());
  const nlohmann::json post = j.value("post", nlohmann::json::object());
  const std::string method =
      j.contains("config") ? j["config"]["method"]["name"].get<std::string>() : "?";

  const std::vector<std::string> rt_keys{"ka", "ta", "te", "ca", "ce"};
  const std::vector<std::string> post_keys{"ka", "ta", "te", "ca", "ce", "kf",
                                           "hca", "ari", "nmi", "vm"};
  if (format == "csv") {
    std::cout << "method";
    for (const auto& k : rt_keys) std::cout << ",rt_" << k;
    for (const auto& k : post_keys) std::cout << ",post_" << k;
    std::cout << "\n" << method;
    for (const auto& k : rt_keys) std::cout << ',' << percent(realtime, k);
    for (const auto& k : post_keys) std::cout << ',' << percent(post, k);
    std::cout << "\n";
    return 0;
  }

  std::cout << "method: " << method << "  (values x100)\n";
  std::cout << std::left << std::setw(12) << "" << std::setw(9) << "KA" << std::setw(9)
            << "TA" << std::setw(9) << "TE" << std::setw(9) << "CA" << std::setw(9) << "CE"
            << std::setw(9) << "KF" << "\n";
  std::cout << std::left << std::setw(12) << "real-time";
  for (const auto& k : rt_keys) std::cout << std::setw(9) << percent(realtime, k);
  std::cout << std::setw(9) << "-" << "\n";
  std::cout << std::left << std::setw(12) << "post";
  for (const auto& k : post_keys) {
    std::cout << std::setw(9) << percent(post, k);
    if (k == "kf") break;
  }
  std::cout << "\n" << std::left << std::setw(12) << "ncd";
  std::cout << "HCA=" << percent(post, "hca") << " ARI=" << percent(post, "ari")
            << " NMI=" << percent(post, "nmi") << " VM=" << percent(post, "vm") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming test-time discovery engine"};
  app.require_subcommand(1);

  std::string spec_path, out_path, seed_out_path;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen", "generate a synthetic feature stream");
  gen->add_option("--spec", spec_path, "synthetic spec json")->required();
  gen->add_option("--out", out_path, "stream output (.ttdf or .csv)")->required();
  gen->add_option("--seed-out", seed_out_path, "seed-set output path");
  gen->add_option("--seed", gen_seed, "generation seed");

  std::string config_path, curves_path, records_path, snapshot_path;
  std::string method_override, tau_grid_text;
  std::optional<double> tau_override;
  auto* run = app.add_subcommand("run", "run an experiment");
  run->add_option("--config", config_path, "experiment config json")->required();
  run->add_option("--out", out_path, "report output path")->required();
  run->add_option("--curves", curves_path, "real-time curves csv");
  run->add_option("--records", records_path, "per-step prediction records csv");
  run->add_option("--snapshot-out", snapshot_path, "final engine state snapshot");
  run->add_option("--method", method_override,
                  "override method: ours|euclidean|cosine|magnitude|entropy");
  run->add_option("--tau", tau_override, "override baseline threshold");
  run->add_option("--tau-grid", tau_grid_text, "sweep thresholds, lo:hi:n");

  std::string data_path;
  auto* post_eval = app.add_subcommand("post-eval", "re-evaluate a snapshot on a feature file");
  post_eval->add_option("--snapshot", snapshot_path, "engine snapshot")->required();
  post_eval->add_option("--data", data_path, "feature file (ttdf or csv)")->required();
  post_eval->add_option("--out", out_path, "metrics output path (stdout otherwise)");

  std::string report_format = "table";
  auto* report = app.add_subcommand("report", "render a report");
  report->add_option("--in", config_path, "report json")->required();
  report->add_option("--format", report_format, "table|csv")
      ->check(CLI::IsMember({"table", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(spec_path, out_path, seed_out_path, gen_seed);
    if (run->parsed())
      return cmd_run(config_path, out_path, curves_path, records_path, snapshot_path,
                     method_override, tau_override, tau_grid_text);
    if (post_eval->parsed()) return cmd_post_eval(snapshot_path, data_path, out_path);
    if (report->parsed()) return cmd_report(config_path, report_format);
  } catch (const ttd::Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 4;
  }
  return 0;
}
