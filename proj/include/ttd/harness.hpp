#pragma once

// Experiment orchestration. A run has three phases: seed the known state and
// measure KA_pre with frozen inference, stream every test sample through the
// engine (self-correcting on schedule, accumulating real-time curves), then
// re-predict the whole stream against the frozen final state for the post
// metrics. The post phase never mutates state.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ttd/baselines.hpp"
#include "ttd/classifier.hpp"
#include "ttd/config.hpp"
#include "ttd/engine.hpp"
#include "ttd/error.hpp"
#include "ttd/io.hpp"
#include "ttd/metrics.hpp"
#include "ttd/selfcorrect.hpp"
#include "ttd/synthetic.hpp"

namespace ttd {

struct CurvePoint {
  std::uint64_t step = 0;
  std::optional<double> ka, ta, te, ca, ce;
};

struct PostMetricsOut {
  std::optional<double> ka, ta, te, ca, ce, kf;
  std::optional<double> hca, ari, nmi, vm;
};

struct SCEvent {
  std::uint64_t step = 0;
  SCReport report;
};

struct PhaseTimings {
  double seed_s = 0.0, stream_s = 0.0, post_s = 0.0, total_s = 0.0;
};

struct EvaluationReport {
  nlohmann::json config_echo;
  std::optional<double> ka_pre;
  std::vector<CurvePoint> curves;
  CurvePoint realtime_final;
  PostMetricsOut post;
  std::vector<SCEvent> sc_events;
  std::int64_t discovered_classes = 0;
  PhaseTimings timings;
  bool valid = true;
  std::string error;
};

struct RunResult {
  EvaluationReport report;
  std::vector<PredictionRecord> records;
  std::unique_ptr<TtdEngine> engine;            // populated when method == ours
  std::unique_ptr<BaselineEngine> baseline;     // populated for baselines
  LabeledFeatures stream;
};

namespace detail {

inline CurvePoint realtime_point(std::uint64_t step,
                                 const std::vector<LabeledOutcome>& known_outcomes,
                                 const std::vector<LabeledOutcome>& all_outcomes,
                                 const std::set<std::int32_t>& known_ids) {
  CurvePoint point;
  point.step = step;
  point.ka = known_accuracy(known_outcomes);
  const AgreementMetrics agreement = agreement_metrics(all_outcomes, known_ids);
  point.ta = agreement.ta;
  point.te = agreement.te;
  point.ca = agreement.ca;
  point.ce = agreement.ce;
  return point;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

inline RunResult run_experiment(const ExperimentConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  RunResult result;
  result.report.config_echo = config_to_json(config);

  // Data.
  LabeledFeatures seed_set;
  if (config.synthetic.has_value()) {
    SyntheticData data = generate_synthetic(*config.synthetic, config.master_seed);
    seed_set = std::move(data.seed_set);
    result.stream = std::move(data.stream);
  } else {
    seed_set = load_features(config.files->seed_path);
    result.stream = load_features(config.files->stream_path);
    for (const auto& [label, feature] : seed_set)
      if (label < 0)
        throw Error(ErrorCode::invalid_feature, "seed set has unlabeled samples");
  }
  if (seed_set.empty() || result.stream.empty())
    throw Error(ErrorCode::invalid_argument, "empty seed set or stream");
  const std::size_t dim = seed_set.front().second.size();
  for (const auto& [label, feature] : result.stream)
    if (feature.size() != dim)
      throw Error(ErrorCode::corrupt_file, "stream dimension disagrees with seed set");

  // Engine.
  const auto t_seed = std::chrono::steady_clock::now();
  if (config.is_baseline()) {
    result.baseline = std::make_unique<BaselineEngine>(config.baseline_params(), dim);
    result.baseline->seed_known(seed_set);
  } else {
    std::vector<FeatureVector> pca_input;
    const std::vector<FeatureVector>* pca_ptr = nullptr;
    if (config.basis_mode == BasisMode::pca) {
      pca_input.reserve(seed_set.size());
      for (const auto& [label, feature] : seed_set) pca_input.push_back(feature);
      pca_ptr = &pca_input;
    }
    DirectionBasis basis = make_directions(config.direction_count, dim, config.basis_seed,
                                           config.basis_mode, pca_ptr, config.kappa);
    result.engine = std::make_unique<TtdEngine>(config.engine_params(), std::move(basis));
    result.engine->seed_known(seed_set);
  }
  const std::set<std::int32_t>& known_ids = config.is_baseline()
                                                ? result.baseline->known_class_ids()
                                                : result.engine->known_class_ids();

  auto frozen_predict = [&](const FeatureVector& f, std::optional<std::int32_t> gt,
                            std::uint64_t step) {
    return config.is_baseline() ? result.baseline->predict_frozen(f, gt, step)
                                : result.engine->predict_frozen(f, gt, step);
  };

  // Phase 1: KA_pre on the stream's known portion with the freshly seeded,
  // frozen state.
  {
    std::vector<LabeledOutcome> pre_outcomes;
    for (const auto& [label, feature] : result.stream) {
      if (label < 0 || !known_ids.count(label)) continue;
      const PredictionRecord rec = frozen_predict(feature, label, 0);
      pre_outcomes.push_back({label, rec.predicted});
    }
    result.report.ka_pre = known_accuracy(pre_outcomes);
  }
  result.report.timings.seed_s = detail::seconds_since(t_seed);

  // Phase 2: the stream.
  const auto t_stream = std::chrono::steady_clock::now();
  std::vector<LabeledOutcome> known_outcomes;
  std::vector<LabeledOutcome> all_outcomes;
  result.records.reserve(result.stream.size());
  for (std::size_t i = 0; i < result.stream.size(); ++i) {
    const auto& [label, feature] = result.stream[i];
    const std::optional<std::int32_t> gt =
        label >= 0 ? std::optional<std::int32_t>(label) : std::nullopt;
    const PredictionRecord rec = config.is_baseline() ? result.baseline->step(feature, gt)
                                                      : result.engine->step(feature, gt);
    result.records.push_back(rec);
    if (gt.has_value()) {
      all_outcomes.push_back({*gt, rec.predicted});
      if (known_ids.count(*gt)) known_outcomes.push_back({*gt, rec.predicted});
    }

    const std::uint64_t step = rec.step;
    if (!config.is_baseline() && config.sc_every > 0 && step % config.sc_every == 0) {
      SCEvent event{step, self_correct(*result.engine, config.sc_fraction)};
      result.report.sc_events.push_back(std::move(event));
    }
    if (step % config.curve_stride == 0 || i + 1 == result.stream.size())
      result.report.curves.push_back(
          detail::realtime_point(step, known_outcomes, all_outcomes, known_ids));
  }
  result.report.realtime_final = result.report.curves.back();
  result.report.discovered_classes = config.is_baseline()
                                         ? result.baseline->discovered_classes()
                                         : result.engine->discovered_classes();
  result.report.timings.stream_s = detail::seconds_since(t_stream);

  // Phase 3: frozen post evaluation over the whole stream.
  const auto t_post = std::chrono::steady_clock::now();
  std::vector<LabeledOutcome> post_all;
  std::vector<LabeledOutcome> post_known;
  for (const auto& [label, feature] : result.stream) {
    if (label < 0) {
      frozen_predict(feature, std::nullopt, 0);
      continue;  // unlabeled samples cannot enter metrics
    }
    const PredictionRecord rec = frozen_predict(feature, label, 0);
    post_all.push_back({label, rec.predicted});
    if (known_ids.count(label)) post_known.push_back({label, rec.predicted});
  }

  result.report.post.ka = known_accuracy(post_known);
  const AgreementMetrics agreement = agreement_metrics(post_all, known_ids);
  result.report.post.ta = agreement.ta;
  result.report.post.te = agreement.te;
  result.report.post.ca = agreement.ca;
  result.report.post.ce = agreement.ce;
  if (result.report.ka_pre.has_value() && result.report.post.ka.has_value())
    result.report.post.kf = known_forgetting(*result.report.ka_pre, *result.report.post.ka);
  if (!post_all.empty()) {
    const NcdMetrics ncd = ncd_metrics(post_all);
    result.report.post.hca = ncd.hca;
    result.report.post.ari = ncd.ari;
    result.report.post.nmi = ncd.nmi;
    result.report.post.vm = ncd.vm;
  }
  result.report.timings.post_s = detail::seconds_since(t_post);
  result.report.timings.total_s = detail::seconds_since(t_start);
  return result;
}

// --- report serialization ---

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& value) {
  return value.has_value() ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

inline nlohmann::json curve_json(const CurvePoint& point) {
  return {{"step", point.step},       {"ka", optional_json(point.ka)},
          {"ta", optional_json(point.ta)}, {"te", optional_json(point.te)},
          {"ca", optional_json(point.ca)}, {"ce", optional_json(point.ce)}};
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["valid"] = report.valid;
  if (!report.error.empty()) j["error"] = report.error;
  j["config"] = report.config_echo;
  j["ka_pre"] = detail::optional_json(report.ka_pre);
  j["discovered_classes"] = report.discovered_classes;

  nlohmann::json realtime = detail::curve_json(report.realtime_final);
  realtime.erase("step");
  j["realtime"] = realtime;

  j["post"] = {{"ka", detail::optional_json(report.post.ka)},
               {"ta", detail::optional_json(report.post.ta)},
               {"te", detail::optional_json(report.post.te)},
               {"ca", detail::optional_json(report.post.ca)},
               {"ce", detail::optional_json(report.post.ce)},
               {"kf", detail::optional_json(report.post.kf)},
               {"hca", detail::optional_json(report.post.hca)},
               {"ari", detail::optional_json(report.post.ari)},
               {"nmi", detail::optional_json(report.post.nmi)},
               {"vm", detail::optional_json(report.post.vm)}};

  j["curves"] = nlohmann::json::array();
  for (const CurvePoint& point : report.curves) j["curves"].push_back(detail::curve_json(point));

  j["sc_events"] = nlohmann::json::array();
  for (const SCEvent& event : report.sc_events) {
    nlohmann::json flows = nlohmann::json::array();
    for (const auto& [pair, count] : event.report.flows)
      flows.push_back({pair.first.to_string(), pair.second.to_string(), count});
    j["sc_events"].push_back({{"step", event.step},
                              {"examined", event.report.examined},
                              {"relabeled", event.report.relabeled},
                              {"discarded", event.report.discarded},
                              {"flows", flows}});
  }

  j["timings"] = {{"seed_s", report.timings.seed_s},
                  {"stream_s", report.timings.stream_s},
                  {"post_s", report.timings.post_s},
                  {"total_s", report.timings.total_s}};
  return j;
}

inline void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& curves) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::format_error, "cannot open for writing: " + path);
  out << "step,ka,ta,te,ca,ce\n";
  out.precision(10);
  auto cell = [&](const std::optional<double>& value) {
    if (value.has_value()) out << *value;
  };
  for (const CurvePoint& point : curves) {
    out << point.step << ',';
    cell(point.ka);
    out << ',';
    cell(point.ta);
    out << ',';
    cell(point.te);
    out << ',';
    cell(point.ca);
    out << ',';
    cell(point.ce);
    out << "\n";
  }
}

inline void write_records_csv(const std::string& path,
                              const std::vector<PredictionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::format_error, "cannot open for writing: " + path);
  out << "step,gt,pred_kind,pred_id,u,route\n";
  out.precision(10);
  for (const PredictionRecord& rec : records) {
    out << rec.step << ',';
    if (rec.ground_truth.has_value()) out << *rec.ground_truth;
    out << ',' << (rec.predicted.is_known() ? "known" : "seen") << ',' << rec.predicted.id()
        << ',' << rec.confidence << ',' << to_string(rec.route) << "\n";
  }
}

}  // namespace ttd
