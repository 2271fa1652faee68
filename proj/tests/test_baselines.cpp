#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ttd/baselines.hpp"
#include "ttd/classifier.hpp"

using namespace ttd;

namespace {

std::vector<std::pair<std::int32_t, FeatureVector>> two_class_seeds() {
  // Class 0 on e0, class 1 on e1, both at norm 2.
  std::vector<std::pair<std::int32_t, FeatureVector>> seeds;
  for (int i = 0; i < 5; ++i) {
    seeds.push_back({0, {2.0f, 0.0f, 0.0f}});
    seeds.push_back({1, {0.0f, 2.0f, 0.0f}});
  }
  return seeds;
}

BaselineEngine make_baseline(BaselineKind kind, double tau, std::int64_t cap = -1) {
  BaselineParams params;
  params.kind = kind;
  params.tau = tau;
  params.max_discoverable = cap;
  BaselineEngine engine(params, 3);
  engine.seed_known(two_class_seeds());
  return engine;
}

}  // namespace

TEST_CASE("magnitude baseline flags small norms as novel") {
  BaselineEngine engine = make_baseline(BaselineKind::magnitude, 1.0);
  const PredictionRecord rec = engine.step({0.3f, 0.3f, 0.2f}, std::nullopt);
  CHECK(rec.route == Route::novel);
  CHECK(rec.predicted == Label::seen(1));
}

TEST_CASE("euclidean baseline keeps exact prototype hits known") {
  BaselineEngine engine = make_baseline(BaselineKind::euclidean, 0.5);
  const PredictionRecord rec = engine.step({2.0f, 0.0f, 0.0f}, std::nullopt);
  CHECK(rec.predicted == Label::known(0));
  CHECK(rec.route == Route::prototype);
}

TEST_CASE("entropy is maximal for equidistant prototypes") {
  // Both prototypes see the same cosine, so the softmax is uniform over two
  // classes and the entropy is exactly 1 bit.
  BaselineEngine engine = make_baseline(BaselineKind::entropy, 0.99);
  const PredictionRecord rec = engine.step({1.0f, 1.0f, 0.0f}, std::nullopt);
  CHECK(rec.route == Route::novel);

  BaselineEngine relaxed = make_baseline(BaselineKind::entropy, 1.01);
  const PredictionRecord kept = relaxed.step({1.0f, 1.0f, 0.0f}, std::nullopt);
  CHECK(kept.route == Route::prototype);
}

TEST_CASE("threshold extremes degenerate as stated") {
  std::mt19937_64 rng(5);
  const double kNever = -1e30, kAlways = 1e30;
  struct Case {
    BaselineKind kind;
    double never_tau;
    double always_tau;
  };
  const Case cases[] = {{BaselineKind::euclidean, kAlways, kNever},
                        {BaselineKind::entropy, kAlways, kNever},
                        {BaselineKind::cosine, kNever, kAlways},
                        {BaselineKind::magnitude, kNever, kAlways}};
  for (const Case& c : cases) {
    BaselineEngine never = make_baseline(c.kind, c.never_tau);
    BaselineEngine always = make_baseline(c.kind, c.always_tau);
    for (int i = 0; i < 50; ++i) {
      const FeatureVector f = oracles::random_feature(3, rng, 0.1, 2.0);
      CHECK(never.step(f, std::nullopt).route != Route::novel);
      const Route route = always.step(f, std::nullopt).route;
      CHECK((route == Route::novel || route == Route::capped_fallback));
    }
    CHECK(never.discovered_classes() == 0);
  }
}

TEST_CASE("discovery disabled reduces to the prototype classifier") {
  BaselineEngine engine = make_baseline(BaselineKind::cosine, -1e30);
  PrototypeBank reference;
  for (const auto& [label, prototype] : engine.prototypes()) reference.emplace(label, prototype);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const FeatureVector f = oracles::random_feature(3, rng, 0.05, 1.5);
    const auto [expected, u] = prototype_predict(reference, f);
    const PredictionRecord rec = engine.step(f, std::nullopt);
    CHECK(rec.predicted == expected);
    CHECK(rec.confidence == Catch::Approx(u));
  }
}

TEST_CASE("baselines share cap and EMA machinery") {
  BaselineEngine engine = make_baseline(BaselineKind::euclidean, 0.5, /*cap=*/1);
  const PredictionRecord first = engine.step({0.0f, 0.0f, 3.0f}, std::nullopt);
  CHECK(first.route == Route::novel);

  // Cap reached: a distinct novel direction falls back to a nearest label.
  const PredictionRecord second = engine.step({-3.0f, 0.0f, -3.0f}, std::nullopt);
  CHECK(second.route == Route::capped_fallback);

  // Seen assignments run the EMA.
  const Prototype& proto = engine.prototypes().at(Label::seen(1));
  const std::vector<double> before = proto.vector;
  const PredictionRecord third = engine.step({0.0f, 0.0f, 3.1f}, std::nullopt);
  CHECK(third.predicted == Label::seen(1));
  CHECK(engine.prototypes().at(Label::seen(1)).vector != before);
  CHECK(engine.prototypes().at(Label::seen(1)).update_count == 1);
}

TEST_CASE("zero-norm features error only where cosine is required") {
  const FeatureVector zero(3, 0.0f);
  CHECK_THROWS_AS(make_baseline(BaselineKind::cosine, 0.5).step(zero, std::nullopt), Error);
  CHECK_THROWS_AS(make_baseline(BaselineKind::entropy, 0.5).step(zero, std::nullopt), Error);
  // Magnitude treats it as a tiny norm: novel.
  BaselineEngine magnitude = make_baseline(BaselineKind::magnitude, 0.5);
  CHECK(magnitude.step(zero, std::nullopt).route == Route::novel);
}

TEST_CASE("frozen baseline prediction assigns without allocating") {
  BaselineEngine engine = make_baseline(BaselineKind::euclidean, 0.5);
  const PredictionRecord rec = engine.predict_frozen({0.0f, 0.0f, 3.0f}, std::nullopt, 1);
  CHECK(rec.predicted.is_known());
  CHECK(engine.discovered_classes() == 0);
}
