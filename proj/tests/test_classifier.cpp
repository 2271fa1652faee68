#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ttd/classifier.hpp"
#include "ttd/engine.hpp"

using namespace ttd;

namespace {

PrototypeBank bank(std::initializer_list<Prototype> prototypes) {
  PrototypeBank result;
  for (const Prototype& p : prototypes) result.emplace(p.label, p);
  return result;
}

// One engine with two orthogonal known classes on well-separated norms.
TtdEngine make_engine(EngineParams params = {}) {
  DirectionBasis basis = make_directions(8, 8, 42, BasisMode::random);
  TtdEngine engine(params, std::move(basis));
  std::vector<std::pair<std::int32_t, FeatureVector>> seeds;
  std::mt19937_64 rng(5);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 10; ++i) {
      FeatureVector f(8, 0.0f);
      for (float& x : f) x = noise(rng);
      f[c] += 4.0f;
      seeds.emplace_back(c, f);
    }
  engine.seed_known(seeds);
  return engine;
}

}  // namespace

TEST_CASE("prototype_predict follows cosine similarity") {
  const auto prototypes = bank({{Label::known(0), {1.0, 1.0}, 0},
                                {Label::known(1), {0.0, 1.0}, 0}});

  SECTION("exact prototype match gives u = 1") {
    const auto [label, u] = prototype_predict(prototypes, {0.0f, 2.0f});
    CHECK(label == Label::known(1));
    CHECK(u == Catch::Approx(1.0));
  }

  SECTION("worked example: f=(1,0) vs diag and e2") {
    const auto [label, u] = prototype_predict(prototypes, {1.0f, 0.0f});
    CHECK(label == Label::known(0));
    CHECK(u == Catch::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
    // Direct dot-product oracle.
    const double oracle = (1.0 * 1.0 + 1.0 * 0.0) / (std::sqrt(2.0) * 1.0);
    CHECK(u == Catch::Approx(oracle).epsilon(1e-12));
  }

  SECTION("ties break to the lower known id") {
    const auto tied = bank({{Label::known(0), {1.0, 0.0}, 0},
                            {Label::known(1), {0.0, 1.0}, 0}});
    const auto [label, u] = prototype_predict(tied, {1.0f, 1.0f});
    CHECK(label == Label::known(0));
    CHECK(u == Catch::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  }

  SECTION("known beats seen on an exact tie") {
    const auto tied = bank({{Label::seen(1), {1.0, 0.0}, 0},
                            {Label::known(3), {1.0, 0.0}, 0}});
    const auto [label, u] = prototype_predict(tied, {2.0f, 0.0f});
    CHECK(label == Label::known(3));
  }

  SECTION("zero-norm features are rejected") {
    CHECK_THROWS_AS(prototype_predict(prototypes, {0.0f, 0.0f}), Error);
  }

  SECTION("argmax and u are scale invariant") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      const FeatureVector f = oracles::random_feature(2, rng, 0.1, 2.0);
      FeatureVector scaled(f);
      for (float& x : scaled) x *= 37.5f;
      const auto a = prototype_predict(prototypes, f);
      const auto b = prototype_predict(prototypes, scaled);
      CHECK(a.first == b.first);
      CHECK(a.second == Catch::Approx(b.second).epsilon(1e-6));
    }
  }
}

TEST_CASE("ema_update follows the recurrence") {
  Prototype p{Label::seen(1), {1.0, 0.0}, 0};

  SECTION("alpha = 1 keeps the vector") {
    ema_update(p, {0.0f, 1.0f}, 1.0);
    CHECK(p.vector == std::vector<double>{1.0, 0.0});
    CHECK(p.update_count == 1);
  }

  SECTION("alpha = 0 adopts the feature") {
    ema_update(p, {0.0f, 1.0f}, 0.0);
    CHECK(p.vector == std::vector<double>{0.0, 1.0});
  }

  SECTION("one step of alpha = 0.9") {
    ema_update(p, {0.0f, 1.0f}, 0.9);
    CHECK(p.vector[0] == Catch::Approx(0.9));
    CHECK(p.vector[1] == Catch::Approx(0.1));
  }

  SECTION("known prototypes are frozen") {
    Prototype frozen{Label::known(0), {1.0, 0.0}, 0};
    CHECK_THROWS_AS(ema_update(frozen, {0.0f, 1.0f}, 0.9), Error);
  }

  SECTION("closed form after T updates") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> alphas(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const double alpha = alphas(rng);
      Prototype proto{Label::seen(1), {0.5, -2.0, 1.0}, 0};
      const std::vector<double> mu0 = proto.vector;
      std::vector<FeatureVector> inputs;
      for (int t = 0; t < 20; ++t) inputs.push_back(oracles::random_feature(3, rng, -2.0, 2.0));
      for (const auto& f : inputs) ema_update(proto, f, alpha);

      const int T = static_cast<int>(inputs.size());
      for (std::size_t i = 0; i < mu0.size(); ++i) {
        double expected = std::pow(alpha, T) * mu0[i];
        for (int t = 1; t <= T; ++t)
          expected += (1.0 - alpha) * std::pow(alpha, T - t) * inputs[t - 1][i];
        CHECK(proto.vector[i] ==
              Catch::Approx(expected).epsilon(1e-6).margin(1e-9));
      }
    }
  }
}

TEST_CASE("vote_nearest majority and tie rules") {
  std::vector<MemoryEntry> entries;
  auto add = [&](float x, float y, Label label) {
    entries.push_back({HashKey{0, {1}}, {x, y}, label, entries.size()});
  };

  SECTION("strict majority wins") {
    add(0.0f, 0.1f, Label::seen(1));
    add(0.0f, 0.2f, Label::seen(1));
    add(0.0f, 0.3f, Label::known(3));
    std::vector<const MemoryEntry*> ptrs{&entries[0], &entries[1], &entries[2]};
    const LshDecision vote = vote_nearest(ptrs, {0.0f, 0.0f}, 3);
    REQUIRE(vote.has_value());
    CHECK(vote->label == Label::seen(1));
    CHECK(vote->support == 2);
  }

  SECTION("count ties break on the smaller average distance") {
    // seen(5) is nearer on average; label order alone would pick seen(2).
    add(0.0f, 0.1f, Label::seen(5));
    add(0.0f, 0.2f, Label::seen(2));
    add(0.0f, 0.2f, Label::seen(2));
    add(0.0f, 0.1f, Label::seen(5));
    std::vector<const MemoryEntry*> ptrs;
    for (const auto& entry : entries) ptrs.push_back(&entry);
    const LshDecision vote = vote_nearest(ptrs, {0.0f, 0.0f}, 4);
    REQUIRE(vote.has_value());
    CHECK(vote->label == Label::seen(5));
    CHECK(vote->mean_distance == Catch::Approx(0.1));
  }

  SECTION("empty candidate set is a novel outcome") {
    CHECK_FALSE(vote_nearest({}, {0.0f, 0.0f}, 3).has_value());
  }

  SECTION("only the k nearest vote") {
    add(0.0f, 0.1f, Label::seen(1));
    add(0.0f, 0.2f, Label::seen(2));
    add(0.0f, 5.0f, Label::seen(2));
    add(0.0f, 6.0f, Label::seen(2));
    std::vector<const MemoryEntry*> ptrs;
    for (const auto& entry : entries) ptrs.push_back(&entry);
    const LshDecision vote = vote_nearest(ptrs, {0.0f, 0.0f}, 2);
    REQUIRE(vote.has_value());
    // Within the top-2, it is one vote each; seen(1) voter is nearer.
    CHECK(vote->label == Label::seen(1));
  }
}

TEST_CASE("allocation is sequential and capped") {
  SeenAllocator allocator(/*cap=*/2, /*oracle=*/false);
  const auto first = allocator.allocate(std::nullopt);
  REQUIRE(first.has_value());
  CHECK(first->label == Label::seen(1));
  CHECK(first->fresh);
  const auto second = allocator.allocate(std::nullopt);
  REQUIRE(second.has_value());
  CHECK(second->label == Label::seen(2));
  CHECK_FALSE(allocator.allocate(std::nullopt).has_value());
}

TEST_CASE("oracle allocation reuses ids per true class") {
  SeenAllocator allocator(-1, /*oracle=*/true);
  const auto a = allocator.allocate(7);
  const auto b = allocator.allocate(9);
  const auto c = allocator.allocate(7);
  REQUIRE((a && b && c));
  CHECK(a->label == Label::seen(1));
  CHECK(b->label == Label::seen(2));
  CHECK(c->label == a->label);
  CHECK_FALSE(c->fresh);
  CHECK(allocator.allocated() == 2);
}

TEST_CASE("engine step routes and mutations") {
  TtdEngine engine = make_engine();

  SECTION("confident known samples leave state untouched") {
    const std::uint64_t before = engine.content_hash_state();
    FeatureVector f(8, 0.0f);
    f[0] = 4.0f;
    const PredictionRecord rec = engine.step(f, 0);
    CHECK(rec.predicted == Label::known(0));
    CHECK(rec.route == Route::prototype);
    CHECK(rec.confidence > 0.9);
    CHECK(engine.content_hash_state() == before);
  }

  SECTION("a low-confidence sample in an empty bucket founds a class") {
    FeatureVector f(8, 0.0f);
    f[5] = -3.0f;
    const PredictionRecord rec = engine.step(f, std::nullopt);
    CHECK(rec.predicted == Label::seen(1));
    CHECK(rec.route == Route::novel);
    CHECK(engine.prototypes().count(Label::seen(1)) == 1);
    CHECK(engine.memory().buffer_size(Label::seen(1)) == 1);

    // A second sample nearby lands on the same class, whatever the route.
    FeatureVector g(f);
    g[4] = 0.2f;
    const PredictionRecord rec2 = engine.step(g, std::nullopt);
    CHECK(rec2.predicted == Label::seen(1));
    CHECK(rec2.route != Route::novel);
  }

  SECTION("seen ids increase strictly by one") {
    std::vector<std::int32_t> allocated;
    for (int axis = 2; axis < 8; ++axis) {
      FeatureVector f(8, 0.0f);
      f[axis] = -2.0f - axis;  // distinct directions and norms
      const PredictionRecord rec = engine.step(f, std::nullopt);
      if (rec.route == Route::novel) allocated.push_back(rec.predicted.id());
    }
    REQUIRE(allocated.size() >= 2);
    for (std::size_t i = 0; i < allocated.size(); ++i)
      CHECK(allocated[i] == static_cast<std::int32_t>(i) + 1);
  }

  SECTION("cap exhaustion falls back to the best available label") {
    EngineParams params;
    params.max_discoverable = 1;
    TtdEngine capped = make_engine(params);
    FeatureVector f(8, 0.0f);
    f[5] = -3.0f;
    CHECK(capped.step(f, std::nullopt).route == Route::novel);

    FeatureVector g(8, 0.0f);
    g[6] = 2.5f;
    g[7] = -2.5f;
    const PredictionRecord rec = capped.step(g, std::nullopt);
    CHECK(rec.route == Route::capped_fallback);
  }

  SECTION("known-state hash is constant across a busy stream") {
    std::mt19937_64 rng(31);
    const std::uint64_t known_hash = engine.content_hash_known();
    for (int i = 0; i < 2000; ++i) {
      FeatureVector f = oracles::random_feature(8, rng, -1.5, 1.5);
      engine.step(f, std::nullopt);
    }
    CHECK(engine.content_hash_known() == known_hash);
  }

  SECTION("vote containment: lsh_vote labels come from the joint bucket") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 1500; ++i) {
      FeatureVector f = oracles::random_feature(8, rng, -1.0, 1.0);
      const HashKey key = hash_feature(engine.basis(), f);
      const auto members = engine.memory().joint_bucket(
          key, engine.params().neighbor_buckets, &f, engine.params().band_restricted);
      const PredictionRecord rec = engine.step(f, std::nullopt);
      if (rec.route == Route::lsh_vote) {
        bool present = false;
        for (const MemoryEntry* member : members) present |= member->label == rec.predicted;
        CHECK(present);
      }
    }
  }
}

TEST_CASE("oracle mode keys discoveries to the true class") {
  EngineParams params;
  params.oracle_labels = true;
  TtdEngine engine = make_engine(params);

  FeatureVector f(8, 0.0f);
  f[5] = -3.0f;
  const PredictionRecord first = engine.step(f, 70);
  CHECK(first.route == Route::novel);

  // A far-away sample of the same true class reuses the id instead of
  // founding another class.
  FeatureVector g(8, 0.0f);
  g[6] = 2.0f;
  g[7] = -1.0f;
  const PredictionRecord second = engine.step(g, 70);
  CHECK(second.predicted == first.predicted);
  CHECK(second.route != Route::novel);
  CHECK(engine.discovered_classes() == 1);
}

TEST_CASE("frozen prediction never mutates") {
  TtdEngine engine = make_engine();
  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) engine.step(oracles::random_feature(8, rng, -2.0, 2.0), std::nullopt);

  const std::uint64_t before = engine.content_hash_state();
  for (int i = 0; i < 500; ++i) {
    const FeatureVector f = oracles::random_feature(8, rng, -2.0, 2.0);
    const PredictionRecord rec = engine.predict_frozen(f, std::nullopt, i);
    CHECK((rec.route == Route::prototype || rec.route == Route::lsh_vote));
  }
  CHECK(engine.content_hash_state() == before);
}
