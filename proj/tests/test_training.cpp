#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ina/bench.hpp"
#include "ina/training.hpp"
#include "oracles.hpp"

using namespace ina;

namespace {

using Cell = std::pair<std::pair<FeatureId, ClassId>, std::uint64_t>;

FrequencyMatrix identity_counts(std::size_t n) {
  std::vector<Cell> cells;
  for (FeatureId i = 0; i < n; ++i) cells.push_back({{i, i}, 1});
  return FrequencyMatrix::from_cells(n, n, cells);
}

TrainConfig e_only(EmergenceMode mode = EmergenceMode::none) {
  TrainConfig c;
  c.emergence.mode = mode;
  c.max_m_iters = 0;
  return c;
}

Dataset to_dataset(std::vector<LabeledExample> ex, std::size_t M, std::size_t W) {
  Dataset d;
  for (std::size_t i = 0; i < M; ++i) d.vocab.features.intern("f" + std::to_string(i));
  for (std::size_t j = 0; j < W; ++j) d.vocab.classes.intern("c" + std::to_string(j));
  d.examples = std::move(ex);
  return d;
}

/// Confusion counts by brute force, independent of evaluate().
struct OracleReport {
  std::vector<std::vector<std::uint64_t>> conf;
  double mean_f = 0;
};

OracleReport oracle_report(const InfoModel& m, const std::vector<LabeledExample>& ex) {
  const std::size_t W = m.num_classes();
  OracleReport r;
  r.conf.assign(W, std::vector<std::uint64_t>(W, 0));
  for (const auto& e : ex) {
    const auto s = oracle::dense_score(m, e.features);
    std::size_t best = 0;
    for (std::size_t j = 1; j < W; ++j)
      if (s[j] > s[best]) best = j;
    ++r.conf[e.label][best];
  }
  double sum = 0;
  int k = 0;
  for (std::size_t c = 0; c < W; ++c) {
    double tp = static_cast<double>(r.conf[c][c]), sup = 0, pred = 0;
    for (std::size_t o = 0; o < W; ++o) {
      sup += static_cast<double>(r.conf[c][o]);
      pred += static_cast<double>(r.conf[o][c]);
    }
    if (sup == 0) continue;
    const double p = pred ? tp / pred : 0, rc = tp / sup;
    sum += (p + rc) > 0 ? 2 * p * rc / (p + rc) : 0;
    ++k;
  }
  r.mean_f = sum / k;
  return r;
}

} // namespace

TEST(EStep, IdentityModeNone) {
  const auto m = e_step(identity_counts(4), e_only());
  for (FeatureId i = 0; i < 4; ++i) {
    ASSERT_EQ(m.row(i).size(), 1u);
    EXPECT_EQ(*m.weight(i, i), 2.0);
  }
  EXPECT_EQ(m.provenance.total_count, 4u);
}

TEST(EStep, IdentityDiagonalIsHartley) {
  for (std::size_t W : {2u, 3u, 16u, 100u, 256u}) {
    const auto m = e_step(identity_counts(W), e_only());
    for (FeatureId i = 0; i < W; ++i) EXPECT_NEAR(*m.weight(i, i), std::log2(static_cast<double>(W)), 1e-9);
  }
}

TEST(EStep, IdentityPerGroupIsDegenerate) {
  EStepDiagnostics d;
  const auto m = e_step(identity_counts(4), e_only(EmergenceMode::per_group), &d);
  for (FeatureId i = 0; i < 4; ++i) EXPECT_EQ(*m.weight(i, i), 0.0);
  EXPECT_EQ(d.degenerate_features, 4u);
  for (FeatureId i = 0; i < 4; ++i) EXPECT_TRUE(is_degenerate_group_feature(m, i));

  auto cfg = e_only(EmergenceMode::per_group);
  cfg.emergence.psi_floor = 0.25;
  const auto floored = e_step(identity_counts(4), cfg);
  EXPECT_EQ(*floored.weight(0, 0), 0.5);
}

TEST(EStep, ThreeByTwo) {
  const std::vector<Cell> cells{{{0, 0}, 2}, {{1, 0}, 1}, {{1, 1}, 1}, {{2, 1}, 2}};
  const auto m = e_step(FrequencyMatrix::from_cells(3, 2, cells), e_only());
  EXPECT_EQ(*m.weight(0, 0), 1.0);
  EXPECT_EQ(*m.weight(1, 0), 0.0);
  EXPECT_EQ(*m.weight(1, 1), 0.0);
  EXPECT_EQ(*m.weight(2, 1), 1.0);
  EXPECT_FALSE(m.weight(0, 1));
  EXPECT_FALSE(m.weight(2, 0));
  EXPECT_EQ(m.nonzeros(), 4u);
}

TEST(EStep, GlobalMode) {
  auto cfg = e_only(EmergenceMode::global);
  const auto m = e_step(identity_counts(16), cfg);
  // Z = 1, N = W: psi = log2 W / log2 N = 1.
  EXPECT_NEAR(*m.weight(3, 3), 4.0, 1e-12);

  cfg.emergence.complexity = 17;
  EXPECT_THROW(e_step(identity_counts(16), cfg), DomainError);
}

TEST(EStep, GlobalModeCountsClamp) {
  auto cfg = e_only(EmergenceMode::global);
  cfg.emergence.complexity = 4;
  EStepDiagnostics d;
  const auto m = e_step(identity_counts(4), cfg, &d);
  EXPECT_EQ(d.clamped_psi, 1u);
  EXPECT_EQ(*m.weight(0, 0), 2.0);
}

TEST(EStep, EmptyMatrixRejected) {
  EXPECT_THROW(e_step(FrequencyMatrix::from_cells(3, 2, {}), e_only()), ValidationError);
}

TEST(EStep, MatchesDirectFormulaOnRandomCounts) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const std::size_t M = 2 + rng() % 30, W = 2 + rng() % 6;
    const auto ex = oracle::random_examples(rng, 200, M, W, 5);
    const auto d = oracle::recount(ex, M, W);
    for (auto mode : {EmergenceMode::none, EmergenceMode::per_group}) {
      const auto m = e_step(ingest(ex, M, W), e_only(mode));
      for (FeatureId i = 0; i < M; ++i) {
        std::uint64_t wg = 0;
        for (ClassId j = 0; j < W; ++j) wg += d.n[i][j] > 0;
        double psi = 1.0;
        if (mode == EmergenceMode::per_group) {
          const double lg = wg > std::log2(2.0 * static_cast<double>(d.total))
                                ? 1.0
                                : std::log2(std::exp2(static_cast<double>(wg)) - 1.0) /
                                      std::log2(static_cast<double>(d.row[i]));
          psi = wg <= 1 ? 0.0 : std::clamp(lg, 0.0, 1.0);
        }
        for (ClassId j = 0; j < W; ++j) {
          const auto w = m.weight(i, j);
          if (d.n[i][j] == 0) {
            EXPECT_FALSE(w);
            continue;
          }
          ASSERT_TRUE(w);
          const double want = psi * std::log2(static_cast<double>(d.n[i][j]) * static_cast<double>(d.total) /
                                              (static_cast<double>(d.row[i]) * static_cast<double>(d.col[j])));
          EXPECT_NEAR(*w, want, 1e-9);
        }
      }
    }
  }
}

TEST(EStep, SmoothingIsDenseAndBounded) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const std::size_t M = 2 + rng() % 20, W = 2 + rng() % 6;
    const auto ex = oracle::random_examples(rng, 50, M, W, 4);
    auto cfg = e_only();
    cfg.smoothing = 1.0;
    const auto freq = ingest(ex, M, W);
    const auto m = e_step(freq, cfg);
    EXPECT_EQ(m.nonzeros(), M * W);
    const double bound = std::log2(static_cast<double>(freq.total()) + static_cast<double>(M * W));
    for (FeatureId i = 0; i < M; ++i)
      for (const auto& e : m.row(i)) {
        EXPECT_TRUE(std::isfinite(e.weight));
        EXPECT_LE(std::abs(e.weight), bound);
      }
  }
}

TEST(EStep, BiasConfig) {
  auto cfg = e_only();
  cfg.bias = {0.5};
  EXPECT_EQ(e_step(identity_counts(3), cfg).bias(), (std::vector<double>{0.5, 0.5, 0.5}));
  cfg.bias = {1, 2, 3};
  EXPECT_EQ(e_step(identity_counts(3), cfg).bias(), (std::vector<double>{1, 2, 3}));
  cfg.bias = {1, 2};
  EXPECT_THROW(e_step(identity_counts(3), cfg), ValidationError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.beta = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.beta = 1.5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.margin = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.smoothing = -1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  EXPECT_NO_THROW(c.validate());
}

TEST(FBeta, Values) {
  EXPECT_NEAR(f_beta(0.8, 0.8, 1.0), 0.8, 1e-15);
  EXPECT_NEAR(f_beta(0.8, 0.8, 0.3), 0.8, 1e-15);
  EXPECT_EQ(f_beta(1.0, 0.0, 1.0), 0.0);
  EXPECT_EQ(f_beta(0.0, 0.0, 1.0), 0.0);
  EXPECT_NEAR(f_beta(0.5, 1.0, 1.0), 2.0 / 3.0, 1e-15);
}

TEST(FBeta, Duality) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(1e-3, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const double p = u(rng), r = u(rng), b = u(rng);
    EXPECT_NEAR(f_beta(p, r, b), f_beta(r, p, 1.0 / b), 1e-12);
  }
}

TEST(Evaluate, PerfectIdentity) {
  const std::vector<LabeledExample> ex{{{0}, 0}, {{1}, 1}, {{2}, 2}};
  const auto m = e_step(ingest(ex, 3, 3), e_only());
  const auto r = evaluate(m, ex);
  EXPECT_EQ(r.mean_f, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  for (const auto& c : r.per_class) {
    EXPECT_EQ(c.precision, 1.0);
    EXPECT_EQ(c.recall, 1.0);
  }
}

TEST(Evaluate, ConstantPredictor) {
  InfoModel m(1, 2);
  m.set_bias({1.0, 0.0});
  const std::vector<LabeledExample> ex{{{0}, 0}, {{0}, 1}, {{0}, 0}, {{0}, 1}};
  const auto r = evaluate(m, ex);
  EXPECT_NEAR(r.per_class[0].f, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.per_class[1].f, 0.0);
  EXPECT_NEAR(r.mean_f, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(r.observed_classes, 2u);
}

TEST(Evaluate, UnobservedClassesExcludedFromMean) {
  InfoModel m(1, 3);
  const std::vector<LabeledExample> ex{{{0}, 0}};
  const auto r = evaluate(m, ex);
  EXPECT_EQ(r.observed_classes, 1u);
  EXPECT_EQ(r.mean_f, 1.0);
}

TEST(Evaluate, Errors) {
  InfoModel m(1, 2);
  EXPECT_THROW(evaluate(m, std::vector<LabeledExample>{}), ValidationError);
  EXPECT_THROW(evaluate(m, std::vector<LabeledExample>{{{0}, 2}}), ValidationError);
}

TEST(Evaluate, MatchesConfusionOracle) {
  std::mt19937_64 rng(55);
  for (int t = 0; t < 10; ++t) {
    const std::size_t M = 30, W = 5;
    const auto train = oracle::random_examples(rng, 300, M, W, 6);
    const auto test = oracle::random_examples(rng, 200, M, W, 6);
    const auto m = e_step(ingest(train, M, W), e_only());
    const auto r = evaluate(m, test, 1.0, 3);
    const auto o = oracle_report(m, test);
    std::uint64_t sup = 0;
    for (ClassId a = 0; a < W; ++a) {
      sup += r.per_class[a].support;
      for (ClassId b = 0; b < W; ++b) {
        const auto it = r.confusion.find({a, b});
        EXPECT_EQ(it == r.confusion.end() ? 0u : it->second, o.conf[a][b]);
      }
      EXPECT_GE(r.per_class[a].precision, 0.0);
      EXPECT_LE(r.per_class[a].precision, 1.0);
    }
    EXPECT_EQ(sup, test.size());
    EXPECT_NEAR(r.mean_f, o.mean_f, 1e-12);
  }
}

TEST(Evaluate, DeterministicReportBytes) {
  std::mt19937_64 rng(5);
  const auto ex = oracle::random_examples(rng, 400, 40, 6, 8);
  const auto m = e_step(ingest(ex, 40, 6), e_only());
  const auto a = evaluate(m, ex, 1.0, 1).to_json().dump();
  const auto b = evaluate(m, ex, 1.0, 4).to_json().dump();
  EXPECT_EQ(a, b);
}

TEST(MStep, PerfectModelUnchanged) {
  const std::vector<LabeledExample> ex{{{0}, 0}, {{1}, 1}, {{2}, 2}};
  const auto m = e_step(ingest(ex, 3, 3), e_only());
  TrainConfig cfg;
  const auto r = m_step(m, ex, cfg);
  EXPECT_EQ(r.model, m);
  EXPECT_EQ(r.accepted(), 0u);
  ASSERT_EQ(r.iterations.size(), 1u);
  EXPECT_EQ(r.iterations[0].corrections, 0u);
}

TEST(MStep, SingleCorrectionHitsMargin) {
  InfoModel m(2, 2);
  m.set_weight(0, 0, 1.0);
  m.set_weight(1, 0, 0.5);
  m.set_weight(1, 1, 0.25);
  const std::vector<LabeledExample> ex{{{0, 1}, 1}};
  const auto before = score(m, ex[0].features);
  ASSERT_EQ(argmax(before), 0u);

  InfoModel c = m;
  EXPECT_EQ(correct_misclassified(c, ex, {false}, 0.1), 1u);
  const auto after = score(c, ex[0].features);
  EXPECT_NEAR(after[1], before[0] + 0.1, 1e-12);
  EXPECT_EQ(after[0], before[0]);
  EXPECT_EQ(predict(c, ex[0].features).cls, 1u);
  EXPECT_NEAR(*c.weight(0, 1), (1.5 - 0.25 + 0.1) / 2, 1e-15);

  TrainConfig cfg;
  const auto r = m_step(m, ex, cfg);
  EXPECT_EQ(r.accepted(), 1u);
  EXPECT_EQ(r.after.mean_f, 1.0);
}

TEST(MStep, ConflictOnlyDatasetUnchanged) {
  const std::vector<LabeledExample> ex{{{0, 1}, 0}, {{0, 1}, 1}, {{2}, 0}, {{2}, 1}, {{2}, 1}};
  const auto m = e_step(ingest(ex, 3, 2), e_only());
  const auto r = m_step(m, ex, TrainConfig{});
  EXPECT_EQ(r.model, m);
  ASSERT_FALSE(r.iterations.empty());
  EXPECT_EQ(r.iterations[0].corrections, 0u);
  EXPECT_EQ(r.iterations[0].excluded_conflicts, 5u);
}

TEST(MStep, RejectedRoundReturnsOriginal) {
  std::mt19937_64 rng(8);
  const auto ex = oracle::random_examples(rng, 200, 20, 4, 4);
  const auto m = e_step(ingest(ex, 20, 4), e_only());
  TrainConfig cfg;
  cfg.tolerance = 10.0;
  const auto r = m_step(m, ex, cfg);
  EXPECT_EQ(r.model, m);
  EXPECT_EQ(r.accepted(), 0u);
  EXPECT_EQ(r.after.mean_f, r.before.mean_f);
}

TEST(MStep, AcceptedRoundsStrictlyIncrease) {
  std::size_t accepted = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticSpec spec;
    spec.examples = 600;
    spec.features = 120;
    spec.classes = 6;
    spec.active = 10;
    spec.prototype = 15;
    spec.feature_noise = 0.7;
    spec.seed = seed;
    const auto data = make_synthetic(spec);
    const auto base = fit(data, e_only());
    TrainConfig cfg;
    cfg.max_m_iters = 10;
    const auto em = fit(data, cfg);
    double prev = base.report.mean_f;
    for (const auto& it : em.iterations) {
      EXPECT_EQ(it.ef_before, prev);
      if (!it.accepted) continue;
      ++accepted;
      EXPECT_GT(it.ef_after, prev) << "seed " << seed;
      prev = it.ef_after;
    }
    EXPECT_EQ(em.report.mean_f, prev);
    EXPECT_GE(em.report.mean_f, base.report.mean_f) << "seed " << seed;
  }
  EXPECT_GT(accepted, 0u);
}

TEST(MStep, LogLineFields) {
  MIteration it{3, 0.5, 0.75, 12, 4, true};
  EXPECT_EQ(it.to_log_line(),
            R"({"iter":3,"E_F_before":0.5,"E_F_after":0.75,"corrections":12,"excluded_conflicts":4,"accepted":true})");
}

TEST(MStep, UntouchedFeaturesKeepWeights) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10; ++t) {
    const std::size_t M = 40, W = 4;
    const auto ex = oracle::random_examples(rng, 150, M, W, 3);
    const auto m = e_step(ingest(ex, M, W), e_only());
    std::vector<bool> excluded(ex.size(), false);
    for (const auto& g : find_conflicts(ex))
      for (auto k : g.indices) excluded[k] = true;

    // Dense replay of the corrective pass; corrections accumulate in order.
    std::vector<std::vector<double>> dense(M, std::vector<double>(W, 0.0));
    for (FeatureId i = 0; i < M; ++i)
      for (const auto& e : m.row(i)) dense[i][e.cls] = e.weight;
    std::vector<bool> touched(M, false);
    for (std::size_t k = 0; k < ex.size(); ++k) {
      if (excluded[k]) continue;
      std::vector<double> s(W, 0.0);
      for (auto f : ex[k].features)
        for (std::size_t j = 0; j < W; ++j) s[j] += dense[f][j];
      const auto pred = static_cast<ClassId>(std::max_element(s.begin(), s.end()) - s.begin());
      if (pred == ex[k].label) continue;
      const double delta = (s[pred] - s[ex[k].label] + 0.1) / static_cast<double>(ex[k].features.size());
      for (auto f : ex[k].features) {
        dense[f][ex[k].label] += delta;
        touched[f] = true;
      }
    }

    InfoModel c = m;
    correct_misclassified(c, ex, excluded, 0.1);
    for (FeatureId i = 0; i < M; ++i) {
      for (ClassId j = 0; j < W; ++j) EXPECT_NEAR(c.weight(i, j).value_or(0.0), dense[i][j], 1e-9);
      if (touched[i]) continue;
      const auto a = m.row(i), b = c.row(i);
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << "feature " << i;
    }
  }
}

TEST(Fit, OneToOneReachesPerfectF) {
  // One signature feature per class plus features present in every example,
  // which carry zero information.
  std::vector<LabeledExample> ex;
  std::mt19937_64 rng(3);
  const std::size_t W = 12, common = 3, M = W + common;
  for (int k = 0; k < 600; ++k) {
    const auto c = static_cast<ClassId>(rng() % W);
    std::vector<FeatureId> f{c};
    for (FeatureId n = 0; n < common; ++n) f.push_back(static_cast<FeatureId>(W + n));
    ex.emplace_back(std::move(f), c);
  }
  const auto data = to_dataset(ex, M, W);
  const auto e = fit(data, e_only());
  EXPECT_EQ(e.report.mean_f, 1.0);
  for (FeatureId n = 0; n < common; ++n)
    for (const auto& w : e.model.row(static_cast<FeatureId>(W + n))) EXPECT_NEAR(w.weight, 0.0, 1e-12);
  TrainConfig cfg;
  const auto em = fit(data, cfg);
  EXPECT_EQ(em.model, e.model);
}

TEST(Fit, EmptyDatasetRejected) {
  Dataset d;
  EXPECT_THROW(fit(d, TrainConfig{}), ValidationError);
}

TEST(Fit, ThreadCountDoesNotChangeModel) {
  SyntheticSpec spec;
  spec.examples = 2000;
  spec.features = 200;
  spec.seed = 4;
  const auto data = make_synthetic(spec);
  auto cfg = e_only(EmergenceMode::per_group);
  const auto one = fit(data, cfg);
  cfg.threads = 4;
  const auto four = fit(data, cfg);
  EXPECT_EQ(one.model, four.model);
  EXPECT_EQ(one.report.to_json().dump(), four.report.to_json().dump());
}
