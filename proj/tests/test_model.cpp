#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ina/model.hpp"
#include "oracles.hpp"

using namespace ina;

namespace {

InfoModel random_model(std::mt19937_64& rng, std::size_t M, std::size_t W, double density) {
  InfoModel m(M, W);
  std::uniform_real_distribution<double> u(-5.0, 5.0), coin(0.0, 1.0);
  for (FeatureId i = 0; i < M; ++i)
    for (ClassId j = 0; j < W; ++j)
      if (coin(rng) < density) m.set_weight(i, j, u(rng));
  std::vector<double> b(W);
  for (auto& v : b) v = u(rng);
  m.set_bias(b);
  return m;
}

} // namespace

TEST(Score, SmallExample) {
  InfoModel m(2, 2);
  m.set_weight(0, 0, 1.5);
  m.set_weight(0, 1, -0.5);
  m.set_weight(1, 1, 2.0);
  EXPECT_EQ(score(m, std::vector<FeatureId>{0, 1}), (std::vector<double>{1.5, 1.5}));
  const auto p = predict(m, std::vector<FeatureId>{0, 1});
  EXPECT_EQ(p.cls, 0u);
  EXPECT_EQ(p.score, 1.5);

  m.set_bias({0.0, 0.25});
  EXPECT_EQ(predict(m, std::vector<FeatureId>{0, 1}).cls, 1u);
}

TEST(Score, EmptyAndUnknownFeaturesGiveBias) {
  InfoModel m(3, 4);
  m.set_weight(1, 2, 9.0);
  m.set_bias({0.1, 0.7, 0.3, 0.7});
  EXPECT_EQ(score(m, std::vector<FeatureId>{}), m.bias());
  EXPECT_EQ(score(m, std::vector<FeatureId>{17, 400}), m.bias());
  EXPECT_EQ(predict(m, std::vector<FeatureId>{}).cls, 1u);
}

TEST(Score, MatchesDenseProduct) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t M = 1 + rng() % 40, W = 1 + rng() % 9;
    const auto m = random_model(rng, M, W, 0.3);
    std::vector<FeatureId> f;
    for (std::size_t k = 0; k < M; ++k)
      if (rng() % 3 == 0) f.push_back(static_cast<FeatureId>(k));
    const auto got = score(m, f);
    const auto want = oracle::dense_score(m, f);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t j = 0; j < W; ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  }
}

TEST(Score, AdditiveOverDisjointSets) {
  std::mt19937_64 rng(8);
  const auto m = random_model(rng, 30, 5, 0.4);
  for (int t = 0; t < 100; ++t) {
    std::vector<FeatureId> a, b, ab;
    for (FeatureId i = 0; i < 30; ++i) {
      const auto r = rng() % 3;
      if (r == 0) a.push_back(i);
      if (r == 1) b.push_back(i);
      if (r != 2) ab.push_back(i);
    }
    const auto sa = score(m, a), sb = score(m, b), sab = score(m, ab);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(sab[j], sa[j] + sb[j] - m.bias()[j], 1e-12);
  }
}

TEST(Score, UnseenFeatureDoesNotChangeScores) {
  std::mt19937_64 rng(13);
  const auto m = random_model(rng, 10, 4, 0.5);
  std::vector<FeatureId> f{1, 4, 7};
  auto g = f;
  g.push_back(10);
  g.push_back(99999);
  EXPECT_EQ(score(m, f), score(m, g));
}

TEST(Predict, TiesBreakToLowestId) {
  InfoModel m(1, 4);
  m.set_bias({1.0, 3.0, 3.0, 3.0});
  const auto p = predict(m, std::vector<FeatureId>{}, 4);
  EXPECT_EQ(p.cls, 1u);
  ASSERT_EQ(p.ranking.size(), 4u);
  EXPECT_EQ(p.ranking[0].cls, 1u);
  EXPECT_EQ(p.ranking[1].cls, 2u);
  EXPECT_EQ(p.ranking[2].cls, 3u);
  EXPECT_EQ(p.ranking[3].cls, 0u);
  EXPECT_THROW(predict(m, std::vector<FeatureId>{}, 0), ValidationError);
  EXPECT_EQ(predict(m, std::vector<FeatureId>{}, 10).ranking.size(), 4u);
}

TEST(Predict, TopKIsSortedPrefix) {
  std::mt19937_64 rng(4);
  const auto m = random_model(rng, 20, 12, 0.5);
  for (int t = 0; t < 50; ++t) {
    std::vector<FeatureId> f;
    for (FeatureId i = 0; i < 20; ++i)
      if (rng() % 2) f.push_back(i);
    const auto full = predict(m, f, 12).ranking;
    for (std::size_t k = 1; k < full.size(); ++k) EXPECT_GE(full[k - 1].score, full[k].score);
    const auto top3 = predict(m, f, 3).ranking;
    EXPECT_EQ(top3, std::vector<RankedClass>(full.begin(), full.begin() + 3));
  }
}

TEST(Activation, SoftmaxPreservesArgmax) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(1 + rng() % 10);
    for (auto& v : s) v = u(rng);
    const auto p = activate(Activation::softmax, s);
    double sum = 0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(argmax(p), argmax(s));
  }
  const std::vector<double> two{1.0, 0.0};
  const auto p = activate(Activation::softmax, two);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(activate(Activation::identity, two), two);
}

TEST(InfoModel, WeightEditing) {
  InfoModel m(3, 3);
  EXPECT_FALSE(m.weight(0, 0));
  m.add_weight(0, 2, 0.5);
  m.add_weight(0, 0, 1.0);
  m.add_weight(0, 2, 0.25);
  ASSERT_EQ(m.row(0).size(), 2u);
  EXPECT_EQ(m.row(0)[0].cls, 0u);
  EXPECT_EQ(*m.weight(0, 2), 0.75);
  EXPECT_EQ(m.nonzeros(), 2u);
  EXPECT_THROW(m.set_weight(0, 3, 1.0), ValidationError);
  EXPECT_THROW(m.set_row(1, {{2, 1.0}, {1, 1.0}}), ValidationError);
  EXPECT_THROW(m.set_bias({1.0}), ValidationError);
  EXPECT_THROW(m.set_bias({1.0, NAN, 0.0}), ValidationError);
}

TEST(Inspect, ListsTopWeightsAndDegenerateFeatures) {
  InfoModel m(3, 2);
  m.vocab.features = NameTable::from_names({"alpha", "beta", "gamma"});
  m.vocab.classes = NameTable::from_names({"x", "y"});
  m.emergence.mode = EmergenceMode::per_group;
  m.set_weight(0, 0, 0.0);
  m.set_weight(1, 0, 1.25);
  m.set_weight(1, 1, -0.5);
  m.set_weight(2, 1, 2.0);
  std::ostringstream out;
  write_inspect(out, m, 1);
  const auto s = out.str();
  EXPECT_NE(s.find("class\tx\tbias\t0.000000\n  beta\t1.250000\n"), std::string::npos) << s;
  EXPECT_NE(s.find("class\ty\tbias\t0.000000\n  gamma\t2.000000\n"), std::string::npos) << s;
  EXPECT_NE(s.find("warning\tpsi_g=0\talpha"), std::string::npos) << s;
  EXPECT_EQ(s.find("warning\tpsi_g=0\tbeta"), std::string::npos) << s;
  EXPECT_NE(s.find("warning\tdegenerate_features\t1\n"), std::string::npos) << s;

  m.emergence.mode = EmergenceMode::none;
  std::ostringstream quiet;
  write_inspect(quiet, m, 5);
  EXPECT_EQ(quiet.str().find("warning"), std::string::npos);
}
