// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "echopick/csr.hpp"
#include "echopick/neighbors.hpp"
#include "testutil.hpp"

using namespace echopick;

namespace {

// Full-pairwise reference implementation, written against the contract
// rather than the library internals: standardize channels over the valid
// echoes, rank all other echoes by squared characteristic distance with flat
// index tie-breaks, then Z-score against the neighbor scores.
Grid3<double> oracle_penalty(const CharacteristicsMap& map, const Grid3<double>& scores,
                             const CsrConfig& cfg) {
  Grid3<double> out(map.valid.height, map.valid.width, map.valid.echoes, 0.0);
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < map.valid.values.size(); ++i)
    if (map.valid.values[i]) valid.push_back(i);
  if (valid.size() < static_cast<std::size_t>(cfg.k_csr) + 1) return out;

  const std::size_t n = valid.size();
  std::vector<double> I(n), S(n);
  for (std::size_t i = 0; i < n; ++i) {
    I[i] = map.intensity_m2.values[valid[i]];
    S[i] = map.sparsity.values[valid[i]];
  }
  auto standardize = [n](std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / double(n));
    for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
  };
  standardize(I);
  standardize(S);

  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<double, std::size_t>> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      const double di = I[j] - I[q];
      const double ds = S[j] - S[q];
      others.push_back({di * di + ds * ds, valid[j]});
    }
    std::sort(others.begin(), others.end());
    double mean = 0.0;
    for (int j = 0; j < cfg.k_csr; ++j) mean += scores.values[others[j].second];
    mean /= double(cfg.k_csr);
    double var = 0.0;
    for (int j = 0; j < cfg.k_csr; ++j) {
      const double d = scores.values[others[j].second] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / double(cfg.k_csr));
    const double xi = std::fabs(scores.values[valid[q]] - mean) / (sd + cfg.eps);
    out.values[valid[q]] = std::min(xi, cfg.clamp);
  }
  return out;
}

CharacteristicsMap map_for(const MultiEchoOrderedCloud& cloud) {
  EncoderConfig enc;
  const NeighborField field = gather_neighbors(cloud, enc);
  return characteristics_map(cloud, nearest_distance(cloud, field, enc));
}

Grid3<double> random_scores(const MultiEchoOrderedCloud& cloud, std::uint64_t seed) {
  Rng rng(seed);
  Grid3<double> scores(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
  for (double& v : scores.values) v = rng.uniform(-3.0, 3.0);
  return scores;
}

}  // namespace

TEST(Characteristics, ArithmeticExamples) {
  // intensity 0.5 at range 10 -> 50; nn distance 0.2 at range 4 -> 0.05.
  CloudBuilder builder(1, 2, 1);
  PointRecord a;
  a.x = 10.0f;
  a.intensity_raw = 0.5f;
  a.valid = true;
  builder.set_record(0, 0, 0, a);
  PointRecord b;
  b.x = 4.0f;
  b.intensity_raw = 0.25f;
  b.valid = true;
  builder.set_record(0, 1, 0, b);
  const MultiEchoOrderedCloud cloud = builder.build();
  Grid3<double> nn(1, 2, 1, 0.0);
  nn.at(0, 0, 0) = 1.0;
  nn.at(0, 1, 0) = 0.2;
  const CharacteristicsMap map = characteristics_map(cloud, nn);
  EXPECT_DOUBLE_EQ(map.intensity_m2.at(0, 0, 0), 50.0);
  EXPECT_DOUBLE_EQ(map.sparsity.at(0, 1, 0), 0.05);
}

TEST(Characteristics, InvalidEchoesExcluded) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(2, 6, 24, 2);
  const CharacteristicsMap map = map_for(cloud);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e)
        EXPECT_EQ(map.valid.at(h, w, e) != 0, cloud.valid(h, w, e));
}

TEST(CsrPenalty, IdenticalNeighborScoresGiveZero) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(3, 6, 24, 2, 1.0);
  const CharacteristicsMap map = map_for(cloud);
  CsrConfig cfg;
  cfg.k_csr = 3;
  Grid3<double> scores(cloud.height(), cloud.width(), cloud.num_echoes(), 2.0);
  const Grid3<double> xi = csr_penalty(map, scores, cfg);
  for (double v : xi.values) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(CsrPenalty, ZeroVarianceNeighborhoodHitsClamp) {
  // Neighbors all score 0, query scores 1, eps 1e-6: the raw Z-score is 1e6
  // and the clamp caps it at 1e3.
  CharacteristicsMap map;
  const int n = 5;
  map.intensity_m2 = Grid3<double>(1, n, 1, 0.0);
  map.sparsity = Grid3<double>(1, n, 1, 0.0);
  map.valid = Grid3<std::uint8_t>(1, n, 1, 1);
  for (int w = 0; w < n; ++w) map.intensity_m2.at(0, w, 0) = w < 4 ? 1.0 * w : 100.0;
  CsrConfig cfg;
  cfg.k_csr = 3;
  Grid3<double> scores(1, n, 1, 0.0);
  scores.at(0, 4, 0) = 1.0;
  const Grid3<double> xi = csr_penalty(map, scores, cfg);
  EXPECT_DOUBLE_EQ(xi.at(0, 4, 0), 1e3);
}

TEST(CsrPenalty, MatchesBruteForceOracle) {
  CsrConfig cfg;
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const MultiEchoOrderedCloud cloud = test::random_cloud(seed, 8, 24, 2, 0.7);
    const CharacteristicsMap map = map_for(cloud);
    const Grid3<double> scores = random_scores(cloud, seed + 1000);
    const Grid3<double> got = csr_penalty(map, scores, cfg);
    const Grid3<double> expect = oracle_penalty(map, scores, cfg);
    ASSERT_EQ(got.values.size(), expect.values.size());
    for (std::size_t i = 0; i < got.values.size(); ++i)
      EXPECT_NEAR(got.values[i], expect.values[i], 1e-6);
  }
}

TEST(CsrPenalty, TooFewEchoesGivesAllZero) {
  const MultiEchoOrderedCloud cloud = test::colinear_cloud({5.0, 6.0, 7.0});
  const CharacteristicsMap map = map_for(cloud);
  CsrConfig cfg;
  cfg.k_csr = 5;  // more than the three valid echoes allow
  const Grid3<double> xi = csr_penalty(map, random_scores(cloud, 9), cfg);
  for (double v : xi.values) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(CsrPenalty, PermutationEquivariance) {
  // Reversing the column order of a one-row scan permutes the penalties the
  // same way: the regularizer sees values, not grid positions.
  const int n = 24;
  CharacteristicsMap map;
  map.intensity_m2 = Grid3<double>(1, n, 1, 0.0);
  map.sparsity = Grid3<double>(1, n, 1, 0.0);
  map.valid = Grid3<std::uint8_t>(1, n, 1, 1);
  Grid3<double> scores(1, n, 1, 0.0);
  Rng rng(17);
  for (int w = 0; w < n; ++w) {
    map.intensity_m2.at(0, w, 0) = rng.uniform(0.0, 100.0);
    map.sparsity.at(0, w, 0) = rng.uniform(0.0, 1.0);
    scores.at(0, w, 0) = rng.uniform(-2.0, 2.0);
  }
  CharacteristicsMap reversed = map;
  Grid3<double> scores_rev = scores;
  for (int w = 0; w < n; ++w) {
    reversed.intensity_m2.at(0, w, 0) = map.intensity_m2.at(0, n - 1 - w, 0);
    reversed.sparsity.at(0, w, 0) = map.sparsity.at(0, n - 1 - w, 0);
    scores_rev.at(0, w, 0) = scores.at(0, n - 1 - w, 0);
  }
  CsrConfig cfg;
  cfg.k_csr = 5;
  const Grid3<double> xi = csr_penalty(map, scores, cfg);
  const Grid3<double> xi_rev = csr_penalty(reversed, scores_rev, cfg);
  for (int w = 0; w < n; ++w)
    EXPECT_NEAR(xi_rev.at(0, w, 0), xi.at(0, n - 1 - w, 0), 1e-12);
}

TEST(CsrPenalty, ChannelScaleInvariantSelection) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(21, 8, 24, 2, 0.8);
  const CharacteristicsMap map = map_for(cloud);
  CharacteristicsMap scaled = map;
  for (double& v : scaled.intensity_m2.values) v *= 37.5;
  CsrConfig cfg;
  const CsrSelection a = select_characteristic_neighbors(map, cfg);
  const CsrSelection b = select_characteristic_neighbors(scaled, cfg);
  EXPECT_EQ(a.neighbors, b.neighbors);
}

TEST(CsrPenalty, NonNegativeAndBounded) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(33, 8, 24, 2);
  const CharacteristicsMap map = map_for(cloud);
  CsrConfig cfg;
  const Grid3<double> xi = csr_penalty(map, random_scores(cloud, 5), cfg);
  for (double v : xi.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, cfg.clamp);
  }
}

TEST(CsrPenalty, BackwardMatchesFiniteDifferences) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(44, 6, 16, 2, 0.7);
  const CharacteristicsMap map = map_for(cloud);
  CsrConfig cfg;
  cfg.k_csr = 4;
  const CsrSelection sel = select_characteristic_neighbors(map, cfg);
  ASSERT_TRUE(sel.active);
  Grid3<double> scores = random_scores(cloud, 7);
  Grid3<std::uint8_t> counted = map.valid;

  auto total = [&](const Grid3<double>& s) {
    const Grid3<double> xi = csr_zscore(sel, s, cfg);
    double sum = 0.0;
    for (std::size_t i = 0; i < xi.values.size(); ++i)
      if (counted.values[i]) sum += xi.values[i];
    return sum;
  };

  Grid3<double> grad(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
  csr_zscore_backward(sel, scores, cfg, counted, 1.0, grad);

  const double step = 1e-6;
  int checked = 0;
  for (std::size_t i = 0; i < scores.values.size() && checked < 60; ++i) {
    if (!map.valid.values[i]) continue;
    ++checked;
    Grid3<double> up = scores, dn = scores;
    up.values[i] += step;
    dn.values[i] -= step;
    const double fd = (total(up) - total(dn)) / (2.0 * step);
    EXPECT_NEAR(grad.values[i], fd, 1e-4 * std::max(1.0, std::fabs(fd)));
  }
}
