// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "echopick/neighbors.hpp"
#include "testutil.hpp"

using namespace echopick;

namespace {

struct OracleNeighbor {
  double dist;
  int h;
  int w;
};

// Independent brute-force reference: scan every window cell, exact double
// arithmetic, filter by the cutoff, sort by (distance, row, col), keep k.
std::vector<OracleNeighbor> oracle_neighbors(const MultiEchoOrderedCloud& cloud, int qh, int qw,
                                             int qe, const EncoderConfig& cfg) {
  std::vector<OracleNeighbor> found;
  const PointRecord& q = cloud.at(qh, qw, qe);
  for (int dr = -(cfg.window_rows / 2); dr <= cfg.window_rows / 2; ++dr) {
    const int h = qh + dr;
    if (h < 0 || h >= cloud.height()) continue;
    for (int dc = -(cfg.window_cols / 2); dc <= cfg.window_cols / 2; ++dc) {
      int w = (qw + dc) % cloud.width();
      if (w < 0) w += cloud.width();
      if (!cloud.valid(h, w, 0)) continue;
      const PointRecord& c = cloud.at(h, w, 0);
      const double dx = double(q.x) - c.x, dy = double(q.y) - c.y, dz = double(q.z) - c.z;
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (!(dist < cfg.cutoff_radius)) continue;
      found.push_back({dist, h, w});
    }
  }
  std::sort(found.begin(), found.end(), [](const OracleNeighbor& a, const OracleNeighbor& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.h != b.h) return a.h < b.h;
    return a.w < b.w;
  });
  if (found.size() > static_cast<std::size_t>(cfg.k)) found.resize(cfg.k);
  return found;
}

double oracle_nearest_non_self(const MultiEchoOrderedCloud& cloud, int qh, int qw, int qe,
                               const EncoderConfig& cfg) {
  double best = cfg.cutoff_radius;
  bool found = false;
  const PointRecord& q = cloud.at(qh, qw, qe);
  for (int dr = -(cfg.window_rows / 2); dr <= cfg.window_rows / 2; ++dr) {
    const int h = qh + dr;
    if (h < 0 || h >= cloud.height()) continue;
    for (int dc = -(cfg.window_cols / 2); dc <= cfg.window_cols / 2; ++dc) {
      int w = (qw + dc) % cloud.width();
      if (w < 0) w += cloud.width();
      if (!cloud.valid(h, w, 0)) continue;
      if (qe == 0 && h == qh && w == qw) continue;  // self
      const PointRecord& c = cloud.at(h, w, 0);
      const double dx = double(q.x) - c.x, dy = double(q.y) - c.y, dz = double(q.z) - c.z;
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (dist < cfg.cutoff_radius && (!found || dist < best)) {
        best = dist;
        found = true;
      }
    }
  }
  return best;
}

}  // namespace

TEST(NeighborGather, ColinearFixture) {
  const MultiEchoOrderedCloud cloud = test::colinear_cloud({5.0, 6.0, 20.0});
  EncoderConfig cfg;
  cfg.k = 2;
  cfg.cutoff_radius = 3.0;
  cfg.window_rows = 1;
  cfg.window_cols = 3;
  const NeighborField field = gather_neighbors(cloud, cfg);

  // Query at x=5: its own record ranks first at distance zero, then x=6 at
  // distance one; x=20 is cut off.
  const NeighborSlot& self = field.slot(0, 0, 0, 0);
  ASSERT_TRUE(self.present);
  EXPECT_TRUE(self.self_match);
  EXPECT_DOUBLE_EQ(self.dist, 0.0);
  const NeighborSlot& other = field.slot(0, 0, 0, 1);
  ASSERT_TRUE(other.present);
  EXPECT_FALSE(other.self_match);
  EXPECT_DOUBLE_EQ(other.dist, 1.0);
  EXPECT_DOUBLE_EQ(other.nb_range, 6.0);

  // Exactly one non-self neighbor for the x=5 query.
  int non_self = 0;
  for (int j = 0; j < cfg.k; ++j)
    if (field.slot(0, 0, 0, j).present && !field.slot(0, 0, 0, j).self_match) ++non_self;
  EXPECT_EQ(non_self, 1);
}

TEST(NeighborGather, MatchesBruteForceOracle) {
  EncoderConfig cfg;
  cfg.k = 5;
  cfg.cutoff_radius = 2.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const MultiEchoOrderedCloud cloud = test::random_cloud(seed, 12, 48, 2);
    const NeighborField field = gather_neighbors(cloud, cfg);
    for (int h = 0; h < cloud.height(); ++h)
      for (int w = 0; w < cloud.width(); ++w)
        for (int e = 0; e < cloud.num_echoes(); ++e) {
          if (!cloud.valid(h, w, e)) {
            for (int j = 0; j < cfg.k; ++j) EXPECT_FALSE(field.slot(h, w, e, j).present);
            continue;
          }
          const auto expect = oracle_neighbors(cloud, h, w, e, cfg);
          for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.k); ++j) {
            const NeighborSlot& s = field.slot(h, w, e, static_cast<int>(j));
            if (j < expect.size()) {
              ASSERT_TRUE(s.present);
              EXPECT_EQ(s.cell, expect[j].h * cloud.width() + expect[j].w);
              EXPECT_NEAR(s.dist, expect[j].dist, 1e-6);
            } else {
              EXPECT_FALSE(s.present);
              EXPECT_EQ(s.cell, -1);
            }
          }
        }
  }
}

TEST(NeighborGather, MonotoneInKAndCutoff) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(42, 10, 40, 2);
  EncoderConfig small;
  small.k = 3;
  small.cutoff_radius = 1.0;
  EncoderConfig big;
  big.k = 6;
  big.cutoff_radius = 2.5;
  const NeighborField a = gather_neighbors(cloud, small);
  const NeighborField b = gather_neighbors(cloud, big);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e)
        for (int j = 0; j < small.k; ++j) {
          const NeighborSlot& s = a.slot(h, w, e, j);
          if (!s.present) continue;
          bool still_there = false;
          for (int j2 = 0; j2 < big.k; ++j2)
            if (b.slot(h, w, e, j2).present && b.slot(h, w, e, j2).cell == s.cell)
              still_there = true;
          EXPECT_TRUE(still_there);
        }
}

TEST(NeighborGather, AllPresentDistancesBelowCutoff) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(77, 10, 40, 2);
  EncoderConfig cfg;
  const NeighborField field = gather_neighbors(cloud, cfg);
  for (const NeighborSlot& s : field.slots)
    if (s.present) EXPECT_LT(s.dist, cfg.cutoff_radius);
}

TEST(NeighborGather, GridModeTakesWindowInRasterOrder) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(5, 8, 24, 1, 1.0);
  EncoderConfig cfg;
  cfg.mode = NeighborMode::kGridNeighbors;
  cfg.k = 9;
  cfg.window_rows = 3;
  cfg.window_cols = 3;
  const NeighborField field = gather_neighbors(cloud, cfg);
  const int h = 4, w = 10;
  int j = 0;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      const NeighborSlot& s = field.slot(h, w, 0, j++);
      ASSERT_TRUE(s.present);
      EXPECT_EQ(s.cell, (h + dr) * cloud.width() + ((w + dc + cloud.width()) % cloud.width()));
    }
}

TEST(NeighborGather, ConfigValidation) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(1, 4, 8, 1);
  EncoderConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(gather_neighbors(cloud, cfg), ConfigError);
  cfg = EncoderConfig{};
  cfg.window_rows = 4;
  EXPECT_THROW(gather_neighbors(cloud, cfg), ConfigError);
  cfg = EncoderConfig{};
  cfg.cutoff_radius = 0.0;
  EXPECT_THROW(gather_neighbors(cloud, cfg), ConfigError);
}

TEST(EncodeFeatures, SelfSlotHasZeroOffsets) {
  const MultiEchoOrderedCloud cloud = test::colinear_cloud({5.0, 6.0, 20.0});
  EncoderConfig cfg;
  cfg.k = 2;
  cfg.cutoff_radius = 3.0;
  cfg.window_rows = 1;
  cfg.window_cols = 3;
  const NeighborField field = gather_neighbors(cloud, cfg);
  const FeatureTensor features = encode_features(cloud, field);
  EXPECT_DOUBLE_EQ(features.values[features.value_index(0, 0, 0, 0, 0)], 5.0);
  EXPECT_DOUBLE_EQ(features.values[features.value_index(0, 0, 0, 0, 1)], 0.0);
  EXPECT_DOUBLE_EQ(features.values[features.value_index(0, 0, 0, 0, 2)], 0.0);
  EXPECT_EQ(features.present[features.present_index(0, 0, 0, 0)], 1);
  // Absent slots stay zeroed.
  EXPECT_EQ(features.present[features.present_index(0, 2, 0, 1)], 0);
  EXPECT_DOUBLE_EQ(features.values[features.value_index(0, 2, 0, 1, 0)], 0.0);
}

TEST(EncodeFeatures, AzimuthOffsetSignConvention) {
  // Two points one column apart; theta decreases with increasing w, so the
  // eastern neighbor has smaller theta and d_theta = theta_q - theta_n > 0.
  CloudBuilder builder(1, 8, 1);
  ProjectionConfig grid;
  grid.height = 1;
  grid.width = 8;
  for (int w = 0; w < 8; ++w)
    builder.set_angles(0, w, static_cast<float>(grid.center_theta(w)), 0.0f);
  for (int w : {3, 4}) {
    const double theta = grid.center_theta(w);
    PointRecord rec;
    rec.x = static_cast<float>(10.0 * std::cos(theta));
    rec.y = static_cast<float>(10.0 * std::sin(theta));
    rec.intensity_raw = 0.5f;
    rec.valid = true;
    builder.set_record(0, w, 0, rec);
  }
  const MultiEchoOrderedCloud cloud = builder.build();
  EncoderConfig cfg;
  cfg.k = 2;
  cfg.cutoff_radius = 10.0;
  cfg.window_rows = 1;
  cfg.window_cols = 3;
  const FeatureTensor features = encode_features(cloud, gather_neighbors(cloud, cfg));
  const double step = 2.0 * M_PI / 8.0;
  // Query w=3, non-self neighbor w=4 sits east: d_theta = +step.
  EXPECT_NEAR(features.values[features.value_index(0, 3, 0, 1, 1)], step, 1e-6);
  // Query w=4, neighbor w=3: d_theta = -step.
  EXPECT_NEAR(features.values[features.value_index(0, 4, 0, 1, 1)], -step, 1e-6);
}

TEST(EncodeFeatures, SeamWraparoundMatchesAngleOracle) {
  // Neighbors across the w = 0 seam: theta difference must wrap into
  // (-pi, pi] instead of spanning nearly 2*pi.
  CloudBuilder builder(1, 8, 1);
  ProjectionConfig grid;
  grid.height = 1;
  grid.width = 8;
  for (int w = 0; w < 8; ++w)
    builder.set_angles(0, w, static_cast<float>(grid.center_theta(w)), 0.0f);
  for (int w : {0, 7}) {
    const double theta = grid.center_theta(w);
    PointRecord rec;
    rec.x = static_cast<float>(10.0 * std::cos(theta));
    rec.y = static_cast<float>(10.0 * std::sin(theta));
    rec.intensity_raw = 0.5f;
    rec.valid = true;
    builder.set_record(0, w, 0, rec);
  }
  const MultiEchoOrderedCloud cloud = builder.build();
  EncoderConfig cfg;
  cfg.k = 2;
  cfg.cutoff_radius = 100.0;
  cfg.window_rows = 1;
  cfg.window_cols = 3;
  const FeatureTensor features = encode_features(cloud, gather_neighbors(cloud, cfg));
  const double expect =
      wrap_angle(double(cloud.theta(0, 0)) - double(cloud.theta(0, 7)));
  EXPECT_NEAR(features.values[features.value_index(0, 0, 0, 1, 1)], expect, 1e-6);
  EXPECT_NEAR(std::fabs(expect), 2.0 * M_PI / 8.0, 1e-6);
}

TEST(NearestDistance, FixtureAndFallback) {
  const MultiEchoOrderedCloud cloud = test::colinear_cloud({5.0, 6.0, 20.0});
  EncoderConfig cfg;
  cfg.k = 2;
  cfg.cutoff_radius = 3.0;
  cfg.window_rows = 1;
  cfg.window_cols = 3;
  const NeighborField field = gather_neighbors(cloud, cfg);
  const Grid3<double> nn = nearest_distance(cloud, field, cfg);
  EXPECT_DOUBLE_EQ(nn.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(nn.at(0, 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(nn.at(0, 2, 0), cfg.cutoff_radius);  // isolated point
}

TEST(NearestDistance, MatchesBruteForce) {
  EncoderConfig cfg;
  cfg.k = 5;
  cfg.cutoff_radius = 2.0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const MultiEchoOrderedCloud cloud = test::random_cloud(seed, 12, 48, 2);
    const NeighborField field = gather_neighbors(cloud, cfg);
    const Grid3<double> nn = nearest_distance(cloud, field, cfg);
    for (int h = 0; h < cloud.height(); ++h)
      for (int w = 0; w < cloud.width(); ++w)
        for (int e = 0; e < cloud.num_echoes(); ++e) {
          if (!cloud.valid(h, w, e)) {
            EXPECT_DOUBLE_EQ(nn.at(h, w, e), 0.0);
            continue;
          }
          EXPECT_NEAR(nn.at(h, w, e), oracle_nearest_non_self(cloud, h, w, e, cfg), 1e-9);
        }
  }
}

TEST(MaskedGather, HiddenQueriesIgnoreTheirOwnRecord) {
  const MultiEchoOrderedCloud cloud = test::random_cloud(3, 10, 40, 2);
  EncoderConfig cfg;
  Grid3<std::uint8_t> mask(cloud.height(), cloud.width(), cloud.num_echoes(), 0);
  // Mask a couple of valid strongest echoes.
  int masked = 0;
  for (int w = 0; w < cloud.width() && masked < 4; ++w)
    if (cloud.valid(5, w, 0)) {
      mask.at(5, w, 0) = 1;
      ++masked;
    }
  ASSERT_GT(masked, 0);
  const NeighborField field = gather_neighbors(cloud, cfg, &mask);
  // Masked records never appear as candidates anywhere.
  for (const NeighborSlot& s : field.slots) {
    if (!s.present) continue;
    const int h = s.cell / cloud.width();
    const int w = s.cell % cloud.width();
    EXPECT_FALSE(mask.at(h, w, 0));
  }
}
