// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "echopick/projection.hpp"
#include "testutil.hpp"

using namespace echopick;

namespace {

RawEcho make_echo(float x, float y, float z, float intensity, std::int64_t pulse, EchoKind kind) {
  RawEcho e;
  e.x = x;
  e.y = y;
  e.z = z;
  e.intensity_raw = intensity;
  e.pulse_id = pulse;
  e.kind = kind;
  return e;
}

}  // namespace

TEST(Projection, SinglePointLandsAtGridCenter) {
  ProjectionConfig cfg;
  cfg.height = 4;
  cfg.width = 8;
  cfg.fov_up = 0.2;
  cfg.fov_down = -0.2;
  RawEchoList points{make_echo(10, 0, 0, 0.5f, 0, EchoKind::kStrongest)};
  const MultiEchoOrderedCloud cloud = project(points, cfg);
  EXPECT_TRUE(cloud.valid(2, 4, 0));
  int occupied = 0;
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 8; ++w)
      if (cloud.valid(h, w, 0)) ++occupied;
  EXPECT_EQ(occupied, 1);
}

TEST(Projection, EchoesOfOnePulseShareTheCell) {
  ProjectionConfig cfg;
  cfg.height = 4;
  cfg.width = 8;
  cfg.fov_up = 0.2;
  cfg.fov_down = -0.2;
  RawEchoList points{make_echo(10, 0, 0, 0.9f, 0, EchoKind::kStrongest),
                     make_echo(14, 0, 0.01f, 0.3f, 0, EchoKind::kLast)};
  const MultiEchoOrderedCloud cloud = project(points, cfg);
  EXPECT_EQ(cloud.num_echoes(), 2);
  EXPECT_TRUE(cloud.valid(2, 4, 0));
  EXPECT_TRUE(cloud.valid(2, 4, 1));
  EXPECT_FLOAT_EQ(cloud.at(2, 4, 0).x, 10.0f);
  EXPECT_FLOAT_EQ(cloud.at(2, 4, 1).x, 14.0f);
}

TEST(Projection, CollisionKeepsNearerPulse) {
  ProjectionConfig cfg;
  cfg.height = 4;
  cfg.width = 8;
  cfg.fov_up = 0.2;
  cfg.fov_down = -0.2;
  RawEchoList points{make_echo(9, 0, 0, 0.5f, 0, EchoKind::kStrongest),
                     make_echo(5, 0, 0, 0.5f, 1, EchoKind::kStrongest)};
  const MultiEchoOrderedCloud cloud = project(points, cfg);
  EXPECT_TRUE(cloud.valid(2, 4, 0));
  EXPECT_FLOAT_EQ(cloud.at(2, 4, 0).x, 5.0f);
}

TEST(Projection, EmptyInputGivesAllInvalidCloud) {
  ProjectionConfig cfg;
  const MultiEchoOrderedCloud cloud = project({}, cfg);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) EXPECT_FALSE(cloud.valid(h, w, 0));
}

TEST(Projection, BadFovRejected) {
  ProjectionConfig cfg;
  cfg.fov_up = -0.5;
  cfg.fov_down = 0.5;
  EXPECT_THROW(project({}, cfg), ConfigError);
}

TEST(Projection, CountPreservedAndNoDuplicates) {
  // Pulses on distinct cells: every echo must survive exactly once.
  ProjectionConfig cfg;
  cfg.height = 8;
  cfg.width = 32;
  RawEchoList points;
  Rng rng(13);
  for (int i = 0; i < 40; ++i) {
    const double theta = cfg.center_theta(static_cast<int>(i % 32));
    const double phi = cfg.center_phi(static_cast<int>(i / 32) * 3 % 8);
    const double r = rng.uniform(5.0, 30.0);
    const float x = static_cast<float>(r * std::cos(phi) * std::cos(theta));
    const float y = static_cast<float>(r * std::cos(phi) * std::sin(theta));
    const float z = static_cast<float>(r * std::sin(phi));
    points.push_back(make_echo(x, y, z, 0.8f, i, EchoKind::kStrongest));
    points.push_back(make_echo(x * 1.2f, y * 1.2f, z * 1.2f, 0.4f, i, EchoKind::kLast));
  }
  const MultiEchoOrderedCloud cloud = project(points, cfg);
  std::size_t valid = 0;
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e)
        if (cloud.valid(h, w, e)) ++valid;
  EXPECT_LE(valid, points.size());
  // Collisions only reduce the count in whole echo groups of two.
  EXPECT_EQ(valid % 2, 0u);
}

TEST(Projection, ReprojectionIsIdempotentOnOccupiedCells) {
  ProjectionConfig cfg;
  cfg.height = 8;
  cfg.width = 32;
  Rng rng(29);
  RawEchoList points;
  for (int i = 0; i < 60; ++i) {
    const double theta = rng.uniform(-M_PI * 0.99, M_PI * 0.99);
    const double phi = rng.uniform(cfg.fov_down * 0.95, cfg.fov_up * 0.95);
    const double r = rng.uniform(4.0, 40.0);
    points.push_back(make_echo(static_cast<float>(r * std::cos(phi) * std::cos(theta)),
                               static_cast<float>(r * std::cos(phi) * std::sin(theta)),
                               static_cast<float>(r * std::sin(phi)),
                               static_cast<float>(rng.uniform(0.1, 1.0)), i,
                               EchoKind::kStrongest));
  }
  const MultiEchoOrderedCloud first = project(points, cfg);

  RawEchoList extracted;
  std::int64_t pulse = 0;
  for (int h = 0; h < first.height(); ++h)
    for (int w = 0; w < first.width(); ++w) {
      if (!first.valid(h, w, 0)) continue;
      const PointRecord& rec = first.at(h, w, 0);
      extracted.push_back(make_echo(rec.x, rec.y, rec.z, rec.intensity_raw, pulse++,
                                    EchoKind::kStrongest));
    }
  const MultiEchoOrderedCloud second = project(extracted, cfg);
  for (int h = 0; h < first.height(); ++h)
    for (int w = 0; w < first.width(); ++w)
      if (first.valid(h, w, 0)) {
        ASSERT_TRUE(second.valid(h, w, 0));
        EXPECT_TRUE(second.at(h, w, 0) == first.at(h, w, 0));
      }
}

TEST(Assemble2p5, DistinctLastKept) {
  const RawEcho strongest = make_echo(5, 0, 0, 0.9f, 0, EchoKind::kStrongest);
  const RawEcho last = make_echo(9, 0, 0, 0.4f, 0, EchoKind::kLast);
  const auto group = assemble_2p5(strongest, std::nullopt, last);
  ASSERT_TRUE(group[1].has_value());
  EXPECT_FLOAT_EQ(group[1]->x, 9.0f);
}

TEST(Assemble2p5, IdenticalLastReplacedBySecondStrongest) {
  const RawEcho strongest = make_echo(5, 0, 0, 0.9f, 0, EchoKind::kStrongest);
  const RawEcho last = make_echo(5, 0, 0, 0.9f, 0, EchoKind::kLast);
  const RawEcho second = make_echo(7, 0, 0, 0.6f, 0, EchoKind::kSecondStrongest);
  const auto group = assemble_2p5(strongest, second, last);
  ASSERT_TRUE(group[1].has_value());
  EXPECT_FLOAT_EQ(group[1]->x, 7.0f);
}

TEST(Assemble2p5, NoDistinctAlternativeLeavesSlotEmpty) {
  const RawEcho strongest = make_echo(5, 0, 0, 0.9f, 0, EchoKind::kStrongest);
  EXPECT_FALSE(assemble_2p5(strongest, std::nullopt, std::nullopt)[1].has_value());
  const RawEcho same = make_echo(5, 0, 0, 0.5f, 0, EchoKind::kLast);
  EXPECT_FALSE(assemble_2p5(strongest, std::nullopt, same)[1].has_value());
}
