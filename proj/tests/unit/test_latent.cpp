#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "latcompass/error.hpp"
#include "latcompass/latent.hpp"

using namespace latcompass;

namespace {

LatentVector zv(std::vector<double> v) { return LatentVector(std::move(v), SpaceTag::z()); }
Direction unit(std::vector<double> v) { return normalize(v, SpaceTag::z()); }

template <typename Fn>
void expect_code(ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << error_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double scale = 2.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST(SpaceTag, ParseAndFormat) {
  EXPECT_EQ(SpaceTag::parse("z"), SpaceTag::z());
  EXPECT_EQ(SpaceTag::parse("layer:1"), SpaceTag::layer(1));
  EXPECT_EQ(SpaceTag::layer(12).to_string(), "layer:12");
  EXPECT_EQ(SpaceTag::z().to_string(), "z");
  for (const char* bad : {"", "Z", "layer:", "layer:x", "layer:1x", "layer:-1", "scene"}) {
    expect_code(ErrorCode::InvalidArgument, [&] { SpaceTag::parse(bad); });
  }
}

TEST(LatentVector, RejectsEmptyAndNonFinite) {
  expect_code(ErrorCode::DimensionMismatch, [] { zv({}); });
  expect_code(ErrorCode::NonFinite, [] { zv({1.0, std::nan("")}); });
  expect_code(ErrorCode::NonFinite, [] { zv({std::numeric_limits<double>::infinity()}); });
}

TEST(Normalize, Examples) {
  const Direction d = unit({3, 4});
  EXPECT_DOUBLE_EQ(d[0], 0.6);
  EXPECT_DOUBLE_EQ(d[1], 0.8);
  const Direction e = unit({1, 0, 0});
  EXPECT_EQ(std::vector<double>(e.values().begin(), e.values().end()), (std::vector<double>{1, 0, 0}));
  expect_code(ErrorCode::ZeroVector, [] { unit({0, 0}); });
  expect_code(ErrorCode::ZeroVector, [] { unit({1e-13, 0}); });
  expect_code(ErrorCode::NonFinite, [] { unit({1, std::nan("")}); });
}

TEST(Direction, FromUnitValidatesNorm) {
  EXPECT_NO_THROW(Direction::from_unit({0.6, 0.8}, SpaceTag::z()));
  expect_code(ErrorCode::InvalidArgument, [] { Direction::from_unit({0.6, 0.81}, SpaceTag::z()); });
}

TEST(StepSize, MustBePositiveFinite) {
  EXPECT_EQ(TraversalStepSize(0.5).magnitude(), 0.5);
  expect_code(ErrorCode::InvalidArgument, [] { TraversalStepSize(0.0); });
  expect_code(ErrorCode::InvalidArgument, [] { TraversalStepSize(-1.0); });
  expect_code(ErrorCode::InvalidArgument, [] { TraversalStepSize(std::nan("")); });
}

TEST(Traverse, Examples) {
  EXPECT_EQ(traverse(zv({1, 2}), unit({1, 0}), 0.0), zv({1, 2}));
  EXPECT_EQ(traverse(zv({1, 2}), unit({1, 0}), 2.0), zv({3, 2}));
  EXPECT_EQ(traverse(zv({0, 0}), unit({0, 1}), -1.5), zv({0, -1.5}));
}

TEST(Traverse, Errors) {
  expect_code(ErrorCode::DimensionMismatch, [] { traverse(zv({1, 2, 3}), unit({1, 0}), 1.0); });
  const Direction layer_dir = normalize(std::vector<double>{1, 0}, SpaceTag::layer(1));
  expect_code(ErrorCode::SpaceMismatch, [&] { traverse(zv({1, 2}), layer_dir, 1.0); });
  expect_code(ErrorCode::SpaceMismatch, [&] { project(zv({1, 2}), layer_dir); });
}

TEST(Project, Examples) {
  EXPECT_DOUBLE_EQ(project(zv({3, 4}), unit({1, 0})), 3.0);
  EXPECT_DOUBLE_EQ(project(zv({0, 5}), unit({1, 0})), 0.0);
  EXPECT_NEAR(project(zv({0.6, 0.8}), unit({0.6, 0.8})), 1.0, 1e-15);
  expect_code(ErrorCode::DimensionMismatch, [] { project(zv({1}), unit({1, 0})); });
}

TEST(Truncate, Examples) {
  EXPECT_EQ(truncate(zv({3.1, 0.5}), 2.0), zv({2, 0.5}));
  EXPECT_EQ(truncate(zv({-5, 1}), 2.0), zv({-2, 1}));
  EXPECT_EQ(truncate(zv({0.1, -0.2}), 2.0), zv({0.1, -0.2}));
  expect_code(ErrorCode::InvalidArgument, [] { truncate(zv({1}), 0.0); });
}

TEST(LatentProperties, ZeroStepIsBitwiseIdentity) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = random_vec(rng, 1 + trial % 17);
    v[0] = -0.0;
    const LatentVector z = zv(v);
    const LatentVector out = traverse(z, unit(random_vec(rng, v.size())), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(out[i]), std::bit_cast<std::uint64_t>(z[i]));
    }
  }
}

TEST(LatentProperties, TraverseComposes) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lam(-5.0, 5.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 64;
    const LatentVector z = zv(random_vec(rng, n));
    const Direction d = unit(random_vec(rng, n));
    const double a = lam(rng);
    const double b = lam(rng);
    const LatentVector two = traverse(traverse(z, d, a), d, b);
    const LatentVector one = traverse(z, d, a + b);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(two[i], one[i], 1e-9);
  }
}

TEST(LatentProperties, ProjectionMovesByLambda) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(-10.0, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 40;
    const LatentVector z = zv(random_vec(rng, n));
    const Direction d = unit(random_vec(rng, n));
    const double l = lam(rng);
    EXPECT_NEAR(project(traverse(z, d, l), d) - project(z, d), l, 1e-9);
  }
}

TEST(LatentProperties, NormalizeIsIdempotentAndUnit) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 50;
    const auto v = random_vec(rng, n, std::pow(10.0, trial % 7 - 3));
    const Direction d = unit(v);
    const Direction dd = normalize(d.values(), SpaceTag::z());
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(dd[i], d[i], 1e-12);
      norm += d[i] * d[i];
    }
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-9);
  }
}

TEST(LatentProperties, TruncateIdempotentAndPerComponent) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 20;
    const auto v = random_vec(rng, n, 3.0);
    const LatentVector once = truncate(zv(v), 1.5);
    EXPECT_EQ(truncate(once, 1.5), once);
    // Reversing the input reverses the output: no coupling between entries.
    std::vector<double> rev(v.rbegin(), v.rend());
    const LatentVector trev = truncate(zv(rev), 1.5);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(trev[i], once[n - 1 - i]);
      EXPECT_LE(std::abs(once[i]), 1.5);
    }
  }
}
