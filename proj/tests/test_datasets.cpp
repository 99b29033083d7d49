#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "homo/datasets.hpp"
#include "homo/error.hpp"

using namespace homo;

TEST_CASE("rng: splitmix stream and uniform range") {
  SeededRng rng(3);
  // Reference values from an independent SplitMix64 implementation.
  CHECK(rng.next_u64() == 0x1d0b14e4db018fedULL);
  CHECK(rng.next_u64() == 0xb3466f8a7b81a989ULL);
  CHECK(rng.next_u64() == 0x9cebe8a6d050dd01ULL);
  SeededRng u(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
    CHECK(u.index(5) < 5);
  }
  SeededRng a(1), b(1);
  CHECK(a.split(0).next_u64() == b.split(0).next_u64());
  CHECK(SeededRng(1).split(0).next_u64() != SeededRng(1).split(1).next_u64());
}

TEST_CASE("eight-mode cloud: counts, mode means, determinism") {
  const auto spec = DatasetSpec::gaussian_modes(8, 6.0, 13.0, 100);
  SeededRng r1(0), r2(0);
  const auto a = sample_dataset(spec, r1);
  const auto b = sample_dataset(spec, r2);
  CHECK(a.source.size() == 800);
  CHECK(a.target.size() == 800);
  CHECK(a.source.label == CloudLabel::source);
  CHECK(a.target.label == CloudLabel::target);
  CHECK(a.source.points == b.source.points);
  CHECK(a.target.points == b.target.points);
  const double bound = 3.0 * std::sqrt(0.3 / 100.0);
  for (int i = 0; i < 8; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / 8;
    const Eigen::Vector2d src_c = 6.0 * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    const Eigen::Vector2d tgt_c = 13.0 * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    const Eigen::Vector2d ms = a.source.points.middleCols(i * 100, 100).rowwise().mean();
    const Eigen::Vector2d mt = a.target.points.middleCols(i * 100, 100).rowwise().mean();
    CHECK((ms - src_c).cwiseAbs().maxCoeff() < bound);
    CHECK((mt - tgt_c).cwiseAbs().maxCoeff() < bound);
  }
}

TEST_CASE("eight-mode, seed 3: first point matches the reference generator") {
  SeededRng rng(3);
  const auto d = sample_dataset(DatasetSpec::gaussian_modes(8, 6.0, 13.0, 100), rng);
  // Independent Python port of the documented stream and Box-Muller order.
  CHECK(d.source.points(0, 0) == doctest::Approx(5.917409292741011).epsilon(1e-14));
  CHECK(d.source.points(1, 0) == doctest::Approx(-0.2557922177465452).epsilon(1e-14));
}

TEST_CASE("vanishing variance collapses modes onto centers") {
  auto spec = DatasetSpec::gaussian_modes(4, 5.0, 14.0, 10);
  spec.variance = 1e-12;
  SeededRng rng(1);
  const auto d = sample_dataset(spec, rng);
  for (int i = 0; i < 4; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / 4;
    const Eigen::Vector2d c = 14.0 * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    for (int j = 0; j < 10; ++j) CHECK((d.target.points.col(i * 10 + j) - c).norm() < 1e-4);
  }
}

TEST_CASE("noiseless shapes lie on their curves") {
  SUBCASE("circle") {
    auto spec = DatasetSpec::circle(200);
    spec.variance = 1e-20;
    SeededRng rng(2);
    const auto d = sample_dataset(spec, rng);
    for (Eigen::Index i = 0; i < d.source.size(); ++i) {
      CHECK(d.source.points.col(i).norm() == doctest::Approx(5.0).epsilon(1e-8));
      CHECK(d.target.points.col(i).norm() == doctest::Approx(12.0).epsilon(1e-8));
    }
  }
  SUBCASE("irregular ring") {
    auto spec = DatasetSpec::irregular_ring(200);
    spec.variance = 1e-20;
    SeededRng rng(2);
    const auto d = sample_dataset(spec, rng);
    for (Eigen::Index i = 0; i < d.target.size(); ++i) {
      const Eigen::Vector2d p = d.target.points.col(i);
      const double theta = std::atan2(p.y(), p.x());
      CHECK(p.norm() == doctest::Approx(10.0 * (1.0 + 0.25 * std::sin(3.0 * theta))).epsilon(1e-8));
    }
  }
  SUBCASE("spirals") {
    for (int rounds : {1, 2, 3}) {
      auto spec = DatasetSpec::spin(300, rounds);
      spec.variance = 1e-20;
      SeededRng rng(4);
      const auto d = sample_dataset(spec, rng);
      for (Eigen::Index i = 0; i < d.target.size(); ++i) {
        const Eigen::Vector2d p = d.target.points.col(i);
        // r grows linearly with the unwrapped angle; the wrapped angle fixes it
        // up to whole turns.
        const double r = p.norm();
        const double unwrapped = (r - 1.0) / 11.0 * 2.0 * std::numbers::pi * rounds;
        const double wrapped = std::atan2(p.y(), p.x());
        const double turns = (unwrapped - wrapped) / (2.0 * std::numbers::pi);
        CHECK(std::abs(turns - std::round(turns)) < 1e-6);
        CHECK(r >= 1.0 - 1e-9);
        CHECK(r <= 12.0 + 1e-9);
      }
    }
  }
  SUBCASE("dot circle") {
    auto spec = DatasetSpec::dot_circle(600);
    spec.variance = 1e-20;
    SeededRng rng(5);
    const auto d = sample_dataset(spec, rng);
    CHECK(d.source.size() == 600);
    for (Eigen::Index i = 0; i < 300; ++i) CHECK(d.source.points.col(i).norm() < 1e-8);
    for (Eigen::Index i = 300; i < 600; ++i) CHECK(d.source.points.col(i).norm() == doctest::Approx(10.0));
  }
}

TEST_CASE("paper experiment registry") {
  const auto& e = find_experiment("eight_mode");
  CHECK(e.batch_size == 1600);
  CHECK(e.learning_rate == 0.005);
  CHECK(e.cell("M1+M2+SC").steps == 1000);
  CHECK(e.dataset.mode_count == 8);
  CHECK(e.dataset.source_radius == 6.0);
  CHECK(e.dataset.target_radius == 13.0);
  CHECK(e.dataset.points_per_mode == 100);

  const auto& f = find_experiment("five_mode");
  CHECK(f.dataset.source_radius == 6.0);
  CHECK(f.dataset.target_radius == 13.0);
  CHECK(f.dataset.points_per_mode == 200);
  CHECK(f.batch_size == 1000);

  const auto& dc = find_experiment("dot_circle");
  CHECK(dc.dataset.dot_points == 300);
  CHECK(dc.dataset.source_count() == 600);
  CHECK(dc.dataset.rounds == 2);

  int t1 = 0, t2 = 0, t3 = 0;
  for (const auto& x : list_paper_experiments()) {
    t1 += x.table == "t1";
    t2 += x.table == "t2";
    t3 += x.table == "t3";
  }
  CHECK(t1 == 3);
  CHECK(t2 == 4);
  CHECK(t3 == 3);
  CHECK_THROWS_AS(find_experiment("nine_mode"), ConfigError);
  CHECK_THROWS_AS(e.cell("M3"), ConfigError);
}

TEST_CASE("spec validation") {
  auto spec = DatasetSpec::gaussian_modes(8, 6.0, 13.0, 100);
  spec.variance = 0.0;
  SeededRng rng(1);
  CHECK_THROWS_AS(sample_dataset(spec, rng), ConfigError);
  CHECK_THROWS_AS(parse_dataset_kind("torus"), ConfigError);
}

TEST_CASE("cloud csv round trip is exact") {
  SeededRng rng(6);
  const auto d = sample_dataset(DatasetSpec::circle(50), rng);
  std::stringstream ss;
  write_cloud_csv(ss, {d.source, d.target});
  CHECK(ss.str().rfind("x,y,label\n", 0) == 0);
  const auto back = read_cloud_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == CloudLabel::source);
  CHECK(back[1].label == CloudLabel::target);
  CHECK(back[0].points == d.source.points);
  CHECK(back[1].points == d.target.points);

  std::stringstream bad("x,y\n1,2\n");
  CHECK_THROWS_AS(read_cloud_csv(bad), ConfigError);
}
