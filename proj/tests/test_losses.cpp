#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "volskin/losses.hpp"

using namespace volskin;
using ad::Tensor;

TEST_CASE("photometric loss") {
  Tensor a({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  CHECK(photometric_loss(a, a).value() == 0.0);

  Tensor pred({1, 3}, {0.3, 0.0, 0.4});
  Tensor zero({1, 3}, {0.0, 0.0, 0.0});
  CHECK(photometric_loss(pred, zero).value() == doctest::Approx(0.5).epsilon(1e-12));

  Tensor two_pred({2, 3}, {1, 0, 0, 0, 1, 0});
  Tensor two_target({2, 3}, {0, 0, 0, 0, 0, 0});
  CHECK(photometric_loss(two_pred, two_target).value() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("depth loss examples and properties") {
  Tensor pred({2}, {1.0, 2.0});
  Tensor target({2}, {2.0, 1.0});
  CHECK(depth_loss(pred, target).loss.value() == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(depth_loss(pred, pred).loss.value() == 0.0);

  RngState rng(3);
  SUBCASE("exact scale invariance") {
    for (int rep = 0; rep < 50; ++rep) {
      const int n = 2 + rng.uniform_int(6);
      Tensor base({n});
      for (int i = 0; i < n; ++i) base.data()[i] = rng.uniform(0.5, 3.0);
      for (double k : {0.1, 1.0, 10.0}) {
        Tensor scaled({n});
        for (int i = 0; i < n; ++i) scaled.data()[i] = k * base.at(i);
        CHECK(depth_loss(base, scaled).loss.value() < 1e-6);
        CHECK(depth_loss(scaled, base).loss.value() < 1e-6);
      }
    }
  }

  SUBCASE("symmetry") {
    for (int rep = 0; rep < 50; ++rep) {
      const int n = 3 + rng.uniform_int(5);
      Tensor a({n}), b({n});
      for (int i = 0; i < n; ++i) {
        a.data()[i] = rng.uniform(0.5, 3.0);
        b.data()[i] = rng.uniform(0.5, 3.0);
      }
      CHECK(depth_loss(a, b).loss.value() ==
            doctest::Approx(depth_loss(b, a).loss.value()).epsilon(1e-12));
    }
  }

  SUBCASE("near-zero mean batches are skipped") {
    Tensor tiny({3}, {1e-9, 1e-9, 1e-9});
    Tensor normal({3}, {1.0, 2.0, 3.0});
    const DepthLossResult r = depth_loss(tiny, normal);
    CHECK(r.skipped);
    CHECK(r.loss.value() == 0.0);
  }
}

TEST_CASE("normal loss endpoints and arithmetic") {
  Tensor x({1, 3}, {1, 0, 0});
  CHECK(normal_loss(x, x).value() == 0.0);

  Tensor nx({1, 3}, {-1, 0, 0});
  CHECK(normal_loss(x, nx).value() == doctest::Approx(2.0).epsilon(1e-12));

  const double s = 1.0 / std::sqrt(2.0);
  Tensor diag({1, 3}, {s, s, 0});
  CHECK(normal_loss(x, diag).value() == doctest::Approx(1.0 - s).epsilon(1e-12));

  Tensor bad({1, 3}, {0.5, 0.5, 0.5});
  CHECK_THROWS_AS(normal_loss(x, bad), std::invalid_argument);
}

TEST_CASE("normal loss stays within [0, 2]") {
  RngState rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    Tensor a({1, 3}), b({1, 3});
    Vec3 va(rng.normal(), rng.normal(), rng.normal());
    Vec3 vb(rng.normal(), rng.normal(), rng.normal());
    va.normalize();
    vb.normalize();
    for (int i = 0; i < 3; ++i) {
      a.data()[i] = va[i];
      b.data()[i] = vb[i];
    }
    const double v = normal_loss(a, b).value();
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("surface loss endpoints and range") {
  CHECK(surface_loss(Tensor::vector({1.0})).value() == 0.0);
  CHECK(surface_loss(Tensor::vector({0.0})).value() == 1.0);
  CHECK(surface_loss(Tensor::vector({0.5})).value() == doctest::Approx(0.25).epsilon(1e-12));
  RngState rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const double v = surface_loss(Tensor::vector({rng.uniform()})).value();
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(surface_loss(Tensor::vector({1.2})), std::invalid_argument);
}

TEST_CASE("view perturbation policy") {
  RngState rng(11);
  const Vec3 d = Vec3(0.3, -0.5, 0.8).normalized();

  ViewPerturbation off;
  off.enabled = false;
  CHECK((perturb_view_direction(d, off, true, rng) - d).norm() == 0.0);

  ViewPerturbation degenerate;
  degenerate.enabled = true;
  degenerate.placement = ViewPerturbation::Placement::BeforeEncoding;
  degenerate.mu = 0.0;
  degenerate.sigma_noise = 0.0;
  CHECK((perturb_view_direction(d, degenerate, true, rng) - d).norm() == 0.0);

  ViewPerturbation before;
  before.enabled = true;
  before.placement = ViewPerturbation::Placement::BeforeEncoding;
  before.mu = 0.2;
  before.sigma_noise = 0.5;
  for (int rep = 0; rep < 100; ++rep) {
    const Vec3 noisy = perturb_view_direction(d, before, true, rng);
    CHECK(noisy.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Train-only policies pass test-time input through unchanged.
  before.active_at_test = false;
  CHECK((perturb_view_direction(d, before, false, rng) - d).norm() == 0.0);

  ViewPerturbation after;
  after.enabled = true;
  after.placement = ViewPerturbation::Placement::AfterEncoding;
  after.mu = 0.2;
  after.sigma_noise = 0.5;
  std::vector<double> encoded{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> original = encoded;
  // BeforeEncoding branch must not touch raw directions under this policy.
  CHECK((perturb_view_direction(d, after, true, rng) - d).norm() == 0.0);
  perturb_encoded_direction(encoded, after, true, rng);
  int changed = 0;
  for (size_t i = 0; i < encoded.size(); ++i) changed += encoded[i] != original[i];
  CHECK(changed == 4);  // un-renormalized, every coordinate moved
  std::vector<double> at_test = original;
  perturb_encoded_direction(at_test, after, false, rng);
  CHECK(at_test == original);
}

TEST_CASE("total loss assembly") {
  const Tensor zero = Tensor::scalar(0.0);
  LossWeights w;
  CHECK(total_loss(zero, zero, zero, zero, zero, w).value() == 0.0);

  const Tensor photo = Tensor::scalar(1.5);
  const Tensor weight = Tensor::scalar(0.5);
  const Tensor rest = Tensor::scalar(123.0);
  LossWeights off;
  off.depth = off.normal = off.surface = 0.0;
  CHECK(total_loss(photo, weight, rest, rest, rest, off).value() == doctest::Approx(2.0));

  const Tensor one = Tensor::scalar(1.0);
  LossWeights table;
  table.depth = 1.0;
  table.normal = 0.1;
  table.surface = 0.1;
  CHECK(total_loss(one, one, one, one, one, table).value() == doctest::Approx(3.2).epsilon(1e-12));

  SUBCASE("monotone in each lambda") {
    for (double bump : {0.2, 0.7}) {
      LossWeights more = table;
      more.normal += bump;
      CHECK(total_loss(one, one, one, one, one, more).value() >
            total_loss(one, one, one, one, one, table).value());
    }
  }

  SUBCASE("non-finite components abort with the component name") {
    const Tensor nan = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
    try {
      total_loss(photo, weight, nan, zero, zero, table);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK(e.component == "depth");
    }
  }
}
