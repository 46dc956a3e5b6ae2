#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "volskin/grad_check.hpp"
#include "volskin/render.hpp"

using namespace volskin;

namespace {

Camera test_camera() {
  Camera cam;
  cam.width = 64;
  cam.height = 64;
  cam.fx = cam.fy = 80.0;
  cam.cx = 32.0;
  cam.cy = 32.0;
  return cam;
}

RaySamples uniform_samples(double near, double far, int count, double sigma, const Vec3& color) {
  RaySamples s;
  const double bin = (far - near) / count;
  for (int j = 0; j < count; ++j) {
    s.tau.push_back(near + j * bin);
    s.sigma.push_back(sigma);
    s.color.push_back(color);
  }
  s.delta = deltas_from(s.tau, far);
  return s;
}

}  // namespace

TEST_CASE("center pixel ray follows the optical axis") {
  Camera cam = test_camera();
  // cx = 32 means pixel 31 has center offset +0.5 and pixel 32 -0.5; shift the
  // principal point onto the center of pixel 32 instead.
  cam.cx = 32.5;
  cam.cy = 32.5;
  Ray ray = make_ray(cam, 32, 32, 0);
  CHECK((ray.dir - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("a pixel one focal length off-center makes a 45 degree ray") {
  Camera cam = test_camera();
  cam.cx = 0.5;  // pixel 80's center sits exactly one focal length right
  Ray ray = make_ray(cam, 80, 0, 0);
  (void)ray;
  Camera wide = test_camera();
  wide.width = 256;
  wide.cx = 0.5;
  wide.cy = 0.5;
  Ray diag = make_ray(wide, 80, 0, 0);
  const double angle = std::atan2(diag.dir.x(), diag.dir.z());
  CHECK(angle == doctest::Approx(M_PI / 4).epsilon(1e-12));
}

TEST_CASE("adjacent pixels are about 1/f radians apart") {
  Camera cam = test_camera();
  Ray a = make_ray(cam, 32, 32, 0);
  Ray b = make_ray(cam, 33, 32, 0);
  const double angle = std::acos(std::clamp(a.dir.dot(b.dir), -1.0, 1.0));
  CHECK(angle == doctest::Approx(1.0 / cam.fx).epsilon(0.01));
}

TEST_CASE("out-of-bounds pixels are rejected") {
  Camera cam = test_camera();
  CHECK_THROWS_AS(make_ray(cam, 64, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(make_ray(cam, 0, -1, 0), std::out_of_range);
}

TEST_CASE("stratified sampling") {
  Ray ray;
  ray.near = 1.0;
  ray.far = 3.0;

  SUBCASE("midpoints when rng is disabled") {
    const auto tau = sample_stratified(ray, 8, nullptr);
    for (int j = 0; j < 8; ++j)
      CHECK(tau[j] == doctest::Approx(1.0 + (j + 0.5) * 2.0 / 8).epsilon(1e-12));
  }

  SUBCASE("draws stay inside their bins and increase") {
    RngState rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      const auto tau = sample_stratified(ray, 64, &rng);
      CHECK(tau.front() >= ray.near);
      CHECK(tau.back() <= ray.far);
      for (size_t j = 1; j < tau.size(); ++j) CHECK(tau[j] > tau[j - 1]);
    }
  }

  SUBCASE("mean spacing over [1,3] with 64 samples") {
    RngState rng(7);
    const auto tau = sample_stratified(ray, 64, &rng);
    const auto delta = deltas_from(tau, ray.far);
    double mean = 0.0;
    for (size_t j = 0; j + 1 < delta.size(); ++j) mean += delta[j];
    mean /= (delta.size() - 1);
    CHECK(mean == doctest::Approx(2.0 / 64).epsilon(0.05));
  }
}

TEST_CASE("composite on empty space is black with zero depth") {
  RaySamples s = uniform_samples(1.0, 3.0, 16, 0.0, Vec3(1, 1, 1));
  const CompositeResult out = composite(s);
  CHECK(out.color.norm() == 0.0);
  CHECK(out.depth == 0.0);
  CHECK(out.opacity == 0.0);
  CHECK(out.opacity < 0.1);  // flagged as background
}

TEST_CASE("single sample with sigma*delta = ln 2 contributes alpha one half") {
  RaySamples s;
  s.tau = {1.0};
  s.delta = {1.0};
  s.sigma = {std::log(2.0)};
  s.color = {Vec3(1, 0, 0)};
  const CompositeResult out = composite(s);
  CHECK(out.color.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.color.y() == 0.0);
  CHECK(out.color.z() == 0.0);
}

TEST_CASE("quadrature is exact for constant fields at any sample count") {
  RngState rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const double near = rng.uniform(0.5, 1.5);
    const double far = near + rng.uniform(0.5, 2.0);
    const double sigma = rng.uniform(0.0, 3.0);
    const Vec3 color(rng.uniform(), rng.uniform(), rng.uniform());
    for (int count : {1, 8, 64}) {
      const RaySamples s = uniform_samples(near, far, count, sigma, color);
      const CompositeResult out = composite(s);
      const Vec3 expect = color * (1.0 - std::exp(-sigma * (far - near)));
      CHECK((out.color - expect).norm() < 1e-6);
    }
  }
}

TEST_CASE("expected depth lands on an opaque wall") {
  RngState rng(13);
  for (int rep = 0; rep < 1000; ++rep) {
    const double near = rng.uniform(0.2, 1.0);
    const double far = near + rng.uniform(1.0, 3.0);
    const double wall = rng.uniform(near + 0.1, far - 0.1);
    const int count = 64;
    RaySamples s = uniform_samples(near, far, count, 0.0, Vec3(1, 1, 1));
    for (int j = 0; j < count; ++j)
      if (s.tau[j] >= wall) s.sigma[j] = 1e4;
    const CompositeResult out = composite(s);
    const double spacing = (far - near) / count;
    CHECK(std::fabs(out.depth - wall) <= spacing);
  }
}

TEST_CASE("two half-opaque surfaces weight depth 0.5/0.25") {
  RaySamples s;
  const double tau1 = 1.0, tau2 = 2.0;
  s.tau = {tau1, tau2};
  s.delta = {1.0, 1.0};
  s.sigma = {std::log(2.0), std::log(2.0)};
  s.color = {Vec3(1, 1, 1), Vec3(1, 1, 1)};
  const CompositeResult out = composite(s);
  CHECK(out.depth == doctest::Approx(0.5 * tau1 + 0.25 * tau2).epsilon(1e-12));
}

TEST_CASE("energy and depth bounds, occlusion monotonicity") {
  RngState rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const double near = 0.5, far = 3.5;
    const int count = 32;
    RaySamples s = uniform_samples(near, far, count, 0.0, Vec3(0, 0, 0));
    double max_color = 0.0;
    for (int j = 0; j < count; ++j) {
      s.sigma[j] = rng.uniform(0.0, 4.0);
      s.color[j] = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
      max_color = std::max(max_color, s.color[j].maxCoeff());
    }
    const CompositeResult out = composite(s);
    CHECK(out.opacity >= 0.0);
    CHECK(out.opacity <= 1.0);
    CHECK(out.color.maxCoeff() <= max_color + 1e-12);
    CHECK(out.depth >= 0.0);
    CHECK(out.depth <= far);

    // Raising one density never increases any later sample's weight.
    const int bump = rng.uniform_int(count - 1);
    auto weights_of = [&](const RaySamples& rs) {
      std::vector<double> w(count);
      double optical = 0.0;
      for (int j = 0; j < count; ++j) {
        w[j] = std::exp(-optical) * (1.0 - std::exp(-rs.sigma[j] * rs.delta[j]));
        optical += rs.sigma[j] * rs.delta[j];
      }
      return w;
    };
    const auto before = weights_of(s);
    RaySamples bumped = s;
    bumped.sigma[bump] += 1.0;
    const auto after = weights_of(bumped);
    for (int j = bump + 1; j < count; ++j) CHECK(after[j] <= before[j] + 1e-12);
  }
}

TEST_CASE("fully opaque rays keep depth within the sampled span") {
  RngState rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    const double near = 0.5, far = 2.5;
    RaySamples s = uniform_samples(near, far, 64, rng.uniform(5.0, 50.0), Vec3(1, 1, 1));
    const CompositeResult out = composite(s);
    CHECK(out.opacity > 0.99);
    CHECK(out.depth >= near);
    CHECK(out.depth <= far);
  }
}

TEST_CASE("batched composite matches the per-ray reference") {
  RngState rng(23);
  const int rays = 7, samples = 16;
  ad::Tensor sigma({rays, samples});
  ad::Tensor colors({rays * samples, 3});
  ad::Tensor tau({rays, samples});
  ad::Tensor delta({rays, samples});
  std::vector<RaySamples> reference(rays);
  for (int r = 0; r < rays; ++r) {
    Ray ray;
    ray.near = 0.5;
    ray.far = 3.0;
    const auto taus = sample_stratified(ray, samples, &rng);
    const auto deltas = deltas_from(taus, ray.far);
    for (int j = 0; j < samples; ++j) {
      const double sv = rng.uniform(0.0, 3.0);
      const Vec3 cv(rng.uniform(), rng.uniform(), rng.uniform());
      sigma.data()[r * samples + j] = sv;
      tau.data()[r * samples + j] = taus[j];
      delta.data()[r * samples + j] = deltas[j];
      for (int i = 0; i < 3; ++i) colors.data()[(r * samples + j) * 3 + i] = cv[i];
      reference[r].tau.push_back(taus[j]);
      reference[r].sigma.push_back(sv);
      reference[r].color.push_back(cv);
      reference[r].delta.push_back(deltas[j]);
    }
  }
  const CompositeTensors out = composite_batch(sigma, colors, tau, delta);
  for (int r = 0; r < rays; ++r) {
    const CompositeResult ref = composite(reference[r]);
    for (int i = 0; i < 3; ++i) CHECK(out.color.at(r, i) == doctest::Approx(ref.color[i]).epsilon(1e-12));
    CHECK(out.depth.at(r) == doctest::Approx(ref.depth).epsilon(1e-12));
    CHECK(out.opacity.at(r) == doctest::Approx(ref.opacity).epsilon(1e-12));
  }
}

TEST_CASE("composited color gradient w.r.t. density matches finite differences") {
  RngState rng(29);
  const int rays = 2, samples = 8;
  ad::Tensor colors({rays * samples, 3});
  ad::Tensor tau({rays, samples});
  ad::Tensor delta({rays, samples});
  ad::Tensor sigma0({rays, samples});
  for (int r = 0; r < rays; ++r)
    for (int j = 0; j < samples; ++j) {
      tau.data()[r * samples + j] = 0.5 + 0.25 * j;
      delta.data()[r * samples + j] = 0.25;
      sigma0.data()[r * samples + j] = rng.uniform(0.1, 2.0);
      for (int i = 0; i < 3; ++i)
        colors.data()[(r * samples + j) * 3 + i] = rng.uniform(0.2, 0.9);
    }
  auto f = [&](ad::Tape&, const ad::Tensor& sig) {
    const CompositeTensors out =
        composite_batch(ad::reshape(sig, {rays, samples}), colors, tau, delta);
    return ad::sum(ad::add(out.color, ad::reshape(out.depth, {rays, 1})));
  };
  CHECK(ad::grad_check(f, ad::reshape(sigma0, {rays * samples}), 1e-5).max_rel_err < 1e-3);
}

TEST_CASE("density normal of an isotropic gaussian points outward") {
  const Vec3 mu(0.3, -0.2, 0.5);
  auto density = [&](const Vec3& x) { return 4.0 * std::exp(-(x - mu).squaredNorm() / 0.18); };
  RngState rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    Vec3 x = mu + Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() * 0.4;
    const auto n = density_normal_fd(density, x, 1e-3);
    REQUIRE(n.has_value());
    CHECK(n->norm() == doctest::Approx(1.0).epsilon(1e-12));
    const Vec3 outward = (x - mu).normalized();
    CHECK((*n - outward).norm() < 1e-5);
  }
}

TEST_CASE("vanishing density gradient returns the sentinel") {
  auto flat = [](const Vec3&) { return 0.7; };
  CHECK_FALSE(density_normal_fd(flat, Vec3(0, 0, 0), 1e-3).has_value());
}

TEST_CASE("surface point arithmetic and clamping") {
  Ray ray;
  ray.origin = Vec3(0, 0, 0);
  ray.dir = Vec3(0, 0, 1);
  ray.near = 0.5;
  ray.far = 4.0;
  CHECK((surface_point(ray, 2.0) - Vec3(0, 0, 2)).norm() == 0.0);
  CHECK((surface_point(ray, ray.near) - Vec3(0, 0, 0.5)).norm() == 0.0);
  int clamps = 0;
  const Vec3 clamped = surface_point(ray, 9.0, &clamps);
  CHECK(clamps == 1);
  CHECK((clamped - Vec3(0, 0, 4)).norm() == 0.0);
}
