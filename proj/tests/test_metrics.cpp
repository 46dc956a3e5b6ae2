#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "volskin/metrics.hpp"

using namespace volskin;

namespace {

// Deterministic textures shared with the reference-implementation run that
// produced the frozen SSIM values below (scikit-image, Gaussian weights,
// sigma 1.5, unit data range, no sample covariance).
constexpr int kW = 32, kH = 24;

Image3F smooth_target() {
  Image3F img(kW, kH);
  for (int y = 0; y < kH; ++y)
    for (int x = 0; x < kW; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y)[c] = static_cast<float>(0.5 + 0.35 * std::sin(0.37 * x + 0.53 * y + 0.4 * c));
  return img;
}

Image3F rough_texture() {
  Image3F img(kW, kH);
  for (int y = 0; y < kH; ++y)
    for (int x = 0; x < kW; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y)[c] =
            static_cast<float>(0.5 + 0.3 * std::sin(1.9 * x + 0.1 * c) * std::cos(1.3 * y));
  return img;
}

Image3F inverted(const Image3F& src) {
  Image3F img(src.width, src.height);
  for (size_t i = 0; i < src.pix.size(); ++i)
    img.pix[i] = static_cast<float>(1.0 - double(src.pix[i]));
  return img;
}

Image3F uniform(float v) {
  Image3F img(kW, kH);
  for (float& p : img.pix) p = v;
  return img;
}

}  // namespace

TEST_CASE("mse and psnr basics") {
  Image3F a = smooth_target();
  PsnrResult same = mse_psnr(a, a);
  CHECK(same.mse == 0.0);
  CHECK(same.psnr == 99.0);

  Image3F shifted(a.width, a.height);
  for (size_t i = 0; i < a.pix.size(); ++i) shifted.pix[i] = a.pix[i] + 0.1f;
  PsnrResult off = mse_psnr(a, shifted);
  CHECK(off.mse == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(off.psnr == doctest::Approx(20.0).epsilon(1e-6));

  PsnrResult extremes = mse_psnr(uniform(0.f), uniform(1.f));
  CHECK(extremes.mse == doctest::Approx(1.0));
  CHECK(extremes.psnr == doctest::Approx(0.0));
}

TEST_CASE("mse rejects mismatched dimensions") {
  Image3F a(8, 8), b(8, 9);
  CHECK_THROWS_AS(mse_psnr(a, b), std::invalid_argument);
}

TEST_CASE("ssim matches the reference implementation") {
  Image3F target = smooth_target();
  CHECK(ssim(target, target) == doctest::Approx(1.0).epsilon(1e-9));

  Image3F shifted(target.width, target.height);
  for (size_t i = 0; i < target.pix.size(); ++i)
    shifted.pix[i] = static_cast<float>(std::min(1.0, std::max(0.0, double(target.pix[i]) + 0.1)));
  CHECK(ssim(target, shifted) == doctest::Approx(0.979105423711).epsilon(1e-6));
  CHECK(ssim(target, shifted) > 0.9);

  CHECK(ssim(target, inverted(target)) == doctest::Approx(-0.820273188945).epsilon(1e-6));
  CHECK(ssim(target, inverted(target)) < 0.0);

  Image3F rough = rough_texture();
  CHECK(ssim(rough, inverted(rough)) == doctest::Approx(-0.960635622814).epsilon(1e-6));
  CHECK(ssim(target, rough) == doctest::Approx(0.015148051377).epsilon(1e-4));
}

TEST_CASE("ssim rejects images smaller than the window") {
  Image3F a(10, 16), b(10, 16);
  CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
}

TEST_CASE("depth error is a masked mean absolute difference") {
  Image1F gt(16, 16), pred(16, 16);
  ImageMask mask(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      gt.at(x, y) = 2.0f + 0.01f * x;
      pred.at(x, y) = gt.at(x, y);
      mask.at(x, y) = (x + y) % 2;
    }
  CHECK(depth_error(pred, gt, mask) == doctest::Approx(0.0));

  for (float& v : pred.pix) v += 0.1f;
  CHECK(*depth_error(pred, gt, mask) == doctest::Approx(0.1).epsilon(1e-6));

  ImageMask empty(16, 16);
  CHECK_FALSE(depth_error(pred, gt, empty).has_value());
}

TEST_CASE("report keeps the psnr/mse relation and fixed ordering") {
  MetricsReport report;
  report.revision = "test";
  report.config_hash = "deadbeef";
  report.seed = 7;
  report.views.push_back({0, 3, 0.01, -10.0 * std::log10(0.01), 0.9, 0.05});
  report.views.push_back({1, 3, 0.02, -10.0 * std::log10(0.02), 0.8, std::nullopt});
  CHECK(report.aggregate_psnr() ==
        doctest::Approx(-10.0 * std::log10(report.aggregate_mse())).epsilon(1e-12));
  const std::string machine = report.to_machine();
  CHECK(machine.find("meta.revision=test") < machine.find("view.0.cam3.mse"));
  CHECK(machine.find("view.0.cam3.mse") < machine.find("view.1.cam3.mse"));
  CHECK(machine.find("view.1.cam3.mse") < machine.find("agg.mse"));
  CHECK(machine.find("view.1.cam3.depth_err=undefined") != std::string::npos);

  const std::string again = report.to_machine();
  CHECK(machine == again);
}
