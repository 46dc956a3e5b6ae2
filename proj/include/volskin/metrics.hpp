#pragma once

#include <optional>
#include <string>
#include <vector>

#include "volskin/image.hpp"

namespace volskin {

struct PsnrResult {
  double mse = 0.0;
  double psnr = 0.0;  // -10 log10(mse) on [0,1] images, capped at 99 dB
};

// MSE over all pixels and channels; inputs must share dimensions and live in
// [0, 1].
PsnrResult mse_psnr(const Image3F& pred, const Image3F& target);

// Structural similarity: luma grayscale (0.299, 0.587, 0.114), 11x11 Gaussian
// window sigma 1.5, C1 = 0.01^2, C2 = 0.03^2 on unit range, mean over valid
// windows. Rejects images smaller than the window.
double ssim(const Image3F& pred, const Image3F& target);

// Mean |pred - gt| over mask-true pixels, scene units; nullopt on an empty
// mask (undefined-metric sentinel).
std::optional<double> depth_error(const Image1F& pred, const Image1F& gt, const ImageMask& mask);

struct ViewMetrics {
  int frame = 0;
  int camera = 0;
  double mse = 0.0, psnr = 0.0, ssim = 0.0;
  std::optional<double> depth_err;
};

// Per-view metrics plus aggregates and run metadata. Machine format is one
// key=value line per field: the meta block, then views ordered by
// (frame, camera), then the aggregate block.
struct MetricsReport {
  std::string revision;
  std::string config_hash;
  uint64_t seed = 0;
  std::string depth_error_definition = "masked mean absolute error vs dataset depth";
  std::vector<ViewMetrics> views;

  double aggregate_mse() const;
  double aggregate_psnr() const;
  double aggregate_ssim() const;
  std::optional<double> aggregate_depth_error() const;

  std::string to_text() const;
  std::string to_machine() const;
};

}  // namespace volskin
