#include "volskin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace volskin {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kSigmaWindow = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same_dims(const char* op, int wa, int ha, int wb, int hb) {
  if (wa != wb || ha != hb)
    throw std::invalid_argument(std::string(op) + ": image dimensions " + std::to_string(wa) +
                                "x" + std::to_string(ha) + " vs " + std::to_string(wb) + "x" +
                                std::to_string(hb));
}

std::vector<double> luma(const Image3F& img) {
  std::vector<double> out(static_cast<size_t>(img.width) * img.height);
  for (size_t i = 0; i < out.size(); ++i) {
    const float* p = img.pix.data() + i * 3;
    out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

}  // namespace

PsnrResult mse_psnr(const Image3F& pred, const Image3F& target) {
  require_same_dims("mse_psnr", pred.width, pred.height, target.width, target.height);
  double acc = 0.0;
  for (size_t i = 0; i < pred.pix.size(); ++i) {
    const double d = double(pred.pix[i]) - double(target.pix[i]);
    acc += d * d;
  }
  PsnrResult out;
  out.mse = acc / pred.pix.size();
  out.psnr = out.mse < 1e-10 ? 99.0 : -10.0 * std::log10(out.mse);
  return out;
}

double ssim(const Image3F& pred, const Image3F& target) {
  require_same_dims("ssim", pred.width, pred.height, target.width, target.height);
  const int w = pred.width, h = pred.height;
  if (w < kWindow || h < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  double kernel1d[kWindow];
  double ksum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kRadius;
    kernel1d[i] = std::exp(-d * d / (2.0 * kSigmaWindow * kSigmaWindow));
    ksum += kernel1d[i];
  }
  for (double& k : kernel1d) k /= ksum;

  const std::vector<double> x = luma(pred);
  const std::vector<double> y = luma(target);

  double total = 0.0;
  long count = 0;
  for (int cy = kRadius; cy < h - kRadius; ++cy) {
    for (int cx = kRadius; cx < w - kRadius; ++cx) {
      double ux = 0, uy = 0, uxx = 0, uyy = 0, uxy = 0;
      for (int dy = -kRadius; dy <= kRadius; ++dy) {
        const double wy = kernel1d[dy + kRadius];
        const size_t row = static_cast<size_t>(cy + dy) * w + cx;
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const double wgt = wy * kernel1d[dx + kRadius];
          const double xv = x[row + dx];
          const double yv = y[row + dx];
          ux += wgt * xv;
          uy += wgt * yv;
          uxx += wgt * xv * xv;
          uyy += wgt * yv * yv;
          uxy += wgt * xv * yv;
        }
      }
      const double vx = uxx - ux * ux;
      const double vy = uyy - uy * uy;
      const double vxy = uxy - ux * uy;
      const double s = ((2.0 * ux * uy + kC1) * (2.0 * vxy + kC2)) /
                       ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
      total += s;
      ++count;
    }
  }
  return total / count;
}

std::optional<double> depth_error(const Image1F& pred, const Image1F& gt, const ImageMask& mask) {
  require_same_dims("depth_error", pred.width, pred.height, gt.width, gt.height);
  require_same_dims("depth_error", pred.width, pred.height, mask.width, mask.height);
  double acc = 0.0;
  long n = 0;
  for (size_t i = 0; i < mask.pix.size(); ++i) {
    if (!mask.pix[i]) continue;
    acc += std::fabs(double(pred.pix[i]) - double(gt.pix[i]));
    ++n;
  }
  if (n == 0) return std::nullopt;
  return acc / n;
}

double MetricsReport::aggregate_mse() const {
  double acc = 0.0;
  for (const ViewMetrics& v : views) acc += v.mse;
  return views.empty() ? 0.0 : acc / views.size();
}

double MetricsReport::aggregate_psnr() const {
  const double m = aggregate_mse();
  return m < 1e-10 ? 99.0 : -10.0 * std::log10(m);
}

double MetricsReport::aggregate_ssim() const {
  double acc = 0.0;
  for (const ViewMetrics& v : views) acc += v.ssim;
  return views.empty() ? 0.0 : acc / views.size();
}

std::optional<double> MetricsReport::aggregate_depth_error() const {
  double acc = 0.0;
  long n = 0;
  for (const ViewMetrics& v : views)
    if (v.depth_err) {
      acc += *v.depth_err;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return acc / n;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "evaluation report (revision " << revision << ", config " << config_hash << ", seed "
     << seed << ")\n";
  os << "depth error = " << depth_error_definition << "\n";
  os << "frame cam      mse     psnr     ssim   depth_err\n";
  for (const ViewMetrics& v : views) {
    char line[160];
    std::snprintf(line, sizeof(line), "%5d %3d %.6f %8.3f %8.4f   %s\n", v.frame, v.camera, v.mse,
                  v.psnr, v.ssim, v.depth_err ? fmt(*v.depth_err).c_str() : "n/a");
    os << line;
  }
  os << "aggregate: mse " << fmt(aggregate_mse()) << "  psnr " << fmt(aggregate_psnr())
     << "  ssim " << fmt(aggregate_ssim()) << "  depth_err "
     << (aggregate_depth_error() ? fmt(*aggregate_depth_error()) : "n/a") << "  views "
     << views.size() << "\n";
  return os.str();
}

std::string MetricsReport::to_machine() const {
  std::ostringstream os;
  os << "meta.revision=" << revision << "\n";
  os << "meta.config_hash=" << config_hash << "\n";
  os << "meta.seed=" << seed << "\n";
  os << "meta.depth_error_def=" << depth_error_definition << "\n";
  for (const ViewMetrics& v : views) {
    std::string key = "view." + std::to_string(v.frame) + ".cam" + std::to_string(v.camera);
    os << key << ".mse=" << fmt(v.mse) << "\n";
    os << key << ".psnr=" << fmt(v.psnr) << "\n";
    os << key << ".ssim=" << fmt(v.ssim) << "\n";
    os << key << ".depth_err=" << (v.depth_err ? fmt(*v.depth_err) : "undefined") << "\n";
  }
  os << "agg.mse=" << fmt(aggregate_mse()) << "\n";
  os << "agg.psnr=" << fmt(aggregate_psnr()) << "\n";
  os << "agg.ssim=" << fmt(aggregate_ssim()) << "\n";
  os << "agg.depth_err="
     << (aggregate_depth_error() ? fmt(*aggregate_depth_error()) : "undefined") << "\n";
  os << "agg.views=" << views.size() << "\n";
  return os.str();
}

}  // namespace volskin
