#pragma once

// Depth calibration against lidar and depth-quality metrics.
//
// Metrics operate on two equally shaped maps: `truth` (y) and `pred` (ŷ).
// n is the pixel count.
//
//   l_depth = (1/n) Σ |y − ŷ|
//   l_grad  = (1/n) Σ |∂x e| + |∂y e|,   e = y − ŷ, forward differences,
//             backward difference in the last row/column
//   l_ssim  = 1 − SSIM/2                (SsimForm::shifted, default)
//           = (1 − SSIM)/2              (SsimForm::conventional)
//             clamped to [0, 1]; SSIM is the mean over all 7×7 windows with
//             C1 = (0.01 L)², C2 = (0.03 L)², L = max(y) − min(y)
//   l_total = λ l_depth + l_grad + l_ssim, λ = 0.1
//   l_silog = (1/n) Σ d² − (1/(2n²)) (Σ d)²,  d = ln ŷ − ln y

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "carfollow/ingest.hpp"

namespace carfollow::depthmetrics {

struct CalibrationFit {
  double scale = 1.0;   // α
  double offset = 0.0;  // β, meters
  double rmse_m = 0.0;
  std::size_t n_samples = 0;

  double apply(double model_depth) const { return scale * model_depth + offset; }
};

struct DepthPair {
  double model_depth = 0;
  double true_distance_m = 0;
};

// Least-squares affine fit true ≈ α·model + β. Throws CalibrationError for
// fewer than two samples or a constant predictor.
CalibrationFit fit_calibration(std::span<const DepthPair> pairs);

// Throws ShapeError on size mismatch or empty input.
double rmse(std::span<const double> pred, std::span<const double> truth);
double rmse(const ingest::DepthMap& pred, const ingest::DepthMap& truth);

struct ModelScore {
  std::string model_id;
  double rmse_m = 0;
};

// Lowest RMSE; first occurrence wins ties. Throws EmptyInputError.
std::string select_model(std::span<const ModelScore> scores);

inline constexpr double kDepthWeight = 0.1;  // λ
inline constexpr std::uint32_t kSsimWindow = 7;

enum class SsimForm { shifted, conventional };

double loss_depth(const ingest::DepthMap& truth, const ingest::DepthMap& pred);
double loss_grad(const ingest::DepthMap& truth, const ingest::DepthMap& pred);
double ssim(const ingest::DepthMap& truth, const ingest::DepthMap& pred);
double loss_ssim(const ingest::DepthMap& truth, const ingest::DepthMap& pred, SsimForm form = SsimForm::shifted);
double loss_silog(const ingest::DepthMap& truth, const ingest::DepthMap& pred);
double loss_total(const ingest::DepthMap& truth, const ingest::DepthMap& pred, double lambda = kDepthWeight,
                  SsimForm form = SsimForm::shifted);

struct DepthQualityReport {
  double rmse_m = 0;
  double l_depth = 0;
  double l_grad = 0;
  double l_ssim = 0;
  double l_total = 0;
  double l_silog = 0;
  double lambda = kDepthWeight;
};

DepthQualityReport quality_report(const ingest::DepthMap& truth, const ingest::DepthMap& pred,
                                  double lambda = kDepthWeight, SsimForm form = SsimForm::shifted);

// Pixel-count weighted average of per-frame reports. rmse is pooled over all
// pixels (sqrt of the mean of squared errors), not averaged.
DepthQualityReport combine_reports(std::span<const DepthQualityReport> reports, std::span<const std::size_t> pixels);

// key=value lines: rmse_m, l_depth, l_grad, l_ssim, l_total, l_silog, lambda
std::string format_report(const DepthQualityReport& report);
DepthQualityReport parse_report(std::string_view text);

// Lower-central region of a box: the middle half horizontally and the bottom
// third vertically. A pixel belongs to it when its centre does.
struct PixelRegion {
  std::uint32_t col_begin = 0, col_end = 0;  // half-open
  std::uint32_t row_begin = 0, row_end = 0;
  std::size_t size() const { return std::size_t{col_end - col_begin} * (row_end - row_begin); }
};

PixelRegion distance_region(const ingest::DepthMap& depth, const ingest::BBox& bbox);

// α·median(region) + β. Throws GeometryError when the box leaves the map or
// the region holds no pixel centre.
double bbox_distance(const ingest::DepthMap& depth, const ingest::BBox& bbox, const CalibrationFit& fit);

// Median with the usual mean-of-middle-pair rule for even counts.
double median(std::vector<double> values);

}  // namespace carfollow::depthmetrics
