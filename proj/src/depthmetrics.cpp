#include "carfollow/depthmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::depthmetrics {

namespace {

void require_same_shape(const ingest::DepthMap& a, const ingest::DepthMap& b) {
  if (a.width != b.width || a.height != b.height || a.values.size() != b.values.size()) {
    throw ShapeError("depth maps differ in shape");
  }
  if (a.values.size() != std::size_t{a.width} * a.height) throw ShapeError("depth map value count mismatch");
  if (a.values.empty()) throw ShapeError("empty depth map");
}

}  // namespace

CalibrationFit fit_calibration(std::span<const DepthPair> pairs) {
  if (pairs.size() < 2) throw CalibrationError("calibration needs at least two samples");
  const double n = static_cast<double>(pairs.size());
  double mx = 0, my = 0;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.model_depth) || !std::isfinite(p.true_distance_m)) {
      throw CalibrationError("non-finite calibration sample");
    }
    mx += p.model_depth;
    my += p.true_distance_m;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& p : pairs) {
    const double dx = p.model_depth - mx;
    sxx += dx * dx;
    sxy += dx * (p.true_distance_m - my);
  }
  if (!(sxx > 0)) throw CalibrationError("model depth is constant; affine fit is undetermined");
  CalibrationFit fit;
  fit.scale = sxy / sxx;
  fit.offset = my - fit.scale * mx;
  double ss = 0;
  for (const auto& p : pairs) {
    const double r = p.true_distance_m - fit.apply(p.model_depth);
    ss += r * r;
  }
  fit.rmse_m = std::sqrt(ss / n);
  fit.n_samples = pairs.size();
  return fit;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("rmse inputs differ in length");
  if (pred.empty()) throw ShapeError("rmse of empty input");
  double ss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double rmse(const ingest::DepthMap& pred, const ingest::DepthMap& truth) {
  require_same_shape(pred, truth);
  return rmse(std::span<const double>(pred.values), std::span<const double>(truth.values));
}

std::string select_model(std::span<const ModelScore> scores) {
  if (scores.empty()) throw EmptyInputError("no model scores to select from");
  const ModelScore* best = &scores.front();
  for (const auto& s : scores.subspan(1)) {
    if (s.rmse_m < best->rmse_m) best = &s;
  }
  return best->model_id;
}

double loss_depth(const ingest::DepthMap& truth, const ingest::DepthMap& pred) {
  require_same_shape(truth, pred);
  double sum = 0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) sum += std::abs(truth.values[i] - pred.values[i]);
  return sum / static_cast<double>(truth.values.size());
}

double loss_grad(const ingest::DepthMap& truth, const ingest::DepthMap& pred) {
  require_same_shape(truth, pred);
  const std::uint32_t w = truth.width, h = truth.height;
  if (w < 2 || h < 2) throw ShapeError("gradient loss needs at least 2x2 maps");
  std::vector<double> err(truth.values.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = truth.values[i] - pred.values[i];
  auto e = [&](std::uint32_t r, std::uint32_t c) { return err[std::size_t{r} * w + c]; };
  double sum = 0;
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      const double gx = c + 1 < w ? e(r, c + 1) - e(r, c) : e(r, c) - e(r, c - 1);
      const double gy = r + 1 < h ? e(r + 1, c) - e(r, c) : e(r, c) - e(r - 1, c);
      sum += std::abs(gx) + std::abs(gy);
    }
  }
  return sum / static_cast<double>(err.size());
}

double ssim(const ingest::DepthMap& truth, const ingest::DepthMap& pred) {
  require_same_shape(truth, pred);
  const std::uint32_t w = truth.width, h = truth.height, k = kSsimWindow;
  if (w < k || h < k) throw ShapeError("SSIM needs maps of at least 7x7");
  const auto [lo, hi] = std::minmax_element(truth.values.begin(), truth.values.end());
  // A flat ground truth has no dynamic range; fall back to unit range so the
  // stabilisers stay positive.
  const double range = *hi > *lo ? *hi - *lo : 1.0;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const double count = static_cast<double>(k * k);

  double total = 0;
  std::size_t windows = 0;
  for (std::uint32_t r0 = 0; r0 + k <= h; ++r0) {
    for (std::uint32_t c0 = 0; c0 + k <= w; ++c0) {
      double mx = 0, my = 0;
      for (std::uint32_t r = r0; r < r0 + k; ++r) {
        for (std::uint32_t c = c0; c < c0 + k; ++c) {
          mx += truth.at(r, c);
          my += pred.at(r, c);
        }
      }
      mx /= count;
      my /= count;
      double vx = 0, vy = 0, cxy = 0;
      for (std::uint32_t r = r0; r < r0 + k; ++r) {
        for (std::uint32_t c = c0; c < c0 + k; ++c) {
          const double dx = truth.at(r, c) - mx;
          const double dy = pred.at(r, c) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      }
      vx /= count;
      vy /= count;
      cxy /= count;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

double loss_ssim(const ingest::DepthMap& truth, const ingest::DepthMap& pred, SsimForm form) {
  const double s = ssim(truth, pred);
  const double loss = form == SsimForm::shifted ? 1.0 - s / 2.0 : (1.0 - s) / 2.0;
  return std::clamp(loss, 0.0, 1.0);
}

double loss_silog(const ingest::DepthMap& truth, const ingest::DepthMap& pred) {
  require_same_shape(truth, pred);
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    if (!(truth.values[i] > 0) || !(pred.values[i] > 0)) throw DomainError("log loss needs positive depths");
    const double d = std::log(pred.values[i]) - std::log(truth.values[i]);
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(truth.values.size());
  return sum_sq / n - (sum * sum) / (2 * n * n);
}

double loss_total(const ingest::DepthMap& truth, const ingest::DepthMap& pred, double lambda, SsimForm form) {
  return lambda * loss_depth(truth, pred) + loss_grad(truth, pred) + loss_ssim(truth, pred, form);
}

DepthQualityReport quality_report(const ingest::DepthMap& truth, const ingest::DepthMap& pred, double lambda,
                                  SsimForm form) {
  DepthQualityReport r;
  r.rmse_m = rmse(pred, truth);
  r.l_depth = loss_depth(truth, pred);
  r.l_grad = loss_grad(truth, pred);
  r.l_ssim = loss_ssim(truth, pred, form);
  r.l_total = lambda * r.l_depth + r.l_grad + r.l_ssim;
  r.l_silog = loss_silog(truth, pred);
  r.lambda = lambda;
  return r;
}

DepthQualityReport combine_reports(std::span<const DepthQualityReport> reports,
                                   std::span<const std::size_t> pixels) {
  if (reports.empty()) throw EmptyInputError("no reports to combine");
  if (reports.size() != pixels.size()) throw ShapeError("report and pixel counts differ");
  DepthQualityReport out;
  out.lambda = reports.front().lambda;
  double total = 0, sq = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double w = static_cast<double>(pixels[i]);
    total += w;
    sq += w * reports[i].rmse_m * reports[i].rmse_m;
    out.l_depth += w * reports[i].l_depth;
    out.l_grad += w * reports[i].l_grad;
    out.l_ssim += w * reports[i].l_ssim;
    out.l_silog += w * reports[i].l_silog;
  }
  if (!(total > 0)) throw EmptyInputError("reports cover no pixels");
  out.rmse_m = std::sqrt(sq / total);
  out.l_depth /= total;
  out.l_grad /= total;
  out.l_ssim /= total;
  out.l_silog /= total;
  out.l_total = out.lambda * out.l_depth + out.l_grad + out.l_ssim;
  return out;
}

std::string format_report(const DepthQualityReport& r) {
  std::string out;
  auto kv = [&](const char* key, double v) { out += std::string(key) + "=" + text::format_double(v) + "\n"; };
  kv("rmse_m", r.rmse_m);
  kv("l_depth", r.l_depth);
  kv("l_grad", r.l_grad);
  kv("l_ssim", r.l_ssim);
  kv("l_total", r.l_total);
  kv("l_silog", r.l_silog);
  kv("lambda", r.lambda);
  return out;
}

DepthQualityReport parse_report(std::string_view contents) {
  std::map<std::string, double, std::less<>> kv;
  for (auto line : text::split(contents, '\n')) {
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("report line without '='");
    kv[std::string(line.substr(0, eq))] = text::parse_double(line.substr(eq + 1), line.substr(0, eq));
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("report missing ") + key);
    return it->second;
  };
  return {get("rmse_m"), get("l_depth"), get("l_grad"), get("l_ssim"), get("l_total"), get("l_silog"), get("lambda")};
}

PixelRegion distance_region(const ingest::DepthMap& depth, const ingest::BBox& b) {
  if (!(b.x_min >= 0 && b.y_min >= 0 && b.x_max <= depth.width && b.y_max <= depth.height && b.x_min < b.x_max &&
        b.y_min < b.y_max)) {
    throw GeometryError("bounding box outside depth map");
  }
  const double xa = b.x_min + 0.25 * b.width();
  const double xb = b.x_max - 0.25 * b.width();
  const double ya = b.y_max - b.height() / 3.0;
  const double yb = b.y_max;
  // pixel i covers [i, i+1) and is in the region when i + 0.5 lies in [a, b]
  auto first = [](double a) { return static_cast<std::int64_t>(std::ceil(a - 0.5)); };
  auto past_last = [](double b) { return static_cast<std::int64_t>(std::floor(b - 0.5)) + 1; };
  const auto c0 = std::max<std::int64_t>(0, first(xa));
  const auto c1 = std::min<std::int64_t>(depth.width, past_last(xb));
  const auto r0 = std::max<std::int64_t>(0, first(ya));
  const auto r1 = std::min<std::int64_t>(depth.height, past_last(yb));
  if (c1 <= c0 || r1 <= r0) throw GeometryError("distance region holds no pixel");
  return {static_cast<std::uint32_t>(c0), static_cast<std::uint32_t>(c1), static_cast<std::uint32_t>(r0),
          static_cast<std::uint32_t>(r1)};
}

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double bbox_distance(const ingest::DepthMap& depth, const ingest::BBox& bbox, const CalibrationFit& fit) {
  const auto region = distance_region(depth, bbox);
  std::vector<double> values;
  values.reserve(region.size());
  for (auto r = region.row_begin; r < region.row_end; ++r) {
    for (auto c = region.col_begin; c < region.col_end; ++c) values.push_back(depth.at(r, c));
  }
  return fit.apply(median(std::move(values)));
}

}  // namespace carfollow::depthmetrics
