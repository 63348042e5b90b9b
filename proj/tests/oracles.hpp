#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Each one is written the slow, obvious way and shares no code with
// the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "carfollow/gbt.hpp"
#include "carfollow/ingest.hpp"
#include "carfollow/leadvehicle.hpp"
#include "carfollow/synth.hpp"

namespace oracle {

using carfollow::ingest::DepthMap;

inline DepthMap random_map(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  DepthMap m{w, h, std::vector<double>(std::size_t{w} * h)};
  for (auto& v : m.values) v = u(rng);
  return m;
}

inline double at(const DepthMap& m, int r, int c) { return m.values[static_cast<std::size_t>(r) * m.width + c]; }

inline double loss_depth(const DepthMap& y, const DepthMap& p) {
  double s = 0;
  for (int r = 0; r < static_cast<int>(y.height); ++r) {
    for (int c = 0; c < static_cast<int>(y.width); ++c) s += std::fabs(at(y, r, c) - at(p, r, c));
  }
  return s / (double(y.width) * y.height);
}

// Gradients of y and p taken separately, then subtracted.
inline double loss_grad(const DepthMap& y, const DepthMap& p) {
  const int w = static_cast<int>(y.width), h = static_cast<int>(y.height);
  auto dx = [&](const DepthMap& m, int r, int c) { return c + 1 < w ? at(m, r, c + 1) - at(m, r, c) : at(m, r, c) - at(m, r, c - 1); };
  auto dy = [&](const DepthMap& m, int r, int c) { return r + 1 < h ? at(m, r + 1, c) - at(m, r, c) : at(m, r, c) - at(m, r - 1, c); };
  double s = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) s += std::fabs(dx(y, r, c) - dx(p, r, c)) + std::fabs(dy(y, r, c) - dy(p, r, c));
  }
  return s / (double(w) * h);
}

// Raw-moment SSIM: E[xy] − E[x]E[y] instead of centred sums.
inline double ssim(const DepthMap& y, const DepthMap& p) {
  const int w = static_cast<int>(y.width), h = static_cast<int>(y.height), k = 7;
  double lo = y.values[0], hi = y.values[0];
  for (double v : y.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double L = hi > lo ? hi - lo : 1.0;
  const double c1 = 0.0001 * L * L, c2 = 0.0009 * L * L;
  double total = 0;
  int windows = 0;
  for (int r0 = 0; r0 + k <= h; ++r0) {
    for (int c0 = 0; c0 + k <= w; ++c0) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int r = r0; r < r0 + k; ++r) {
        for (int c = c0; c < c0 + k; ++c) {
          const double a = at(y, r, c), b = at(p, r, c);
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      }
      const double n = k * k;
      const double mx = sx / n, my = sy / n;
      const double vx = sxx / n - mx * mx, vy = syy / n - my * my, cxy = sxy / n - mx * my;
      total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / windows;
}

inline double loss_ssim(const DepthMap& y, const DepthMap& p) { return std::clamp(1.0 - ssim(y, p) / 2.0, 0.0, 1.0); }

// Variance-of-log-differences form: Var(d) + ½·mean(d)², identical to
// (1/n)Σd² − (1/(2n²))(Σd)².
inline double loss_silog(const DepthMap& y, const DepthMap& p) {
  const std::size_t n = y.values.size();
  std::vector<double> d(n);
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = std::log(p.values[i] / y.values[i]);
    mean += d[i];
  }
  mean /= double(n);
  double var = 0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= double(n);
  return var + 0.5 * mean * mean;
}

// Scanline test: intersect the horizontal line through p with the two
// triangle edges that span it and check p.x against that interval.
inline bool scanline_inside(carfollow::leadvehicle::Point p, const carfollow::leadvehicle::LaneTriangle& t) {
  const auto a = t.apex, l = t.left_base, r = t.right_base;
  if (p.y < a.y || p.y > l.y) return false;  // apex above, flat base below
  if (p.y == l.y) return p.x >= l.x && p.x <= r.x;  // the base row is the base edge
  auto x_at = [&](carfollow::leadvehicle::Point top, carfollow::leadvehicle::Point bottom) {
    return top.x + (p.y - top.y) * (bottom.x - top.x) / (bottom.y - top.y);
  };
  const double xl = x_at(a, l), xr = x_at(a, r);
  return p.x >= xl && p.x <= xr;
}

// Two-sided Student-t p-value by Simpson integration of the density over
// [0, |t|]: p = 1 − 2∫₀^|t| f(x) dx.
inline double student_t_p_numeric(double t, double df, int intervals = 200000) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double b = std::fabs(t), hstep = b / intervals;
  double s = f(0) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4 : 2) * f(i * hstep);
  return 1 - 2 * s * hstep / 3;
}

// Plain-loop evaluation of a tree.
inline double tree_value(const carfollow::gbt::Tree& tree, const std::vector<double>& x) {
  int i = 0;
  while (tree.nodes[i].feature >= 0) {
    const auto& n = tree.nodes[i];
    i = x[n.feature] < n.threshold ? n.left : n.right;
  }
  return tree.nodes[i].leaf_weight;
}

struct BestSplit {
  bool found = false;
  double gain = -std::numeric_limits<double>::infinity();
};

// Squared-error split gain by direct summation over the rows of a node.
inline double split_gain(const std::vector<std::vector<double>>& x, const std::vector<double>& g,
                         const std::vector<std::size_t>& rows, int feature, double threshold, double lambda) {
  double gl = 0, gr = 0, hl = 0, hr = 0;
  for (auto r : rows) {
    if (x[r][feature] < threshold) {
      gl += g[r];
      hl += 1;
    } else {
      gr += g[r];
      hr += 1;
    }
  }
  const double G = gl + gr, H = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - G * G / (H + lambda));
}

// Every midpoint between distinct values of every feature, every row
// partition evaluated from scratch.
inline BestSplit exhaustive_best(const std::vector<std::vector<double>>& x, const std::vector<double>& g,
                                 const std::vector<std::size_t>& rows, double lambda, double min_child_weight) {
  BestSplit best;
  const int cols = static_cast<int>(x.front().size());
  for (int f = 0; f < cols; ++f) {
    std::vector<double> vals;
    for (auto r : rows) vals.push_back(x[r][f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double thr = vals[i] + (vals[i + 1] - vals[i]) / 2;
      double nl = 0;
      for (auto r : rows) nl += x[r][f] < thr;
      if (nl < min_child_weight || double(rows.size()) - nl < min_child_weight) continue;
      const double gain = split_gain(x, g, rows, f, thr, lambda);
      if (gain > best.gain) {
        best.found = true;
        best.gain = gain;
      }
    }
  }
  return best;
}

// Replays training with the model's own trees and checks, node by node, that
// each split is a best split by exhaustive enumeration, that leaves appear
// only where no admissible split gains anything, and that leaf weights are
// −G/(H+λ). Returns the number of violations.
inline int check_against_enumeration(const carfollow::gbt::Dataset& ds, const carfollow::gbt::TrainParams& params,
                                     const carfollow::gbt::BoostedModel& model) {
  std::vector<std::vector<double>> x(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) x[r].assign(ds.row(r).begin(), ds.row(r).end());
  std::vector<double> pred(ds.rows(), params.base_score), g(ds.rows());
  int violations = 0;
  auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)}); };

  for (const auto& tree : model.trees) {
    for (std::size_t r = 0; r < ds.rows(); ++r) g[r] = pred[r] - ds.target[r];
    std::vector<std::pair<int, std::vector<std::size_t>>> stack;
    std::vector<std::size_t> all(ds.rows());
    for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
    std::vector<int> depth(tree.nodes.size(), 0);
    stack.push_back({0, all});
    while (!stack.empty()) {
      auto [id, rows] = std::move(stack.back());
      stack.pop_back();
      const auto& node = tree.nodes[id];
      double G = 0, sq = 0;
      for (auto r : rows) {
        G += g[r];
        sq += g[r] * g[r];
      }
      const double floor = 1e-12 * sq;
      BestSplit best;
      if (depth[id] < params.max_depth) best = exhaustive_best(x, g, rows, params.reg_lambda, params.min_child_weight);
      if (node.feature < 0) {
        if (best.found && best.gain > floor * (1 + 1e-9) + 1e-300) ++violations;
        if (!close(node.leaf_weight, -G / (double(rows.size()) + params.reg_lambda))) ++violations;
        continue;
      }
      if (!best.found) {
        ++violations;
        continue;
      }
      const double gain = split_gain(x, g, rows, node.feature, node.threshold, params.reg_lambda);
      if (gain < best.gain - 1e-9 * std::max(1.0, std::fabs(best.gain))) ++violations;
      if (!close(gain, node.gain)) ++violations;
      // the threshold must be the midpoint of two adjacent distinct values
      double below = -INFINITY, above = INFINITY;
      std::vector<std::size_t> left, right;
      for (auto r : rows) {
        const double v = x[r][node.feature];
        if (v < node.threshold) {
          below = std::max(below, v);
          left.push_back(r);
        } else {
          above = std::min(above, v);
          right.push_back(r);
        }
      }
      if (left.empty() || right.empty() || node.threshold != below + (above - below) / 2) ++violations;
      depth[node.left] = depth[node.right] = depth[id] + 1;
      stack.push_back({node.left, left});
      stack.push_back({node.right, right});
    }
    for (std::size_t r = 0; r < ds.rows(); ++r) pred[r] += params.learning_rate * tree_value(tree, x[r]);
  }
  return violations;
}

// Random piecewise-constant profile with segments in [min_dur, max_dur].
inline carfollow::synth::DriverProfile random_profile(std::mt19937_64& rng, double total, double min_dur,
                                                      double max_dur, double max_accel) {
  std::uniform_real_distribution<double> dur(min_dur, max_dur), acc(-max_accel, max_accel);
  carfollow::synth::DriverProfile p;
  double used = 0;
  while (used < total) {
    double d = std::round(dur(rng) * 10) / 10;
    if (used + d > total) d = total - used;
    p.accel_segments.push_back({d, std::round(acc(rng) * 100) / 100});
    used += d;
  }
  return p;
}

}  // namespace oracle
