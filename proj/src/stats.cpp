#include "carfollow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::stats {

namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("sample holds a non-finite value");
  }
}

int canonical_rank(const ingest::DriverGroup& g) {
  using Kind = ingest::DriverGroup::Kind;
  switch (g.kind) {
    case Kind::elderly_woman: return 0;
    case Kind::elderly_man: return 1;
    case Kind::young_man_1: return 2;
    case Kind::young_man_2: return 3;
    case Kind::other: return 4;
  }
  return 4;
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 100000;
  const double qab = a + b, qap = a + 1, qam = a - 1;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw DomainError("incomplete beta continued fraction did not converge");
}

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of empty sample");
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw DataError("variance needs at least two values");
  const double m = mean(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

double silverman_bandwidth(std::span<const double> values) {
  const double sd = std::sqrt(sample_variance(values));
  return 1.06 * sd * std::pow(static_cast<double>(values.size()), -0.2);
}

std::vector<DensityPoint> density_estimate(std::span<const double> values, std::optional<double> bandwidth,
                                           std::size_t grid_points) {
  if (values.size() < 2) throw DataError("density estimate needs at least two values");
  require_finite(values);
  if (grid_points < 2) throw ConfigError("density grid needs at least two points");
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(values);
  if (!(h > 0) || !std::isfinite(h)) throw DataError("bandwidth must be positive (constant sample?)");

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it - 3 * h;
  const double hi = *hi_it + 3 * h;
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2 * std::numbers::pi));

  std::vector<DensityPoint> grid(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double x = i + 1 == grid_points ? hi : lo + step * static_cast<double>(i);
    double sum = 0;
    for (double v : values) {
      const double z = (x - v) / h;
      sum += std::exp(-0.5 * z * z);
    }
    grid[i] = {x, norm * sum};
  }
  return grid;
}

bool variance_rule(std::span<const double> a, std::span<const double> b) {
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  if (va == 0 && vb == 0) return true;
  if (va == 0 || vb == 0) return false;
  return std::max(va, vb) / std::min(va, vb) <= kVarianceRatio;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw DomainError("incomplete beta needs positive shape parameters");
  if (!(x >= 0 && x <= 1)) throw DomainError("incomplete beta argument outside [0,1]");
  if (x == 0) return 0;
  if (x == 1) return 1;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1) / (a + b + 2)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw DomainError("degrees of freedom must be positive");
  if (std::isnan(t)) throw DomainError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0) return 1.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2, 0.5, x), 0.0, 1.0);
}

TestResult t_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) throw DataError("t-test needs at least two values per group");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0,1)");
  require_finite(a);
  require_finite(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a), vb = sample_variance(b);

  TestResult r;
  r.pooled = variance_rule(a, b);
  double se = 0;
  if (r.pooled) {
    r.df = na + nb - 2;
    const double sp2 = ((na - 1) * va + (nb - 1) * vb) / r.df;
    se = std::sqrt(sp2 * (1 / na + 1 / nb));
  } else {
    const double qa = va / na, qb = vb / nb;
    se = std::sqrt(qa + qb);
    r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1) + qb * qb / (nb - 1));
  }
  const double diff = ma - mb;
  if (se == 0) {
    r.t_stat = diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  } else {
    r.t_stat = diff / se;
  }
  r.p_value = student_t_two_sided_p(r.t_stat, r.df);
  r.decision = r.p_value < alpha ? Decision::reject : Decision::fail_to_reject;
  return r;
}

std::vector<ComparisonRow> compare_groups(std::span<const GroupSample> samples, double alpha) {
  if (samples.size() < 2) throw DataError("group comparison needs at least two groups");
  std::vector<const GroupSample*> ordered;
  for (const auto& s : samples) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(), [](const GroupSample* x, const GroupSample* y) {
    return canonical_rank(x->group) < canonical_rank(y->group);
  });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (ordered[i]->group == ordered[j]->group) {
        throw DataError("group '" + ordered[i]->group.id() + "' appears twice");
      }
    }
  }

  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      rows.push_back({ordered[i]->group.display_name() + " vs " + ordered[j]->group.display_name(),
                      t_test(ordered[i]->values, ordered[j]->values, alpha)});
    }
  }

  std::vector<double> young, elderly;
  std::size_t n_young = 0, n_elderly = 0;
  for (const auto* s : ordered) {
    if (s->group.is_young()) {
      young.insert(young.end(), s->values.begin(), s->values.end());
      ++n_young;
    } else if (s->group.is_elderly()) {
      elderly.insert(elderly.end(), s->values.begin(), s->values.end());
      ++n_elderly;
    }
  }
  if (n_young > 0 && n_elderly > 0 && n_young + n_elderly > 2) {
    rows.push_back({"Young vs Elderly", t_test(young, elderly, alpha)});
  }
  return rows;
}

std::string decision_text(Decision d) {
  return d == Decision::reject ? "Reject the null hypothesis" : "Do not reject the null hypothesis";
}

std::string format_table(std::span<const ComparisonRow> rows) {
  std::string out = "comparison,p_value,decision\n";
  for (const auto& row : rows) {
    out += row.comparison + "," + text::format_fixed(row.result.p_value, 2) + "," +
           decision_text(row.result.decision) + "\n";
  }
  return out;
}

std::string format_density(std::span<const DensityPoint> grid) {
  std::string out;
  for (const auto& p : grid) out += text::format_double(p.x) + "," + text::format_double(p.f) + "\n";
  return out;
}

}  // namespace carfollow::stats
