#pragma once

// Demographic comparison of following distances: Gaussian kernel densities
// and two-sided two-sample t-tests. The pooled (equal variance) test is used
// when the larger sample variance is at most four times the smaller one,
// Welch's test otherwise.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carfollow/ingest.hpp"

namespace carfollow::stats {

struct GroupSample {
  ingest::DriverGroup group;
  std::vector<double> values;
};

struct DensityPoint {
  double x = 0;
  double f = 0;
};

inline constexpr std::size_t kDensityGridPoints = 512;
inline constexpr double kAlpha = 0.05;
inline constexpr double kVarianceRatio = 4.0;

// Silverman's rule of thumb 1.06·σ̂·n^(−1/5) with the n−1 sample deviation.
double silverman_bandwidth(std::span<const double> values);

// Evenly spaced grid over [min − 3h, max + 3h]. No bandwidth means Silverman.
// Throws DataError for fewer than two values or a zero automatic bandwidth.
std::vector<DensityPoint> density_estimate(std::span<const double> values, std::optional<double> bandwidth = {},
                                           std::size_t grid_points = kDensityGridPoints);

double mean(std::span<const double> values);
double sample_variance(std::span<const double> values);  // n − 1 denominator

// true → pooled test. Both variances zero → pooled; exactly one zero → Welch.
bool variance_rule(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

enum class Decision { reject, fail_to_reject };

struct TestResult {
  double t_stat = 0;
  double df = 0;
  double p_value = 1;
  bool pooled = true;
  Decision decision = Decision::fail_to_reject;
};

TestResult t_test(std::span<const double> a, std::span<const double> b, double alpha = kAlpha);

struct ComparisonRow {
  std::string comparison;  // "Elderly woman vs Elderly man"
  TestResult result;
};

// Every unordered pair, groups in canonical order (elderly woman, elderly
// man, young man 1, young man 2, then others in input order), followed by a
// pooled "Young vs Elderly" row when that aggregate differs from a single
// pairwise comparison.
std::vector<ComparisonRow> compare_groups(std::span<const GroupSample> samples, double alpha = kAlpha);

// comparison,p_value,decision; p rounded to two decimals.
std::string format_table(std::span<const ComparisonRow> rows);
std::string decision_text(Decision d);

// x,f rows.
std::string format_density(std::span<const DensityPoint> grid);

}  // namespace carfollow::stats
