#include "ewcft/eval/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ewcft::eval {

namespace {

constexpr double kTolerance = 1e-10;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 10000;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sum_sq_dev(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kTolerance) return h;
  }
  throw std::runtime_error("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("regularized_incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("regularized_incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
  if (std::isnan(t)) throw std::invalid_argument("student_t_two_sided_p: t is NaN");
  if (std::isinf(t)) return 0.0;
  const double p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return std::min(1.0, std::max(0.0, p));
}

TTestResult unpaired_t_test(std::span<const double> a, std::span<const double> b, TTestKind kind) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("unpaired_t_test: each sample needs >= 2 values");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sum_sq_dev(a, ma) / (na - 1.0), vb = sum_sq_dev(b, mb) / (nb - 1.0);

  TTestResult r;
  double se2 = 0.0;
  if (kind == TTestKind::kPooled) {
    r.df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / r.df;
    se2 = pooled * (1.0 / na + 1.0 / nb);
  } else {
    const double sa = va / na, sb = vb / nb;
    se2 = sa + sb;
    r.df = se2 > 0.0 ? se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0)) : na + nb - 2.0;
  }
  const double diff = ma - mb;
  if (se2 == 0.0) {
    if (diff == 0.0) return {0.0, r.df, 1.0};
    return {diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), r.df, 0.0};
  }
  r.t = diff / std::sqrt(se2);
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

}  // namespace ewcft::eval
