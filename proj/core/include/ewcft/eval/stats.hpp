#pragma once

#include <span>

namespace ewcft::eval {

enum class TTestKind {
  kPooled,  // Student, pooled variance, df = na + nb - 2
  kWelch,   // unequal variances, Welch-Satterthwaite df
};

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  // Two-sided.
  double p = 1.0;
};

// Two-sample unpaired t-test. Both samples need at least two values. When the
// variance estimate is zero, equal means give t = 0, p = 1 and unequal means
// give t = ±inf, p = 0.
TTestResult unpaired_t_test(std::span<const double> a, std::span<const double> b,
                            TTestKind kind = TTestKind::kPooled);

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1],
// evaluated by a continued fraction (modified Lentz, tolerance 1e-10).
double regularized_incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace ewcft::eval
