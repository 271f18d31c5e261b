#pragma once

// Test-only reference computations that do not go through the mesh.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Polar angle after the axial dilation with factor lambda toward the axis.
inline double dilated_angle(double theta, double lambda) {
  return 2.0 * std::atan(std::tan(theta / 2.0) / lambda);
}

// Axial component of the mean of x -> phi_a(x) over the round sphere,
// (1/2) int_0^pi cos(theta') sin(theta) dtheta.
inline double mean_axial_of_dilation(double lambda) {
  return 0.5 * simpson([&](double t) { return std::cos(dilated_angle(t, lambda)) * std::sin(t); },
                       0.0, std::numbers::pi);
}

// int_{S^2} |x - phi_a(x)|^2 dA = 2 pi int (2 - 2 cos(theta - theta')) sin(theta) dtheta.
inline double l2_dist_sq_identity_dilation(double lambda) {
  return 2.0 * std::numbers::pi *
         simpson(
             [&](double t) {
               return (2.0 - 2.0 * std::cos(t - dilated_angle(t, lambda))) * std::sin(t);
             },
             0.0, std::numbers::pi);
}

// int |c - phi_a|^2 |D phi_a|^2 for c = a/|a|, with |D phi_a|^2 = 2 mu^2 and
// mu = sin(theta') / sin(theta). Equals 16 pi by change of variables.
inline double weighted_gap_constant_axis(double lambda) {
  return 2.0 * std::numbers::pi *
         simpson(
             [&](double t) {
               const double s = std::sin(t);
               if (s == 0.0) return 0.0;
               const double tp = dilated_angle(t, lambda);
               const double mu = std::sin(tp) / s;
               return (2.0 - 2.0 * std::cos(tp)) * 2.0 * mu * mu * s;
             },
             0.0, std::numbers::pi);
}

}  // namespace oracle
