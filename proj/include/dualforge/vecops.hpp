#ifndef DUALFORGE_VECOPS_HPP
#define DUALFORGE_VECOPS_HPP

#include <cmath>
#include <cstddef>
#include <vector>

namespace dualforge {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double l1_norm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline void add_scaled(Vec& y, double c, const Vec& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const Vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace dualforge

#endif  // DUALFORGE_VECOPS_HPP
