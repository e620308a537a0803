#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace emlab {

// Token ids are 0..content_size, with EOS always the last id.
struct Vocab {
  int content_size = 3;  // number of non-EOS tokens, >= 1

  int eos_id() const { return content_size; }
  int total_tokens() const { return content_size + 1; }

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

// A finite token list ending with exactly one EOS.
struct Sequence {
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }  // incl. EOS
  int content_length() const { return length() - 1; }

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

// Flat real vector aligned with Policy::logits (position-major, then
// previous-token slot, then next-token).
struct GradVector {
  std::vector<double> values;

  static GradVector zeros(std::size_t n) { return GradVector{std::vector<double>(n, 0.0)}; }

  std::size_t size() const { return values.size(); }

  // this += a * x
  void axpy(double a, const GradVector& x) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += a * x.values[i];
  }

  void scale(double a) {
    for (double& v : values) v *= a;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  double l2_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const GradVector&, const GradVector&) = default;
};

inline double max_abs_diff(const GradVector& a, const GradVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace emlab
