#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace earnn {

using Vec = std::vector<double>;

// Dense row-major matrix. Everything in this project is double precision;
// desk-scale shapes make hand-rolled loops plenty fast under -O3.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }

  Vec row(int r) const {
    return Vec(data.begin() + static_cast<std::ptrdiff_t>(r) * cols,
               data.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols);
  }
  void set_row(int r, const Vec& v) {
    assert(static_cast<int>(v.size()) == cols);
    for (int c = 0; c < cols; ++c) (*this)(r, c) = v[c];
  }
};

inline Vec matvec(const Mat& m, const Vec& v) {
  assert(static_cast<int>(v.size()) == m.cols);
  Vec out(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

// y += m^T x, the adjoint of matvec.
inline void matvec_transpose_acc(const Mat& m, const Vec& x, Vec& y) {
  assert(static_cast<int>(x.size()) == m.rows);
  assert(static_cast<int>(y.size()) == m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) y[c] += xr * row[c];
  }
}

// m += scale * u v^T
inline void outer_acc(Mat& m, const Vec& u, const Vec& v, double scale = 1.0) {
  assert(static_cast<int>(u.size()) == m.rows);
  assert(static_cast<int>(v.size()) == m.cols);
  for (int r = 0; r < m.rows; ++r) {
    double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    const double ur = scale * u[r];
    for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
  }
}

inline double dot(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double a, const Vec& x, Vec& y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Softmax with max-shift; input length >= 1.
inline Vec softmax(const Vec& scores) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  Vec out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Mat& m) {
  for (double x : m.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace earnn
