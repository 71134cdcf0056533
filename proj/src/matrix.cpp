#include "nai/matrix.hpp"

#include <cmath>

#include "nai/errors.hpp"
#include "nai/parallel.hpp"

namespace nai {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() == 0 ? 0 : rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != m.cols()) throw InputError("from_rows: ragged row lengths");
    std::size_t j = 0;
    for (double v : r) m.at(i, j++) = v;
    ++i;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (double v : a_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InputError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  const std::size_t p = a.cols(), q = b.cols();
  parallel_for(a.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto out_row = out.row(i);
      auto a_row = a.row(i);
      for (std::size_t t = 0; t < p; ++t) {
        const double av = a_row[t];
        if (av == 0.0) continue;
        auto b_row = b.row(t);
        for (std::size_t j = 0; j < q; ++j) out_row[j] += av * b_row[j];
      }
    }
  });
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.at(j, i) = m.at(i, j);
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || static_cast<std::size_t>(r) >= m.rows())
      throw InputError("gather_rows: row index out of range");
    auto src = m.row(static_cast<std::size_t>(r));
    auto dst = out.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InputError("hstack: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    auto ra = a.row(i);
    auto rb = b.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = ra[j];
    for (std::size_t j = 0; j < b.cols(); ++j) dst[a.cols() + j] = rb[j];
  }
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("l2_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double l2_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return std::sqrt(acc);
}

} // namespace nai
