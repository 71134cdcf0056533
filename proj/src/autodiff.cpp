#include "nai/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "nai/errors.hpp"

namespace nai::ad {

namespace {
constexpr double kLogClamp = 1e-12;

// softmax(row / T) into dst, max-stabilized.
void softmax_row(std::span<const double> src, double temperature, std::span<double> dst) {
  double mx = src[0];
  for (double v : src) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t j = 0; j < src.size(); ++j) {
    dst[j] = std::exp((src[j] - mx) / temperature);
    sum += dst[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < src.size(); ++j) dst[j] *= inv;
}
} // namespace

Var Tape::push(Matrix val, std::function<void(Tape&, int)> back) {
  nodes_.push_back(Node{std::move(val), Matrix(), std::move(back)});
  Node& n = nodes_.back();
  n.grad = Matrix(n.val.rows(), n.val.cols());
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  Matrix out = nai::matmul(av, bv);
  return push(std::move(out), [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    // dA += g . B^T, dB += A^T . g
    Matrix& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < bv.cols(); ++k) acc += g.at(i, k) * bv.at(j, k);
        ga.at(i, j) += acc;
      }
    Matrix& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < bv.rows(); ++i)
      for (std::size_t j = 0; j < bv.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < av.rows(); ++k) acc += av.at(k, i) * g.at(k, j);
        gb.at(i, j) += acc;
      }
  });
}

Var Tape::add_row_broadcast(Var a, Var bias) {
  const Matrix& av = value(a);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) throw InputError("add_row_broadcast: bias must be 1 x cols");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] += bv.at(0, j);
  }
  return push(std::move(out), [a, bias](Tape& t, int self) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Matrix& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga.at(i, j) += g.at(i, j);
    Matrix& gb = t.grad_mut(bias);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gb.at(0, j) += g.at(i, j);
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [a](Tape& t, int self) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Matrix& av = t.value(a);
    Matrix& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.flat().size(); ++i)
      if (av.flat()[i] > 0.0) ga.flat()[i] += g.flat()[i];
  });
}

Var Tape::tanh_act(Var a) {
  Matrix out = value(a);
  for (double& v : out.flat()) v = std::tanh(v);
  return push(std::move(out), [a](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    Matrix& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < n.grad.flat().size(); ++i) {
      const double y = n.val.flat()[i];
      ga.flat()[i] += n.grad.flat()[i] * (1.0 - y * y);
    }
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = value(a);
  for (double& v : out.flat()) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(out), [a](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    Matrix& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < n.grad.flat().size(); ++i) {
      const double y = n.val.flat()[i];
      ga.flat()[i] += n.grad.flat()[i] * y * (1.0 - y);
    }
  });
}

Var Tape::softmax_rows(Var a, double temperature) {
  if (temperature <= 0.0) throw InputError("softmax: temperature must be positive");
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) softmax_row(av.row(i), temperature, out.row(i));
  return push(std::move(out), [a, temperature](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    Matrix& ga = t.grad_mut(a);
    // dx = (y ∘ (g - (g.y))) / T per row
    for (std::size_t i = 0; i < n.val.rows(); ++i) {
      auto y = n.val.row(i);
      auto g = n.grad.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) dot += g[j] * y[j];
      auto dst = ga.row(i);
      for (std::size_t j = 0; j < y.size(); ++j) dst[j] += y[j] * (g[j] - dot) / temperature;
    }
  });
}

Var Tape::mask(Var a, const Matrix& m) {
  const Matrix& av = value(a);
  if (m.rows() != av.rows() || m.cols() != av.cols()) throw InputError("mask: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.flat().size(); ++i) out.flat()[i] *= m.flat()[i];
  Matrix mcopy = m;
  return push(std::move(out), [a, mcopy = std::move(mcopy)](Tape& t, int self) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Matrix& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.flat().size(); ++i) ga.flat()[i] += g.flat()[i] * mcopy.flat()[i];
  });
}

Var Tape::concat_cols(std::span<const Var> cols) {
  if (cols.empty()) throw InputError("concat_cols: no inputs");
  const std::size_t n = value(cols[0]).rows();
  Matrix out(n, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const Matrix& v = value(cols[c]);
    if (v.rows() != n || v.cols() != 1) throw InputError("concat_cols: inputs must be n x 1");
    for (std::size_t i = 0; i < n; ++i) out.at(i, c) = v.at(i, 0);
  }
  std::vector<Var> inputs(cols.begin(), cols.end());
  return push(std::move(out), [inputs](Tape& t, int self) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    for (std::size_t c = 0; c < inputs.size(); ++c) {
      Matrix& gi = t.grad_mut(inputs[c]);
      for (std::size_t i = 0; i < g.rows(); ++i) gi.at(i, 0) += g.at(i, c);
    }
  });
}

Var Tape::weighted_mix(Var w, std::span<const Var> ys) {
  const Matrix& wv = value(w);
  if (ys.size() != wv.cols()) throw InputError("weighted_mix: weight columns != member count");
  const std::size_t n = wv.rows();
  const std::size_t c = value(ys[0]).cols();
  Matrix out(n, c);
  for (std::size_t l = 0; l < ys.size(); ++l) {
    const Matrix& y = value(ys[l]);
    if (y.rows() != n || y.cols() != c) throw InputError("weighted_mix: member shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = wv.at(i, l);
      auto src = y.row(i);
      auto dst = out.row(i);
      for (std::size_t j = 0; j < c; ++j) dst[j] += wi * src[j];
    }
  }
  std::vector<Var> members(ys.begin(), ys.end());
  return push(std::move(out), [w, members](Tape& t, int self) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Matrix& wv = t.value(w);
    Matrix& gw = t.grad_mut(w);
    for (std::size_t l = 0; l < members.size(); ++l) {
      const Matrix& y = t.value(members[l]);
      Matrix& gy = t.grad_mut(members[l]);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto yr = y.row(i);
        double acc = 0.0;
        const double wi = wv.at(i, l);
        auto gyr = gy.row(i);
        for (std::size_t j = 0; j < g.cols(); ++j) {
          acc += gr[j] * yr[j];
          gyr[j] += wi * gr[j];
        }
        gw.at(i, l) += acc;
      }
    }
  });
}

Var Tape::cross_entropy(Var logits, double temperature, const CeTarget& target,
                        std::span<const int> rows, double scale) {
  if (temperature <= 0.0) throw InputError("cross_entropy: temperature must be positive");
  if (rows.empty()) throw InputError("cross_entropy: empty node subset");
  const int sources = (target.labels.empty() ? 0 : 1) + (target.probs != nullptr ? 1 : 0) +
                      (target.probs_var.valid() ? 1 : 0);
  if (sources != 1) throw InputError("cross_entropy: exactly one target source required");

  const Matrix& zv = value(logits);
  const std::size_t c = zv.cols();
  Matrix probs(zv.rows(), c);
  for (int i : rows) softmax_row(zv.row(static_cast<std::size_t>(i)), temperature, probs.row(static_cast<std::size_t>(i)));

  auto target_row = [&](const Tape& t, std::size_t i, std::size_t j) -> double {
    if (!target.labels.empty()) return static_cast<std::size_t>(target.labels[i]) == j ? 1.0 : 0.0;
    if (target.probs != nullptr) return target.probs->at(i, j);
    return t.value(target.probs_var).at(i, j);
  };

  double loss = 0.0;
  for (int ri : rows) {
    const std::size_t i = static_cast<std::size_t>(ri);
    for (std::size_t j = 0; j < c; ++j) {
      const double tv = target_row(*this, i, j);
      if (tv != 0.0) loss -= tv * std::log(std::max(probs.at(i, j), kLogClamp));
    }
  }
  loss *= scale;

  Matrix out(1, 1);
  out.at(0, 0) = loss;
  std::vector<int> row_copy(rows.begin(), rows.end());
  CeTarget tgt = target;
  std::vector<int> label_copy(target.labels.begin(), target.labels.end());
  return push(std::move(out),
              [logits, temperature, tgt, label_copy = std::move(label_copy), row_copy = std::move(row_copy),
               scale, probs = std::move(probs)](Tape& t, int self) {
                const double up = t.nodes_[static_cast<std::size_t>(self)].grad.at(0, 0);
                if (up == 0.0) return;
                const std::size_t c = probs.cols();
                auto target_at = [&](std::size_t i, std::size_t j) -> double {
                  if (!label_copy.empty()) return static_cast<std::size_t>(label_copy[i]) == j ? 1.0 : 0.0;
                  if (tgt.probs != nullptr) return tgt.probs->at(i, j);
                  return t.value(tgt.probs_var).at(i, j);
                };
                Matrix& gz = t.grad_mut(logits);
                Matrix* gt = tgt.probs_var.valid() ? &t.grad_mut(tgt.probs_var) : nullptr;
                for (int ri : row_copy) {
                  const std::size_t i = static_cast<std::size_t>(ri);
                  double tsum = 0.0;
                  for (std::size_t j = 0; j < c; ++j) tsum += target_at(i, j);
                  for (std::size_t j = 0; j < c; ++j) {
                    const double p = probs.at(i, j);
                    gz.at(i, j) += up * scale / temperature * (p * tsum - target_at(i, j));
                    if (gt != nullptr) gt->at(i, j) += up * (-scale) * std::log(std::max(p, kLogClamp));
                  }
                }
              });
}

Var Tape::add_scaled(std::span<const std::pair<double, Var>> terms) {
  if (terms.empty()) throw InputError("add_scaled: no terms");
  Matrix out(1, 1);
  for (const auto& [coeff, v] : terms) {
    const Matrix& tv = value(v);
    if (tv.rows() != 1 || tv.cols() != 1) throw InputError("add_scaled: terms must be scalars");
    out.at(0, 0) += coeff * tv.at(0, 0);
  }
  std::vector<std::pair<double, Var>> copy(terms.begin(), terms.end());
  return push(std::move(out), [copy](Tape& t, int self) {
    const double up = t.nodes_[static_cast<std::size_t>(self)].grad.at(0, 0);
    for (const auto& [coeff, v] : copy) t.grad_mut(v).at(0, 0) += coeff * up;
  });
}

void Tape::backward(Var root) {
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) throw InputError("backward: root must be a scalar");
  for (Node& n : nodes_) n.grad.fill(0.0);
  grad_mut(root).at(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.back) n.back(*this, id);
  }
}

} // namespace nai::ad
