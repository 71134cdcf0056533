#include "nai/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "nai/errors.hpp"

namespace nai {

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Classifier Classifier::init(std::size_t input_width, std::size_t classes, const ClassifierSpec& spec,
                            Rng& rng) {
  if (input_width == 0 || classes == 0) throw InputError("classifier: zero-width layer");
  Classifier c;
  c.kind_ = spec.kind;
  c.activation_ = spec.activation;

  std::vector<std::size_t> widths{input_width};
  if (spec.kind == ClassifierKind::Mlp)
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(classes);

  for (std::size_t t = 0; t + 1 < widths.size(); ++t) {
    Layer layer;
    layer.weight = Matrix(widths[t], widths[t + 1]);
    layer.bias = Matrix(1, widths[t + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[t] + widths[t + 1]));
    for (double& w : layer.weight.flat()) w = rng.uniform(-bound, bound);
    c.layers_.push_back(std::move(layer));
  }
  return c;
}

std::uint64_t Classifier::macs_per_row() const {
  std::uint64_t macs = 0;
  for (const Layer& l : layers_) macs += static_cast<std::uint64_t>(l.weight.rows()) * l.weight.cols();
  return macs;
}

std::size_t Classifier::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weight.flat().size() + l.bias.flat().size();
  return n;
}

void Classifier::flatten_into(std::span<double> out) const {
  if (out.size() != param_count()) throw InputError("flatten: buffer size mismatch");
  std::size_t pos = 0;
  for (const Layer& l : layers_) {
    std::copy(l.weight.flat().begin(), l.weight.flat().end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += l.weight.flat().size();
    std::copy(l.bias.flat().begin(), l.bias.flat().end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += l.bias.flat().size();
  }
}

std::vector<double> Classifier::flatten() const {
  std::vector<double> out(param_count());
  flatten_into(out);
  return out;
}

void Classifier::load_flat(std::span<const double> flat) {
  if (flat.size() != param_count()) throw InputError("load_flat: buffer size mismatch");
  std::size_t pos = 0;
  for (Layer& l : layers_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.flat().size(),
                l.weight.flat().begin());
    pos += l.weight.flat().size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.flat().size(),
                l.bias.flat().begin());
    pos += l.bias.flat().size();
  }
}

bool Classifier::operator==(const Classifier& o) const {
  if (kind_ != o.kind_ || activation_ != o.activation_ || layers_.size() != o.layers_.size())
    return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].weight != o.layers_[i].weight || layers_[i].bias != o.layers_[i].bias) return false;
  }
  return trained_order == o.trained_order && trained_backend == o.trained_backend;
}

Matrix forward_logits(const Classifier& c, const Matrix& rows, MacsTrace* trace) {
  if (c.empty()) throw InputError("forward: classifier has no layers");
  if (rows.cols() != c.input_width())
    throw InputError("forward: input width " + std::to_string(rows.cols()) + " != classifier width " +
                     std::to_string(c.input_width()));

  Matrix cur = rows;
  const auto& layers = c.layers();
  for (std::size_t t = 0; t < layers.size(); ++t) {
    Matrix next = matmul(cur, layers[t].weight);
    for (std::size_t i = 0; i < next.rows(); ++i) {
      auto r = next.row(i);
      for (std::size_t j = 0; j < next.cols(); ++j) r[j] += layers[t].bias.at(0, j);
    }
    if (t + 1 < layers.size()) {
      switch (c.activation()) {
        case Activation::Relu:
          for (double& v : next.flat()) v = v > 0.0 ? v : 0.0;
          break;
        case Activation::Tanh:
          for (double& v : next.flat()) v = std::tanh(v);
          break;
        case Activation::Sigmoid:
          for (double& v : next.flat()) v = 1.0 / (1.0 + std::exp(-v));
          break;
      }
    }
    cur = std::move(next);
  }
  if (trace != nullptr)
    trace->add(KernelKind::Classification, c.macs_per_row() * static_cast<std::uint64_t>(rows.rows()));
  return cur;
}

void tempered_softmax_row(std::span<const double> logits, double temperature, std::span<double> out) {
  if (temperature <= 0.0) throw InputError("tempered_softmax: temperature must be positive");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp((logits[j] - mx) / temperature);
    sum += out[j];
  }
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] /= sum;
}

Matrix tempered_softmax(const Matrix& logits, double temperature) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i)
    tempered_softmax_row(logits.row(i), temperature, out.row(i));
  return out;
}

double hard_ce(const Matrix& probs, std::span<const int> labels, std::span<const int> subset) {
  if (subset.empty()) throw InputError("hard_ce: empty node subset");
  if (labels.size() != probs.rows()) throw InputError("hard_ce: one label per probability row required");
  double loss = 0.0;
  for (int i : subset) {
    const std::size_t row = static_cast<std::size_t>(i);
    const int y = labels[row];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) throw InputError("hard_ce: label out of range");
    loss -= std::log(std::max(probs.at(row, static_cast<std::size_t>(y)), 1e-12));
  }
  return loss / static_cast<double>(subset.size());
}

int argmax_row(std::span<const double> row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const int> subset) {
  if (subset.empty()) return 0.0;
  std::size_t hits = 0;
  for (int i : subset) {
    const std::size_t row = static_cast<std::size_t>(i);
    if (argmax_row(logits.row(row)) == labels[row]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(subset.size());
}

} // namespace nai
