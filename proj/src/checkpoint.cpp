#include "nai/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nai/errors.hpp"

namespace nai {

namespace {

constexpr std::uint32_t kClassifierVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::uint32_t kind_tag(const Classifier& c) {
  if (c.kind() == ClassifierKind::Linear) return 0;
  switch (c.activation()) {
    case Activation::Relu: return 1;
    case Activation::Tanh: return 2;
    case Activation::Sigmoid: return 3;
  }
  return 1;
}

} // namespace

void save_classifier(const Classifier& c, const std::string& path) {
  if (c.empty()) throw InputError("save_classifier: empty classifier");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write classifier checkpoint: " + path);
  out.write("NAIC", 4);
  put_u32(out, kClassifierVersion);
  put_u32(out, kind_tag(c));
  put_u32(out, static_cast<std::uint32_t>(c.layers().size()));
  for (const auto& layer : c.layers()) {
    put_u64(out, layer.weight.rows());
    put_u64(out, layer.weight.cols());
    for (double v : layer.weight.flat()) put_f64(out, v);
    for (double v : layer.bias.flat()) put_f64(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(c.trained_order));
  put_u32(out, static_cast<std::uint32_t>(c.trained_backend));
  if (!out) throw IoError("failed while writing classifier checkpoint: " + path);
}

Classifier load_classifier(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open classifier checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NAIC", 4) != 0)
    throw IoError("bad classifier checkpoint magic: " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kClassifierVersion)
    throw IoError("unsupported classifier checkpoint version " + std::to_string(version));
  const std::uint32_t tag = get_u32(in);
  const std::uint32_t layer_count = get_u32(in);
  if (layer_count == 0 || layer_count > 64) throw IoError("implausible layer count in " + path);

  Classifier c;
  ClassifierSpec spec;
  spec.kind = tag == 0 ? ClassifierKind::Linear : ClassifierKind::Mlp;
  spec.activation = tag == 2 ? Activation::Tanh : (tag == 3 ? Activation::Sigmoid : Activation::Relu);
  Rng rng(0);

  std::vector<Classifier::Layer> layers;
  for (std::uint32_t t = 0; t < layer_count; ++t) {
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    if (!in || rows == 0 || cols == 0 || rows * cols > (1ull << 32))
      throw IoError("implausible layer shape in " + path);
    Classifier::Layer layer;
    layer.weight = Matrix(rows, cols);
    for (double& v : layer.weight.flat()) v = get_f64(in);
    layer.bias = Matrix(1, cols);
    for (double& v : layer.bias.flat()) v = get_f64(in);
    layers.push_back(std::move(layer));
  }
  const std::uint32_t order = get_u32(in);
  const std::uint32_t backend = get_u32(in);
  if (!in) throw IoError("truncated classifier checkpoint: " + path);

  // Rebuild through init to keep invariants, then overwrite parameters.
  std::vector<std::size_t> hidden;
  for (std::size_t t = 0; t + 1 < layers.size(); ++t) hidden.push_back(layers[t].weight.cols());
  spec.hidden = hidden;
  c = Classifier::init(layers.front().weight.rows(), layers.back().weight.cols(), spec, rng);
  c.layers_mut() = std::move(layers);
  c.trained_order = static_cast<int>(order);
  if (backend > 2) throw IoError("unknown backend tag in " + path);
  c.trained_backend = static_cast<Backend>(backend);
  return c;
}

void save_bank(const ClassifierBank& bank, const BankManifest& meta, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream m(dir + "/manifest.txt");
  if (!m) throw IoError("cannot write bank manifest in " + dir);
  m.precision(17); // decimal round-trip for doubles
  m << "backend = " << to_string(meta.backend) << "\n";
  m << "k = " << meta.k << "\n";
  m << "r_ens = " << meta.r_ens << "\n";
  m << "temperature = " << meta.temperature << "\n";
  m << "lambda = " << meta.lambda << "\n";
  m << "seed = " << meta.seed << "\n";
  m << "r_coef = " << meta.r_coef << "\n";
  m << "scorer_activation = " << to_string(meta.scorer.activation) << "\n";
  m << "scorer =";
  for (double v : meta.scorer.s) m << ' ' << v;
  m << "\n";
  for (const auto& [order, acc] : meta.val_acc) m << "val_acc_" << order << " = " << acc << "\n";
  if (!m) throw IoError("failed while writing bank manifest in " + dir);

  for (int l = 1; l <= bank.order(); ++l) {
    if (!bank.has_order(l)) continue;
    std::ostringstream name;
    name << dir << "/classifier_" << l << ".naic";
    save_classifier(bank.classifier(l), name.str());
  }
}

LoadedBank load_bank(const std::string& dir) {
  std::ifstream m(dir + "/manifest.txt");
  if (!m) throw IoError("cannot open bank manifest in " + dir);

  LoadedBank out;
  std::string line;
  while (std::getline(m, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "backend") {
      out.meta.backend = backend_from_string(value);
    } else if (key == "k") {
      out.meta.k = std::stoi(value);
    } else if (key == "r_ens") {
      out.meta.r_ens = std::stoi(value);
    } else if (key == "temperature") {
      out.meta.temperature = std::stod(value);
    } else if (key == "lambda") {
      out.meta.lambda = std::stod(value);
    } else if (key == "seed") {
      out.meta.seed = std::stoull(value);
    } else if (key == "r_coef") {
      out.meta.r_coef = std::stod(value);
    } else if (key == "scorer_activation") {
      out.meta.scorer.activation = activation_from_string(value);
    } else if (key == "scorer") {
      std::istringstream vs(value);
      double v;
      out.meta.scorer.s.clear();
      while (vs >> v) out.meta.scorer.s.push_back(v);
    } else if (key.rfind("val_acc_", 0) == 0) {
      out.meta.val_acc[std::stoi(key.substr(8))] = std::stod(value);
    }
  }
  if (out.meta.k < 1) throw IoError("bank manifest in " + dir + " lacks a valid k");

  out.bank = ClassifierBank(out.meta.backend, out.meta.k);
  for (int l = 1; l <= out.meta.k; ++l) {
    std::ostringstream name;
    name << dir << "/classifier_" << l << ".naic";
    if (!std::filesystem::exists(name.str())) continue;
    Classifier c = load_classifier(name.str());
    if (c.trained_order != l)
      throw IoError("checkpoint order mismatch in " + name.str());
    if (c.trained_backend != out.meta.backend)
      throw IoError("checkpoint backend mismatch in " + name.str());
    const auto it = out.meta.val_acc.find(l);
    out.bank.set_classifier(l, std::move(c), it == out.meta.val_acc.end() ? -1.0 : it->second);
  }
  return out;
}

} // namespace nai
