#include <doctest.h>
#include <filesystem>
#include <fstream>

#include "nai/checkpoint.hpp"
#include "nai/errors.hpp"
#include "testutil.hpp"

using namespace nai;

namespace {
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};
} // namespace

TEST_CASE("classifier checkpoint round trip") {
  TempDir dir("nai_ckpt");
  Rng rng(5);

  SUBCASE("linear") {
    Classifier c = Classifier::init(6, 3, ClassifierSpec{}, rng);
    c.trained_order = 4;
    c.trained_backend = Backend::S2gc;
    const std::string path = (dir.path / "linear.naic").string();
    save_classifier(c, path);
    Classifier back = load_classifier(path);
    CHECK(back == c);
  }
  SUBCASE("mlp with tanh hidden layers") {
    ClassifierSpec spec{ClassifierKind::Mlp, {16, 8}, Activation::Tanh};
    Classifier c = Classifier::init(10, 5, spec, rng);
    c.trained_order = 2;
    c.trained_backend = Backend::Sign;
    const std::string path = (dir.path / "mlp.naic").string();
    save_classifier(c, path);
    Classifier back = load_classifier(path);
    CHECK(back == c);
    CHECK(back.activation() == Activation::Tanh);
    CHECK(back.kind() == ClassifierKind::Mlp);
  }
  SUBCASE("missing file raises an io error") {
    CHECK_THROWS_AS(load_classifier((dir.path / "absent.naic").string()), IoError);
  }
  SUBCASE("corrupt magic rejected") {
    const std::string path = (dir.path / "bad.naic").string();
    std::ofstream out(path, std::ios::binary);
    out << "JUNKJUNKJUNK";
    out.close();
    CHECK_THROWS_AS(load_classifier(path), IoError);
  }
}

TEST_CASE("bank checkpoint round trip") {
  TempDir dir("nai_bank");
  Rng rng(6);

  ClassifierBank bank(Backend::Sgc, 3);
  for (int l = 1; l <= 3; ++l) {
    Classifier c = Classifier::init(4, 2, ClassifierSpec{}, rng);
    c.trained_order = l;
    c.trained_backend = Backend::Sgc;
    bank.set_classifier(l, std::move(c), 0.5 + 0.1 * l);
  }

  BankManifest meta;
  meta.backend = Backend::Sgc;
  meta.k = 3;
  meta.r_ens = 2;
  meta.temperature = 1.3;
  meta.lambda = 0.45;
  meta.seed = 99;
  meta.r_coef = 0.5;
  meta.scorer.s = {0.123456789012345, -2.5e-7};
  meta.scorer.activation = Activation::Tanh;
  for (int l = 1; l <= 3; ++l) meta.val_acc[l] = bank.val_acc(l);

  save_bank(bank, meta, dir.path.string());
  LoadedBank back = load_bank(dir.path.string());

  CHECK(back.meta.backend == Backend::Sgc);
  CHECK(back.meta.k == 3);
  CHECK(back.meta.r_ens == 2);
  CHECK(back.meta.temperature == doctest::Approx(1.3));
  CHECK(back.meta.lambda == doctest::Approx(0.45));
  CHECK(back.meta.seed == 99);
  CHECK(back.meta.r_coef == doctest::Approx(0.5));
  CHECK(back.meta.scorer.s == meta.scorer.s); // 17-digit decimal round trip
  CHECK(back.bank.complete());
  for (int l = 1; l <= 3; ++l) {
    CHECK(back.bank.classifier(l) == bank.classifier(l));
    CHECK(back.bank.val_acc(l) == doctest::Approx(bank.val_acc(l)));
  }
}

TEST_CASE("bank with only the base classifier loads partially") {
  TempDir dir("nai_bank_partial");
  Rng rng(7);
  ClassifierBank bank(Backend::Sgc, 4);
  Classifier c = Classifier::init(4, 2, ClassifierSpec{}, rng);
  c.trained_order = 4;
  bank.set_classifier(4, std::move(c));

  BankManifest meta;
  meta.k = 4;
  save_bank(bank, meta, dir.path.string());
  LoadedBank back = load_bank(dir.path.string());
  CHECK(back.bank.has_order(4));
  CHECK(!back.bank.has_order(1));
  CHECK(!back.bank.complete());
}
