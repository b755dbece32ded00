#include <cmath>

#include "grad_cases.hpp"
#include "support.hpp"

#include "rt/binary_io.hpp"
#include "rt/checkpoint.hpp"
#include "rt/training.hpp"

using namespace rt;
using test::thrown_code;

namespace {

const char* kTiny = "input 1x8x8; conv 2x3; relu; pool 2; flatten 18; dense 6; relu; dense 3";

/// Three classes of 8x8 patterns: bright top rows, bright left columns, or
/// a bright centre, plus noise.
DatasetSplit toy_split(std::uint64_t seed, int per_class = 12) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.2f);
  std::vector<SampleMatrix> all;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i) {
      SampleMatrix s;
      s.label = c;
      s.data = RowMatrixXf::Zero(8, 8);
      if (c == 0) s.data.topRows(3).setConstant(1.0f);
      if (c == 1) s.data.leftCols(3).setConstant(1.0f);
      if (c == 2) s.data.block(2, 2, 4, 4).setConstant(1.0f);
      for (Index k = 0; k < 64; ++k) s.data.data()[k] += noise(rng);
      all.push_back(std::move(s));
    }
  }
  return make_split(all, 0.25, seed);
}

Tensor<float> random_input(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor<float> t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace

TEST_CASE("reference architecture reaches 7744 features") {
  const auto arch = Architecture::reference();
  CHECK(arch.input_shape() == Shape{1, 210, 210});
  CHECK(arch.feature_width() == 7744);
  CHECK(arch.trace()[arch.flatten_index()] == Shape{7744});
  CHECK(arch.num_classes() == 3);
  std::vector<Index> spatial;
  for (const auto& s : arch.trace()) {
    if (s.size() == 3 && (spatial.empty() || spatial.back() != s[1])) spatial.push_back(s[1]);
  }
  CHECK(spatial == std::vector<Index>{200, 100, 92, 46, 44, 22});
  CHECK(Architecture::parse(arch.to_string()) == arch);
}

TEST_CASE("architectures whose trace disagrees with the declared width are rejected") {
  CHECK(thrown_code([] { Architecture::parse("input 1x210x210; conv 16x11; relu; pool 2; flatten 7744; dense 3"); }) ==
        Errc::shape_error);
  CHECK(thrown_code([] { Architecture::parse("input 1x8x8; conv 2x9; flatten 1; dense 3"); }) == Errc::shape_error);
  CHECK(thrown_code([] { Architecture::parse("input 1x8x8; conv 2x3; bogus; flatten 72; dense 3"); }) == Errc::invalid_config);
  const auto alt = Architecture::parse("input 1x210x210; conv 4x11; relu; pool 2; conv 4x13; relu; pool 2; flatten 7744; dense 3");
  CHECK(alt.feature_width() == 7744);
}

TEST_CASE("features of a 210x210 input have length 7744") {
  auto net = Network<float>::initialized(Architecture::reference(), 3);
  std::mt19937_64 rng(1);
  const auto x = random_input({1, 210, 210}, rng);
  CHECK(net.features(x).size() == 7744);
  const auto p = net.probabilities(x);
  CHECK(p.size() == 3);
  CHECK(std::abs(p.values().sum() - 1.0f) < 1e-6f);
  CHECK(net.probabilities(x) == p);
  CHECK(thrown_code([&] { net.features(Tensor<float>({1, 200, 200})); }) == Errc::shape_error);
}

TEST_CASE("features equal the activation the forward pass sees at the flatten layer") {
  auto net = Network<double>::initialized(Architecture::parse(kTiny), 9);
  std::mt19937_64 rng(2);
  const auto x = test::random_tensor({1, 8, 8}, rng);
  Tensor<double> seen;
  const std::size_t at = net.architecture().flatten_index();
  net.set_observer([&](std::size_t i, const Tensor<double>& y) {
    if (i == at) seen = y;
  });
  net.logits(x);
  net.set_observer({});
  CHECK(seen.size() == 18);
  CHECK(seen == net.features(x));
}

TEST_CASE("zero final layer gives uniform probabilities") {
  auto net = Network<float>::initialized(Architecture::parse(kTiny), 4);
  auto params = net.parameters();
  params[params.size() - 2]->values().setZero();
  params.back()->values().setZero();
  std::mt19937_64 rng(3);
  const auto p = net.probabilities(random_input({1, 8, 8}, rng));
  for (Index i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("zero input with zero conv biases gives zero features") {
  const auto net = Network<float>::initialized(Architecture::reference(), 5);
  CHECK(net.features(Tensor<float>({1, 210, 210})).values().isZero(0));
}

TEST_CASE("initialization respects the Glorot bound and the seed") {
  const auto a = Network<double>::initialized(Architecture::parse(kTiny), 1);
  const auto b = Network<double>::initialized(Architecture::parse(kTiny), 1);
  const auto c = Network<double>::initialized(Architecture::parse(kTiny), 2);
  CHECK(a.flat_parameters() == b.flat_parameters());
  CHECK(a.flat_parameters() != c.flat_parameters());
  const auto p = a.parameters();
  CHECK(p[0]->values().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (9.0 + 18.0)));
  CHECK(p[1]->values().isZero(0));
}

TEST_CASE("single repeated sample: loss never increases over 50 steps") {
  auto net = Network<double>::initialized(Architecture::parse(kTiny), 11);
  std::mt19937_64 rng(4);
  const auto x = test::random_tensor({1, 8, 8}, rng);
  Network<double>::Gradients g;
  auto velocity = net.zero_gradients();
  double prev = INFINITY;
  for (int step = 0; step < 50; ++step) {
    const double loss = net.backprop(x, 1, g).loss;
    CHECK(loss <= prev + 1e-12);
    prev = loss;
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) sgd_momentum_step(*params[i], g[i], velocity[i], 0.01, 0.0);
  }
}

TEST_CASE("training records one history row per epoch") {
  const auto split = toy_split(1);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 4;
  cfg.lr = 0.05;
  const auto r = train(Network<float>::initialized(Architecture::parse(kTiny), 1), split, cfg);
  REQUIRE(r.history.size() == 15);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    CHECK(r.history[i].epoch == static_cast<int>(i + 1));
    CHECK(r.history[i].train_accuracy >= 0.0);
    CHECK(r.history[i].train_accuracy <= 1.0);
    CHECK(r.history[i].test_accuracy >= 0.0);
    CHECK(r.history[i].test_accuracy <= 1.0);
  }
  CHECK(r.history.back().mean_loss < r.history.front().mean_loss);
  CHECK(r.history.back().train_accuracy >= 0.95);
}

TEST_CASE("training config validation and divergence") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(thrown_code([&] { cfg.validate(); }) == Errc::invalid_config);
  CHECK(thrown_code([&] { train(Network<float>::initialized(Architecture::parse(kTiny), 1), toy_split(1), cfg); }) ==
        Errc::invalid_config);

  TrainConfig wild;
  wild.epochs = 3;
  wild.lr = 1e30;
  CHECK(thrown_code([&] { train(Network<float>::initialized(Architecture::parse(kTiny), 1), toy_split(1), wild); }) ==
        Errc::divergence);

  DatasetSplit empty;
  TrainConfig ok;
  ok.epochs = 1;
  CHECK(thrown_code([&] { train(Network<float>::initialized(Architecture::parse(kTiny), 1), empty, ok); }) ==
        Errc::empty_dataset);
}

TEST_CASE("training is bit-identical across runs and thread counts") {
  const auto split = toy_split(2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.seed = 17;
  const auto arch = Architecture::parse(kTiny);
  const auto a = train(Network<float>::initialized(arch, 17), split, cfg);
  const auto b = train(Network<float>::initialized(arch, 17), split, cfg);
  cfg.threads = 3;
  const auto c = train(Network<float>::initialized(arch, 17), split, cfg);
  const auto enc = [](const TrainResult<float>& r) {
    return encode_checkpoint({r.model, 17, Normalization::standardize, r.history});
  };
  CHECK(enc(a) == enc(b));
  CHECK(enc(a) == enc(c));
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  test::ScratchDir dir("ckpt");
  const auto net = Network<float>::initialized(Architecture::reference(), 21);
  ModelCheckpoint ckpt{net, 21, Normalization::minmax, {{1, 0.5, 0.25, 1.1}, {2, 0.75, 0.5, 0.9}}};
  save_checkpoint(ckpt, dir / "m.rsck");
  const auto back = load_checkpoint(dir / "m.rsck");
  CHECK(back.seed == 21);
  CHECK(back.normalization == Normalization::minmax);
  REQUIRE(back.history.size() == 2);
  CHECK(back.history[1].test_accuracy == 0.5);
  CHECK(back.model.architecture() == net.architecture());
  CHECK(back.model.flat_parameters() == net.flat_parameters());

  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const auto x = random_input({1, 210, 210}, rng);
    CHECK(back.model.logits(x) == net.logits(x));
    if (i == 0) CHECK(back.model.features(x) == net.features(x));
  }

  auto bytes = read_file(dir / "m.rsck");
  auto bad_magic = bytes;
  bad_magic[2] = 'Z';
  CHECK(thrown_code([&] { decode_checkpoint(bad_magic); }) == Errc::corrupt_checkpoint);
  auto newer = bytes;
  newer[8] = 2;
  CHECK(thrown_code([&] { decode_checkpoint(newer); }) == Errc::version_mismatch);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK(thrown_code([&] { decode_checkpoint(flipped); }) == Errc::corrupt_checkpoint);
  CHECK(thrown_code([&] { load_checkpoint(dir / "missing.rsck"); }) == Errc::io_error);
}
