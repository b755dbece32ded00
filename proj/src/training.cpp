#include "rt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rt/parallel.hpp"

namespace rt {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Errc::invalid_config, "epochs must be >= 1");
  if (batch_size < 1) throw Error(Errc::invalid_config, "batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(Errc::invalid_config, "lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(Errc::invalid_config, "momentum must lie in [0, 1)");
  }
  if (threads < 1) throw Error(Errc::invalid_config, "threads must be >= 1");
}

template <typename Scalar>
std::vector<ClassId> predict_all(const Network<Scalar>& model, std::span<const SampleMatrix> data,
                                 int threads) {
  std::vector<ClassId> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    out[i] = static_cast<ClassId>(model.predict(model.input_from(data[i].data)));
  });
  return out;
}

template <typename Scalar>
double accuracy(const Network<Scalar>& model, std::span<const SampleMatrix> data, int threads) {
  if (data.empty()) return 0.0;
  const auto pred = predict_all(model, data, threads);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += pred[i] == data[i].label;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

template <typename Scalar>
TrainResult<Scalar> train(Network<Scalar> model, const DatasetSplit& split, const TrainConfig& cfg,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (split.train.empty()) throw Error(Errc::empty_dataset, "no training samples");
  const Index classes = model.architecture().num_classes();
  for (const auto& s : split.train) {
    if (s.label < 0 || s.label >= classes) {
      throw Error(Errc::invalid_class, "label " + std::to_string(s.label) + " but network has " +
                                           std::to_string(classes) + " outputs");
    }
  }

  const auto lr = static_cast<Scalar>(cfg.lr);
  const auto momentum = static_cast<Scalar>(cfg.momentum);
  const std::size_t n = split.train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto group = static_cast<std::size_t>(cfg.threads);

  std::vector<std::size_t> order(n);
  std::vector<typename Network<Scalar>::Gradients> sample_grads(std::min(group, batch));
  std::vector<Scalar> sample_loss(sample_grads.size());

  TrainResult<Scalar> result{std::move(model), {}};
  Network<Scalar>& net = result.model;
  auto params = net.parameters();
  std::vector<Tensor<Scalar>> velocity;
  for (const auto* p : params) velocity.emplace_back(p->shape());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_no) {
      const std::size_t end = std::min(n, start + batch);
      auto acc = net.zero_gradients();
      Scalar batch_loss = 0;

      // Gradients are computed `group` samples at a time and summed in
      // sample order, which keeps the result independent of thread count.
      for (std::size_t g0 = start; g0 < end; g0 += group) {
        const std::size_t g1 = std::min(end, g0 + group);
        parallel_for(g1 - g0, cfg.threads, [&](std::size_t j) {
          const SampleMatrix& s = split.train[order[g0 + j]];
          sample_loss[j] = net.backprop(net.input_from(s.data), s.label, sample_grads[j]).loss;
        });
        for (std::size_t j = 0; j < g1 - g0; ++j) {
          for (std::size_t p = 0; p < acc.size(); ++p) acc[p].values() += sample_grads[j][p].values();
          batch_loss += sample_loss[j];
        }
      }

      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw Error(Errc::divergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(batch_no));
      }
      const Scalar scale = Scalar(1) / static_cast<Scalar>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        acc[p].values() *= scale;
        sgd_momentum_step(*params[p], acc[p], velocity[p], lr, momentum);
      }
      loss_sum += static_cast<double>(batch_loss);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = accuracy(net, std::span<const SampleMatrix>(split.train), cfg.threads);
    rec.test_accuracy = accuracy(net, std::span<const SampleMatrix>(split.test), cfg.threads);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

template TrainResult<float> train(Network<float>, const DatasetSplit&, const TrainConfig&,
                                  const std::function<void(const EpochRecord&)>&);
template TrainResult<double> train(Network<double>, const DatasetSplit&, const TrainConfig&,
                                   const std::function<void(const EpochRecord&)>&);
template std::vector<ClassId> predict_all(const Network<float>&, std::span<const SampleMatrix>, int);
template std::vector<ClassId> predict_all(const Network<double>&, std::span<const SampleMatrix>, int);
template double accuracy(const Network<float>&, std::span<const SampleMatrix>, int);
template double accuracy(const Network<double>&, std::span<const SampleMatrix>, int);

}  // namespace rt
