#include "rt/classifier_io.hpp"

#include "rt/binary_io.hpp"

namespace rt {

namespace {

constexpr FrameSpec kClassifierFrame{"RSCL0001", 1, Errc::corrupt_file};

void put_matrix(ByteWriter& w, const FeatureMatrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

FeatureMatrix get_matrix(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  FeatureMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
  return m;
}

void put_vector(ByteWriter& w, const Eigen::Ref<const Eigen::VectorXd>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

Eigen::VectorXd get_vector(ByteReader& r) {
  Eigen::VectorXd v(r.u32());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
  return v;
}

void put(ByteWriter& w, const KnnModel& m) {
  w.u32(static_cast<std::uint32_t>(m.k));
  put_matrix(w, m.points);
  for (ClassId l : m.labels) w.u8(static_cast<std::uint8_t>(l));
}

KnnModel get_knn(ByteReader& r) {
  KnnModel m;
  m.k = static_cast<int>(r.u32());
  m.points = get_matrix(r);
  for (Eigen::Index i = 0; i < m.points.rows(); ++i) m.labels.push_back(r.u8());
  return m;
}

void put(ByteWriter& w, const SvmModel& m) {
  w.u8(static_cast<std::uint8_t>(m.kernel.type));
  w.f64(m.kernel.gamma);
  w.f64(m.c);
  w.u32(static_cast<std::uint32_t>(m.dim));
  w.u8(m.converged ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(m.classes.size()));
  for (ClassId c : m.classes) w.u8(static_cast<std::uint8_t>(c));
  w.u32(static_cast<std::uint32_t>(m.machines.size()));
  for (const auto& b : m.machines) {
    w.u8(static_cast<std::uint8_t>(b.positive));
    w.u8(static_cast<std::uint8_t>(b.negative));
    w.f64(b.rho);
    w.u8(b.converged ? 1 : 0);
    w.u64(static_cast<std::uint64_t>(b.iterations));
    put_matrix(w, b.support_vectors);
    put_vector(w, b.alpha);
    put_vector(w, b.coef);
  }
}

SvmModel get_svm(ByteReader& r) {
  SvmModel m;
  const std::uint8_t kernel = r.u8();
  if (kernel > static_cast<std::uint8_t>(KernelType::rbf)) throw Error(Errc::corrupt_file, "bad kernel");
  m.kernel.type = static_cast<KernelType>(kernel);
  m.kernel.gamma = r.f64();
  m.c = r.f64();
  m.dim = r.u32();
  m.converged = r.u8() != 0;
  const std::uint32_t n_classes = r.u32();
  for (std::uint32_t i = 0; i < n_classes; ++i) m.classes.push_back(r.u8());
  const std::uint32_t n_machines = r.u32();
  for (std::uint32_t i = 0; i < n_machines; ++i) {
    BinarySvm b;
    b.positive = r.u8();
    b.negative = r.u8();
    b.rho = r.f64();
    b.converged = r.u8() != 0;
    b.iterations = static_cast<long>(r.u64());
    b.support_vectors = get_matrix(r);
    b.alpha = get_vector(r);
    b.coef = get_vector(r);
    m.machines.push_back(std::move(b));
  }
  return m;
}

void put(ByteWriter& w, const TreeModel& m) {
  w.u32(static_cast<std::uint32_t>(m.dim));
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  w.u32(static_cast<std::uint32_t>(m.nodes.size()));
  for (const auto& n : m.nodes) {
    w.u32(static_cast<std::uint32_t>(n.feature));
    w.f64(n.threshold);
    w.u32(static_cast<std::uint32_t>(n.left));
    w.u32(static_cast<std::uint32_t>(n.right));
    w.u8(static_cast<std::uint8_t>(n.label));
    for (int c : n.counts) w.u32(static_cast<std::uint32_t>(c));
  }
}

TreeModel get_tree(ByteReader& r) {
  TreeModel m;
  m.dim = r.u32();
  m.num_classes = static_cast<int>(r.u32());
  const std::uint32_t n_nodes = r.u32();
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    TreeNode n;
    n.feature = static_cast<int>(static_cast<std::int32_t>(r.u32()));
    n.threshold = r.f64();
    n.left = static_cast<int>(static_cast<std::int32_t>(r.u32()));
    n.right = static_cast<int>(static_cast<std::int32_t>(r.u32()));
    n.label = r.u8();
    for (int c = 0; c < m.num_classes; ++c) n.counts.push_back(static_cast<int>(r.u32()));
    m.nodes.push_back(std::move(n));
  }
  for (const auto& n : m.nodes) {
    if (n.is_leaf()) continue;
    if (n.feature >= m.dim || n.left <= 0 || n.right <= 0 ||
        n.left >= static_cast<int>(n_nodes) || n.right >= static_cast<int>(n_nodes)) {
      throw Error(Errc::corrupt_file, "tree node references out of range");
    }
  }
  return m;
}

}  // namespace

std::vector<ClassId> ClassifierBundle::predict(const FeatureMatrix& raw_features, int threads) const {
  const FeatureMatrix x = scaler ? scaler->apply(raw_features) : raw_features;
  return std::visit(
      [&](const auto& m) -> std::vector<ClassId> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) return knn_predict(m, x, threads);
        else if constexpr (std::is_same_v<T, SvmModel>) return svm_predict(m, x, threads);
        else return tree_predict(m, x);
      },
      model);
}

std::vector<std::uint8_t> encode_classifier(const ClassifierBundle& bundle) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(bundle.model.index()));
  w.u8(bundle.scaler ? 1 : 0);
  if (bundle.scaler) {
    put_vector(w, bundle.scaler->mean.transpose());
    put_vector(w, bundle.scaler->scale.transpose());
  }
  std::visit([&](const auto& m) { put(w, m); }, bundle.model);
  return frame(kClassifierFrame, w.bytes());
}

ClassifierBundle decode_classifier(std::span<const std::uint8_t> bytes) {
  ByteReader r(unframe(kClassifierFrame, bytes), Errc::corrupt_file);
  const std::uint8_t kind = r.u8();
  const bool has_scaler = r.u8() != 0;
  ClassifierBundle b;
  if (has_scaler) {
    Standardizer s;
    s.mean = get_vector(r).transpose();
    s.scale = get_vector(r).transpose();
    b.scaler = std::move(s);
  }
  switch (kind) {
    case 0: b.model = get_knn(r); break;
    case 1: b.model = get_svm(r); break;
    case 2: b.model = get_tree(r); break;
    default: throw Error(Errc::corrupt_file, "unknown classifier kind");
  }
  if (r.remaining() != 0) throw Error(Errc::corrupt_file, "trailing bytes in classifier file");
  return b;
}

void save_classifier(const ClassifierBundle& bundle, const std::filesystem::path& path) {
  write_file(path, encode_classifier(bundle));
}

ClassifierBundle load_classifier(const std::filesystem::path& path) {
  return decode_classifier(read_file(path));
}

}  // namespace rt
