#include "rt/features.hpp"

#include <cmath>

#include "rt/binary_io.hpp"

namespace rt {

namespace {

constexpr FrameSpec kFeatureFrame{"RSFT0001", 1, Errc::corrupt_file};

}  // namespace

Standardizer Standardizer::fit(const FeatureMatrix& x) {
  if (x.rows() == 0) throw Error(Errc::empty_dataset, "cannot standardize zero rows");
  Standardizer s;
  s.mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - s.mean).array().square().colwise().mean();
  s.scale = var.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 1.0; });
  return s;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& x) const {
  if (x.cols() != mean.size()) {
    throw Error(Errc::dimension_mismatch, "standardizer fitted on " + std::to_string(mean.size()) +
                                              " features, got " + std::to_string(x.cols()));
  }
  return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

void write_feature_file(const std::filesystem::path& path, const FeatureSet& features) {
  const auto count = static_cast<std::size_t>(features.values.rows());
  const auto dim = static_cast<std::size_t>(features.values.cols());
  if (features.labels.size() != count) {
    throw Error(Errc::length_mismatch, "feature rows and labels differ");
  }
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(count));
  w.u32(static_cast<std::uint32_t>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    w.u8(static_cast<std::uint8_t>(features.labels[i]));
    w.f32_array({features.values.row(static_cast<Eigen::Index>(i)).data(), dim});
  }
  write_file(path, frame(kFeatureFrame, w.bytes()));
}

FeatureSet read_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(unframe(kFeatureFrame, bytes), Errc::corrupt_file);
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  FeatureSet f;
  f.values.resize(count, dim);
  f.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    f.labels[i] = r.u8();
    r.f32_array({f.values.row(i).data(), dim});
  }
  if (r.remaining() != 0) throw Error(Errc::corrupt_file, "trailing bytes in feature file");
  return f;
}

FeatureMatrix gather_rows(const FeatureSet& features, std::span<const std::size_t> rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), features.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    if (r >= features.values.rows()) throw Error(Errc::shape_error, "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = features.values.row(r).cast<double>();
  }
  return out;
}

std::vector<ClassId> gather_labels(const FeatureSet& features, std::span<const std::size_t> rows) {
  std::vector<ClassId> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(features.labels.at(r));
  return out;
}

}  // namespace rt
