#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rt/audio.hpp"

namespace rt {

/// One sample per row.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-column z-scoring with train-set statistics. Zero-variance columns
/// keep scale 1 so they map to 0.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const FeatureMatrix& x);
  FeatureMatrix apply(const FeatureMatrix& x) const;
};

/// Feature file: `RSFT0001` | u32 version | u32 count | u32 dim |
/// count x (u8 label, f32 x dim) | u32 CRC32.
struct FeatureSet {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
  std::vector<ClassId> labels;
};

void write_feature_file(const std::filesystem::path& path, const FeatureSet& features);
FeatureSet read_feature_file(const std::filesystem::path& path);

/// Rows of `features` selected by `rows`, widened to double.
FeatureMatrix gather_rows(const FeatureSet& features, std::span<const std::size_t> rows);
std::vector<ClassId> gather_labels(const FeatureSet& features, std::span<const std::size_t> rows);

}  // namespace rt
