#pragma once

#include <filesystem>
#include <optional>
#include <variant>

#include "rt/knn.hpp"
#include "rt/svm.hpp"
#include "rt/tree.hpp"

namespace rt {

/// A fitted classical classifier plus the feature scaling it was trained
/// behind. Persisted as `RSCL0001` | u32 version | u8 kind | u8 has_scaler |
/// [scaler] | model payload | u32 CRC32.
struct ClassifierBundle {
  std::variant<KnnModel, SvmModel, TreeModel> model;
  std::optional<Standardizer> scaler;

  std::vector<ClassId> predict(const FeatureMatrix& raw_features, int threads = 1) const;
};

std::vector<std::uint8_t> encode_classifier(const ClassifierBundle& bundle);
ClassifierBundle decode_classifier(std::span<const std::uint8_t> bytes);

void save_classifier(const ClassifierBundle& bundle, const std::filesystem::path& path);
ClassifierBundle load_classifier(const std::filesystem::path& path);

}  // namespace rt
