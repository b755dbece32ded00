#include "rt/checkpoint.hpp"

#include "rt/binary_io.hpp"

namespace rt {

namespace {

constexpr FrameSpec kCheckpointFrame{"RSCK0001", kCheckpointVersion, Errc::corrupt_checkpoint};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& ckpt) {
  ByteWriter w;
  w.text(ckpt.model.architecture().to_string());
  w.u64(ckpt.seed);
  w.u8(static_cast<std::uint8_t>(ckpt.normalization));
  w.u32(static_cast<std::uint32_t>(ckpt.history.size()));
  for (const auto& e : ckpt.history) {
    w.u32(static_cast<std::uint32_t>(e.epoch));
    w.f64(e.train_accuracy);
    w.f64(e.test_accuracy);
    w.f64(e.mean_loss);
  }
  const auto params = ckpt.model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.u32(static_cast<std::uint32_t>(p->rank()));
    for (Index d : p->shape()) w.u32(static_cast<std::uint32_t>(d));
    w.f32_array({p->data(), static_cast<std::size_t>(p->size())});
  }
  return frame(kCheckpointFrame, w.bytes());
}

ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(unframe(kCheckpointFrame, bytes), Errc::corrupt_checkpoint);
  const std::string arch_text = r.text();
  Architecture arch = [&] {
    try {
      return Architecture::parse(arch_text);
    } catch (const Error& e) {
      throw Error(Errc::corrupt_checkpoint, std::string("embedded architecture: ") + e.what());
    }
  }();

  ModelCheckpoint ckpt{Network<float>(std::move(arch)), 0, Normalization::none, {}};
  ckpt.seed = r.u64();
  const std::uint8_t norm = r.u8();
  if (norm > static_cast<std::uint8_t>(Normalization::minmax)) {
    throw Error(Errc::corrupt_checkpoint, "unknown normalization code");
  }
  ckpt.normalization = static_cast<Normalization>(norm);
  const std::uint32_t epochs = r.u32();
  for (std::uint32_t i = 0; i < epochs; ++i) {
    EpochRecord e;
    e.epoch = static_cast<int>(r.u32());
    e.train_accuracy = r.f64();
    e.test_accuracy = r.f64();
    e.mean_loss = r.f64();
    ckpt.history.push_back(e);
  }

  auto params = ckpt.model.parameters();
  if (r.u32() != params.size()) throw Error(Errc::corrupt_checkpoint, "tensor count mismatch");
  for (auto* p : params) {
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
    if (shape != p->shape()) {
      throw Error(Errc::corrupt_checkpoint, "tensor " + shape_string(shape) + " where " +
                                                shape_string(p->shape()) + " expected");
    }
    r.f32_array({p->data(), static_cast<std::size_t>(p->size())});
  }
  if (r.remaining() != 0) throw Error(Errc::corrupt_checkpoint, "trailing bytes");
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace rt
