#include "rt/network.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace rt {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Index parse_index(std::string_view s, std::string_view clause) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0) {
    throw Error(Errc::invalid_config, "bad number '" + std::string(s) + "' in '" +
                                          std::string(clause) + "'");
  }
  return v;
}

std::vector<Index> parse_dims(std::string_view s, std::string_view clause) {
  std::vector<Index> dims;
  std::size_t start = 0;
  while (true) {
    const auto x = s.find('x', start);
    dims.push_back(parse_index(s.substr(start, x - start), clause));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  return dims;
}

}  // namespace

Architecture::Architecture(Shape input, std::vector<LayerSpec> layers)
    : input_(std::move(input)), layers_(std::move(layers)) {
  if (input_.size() != 3 || input_[0] < 1 || input_[1] < 1 || input_[2] < 1) {
    throw Error(Errc::shape_error, "network input must be [channels, height, width]");
  }
  bool seen_flatten = false;
  Shape shape = input_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    const std::string where = "layer " + std::to_string(i);
    switch (l.kind) {
      case LayerKind::conv:
        if (seen_flatten) throw Error(Errc::shape_error, where + ": conv after flatten");
        if (l.units < 1 || l.size < 1 || l.size > shape[1] || l.size > shape[2]) {
          throw Error(Errc::shape_error, where + ": conv " + std::to_string(l.size) +
                                             " does not fit " + shape_string(shape));
        }
        shape = {l.units, shape[1] - l.size + 1, shape[2] - l.size + 1};
        break;
      case LayerKind::pool:
        if (seen_flatten) throw Error(Errc::shape_error, where + ": pool after flatten");
        if (l.size < 1 || l.size > shape[1] || l.size > shape[2]) {
          throw Error(Errc::shape_error, where + ": pool window does not fit " + shape_string(shape));
        }
        shape = {shape[0], shape[1] / l.size, shape[2] / l.size};
        break;
      case LayerKind::relu:
        break;
      case LayerKind::flatten:
        if (seen_flatten) throw Error(Errc::shape_error, where + ": second flatten");
        seen_flatten = true;
        flatten_index_ = i;
        if (shape_size(shape) != l.units) {
          throw Error(Errc::shape_error, where + ": declared feature width " +
                                             std::to_string(l.units) + " but trace gives " +
                                             shape_string(shape) + " = " +
                                             std::to_string(shape_size(shape)));
        }
        shape = {l.units};
        break;
      case LayerKind::dense:
        if (!seen_flatten) throw Error(Errc::shape_error, where + ": dense before flatten");
        if (l.units < 1) throw Error(Errc::shape_error, where + ": dense needs outputs");
        shape = {l.units};
        break;
    }
    trace_.push_back(shape);
  }
  if (!seen_flatten || layers_.back().kind != LayerKind::dense || layers_.back().units < 2) {
    throw Error(Errc::shape_error, "architecture must flatten and end in a dense layer with >= 2 outputs");
  }
}

Architecture Architecture::reference() {
  return parse(
      "input 1x210x210; conv 16x11; relu; pool 2; conv 16x9; relu; pool 2; "
      "conv 16x3; relu; pool 2; flatten 7744; dense 128; relu; dense 3");
}

Architecture Architecture::parse(std::string_view text) {
  Shape input;
  std::vector<LayerSpec> layers;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find_first_of(";\n", start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view clause = trim(text.substr(start, end - start));
    start = end + 1;
    if (clause.empty()) continue;

    const auto space = clause.find(' ');
    const std::string_view op = clause.substr(0, space);
    const std::string_view arg = space == std::string_view::npos ? "" : trim(clause.substr(space + 1));
    const auto need_arg = [&] {
      if (arg.empty()) throw Error(Errc::invalid_config, "'" + std::string(clause) + "' needs an argument");
    };

    if (op == "input") {
      need_arg();
      input = parse_dims(arg, clause);
    } else if (op == "conv") {
      need_arg();
      const auto d = parse_dims(arg, clause);
      if (d.size() != 2) throw Error(Errc::invalid_config, "conv expects FILTERSxKERNEL");
      layers.push_back({LayerKind::conv, d[0], d[1]});
    } else if (op == "pool") {
      need_arg();
      layers.push_back({LayerKind::pool, 0, parse_index(arg, clause)});
    } else if (op == "relu") {
      layers.push_back({LayerKind::relu, 0, 0});
    } else if (op == "flatten") {
      need_arg();
      layers.push_back({LayerKind::flatten, parse_index(arg, clause), 0});
    } else if (op == "dense") {
      need_arg();
      layers.push_back({LayerKind::dense, parse_index(arg, clause), 0});
    } else {
      throw Error(Errc::invalid_config, "unknown layer '" + std::string(op) + "'");
    }
  }
  if (input.empty()) throw Error(Errc::invalid_config, "architecture has no input clause");
  return Architecture(std::move(input), std::move(layers));
}

std::string Architecture::to_string() const {
  std::ostringstream out;
  out << "input " << input_[0] << 'x' << input_[1] << 'x' << input_[2];
  for (const auto& l : layers_) {
    out << "; ";
    switch (l.kind) {
      case LayerKind::conv: out << "conv " << l.units << 'x' << l.size; break;
      case LayerKind::relu: out << "relu"; break;
      case LayerKind::pool: out << "pool " << l.size; break;
      case LayerKind::flatten: out << "flatten " << l.units; break;
      case LayerKind::dense: out << "dense " << l.units; break;
    }
  }
  return out.str();
}

}  // namespace rt
