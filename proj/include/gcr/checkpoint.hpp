#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcr/config.hpp"
#include "gcr/errors.hpp"
#include "gcr/io.hpp"
#include "gcr/model.hpp"

namespace gcr {

// File layout: magic, u64 little-endian header length, JSON header, then the
// raw little-endian arrays in the order the header lists them.
inline constexpr char kCheckpointMagic[8] = {'G', 'C', 'R', 'C', 'K', 'P', 'T', '\n'};
inline constexpr int kCheckpointVersion = 1;

template <Scalar T>
struct Checkpoint {
  TrainConfig config;
  ModelParams<T> model;
  Vocabulary entities;
  Vocabulary relations;
  bool directed = true;
  std::optional<EntityId> item_begin;
};

template <Scalar T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

namespace detail {

template <class U>
U byteswap_value(U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
  std::memcpy(&v, b, sizeof(U));
  return v;
}

template <class U>
void write_le(std::ostream& out, const U* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(U)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const U v = byteswap_value(data[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof(U));
    }
  }
}

template <class U>
void read_le(const std::string& buf, std::size_t& pos, U* data, std::size_t n, const std::string& what) {
  const std::size_t bytes = n * sizeof(U);
  if (buf.size() - pos < bytes) {
    throw CheckpointError("checkpoint truncated while reading " + what + ": need " + std::to_string(bytes) +
                          " bytes, " + std::to_string(buf.size() - pos) + " left");
  }
  std::memcpy(data, buf.data() + pos, bytes);
  pos += bytes;
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) data[i] = byteswap_value(data[i]);
  }
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct RawCheckpoint {
  nlohmann::json header;
  std::string bytes;
  std::size_t body = 0;  // offset of the first array
};

inline RawCheckpoint read_raw(const std::filesystem::path& path) {
  RawCheckpoint raw;
  raw.bytes = read_all(path);
  if (raw.bytes.size() < sizeof kCheckpointMagic + 8 ||
      std::memcmp(raw.bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic or too short)");
  }
  std::size_t pos = sizeof kCheckpointMagic;
  std::uint64_t header_len = 0;
  read_le(raw.bytes, pos, &header_len, 1, "header length");
  if (raw.bytes.size() - pos < header_len) throw CheckpointError("checkpoint truncated inside header");
  try {
    raw.header = nlohmann::json::parse(raw.bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  raw.body = pos + header_len;
  const int version = raw.header.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  return raw;
}

}  // namespace detail

template <Scalar T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
  const auto& shape = ck.model.shape();
  nlohmann::json h;
  h["format_version"] = kCheckpointVersion;
  h["dtype"] = dtype_name<T>();
  h["config"] = ck.config.to_map();
  h["shape"] = {{"entities", shape.entities},
                {"relations", shape.relations},
                {"dim", shape.dim},
                {"layers", shape.layers},
                {"encoder_hidden", shape.hidden()}};
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : ck.model.parameters()) tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  tensors.push_back({{"name", "anchor"}, {"shape", ck.model.anchor().shape()}});
  h["tensors"] = tensors;
  h["entities"] = ck.entities.names();
  h["relations"] = ck.relations.names();
  h["directed"] = ck.directed;
  h["item_begin"] = ck.item_begin ? nlohmann::json(*ck.item_begin) : nlohmann::json(nullptr);

  const std::string text = h.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint64_t len = text.size();
  detail::write_le(out, &len, 1);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : ck.model.parameters()) detail::write_le(out, p.value.storage().data(), p.value.size());
  detail::write_le(out, ck.model.anchor().storage().data(), ck.model.anchor().size());
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

/// Element type stored in a checkpoint ("f32" or "f64").
inline std::string peek_checkpoint_dtype(const std::filesystem::path& path) {
  return detail::read_raw(path).header.value("dtype", std::string());
}

template <Scalar T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  auto raw = detail::read_raw(path);
  const auto& h = raw.header;
  try {
    if (h.at("dtype").get<std::string>() != dtype_name<T>()) {
      throw CheckpointError("checkpoint dtype " + h.at("dtype").get<std::string>() + " does not match requested " +
                            dtype_name<T>());
    }
    Checkpoint<T> ck;
    for (const auto& [k, v] : h.at("config").items()) ck.config.set(k, v.template get<std::string>());
    ModelShape shape;
    shape.entities = h.at("shape").at("entities").get<std::size_t>();
    shape.relations = h.at("shape").at("relations").get<std::size_t>();
    shape.dim = h.at("shape").at("dim").get<std::size_t>();
    shape.layers = h.at("shape").at("layers").get<std::size_t>();
    shape.encoder_hidden = h.at("shape").at("encoder_hidden").get<std::size_t>();

    std::vector<Parameter<T>> tensors;
    std::optional<Tensor<T>> anchor;
    std::size_t pos = raw.body;
    for (const auto& entry : h.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      Tensor<T> t(entry.at("shape").template get<std::vector<std::size_t>>());
      detail::read_le(raw.bytes, pos, t.storage().data(), t.size(), "tensor '" + name + "'");
      if (name == "anchor") {
        anchor = std::move(t);
      } else {
        tensors.emplace_back(name, std::move(t));
      }
    }
    if (pos != raw.bytes.size()) {
      throw CheckpointError("checkpoint has " + std::to_string(raw.bytes.size() - pos) + " trailing bytes");
    }
    if (!anchor) throw CheckpointError("checkpoint has no anchor tensor");
    try {
      ck.model = ModelParams<T>::from_tensors(shape, std::move(tensors), std::move(*anchor));
    } catch (const std::exception& e) {
      throw CheckpointError(std::string("checkpoint shape check failed: ") + e.what());
    }
    ck.entities = Vocabulary::from_names(h.at("entities").get<std::vector<std::string>>());
    ck.relations = Vocabulary::from_names(h.at("relations").get<std::vector<std::string>>());
    if (ck.entities.size() != shape.entities || ck.relations.size() != shape.relations) {
      throw CheckpointError("checkpoint vocabulary sizes do not match its tensor shapes");
    }
    ck.directed = h.at("directed").get<bool>();
    if (!h.at("item_begin").is_null()) ck.item_begin = h.at("item_begin").get<EntityId>();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
}

}  // namespace gcr
