// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "negprompt/detector.hpp"
#include "negprompt/errors.hpp"

namespace negprompt {

namespace {

constexpr char kMagic[8] = {'N', 'E', 'G', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::string& bytes, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string model_config_json(const ModelConfig& c) {
  nlohmann::json j{{"image_size", c.image_size},   {"in_channels", c.in_channels},
                   {"channels", c.channels},       {"dim", c.dim},
                   {"levels", c.levels},           {"num_queries", c.num_queries},
                   {"decoder_layers", c.decoder_layers}, {"ffn_hidden", c.ffn_hidden},
                   {"k", c.k},                     {"grid", c.grid},
                   {"locality", c.locality},       {"embed_scale", c.embed_scale}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.image_size = j.at("image_size").get<std::size_t>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.dim = j.at("dim").get<std::size_t>();
    c.levels = j.at("levels").get<std::size_t>();
    c.num_queries = j.at("num_queries").get<std::size_t>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
    c.k = j.at("k").get<std::size_t>();
    c.grid = j.at("grid").get<std::size_t>();
    c.locality = j.at("locality").get<double>();
    c.embed_scale = j.at("embed_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string cfg = model_config_json(ckpt.model);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.dims()) put<std::uint64_t>(out, d);
    for (double v : t.storage()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  put<std::uint32_t>(out, crc_of(out, out.size()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("cannot write checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("checkpoint not found: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint: " + path);
  const std::size_t body = bytes.size() - 4;
  Reader r(bytes, body);
  r.text(sizeof(kMagic));
  if (r.get<std::uint32_t>() != kVersion) throw FormatError("unsupported checkpoint version");
  Reader tail(bytes, bytes.size());
  tail.text(body);
  if (tail.get<std::uint32_t>() != crc_of(bytes, body)) throw ChecksumError("checkpoint checksum mismatch");

  Checkpoint ck;
  ck.model = model_config_from_json(r.text(r.get<std::uint32_t>()));
  if (expected && !(*expected == ck.model))
    throw ConfigMismatchError("checkpoint config " + model_config_json(ck.model) + " differs from " +
                              model_config_json(*expected));
  const std::uint32_t count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text(r.get<std::uint32_t>());
    const std::uint32_t rank = r.get<std::uint32_t>();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    Tensor t(dims, 0.0);
    for (double& v : t.storage()) v = std::bit_cast<double>(r.get<std::uint64_t>());
    ck.params.emplace(std::move(name), std::move(t));
  }
  if (r.pos() != body) throw FormatError("trailing bytes in checkpoint");
  return ck;
}

}  // namespace negprompt
