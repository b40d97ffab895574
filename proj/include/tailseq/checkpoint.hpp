#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "tailseq/adam.hpp"
#include "tailseq/params.hpp"

namespace tailseq {

// Single-file binary checkpoint: format tag, encoder config, run position
// (seed + next epoch, which is the whole RNG state under counter-based
// streams), best-so-far tracking, then every tensor in tensor_views order
// for the parameters, both optimizer moments and, when present, the best
// parameters. Raw native-endian doubles keep the round trip bit-exact. A
// trailing FNV-1a checksum catches truncation and corruption.

enum class TrainStage : std::uint32_t { backbone = 0, melt = 1 };

struct Checkpoint {
  TrainStage stage = TrainStage::backbone;
  EncoderConfig encoder;
  std::uint64_t seed = 0;
  std::uint64_t next_epoch = 0;
  ModelParams params;
  AdamState adam;
  bool has_best = false;
  double best_val_hr = 0.0;
  std::int64_t best_epoch = -1;
  ModelParams best_params;
};

namespace detail {

constexpr char kCkptMagic[8] = {'T', 'S', 'Q', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptVersion = 1;

inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Writer {
  std::string buf;
  template <class T>
  void pod(const T& v) {
    const char* raw = reinterpret_cast<const char*>(&v);
    buf.append(raw, sizeof(T));
  }
  void tensor(const MatrixXd& m) {
    pod(static_cast<std::uint64_t>(m.rows()));
    pod(static_cast<std::uint64_t>(m.cols()));
    buf.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  template <class T>
  T pod() {
    if (pos + sizeof(T) > buf.size()) throw DataError("checkpoint error: truncated file");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  void tensor(MatrixXd& m) {
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols()))
      throw DataError("checkpoint error: tensor shape mismatch");
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(rows * cols);
    if (pos + bytes > buf.size()) throw DataError("checkpoint error: truncated file");
    std::memcpy(m.data(), buf.data() + pos, bytes);
    pos += bytes;
  }
};

inline void write_params(Writer& w, const ModelParams& p) {
  for (const auto& [name, m] : tensor_views(p)) w.tensor(*m);
}

inline void read_params(Reader& r, ModelParams& p) {
  for (auto& [name, m] : tensor_views(p)) r.tensor(*m);
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::Writer w;
  w.buf.append(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  w.pod(detail::kCkptVersion);
  w.pod(static_cast<std::uint32_t>(ckpt.stage));
  w.pod(static_cast<std::int32_t>(ckpt.encoder.d));
  w.pod(static_cast<std::int32_t>(ckpt.encoder.max_len));
  w.pod(static_cast<std::int32_t>(ckpt.encoder.n_blocks));
  w.pod(static_cast<std::int32_t>(ckpt.encoder.n_heads));
  w.pod(ckpt.encoder.dropout_rate);
  w.pod(static_cast<std::int32_t>(ckpt.params.n_items));
  w.pod(ckpt.seed);
  w.pod(ckpt.next_epoch);
  w.pod(ckpt.adam.t);
  w.pod(static_cast<std::uint8_t>(ckpt.has_best ? 1 : 0));
  w.pod(ckpt.best_val_hr);
  w.pod(ckpt.best_epoch);
  detail::write_params(w, ckpt.params);
  detail::write_params(w, ckpt.adam.m);
  detail::write_params(w, ckpt.adam.v);
  if (ckpt.has_best) detail::write_params(w, ckpt.best_params);
  const std::uint64_t checksum = detail::fnv1a(w.buf);
  w.pod(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint error: cannot open " + path.string() + " for writing");
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw DataError("checkpoint error: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint error: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(detail::kCkptMagic) + sizeof(std::uint64_t))
    throw DataError("checkpoint error: truncated file");

  const std::string payload = buf.substr(0, buf.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - sizeof(std::uint64_t), sizeof(std::uint64_t));
  if (detail::fnv1a(payload) != stored) throw DataError("checkpoint error: checksum mismatch (corrupt file)");

  detail::Reader r{payload};
  char magic[8];
  for (char& c : magic) c = r.pod<char>();
  if (std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0)
    throw DataError("checkpoint error: not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != detail::kCkptVersion)
    throw DataError("checkpoint error: unsupported format version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.stage = static_cast<TrainStage>(r.pod<std::uint32_t>());
  ckpt.encoder.d = r.pod<std::int32_t>();
  ckpt.encoder.max_len = r.pod<std::int32_t>();
  ckpt.encoder.n_blocks = r.pod<std::int32_t>();
  ckpt.encoder.n_heads = r.pod<std::int32_t>();
  ckpt.encoder.dropout_rate = r.pod<double>();
  const int n_items = r.pod<std::int32_t>();
  ckpt.encoder.validate();
  ckpt.seed = r.pod<std::uint64_t>();
  ckpt.next_epoch = r.pod<std::uint64_t>();
  const auto adam_t = r.pod<std::int64_t>();
  ckpt.has_best = r.pod<std::uint8_t>() != 0;
  ckpt.best_val_hr = r.pod<double>();
  ckpt.best_epoch = r.pod<std::int64_t>();

  ckpt.params = init_params(ckpt.encoder, n_items, 0);
  detail::read_params(r, ckpt.params);
  ckpt.adam = AdamState::init(ckpt.params);
  ckpt.adam.t = adam_t;
  detail::read_params(r, ckpt.adam.m);
  detail::read_params(r, ckpt.adam.v);
  if (ckpt.has_best) {
    ckpt.best_params = init_params(ckpt.encoder, n_items, 0);
    detail::read_params(r, ckpt.best_params);
  }
  if (r.pos != payload.size()) throw DataError("checkpoint error: trailing bytes");
  return ckpt;
}

}  // namespace tailseq
