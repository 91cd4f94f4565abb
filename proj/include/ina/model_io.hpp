#pragma once

// Binary model file.
//
// All integers little-endian, doubles as IEEE-754 bit patterns.
//
//   "INAM"            4 bytes magic
//   version           u16
//   file_size         u64  total bytes including the trailing checksum
//   header_len        u32  bytes of the header block that follows
//   header            u32 M, u32 W, u64 nnz, u64 N, u8 emergence mode, u8 activation,
//                     u32 complexity, f64 psi_floor, f64 smoothing, f64 epsilon, i64 build_time
//   vocabulary        u32 M, M x (u32 len, bytes), u32 W, W x (u32 len, bytes)
//   bias              W x f64
//   weights           nnz x (u32 feature, u32 class, f64 weight), sorted by (feature, class)
//   checksum          u64 FNV-1a over every preceding byte

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "ina/model.hpp"

namespace ina {

inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[4] = {'I', 'N', 'A', 'M'};

enum class ModelIoErrc {
  io_failure = 1,
  bad_magic,
  version_mismatch,
  truncated,
  checksum_mismatch,
  malformed,
};

inline const char* to_string(ModelIoErrc e) {
  switch (e) {
    case ModelIoErrc::io_failure: return "io_failure";
    case ModelIoErrc::bad_magic: return "bad_magic";
    case ModelIoErrc::version_mismatch: return "version_mismatch";
    case ModelIoErrc::truncated: return "truncated";
    case ModelIoErrc::checksum_mismatch: return "checksum_mismatch";
    case ModelIoErrc::malformed: return "malformed";
  }
  return "unknown";
}

class ModelIoError : public std::runtime_error {
public:
  ModelIoError(ModelIoErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ModelIoErrc code() const { return code_; }

private:
  ModelIoErrc code_;
};

inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t k = 0; k < n; ++k) {
    h ^= data[k];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

class ByteWriter {
public:
  std::vector<std::uint8_t> bytes;

  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t k = 0; k < sizeof(T); ++k) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  template <typename T>
  void patch(std::size_t at, T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t k = 0; k < sizeof(T); ++k) bytes[at + k] = static_cast<std::uint8_t>(u >> (8 * k));
  }
};

class ByteReader {
public:
  ByteReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) u |= static_cast<std::make_unsigned_t<T>>(p_[k]) << (8 * k);
    p_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }
  void skip(std::size_t n) {
    need(n);
    p_ += n;
  }

private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ModelIoError(ModelIoErrc::malformed, "field runs past end of body");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

inline constexpr std::size_t kPreambleSize = 4 + 2 + 8;
inline constexpr std::size_t kHeaderSize = 4 + 4 + 8 + 8 + 1 + 1 + 4 + 8 + 8 + 8 + 8;

} // namespace detail

inline std::vector<std::uint8_t> serialize_model(const InfoModel& m) {
  detail::ByteWriter w;
  for (char c : kModelMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(kModelFormatVersion);
  const std::size_t size_at = w.bytes.size();
  w.put(std::uint64_t{0});

  const std::uint64_t nnz = m.nonzeros();
  w.put(static_cast<std::uint32_t>(detail::kHeaderSize));
  w.put(static_cast<std::uint32_t>(m.num_features()));
  w.put(static_cast<std::uint32_t>(m.num_classes()));
  w.put(nnz);
  w.put(m.provenance.total_count);
  w.put(static_cast<std::uint8_t>(m.emergence.mode));
  w.put(static_cast<std::uint8_t>(m.activation));
  w.put(m.emergence.complexity);
  w.put_f64(m.emergence.psi_floor);
  w.put_f64(m.provenance.smoothing);
  w.put_f64(m.provenance.epsilon);
  w.put(m.provenance.build_time);

  w.put(static_cast<std::uint32_t>(m.vocab.features.size()));
  for (const auto& s : m.vocab.features.names()) w.put_str(s);
  w.put(static_cast<std::uint32_t>(m.vocab.classes.size()));
  for (const auto& s : m.vocab.classes.names()) w.put_str(s);

  for (double b : m.bias()) w.put_f64(b);
  for (FeatureId i = 0; i < m.num_features(); ++i)
    for (const auto& e : m.row(i)) {
      w.put(i);
      w.put(e.cls);
      w.put_f64(e.weight);
    }

  w.patch(size_at, static_cast<std::uint64_t>(w.bytes.size() + 8));
  w.put(fnv1a64(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

inline InfoModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  using detail::ByteReader;
  if (bytes.size() < 4) throw ModelIoError(ModelIoErrc::truncated, "file shorter than magic");
  if (!std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    throw ModelIoError(ModelIoErrc::bad_magic, "not a model file");
  if (bytes.size() < detail::kPreambleSize) throw ModelIoError(ModelIoErrc::truncated, "file shorter than preamble");

  ByteReader pre(bytes.data() + 4, detail::kPreambleSize - 4);
  const auto version = pre.get<std::uint16_t>();
  if (version != kModelFormatVersion)
    throw ModelIoError(ModelIoErrc::version_mismatch,
                       "format version " + std::to_string(version) + ", expected " +
                           std::to_string(kModelFormatVersion));
  const auto declared = pre.get<std::uint64_t>();
  if (bytes.size() < declared || bytes.size() < detail::kPreambleSize + 8)
    throw ModelIoError(ModelIoErrc::truncated, "file has " + std::to_string(bytes.size()) + " of " +
                                                   std::to_string(declared) + " bytes");
  if (bytes.size() != declared) throw ModelIoError(ModelIoErrc::malformed, "trailing bytes after checksum");

  const std::size_t body_end = bytes.size() - 8;
  ByteReader tail(bytes.data() + body_end, 8);
  if (tail.get<std::uint64_t>() != fnv1a64(bytes.data(), body_end))
    throw ModelIoError(ModelIoErrc::checksum_mismatch, "checksum does not match contents");

  ByteReader r(bytes.data() + detail::kPreambleSize, body_end - detail::kPreambleSize);
  const auto header_len = r.get<std::uint32_t>();
  if (header_len < detail::kHeaderSize) throw ModelIoError(ModelIoErrc::malformed, "header too short");
  const auto M = r.get<std::uint32_t>();
  const auto W = r.get<std::uint32_t>();
  const auto nnz = r.get<std::uint64_t>();
  InfoModel m(M, W);
  m.provenance.total_count = r.get<std::uint64_t>();
  const auto mode = r.get<std::uint8_t>();
  const auto act = r.get<std::uint8_t>();
  if (mode > 2 || act > 1) throw ModelIoError(ModelIoErrc::malformed, "unknown enum value in header");
  m.emergence.mode = static_cast<EmergenceMode>(mode);
  m.activation = static_cast<Activation>(act);
  m.emergence.complexity = r.get<std::uint32_t>();
  m.emergence.psi_floor = r.get_f64();
  m.provenance.smoothing = r.get_f64();
  m.provenance.epsilon = r.get_f64();
  m.provenance.build_time = r.get<std::int64_t>();
  r.skip(header_len - detail::kHeaderSize);

  auto read_names = [&](std::size_t expect) {
    const auto n = r.get<std::uint32_t>();
    if (n != expect && n != 0) throw ModelIoError(ModelIoErrc::malformed, "vocabulary size mismatch");
    std::vector<std::string> names;
    names.reserve(n);
    for (std::uint32_t k = 0; k < n; ++k) names.push_back(r.get_str());
    return names;
  };
  try {
    m.vocab.features = NameTable::from_names(read_names(M));
    m.vocab.classes = NameTable::from_names(read_names(W));
  } catch (const ValidationError& e) {
    throw ModelIoError(ModelIoErrc::malformed, e.what());
  }
  m.vocab.freeze();

  std::vector<InfoBits> bias(W);
  for (auto& b : bias) b = r.get_f64();
  if (r.remaining() != nnz * 16) throw ModelIoError(ModelIoErrc::malformed, "weight block size mismatch");

  std::vector<WeightEntry> row;
  std::uint32_t current = 0;
  std::uint64_t prev_key = 0;
  try {
    m.set_bias(std::move(bias));
    for (std::uint64_t k = 0; k < nnz; ++k) {
      const auto i = r.get<std::uint32_t>();
      const auto j = r.get<std::uint32_t>();
      const double w = r.get_f64();
      const std::uint64_t key = (std::uint64_t{i} << 32) | j;
      if (i >= M || j >= W || (k > 0 && key <= prev_key) || !std::isfinite(w))
        throw ModelIoError(ModelIoErrc::malformed, "weight record " + std::to_string(k) + " invalid");
      prev_key = key;
      if (i != current) {
        m.set_row(current, std::move(row));
        row.clear();
        current = i;
      }
      row.push_back({j, w});
    }
    if (M > 0) m.set_row(current, std::move(row));
  } catch (const ValidationError& e) {
    throw ModelIoError(ModelIoErrc::malformed, e.what());
  }
  return m;
}

/// Writes to "<path>.tmp" and renames, so a failed save never leaves a partial model at `path`.
inline void save_model(const InfoModel& m, const std::filesystem::path& path) {
  const auto bytes = serialize_model(m);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelIoError(ModelIoErrc::io_failure, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) {
      out.close();
      std::filesystem::remove(tmp);
      throw ModelIoError(ModelIoErrc::io_failure, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ModelIoError(ModelIoErrc::io_failure, "rename to " + path.string() + ": " + ec.message());
  }
}

inline InfoModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError(ModelIoErrc::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ModelIoError(ModelIoErrc::io_failure, "read failed for " + path.string());
  return deserialize_model(bytes);
}

} // namespace ina
