#include "quarc/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <zlib.h>

#include "quarc/error.hpp"
#include "quarc/io.hpp"

namespace quarc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'Q', 'R', 'C', '1'};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, n);
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

Shape stored_shape(const Tensor& t) {
  Shape s;
  if (t.is_quaternion()) s.push_back(4);
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return s;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> take_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw IngestionError(std::string("checkpoint: truncated ") + what, pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const Shape dims = stored_shape(p.value);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) put<double>(out, v);
  }
  put<std::uint32_t>(out, crc_of(out));
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IngestionError("checkpoint: missing QRC1 magic", 0);
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc_of(bytes.first(body)) != stored) throw IngestionError("checkpoint: CRC-32 mismatch", body);

  Reader rd(bytes.first(body));
  rd.take_bytes(sizeof kMagic, "magic");
  std::vector<CheckpointEntry> entries;
  while (rd.remaining() > 0) {
    CheckpointEntry e;
    const auto name_len = rd.take<std::uint32_t>("name length");
    const auto name = rd.take_bytes(name_len, "name");
    e.name.assign(name.begin(), name.end());
    const std::size_t rank_at = rd.pos();
    const auto rank = rd.take<std::uint32_t>("rank");
    if (rank > 8) throw IngestionError("checkpoint: implausible rank " + std::to_string(rank), rank_at);
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.dims.push_back(rd.take<std::uint32_t>("dims"));
      count *= e.dims.back();
    }
    if (count > rd.remaining() / sizeof(double))
      throw IngestionError("checkpoint: payload of '" + e.name + "' runs past the end", rd.pos());
    e.values.resize(count);
    const auto payload = rd.take_bytes(count * sizeof(double), "payload");
    std::memcpy(e.values.data(), payload.data(), payload.size());
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(params));
}

std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

void apply_checkpoint(ParameterSet& params, const std::vector<CheckpointEntry>& entries) {
  if (entries.size() != params.size())
    throw DataError("checkpoint holds " + std::to_string(entries.size()) + " parameters, model has " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    Parameter& p = params[i];
    if (e.name != p.name) throw DataError("checkpoint parameter '" + e.name + "' where '" + p.name + "' was expected");
    const Shape want = stored_shape(p.value);
    if (!std::equal(want.begin(), want.end(), e.dims.begin(), e.dims.end()))
      throw DataError("checkpoint parameter '" + e.name + "' has the wrong shape");
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    std::copy(entries[i].values.begin(), entries[i].values.end(), params[i].value.data().begin());
}

}  // namespace quarc
