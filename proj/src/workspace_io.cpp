#include "wsrl/workspace_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

namespace wsrl {

static_assert(std::endian::native == std::endian::little, "workspace format assumes a little-endian host");

namespace {

constexpr char kWorkspaceMagic[4] = {'W', 'S', 'P', 'C'};
constexpr char kDatasetMagic[4] = {'W', 'S', 'D', 'S'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  size_t size() const { return out_.size(); }
  std::vector<uint8_t>& bytes() { return out_; }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T take(const char* what) {
    T value;
    take_bytes(&value, sizeof(T), what);
    return value;
  }
  void take_bytes(void* dst, size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw TruncatedError(std::string("truncated workspace data while reading ") + what);
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  size_t pos() const { return pos_; }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

uint32_t crc_of(std::span<const uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths.
  size_t done = 0;
  while (done < bytes.size()) {
    const size_t chunk = std::min<size_t>(bytes.size() - done, std::numeric_limits<uInt>::max());
    crc = crc32(crc, bytes.data() + done, static_cast<uInt>(chunk));
    done += chunk;
  }
  return static_cast<uint32_t>(crc);
}

void check_header(Reader& r, const char (&magic)[4], uint16_t version, const char* kind) {
  char got[4];
  r.take_bytes(got, 4, "magic");
  if (std::memcmp(got, magic, 4) != 0) throw BadMagicError(std::string("bad magic: not a ") + kind + " file");
  const auto v = r.take<uint16_t>("version");
  if (v != version) {
    throw VersionMismatchError(std::string(kind) + " version " + std::to_string(v) + " unsupported (expected " +
                               std::to_string(version) + ")");
  }
}

}  // namespace

std::vector<uint8_t> serialize(const Workspace& ws) {
  Writer w;
  w.put_bytes(kWorkspaceMagic, 4);
  w.put<uint16_t>(kWorkspaceFormatVersion);
  const size_t payload_begin = w.size();
  const auto names = ws.variables();
  w.put<uint32_t>(static_cast<uint32_t>(names.size()));
  for (const auto& name : names) {
    if (name.size() > std::numeric_limits<uint16_t>::max()) throw FormatError("variable name too long: " + name);
    const Tensor values = ws.full(name).detach();
    const Shape& item = ws.item_shape(name);
    if (item.size() > std::numeric_limits<uint8_t>::max()) throw FormatError("rank too large for '" + name + "'");
    w.put<uint16_t>(static_cast<uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<uint32_t>(static_cast<uint32_t>(values.size(0)));
    w.put<uint32_t>(static_cast<uint32_t>(values.size(1)));
    w.put<uint8_t>(static_cast<uint8_t>(item.size()));
    for (int64_t e : item) w.put<uint32_t>(static_cast<uint32_t>(e));
    w.put_bytes(values.data().data(), values.data().size() * sizeof(float));
  }
  auto& bytes = w.bytes();
  const uint32_t crc = crc_of(std::span<const uint8_t>(bytes).subspan(payload_begin));
  w.put<uint32_t>(crc);
  return std::move(w.bytes());
}

Workspace deserialize_prefix(std::span<const uint8_t> bytes, size_t& consumed) {
  Reader r(bytes);
  check_header(r, kWorkspaceMagic, kWorkspaceFormatVersion, "workspace");
  const size_t payload_begin = r.pos();
  const auto count = r.take<uint32_t>("variable count");

  struct Pending {
    std::string name;
    Shape shape;
    std::vector<float> data;
  };
  std::vector<Pending> pending;
  for (uint32_t v = 0; v < count; ++v) {
    Pending p;
    const auto name_len = r.take<uint16_t>("name length");
    p.name.resize(name_len);
    r.take_bytes(p.name.data(), name_len, "name");
    const auto steps = r.take<uint32_t>("time extent");
    const auto batch = r.take<uint32_t>("batch extent");
    const auto rank = r.take<uint8_t>("rank");
    p.shape = {steps, batch};
    for (uint8_t k = 0; k < rank; ++k) p.shape.push_back(r.take<uint32_t>("extent"));
    const int64_t n = shape_numel(p.shape);
    if (n < 0 || static_cast<uint64_t>(n) * sizeof(float) > bytes.size()) {
      throw TruncatedError("truncated workspace data: payload of '" + p.name + "' exceeds input");
    }
    p.data.resize(static_cast<size_t>(n));
    r.take_bytes(p.data.data(), p.data.size() * sizeof(float), "payload");
    pending.push_back(std::move(p));
  }
  const size_t payload_end = r.pos();
  const auto stored_crc = r.take<uint32_t>("checksum");
  if (crc_of(bytes.subspan(payload_begin, payload_end - payload_begin)) != stored_crc) {
    throw ChecksumError("workspace checksum mismatch");
  }

  Workspace ws;
  for (auto& p : pending) {
    if (p.shape[0] == 0) throw FormatError("variable '" + p.name + "' has zero time extent");
    ws.set_full(p.name, Tensor(std::move(p.shape), std::move(p.data)));
  }
  consumed = r.pos();
  return ws;
}

Workspace deserialize(std::span<const uint8_t> bytes) {
  size_t consumed = 0;
  Workspace ws = deserialize_prefix(bytes, consumed);
  if (consumed != bytes.size()) throw FormatError("trailing bytes after workspace record");
  return ws;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void save_workspace(const std::filesystem::path& path, const Workspace& ws) { write_file(path, serialize(ws)); }

Workspace load_workspace(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::vector<uint8_t> serialize_dataset(std::span<const Workspace> workspaces) {
  Writer w;
  w.put_bytes(kDatasetMagic, 4);
  w.put<uint16_t>(kDatasetFormatVersion);
  w.put<uint32_t>(static_cast<uint32_t>(workspaces.size()));
  for (const auto& ws : workspaces) {
    const auto record = serialize(ws);
    w.put_bytes(record.data(), record.size());
  }
  return std::move(w.bytes());
}

void save_dataset(const std::filesystem::path& path, std::span<const Workspace> workspaces) {
  write_file(path, serialize_dataset(workspaces));
}

bool is_dataset_file(std::span<const uint8_t> bytes) {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), kDatasetMagic, 4) == 0;
}

TrajectoryDataset TrajectoryDataset::from_bytes(std::vector<uint8_t> bytes) {
  TrajectoryDataset ds;
  ds.bytes_ = std::move(bytes);
  std::span<const uint8_t> all(ds.bytes_);
  Reader r(all);
  check_header(r, kDatasetMagic, kDatasetFormatVersion, "dataset");
  const auto count = r.take<uint32_t>("record count");
  size_t pos = r.pos();
  for (uint32_t i = 0; i < count; ++i) {
    size_t consumed = 0;
    deserialize_prefix(all.subspan(pos), consumed);
    ds.offsets_.emplace_back(pos, consumed);
    pos += consumed;
  }
  if (pos != all.size()) throw FormatError("trailing bytes after dataset records");
  return ds;
}

TrajectoryDataset TrajectoryDataset::load(const std::filesystem::path& path) { return from_bytes(read_file(path)); }

Workspace TrajectoryDataset::read_workspace(size_t index) const {
  if (index >= offsets_.size()) {
    throw IndexError("dataset record " + std::to_string(index) + " out of range", static_cast<int64_t>(index));
  }
  const auto [begin, length] = offsets_[index];
  return deserialize(std::span<const uint8_t>(bytes_).subspan(begin, length));
}

std::vector<Workspace> TrajectoryDataset::read_all() const {
  std::vector<Workspace> out;
  out.reserve(size());
  for (size_t i = 0; i < size(); ++i) out.push_back(read_workspace(i));
  return out;
}

}  // namespace wsrl
