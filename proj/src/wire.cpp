#include "wsrl/wire.hpp"

#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <type_traits>
#include <variant>

#include "wsrl/errors.hpp"

namespace wsrl::wire {

namespace {

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void bytes(const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

  std::vector<uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(size_t n) const {
    if (in_.size() - pos_ < n) throw ProtocolError("frame ends early");
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

void write_all(int fd, const uint8_t* data, size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw RemoteError(std::string("pipe write failed: ") + std::strerror(errno));
    }
    data += w;
    n -= static_cast<size_t>(w);
  }
}

// Returns bytes read; fewer than n only at end-of-file.
size_t read_all(int fd, uint8_t* data, size_t n) {
  size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, data + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw RemoteError(std::string("pipe read failed: ") + std::strerror(errno));
    }
    if (r == 0) break;
    got += static_cast<size_t>(r);
  }
  return got;
}

}  // namespace

std::vector<uint8_t> encode(const Message& m) {
  Writer w;
  w.pod<uint32_t>(0);
  w.pod(static_cast<uint8_t>(m.command));
  switch (m.command) {
    case Command::kRun: {
      const auto& items = m.kwargs.items();
      if (items.size() > UINT16_MAX) throw ProtocolError("too many keyword arguments");
      w.pod(static_cast<uint16_t>(items.size()));
      for (const auto& [key, value] : items) {
        if (key.size() > UINT16_MAX) throw ProtocolError("keyword too long");
        w.pod(static_cast<uint16_t>(key.size()));
        w.bytes(key);
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, int64_t>) {
                w.pod<uint8_t>(0);
                w.pod(v);
              } else if constexpr (std::is_same_v<T, double>) {
                w.pod<uint8_t>(1);
                w.pod(v);
              } else if constexpr (std::is_same_v<T, bool>) {
                w.pod<uint8_t>(2);
                w.pod<uint8_t>(v ? 1 : 0);
              } else {
                w.pod<uint8_t>(3);
                w.pod(static_cast<uint32_t>(v.size()));
                w.bytes(v);
              }
            },
            value.storage());
      }
      break;
    }
    case Command::kErr:
      w.pod(static_cast<uint32_t>(m.text.size()));
      w.bytes(m.text);
      break;
    default: break;
  }
  const auto length = static_cast<uint32_t>(w.out.size() - sizeof(uint32_t));
  if (length > kMaxFrame) throw ProtocolError("frame exceeds " + std::to_string(kMaxFrame) + " bytes");
  std::memcpy(w.out.data(), &length, sizeof(length));
  return w.out;
}

Message decode(std::span<const uint8_t> frame) {
  Reader r(frame);
  Message m;
  const auto command = r.pod<uint8_t>();
  if (command < 1 || command > 5) throw ProtocolError("unknown command byte " + std::to_string(command));
  m.command = static_cast<Command>(command);
  if (m.command == Command::kRun) {
    const auto count = r.pod<uint16_t>();
    for (uint16_t i = 0; i < count; ++i) {
      const std::string key = r.bytes(r.pod<uint16_t>());
      switch (r.pod<uint8_t>()) {
        case 0: m.kwargs.set(key, r.pod<int64_t>()); break;
        case 1: m.kwargs.set(key, r.pod<double>()); break;
        case 2: m.kwargs.set(key, r.pod<uint8_t>() != 0); break;
        case 3: m.kwargs.set(key, r.bytes(r.pod<uint32_t>())); break;
        default: throw ProtocolError("unknown value tag for keyword '" + key + "'");
      }
    }
  } else if (m.command == Command::kErr) {
    m.text = r.bytes(r.pod<uint32_t>());
  }
  if (!r.done()) throw ProtocolError("trailing bytes in frame");
  return m;
}

void write_message(int fd, const Message& message) {
  const auto bytes = encode(message);
  write_all(fd, bytes.data(), bytes.size());
}

std::optional<Message> read_message(int fd) {
  uint32_t length = 0;
  const size_t got = read_all(fd, reinterpret_cast<uint8_t*>(&length), sizeof(length));
  if (got == 0) return std::nullopt;
  if (got < sizeof(length)) throw ProtocolError("truncated frame length");
  if (length == 0 || length > kMaxFrame) throw ProtocolError("bad frame length " + std::to_string(length));
  std::vector<uint8_t> frame(length);
  if (read_all(fd, frame.data(), length) != length) throw ProtocolError("truncated frame");
  return decode(frame);
}

}  // namespace wsrl::wire
