#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsrl/kwargs.hpp"

namespace wsrl::wire {

// Control channel between a coordinator and its workers. Every frame is
//   length u32 | command u8 | body
// where length counts the command byte and the body (little-endian).
//   RUN  body: count u16, then per entry key_len u16, key, tag u8, value
//        (tag 0 int64, 1 float64, 2 bool as u8, 3 string as len u32 + bytes)
//   ERR  body: len u32 + UTF-8 text
//   STOP, ACK, DONE: empty body
enum class Command : uint8_t { kRun = 1, kStop = 2, kAck = 3, kDone = 4, kErr = 5 };

struct Message {
  Command command = Command::kAck;
  KwArgs kwargs;     // RUN only
  std::string text;  // ERR only

  static Message run(KwArgs kwargs) { return {Command::kRun, std::move(kwargs), {}}; }
  static Message error(std::string text) { return {Command::kErr, {}, std::move(text)}; }
  static Message of(Command c) { return {c, {}, {}}; }
  bool operator==(const Message& other) const = default;
};

inline constexpr uint32_t kMaxFrame = 1u << 24;

// Full frame including the length prefix.
std::vector<uint8_t> encode(const Message& message);
// Decodes a frame without its length prefix. Throws ProtocolError.
Message decode(std::span<const uint8_t> frame);

// Blocking helpers over a file descriptor; read returns nullopt on a clean
// end-of-file before the first byte of a frame.
void write_message(int fd, const Message& message);
std::optional<Message> read_message(int fd);

}  // namespace wsrl::wire
