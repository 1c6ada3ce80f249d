#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qlens/render.hpp"
#include "qlens/session.hpp"

namespace qlens::protocol {

// Framing: u32 little-endian body length, then the body. The body starts
// with a one-byte message kind followed by the kind's payload. All integers
// are little-endian, reals are IEEE-754 binary64. See docs/protocol.md.

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kMaxBodySize = 64U << 20;

enum class Kind : std::uint8_t {
  hello = 1,
  scene_snapshot = 2,
  event = 3,
  ack = 4,
  frame = 5,
  hover = 6,
  error = 7,
};

struct Hello {
  std::uint32_t version = kVersion;
};

struct SceneSnapshot {
  std::string document;  // UTF-8 scene document
};

struct EventMessage {
  InteractionEvent event;
};

struct Ack {
  std::uint64_t seq = 0;            // 1-based ordinal of the acknowledged EVENT
  std::uint64_t state_version = 0;  // session version after applying it
};

struct FrameMessage {
  std::uint64_t seq = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgba;  // width*height*4, composited over the background
};

struct HoverMessage {
  struct Target {
    LensId lens_id = 0;
    HandleKind kind = HandleKind::origin;
  };
  std::optional<Target> target;
};

struct ErrorMessage {
  std::string text;
};

using Message =
    std::variant<Hello, SceneSnapshot, EventMessage, Ack, FrameMessage, HoverMessage, ErrorMessage>;

Kind kind_of(const Message& message) noexcept;

/// Length prefix + body.
std::vector<std::uint8_t> encode(const Message& message);

/// Decodes one body (without the length prefix). Throws a protocol error on
/// an unknown kind or a payload of the wrong size.
Message decode_body(std::span<const std::uint8_t> body);

/// Incremental decoder for a byte stream.
class StreamDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, if buffered.
  std::optional<Message> next();
  std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

/// Engine side of one viewer connection. Transport-agnostic: feed it decoded
/// messages and send back whatever it returns.
class EngineEndpoint {
 public:
  explicit EngineEndpoint(SessionState state, RenderOptions render_options = {},
                          bool stream_frames = true);

  std::vector<Message> handle(const Message& message);

  /// Forgets the handshake so a new viewer can connect to the same session.
  void reset_connection() noexcept {
    handshake_done_ = false;
    closed_ = false;
  }

  bool handshake_done() const noexcept { return handshake_done_; }
  /// Set after a refused handshake; the transport should close.
  bool closed() const noexcept { return closed_; }
  const SessionState& state() const noexcept { return state_; }
  /// Every event applied so far, in order (replayable with the CLI).
  const std::vector<InteractionEvent>& applied_events() const noexcept { return applied_; }

 private:
  Message make_frame();
  Message make_hover() const;

  SessionState state_;
  RenderOptions render_options_;
  bool stream_frames_;
  bool handshake_done_ = false;
  bool closed_ = false;
  std::uint64_t events_received_ = 0;
  std::uint64_t frame_seq_ = 0;
  std::vector<InteractionEvent> applied_;
};

/// Serves one connected stream socket until EOF or a refused handshake.
void serve_connection(int fd, EngineEndpoint& endpoint);

/// Listens on a Unix-domain socket and serves up to `max_connections`
/// sequential viewers (0 = unlimited), each against the same endpoint state.
void serve_unix_socket(const std::filesystem::path& socket_path, EngineEndpoint& endpoint,
                       std::size_t max_connections = 0);

/// Client side of serve_unix_socket; returns a connected stream fd.
int connect_unix_socket(const std::filesystem::path& socket_path);

/// Blocking helpers used by serve_connection and by test clients.
void write_message(int fd, const Message& message);
std::optional<Message> read_message(int fd);  // empty on clean EOF

}  // namespace qlens::protocol
