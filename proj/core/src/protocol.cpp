#include "qlens/protocol.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>

#include "qlens/error.hpp"
#include "qlens/image.hpp"
#include "qlens/scene_io.hpp"

namespace qlens::protocol {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { raw(v); }
  void u64(std::uint64_t v) { raw(v); }
  void i64(std::int64_t v) { raw(v); }
  void f64(double v) { raw(v); }
  void blob(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  template <typename T>
  void raw(T v) {
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    if constexpr (std::endian::native != std::endian::little) std::reverse(tmp, tmp + sizeof(T));
    bytes_.insert(bytes_.end(), tmp, tmp + sizeof(T));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  std::int64_t i64() { return raw<std::int64_t>(); }
  double f64() { return raw<double>(); }
  std::span<const std::uint8_t> blob(std::size_t n) { return need(n); }
  std::string text() {
    const auto n = u32();
    const auto b = need(n);
    return std::string(b.begin(), b.end());
  }
  void finish(std::string_view what) const {
    if (pos_ != bytes_.size()) {
      throw Error(ErrorKind::protocol, std::string(what) + " payload has " +
                                           std::to_string(bytes_.size() - pos_) + " trailing bytes");
    }
  }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::protocol, "truncated message payload");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename T>
  T raw() {
    const auto b = need(sizeof(T));
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, b.data(), sizeof(T));
    if constexpr (std::endian::native != std::endian::little) std::reverse(tmp, tmp + sizeof(T));
    T v;
    std::memcpy(&v, tmp, sizeof(T));
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// The viewer went away; ends a served connection without failing the server.
class PeerClosed : public Error {
 public:
  explicit PeerClosed(const std::string& what) : Error(ErrorKind::io, what) {}
};

bool peer_gone(int err) { return err == EPIPE || err == ECONNRESET; }

void write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (peer_gone(errno)) throw PeerClosed(std::string("peer closed: ") + std::strerror(errno));
      throw Error(ErrorKind::io, std::string("socket write failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

// false on EOF before the first byte.
bool read_all(int fd, std::uint8_t* data, std::size_t size) {
  std::size_t got = 0;
  while (got < size) {
    const ssize_t n = ::recv(fd, data + got, size - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (peer_gone(errno)) throw PeerClosed(std::string("peer closed: ") + std::strerror(errno));
      throw Error(ErrorKind::io, std::string("socket read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (got == 0) return false;
      throw Error(ErrorKind::protocol, "connection closed mid-message");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

Kind kind_of(const Message& message) noexcept {
  return std::visit(Overloaded{
                        [](const Hello&) { return Kind::hello; },
                        [](const SceneSnapshot&) { return Kind::scene_snapshot; },
                        [](const EventMessage&) { return Kind::event; },
                        [](const Ack&) { return Kind::ack; },
                        [](const FrameMessage&) { return Kind::frame; },
                        [](const HoverMessage&) { return Kind::hover; },
                        [](const ErrorMessage&) { return Kind::error; },
                    },
                    message);
}

std::vector<std::uint8_t> encode(const Message& message) {
  Writer body;
  body.u8(static_cast<std::uint8_t>(kind_of(message)));
  std::visit(Overloaded{
                 [&](const Hello& m) { body.u32(m.version); },
                 [&](const SceneSnapshot& m) { body.text(m.document); },
                 [&](const EventMessage& m) {
                   const auto& e = m.event;
                   body.i64(e.timestamp_ms);
                   body.u8(static_cast<std::uint8_t>(e.device));
                   const auto& t = e.pose.translation;
                   const auto& q = e.pose.rotation;
                   for (const double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) body.f64(v);
                   body.u32(e.buttons);
                 },
                 [&](const Ack& m) {
                   body.u64(m.seq);
                   body.u64(m.state_version);
                 },
                 [&](const FrameMessage& m) {
                   if (m.rgba.size() != static_cast<std::size_t>(m.width) * m.height * 4) {
                     throw Error(ErrorKind::protocol, "FRAME payload does not match width x height x 4");
                   }
                   body.u64(m.seq);
                   body.u32(m.width);
                   body.u32(m.height);
                   body.blob(m.rgba);
                 },
                 [&](const HoverMessage& m) {
                   body.u8(m.target ? 1 : 0);
                   body.u32(m.target ? m.target->lens_id : 0);
                   body.u8(m.target ? static_cast<std::uint8_t>(m.target->kind) : 0);
                 },
                 [&](const ErrorMessage& m) { body.text(m.text); },
             },
             message);
  auto payload = body.take();
  Writer framed;
  framed.u32(static_cast<std::uint32_t>(payload.size()));
  framed.blob(payload);
  return framed.take();
}

Message decode_body(std::span<const std::uint8_t> body) {
  Reader in(body);
  const auto kind = in.u8();
  switch (static_cast<Kind>(kind)) {
    case Kind::hello: {
      Hello m{in.u32()};
      in.finish("HELLO");
      return m;
    }
    case Kind::scene_snapshot: {
      SceneSnapshot m{in.text()};
      in.finish("SCENE_SNAPSHOT");
      return m;
    }
    case Kind::event: {
      EventMessage m;
      auto& e = m.event;
      e.timestamp_ms = in.i64();
      const auto device = in.u8();
      if (device > 1) throw Error(ErrorKind::protocol, "EVENT has unknown device " + std::to_string(device));
      e.device = static_cast<Device>(device);
      double v[7];
      for (double& x : v) x = in.f64();
      e.pose.translation = Vec3(v[0], v[1], v[2]);
      e.pose.rotation = Quat(v[3], v[4], v[5], v[6]);
      e.buttons = in.u32();
      in.finish("EVENT");
      return m;
    }
    case Kind::ack: {
      Ack m;
      m.seq = in.u64();
      m.state_version = in.u64();
      in.finish("ACK");
      return m;
    }
    case Kind::frame: {
      FrameMessage m;
      m.seq = in.u64();
      m.width = in.u32();
      m.height = in.u32();
      const std::uint64_t n = static_cast<std::uint64_t>(m.width) * m.height * 4;
      if (n > kMaxBodySize) throw Error(ErrorKind::protocol, "FRAME too large");
      const auto px = in.blob(static_cast<std::size_t>(n));
      m.rgba.assign(px.begin(), px.end());
      in.finish("FRAME");
      return m;
    }
    case Kind::hover: {
      HoverMessage m;
      const auto present = in.u8();
      const auto lens = in.u32();
      const auto kind_byte = in.u8();
      if (present > 1 || kind_byte > static_cast<std::uint8_t>(HandleKind::k2_neg)) {
        throw Error(ErrorKind::protocol, "HOVER has an invalid handle reference");
      }
      if (present) m.target = HoverMessage::Target{lens, static_cast<HandleKind>(kind_byte)};
      in.finish("HOVER");
      return m;
    }
    case Kind::error: {
      ErrorMessage m{in.text()};
      in.finish("ERROR");
      return m;
    }
  }
  throw Error(ErrorKind::protocol, "unknown message kind " + std::to_string(kind));
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> StreamDecoder::next() {
  if (buffered() < 4) return std::nullopt;
  std::uint32_t size = 0;
  Reader len(std::span<const std::uint8_t>(buffer_).subspan(offset_, 4));
  size = len.u32();
  if (size == 0 || size > kMaxBodySize) {
    throw Error(ErrorKind::protocol, "invalid message length " + std::to_string(size));
  }
  if (buffered() < 4 + static_cast<std::size_t>(size)) return std::nullopt;
  auto msg = decode_body(std::span<const std::uint8_t>(buffer_).subspan(offset_ + 4, size));
  offset_ += 4 + size;
  return msg;
}

EngineEndpoint::EngineEndpoint(SessionState state, RenderOptions render_options, bool stream_frames)
    : state_(std::move(state)), render_options_(render_options), stream_frames_(stream_frames) {}

Message EngineEndpoint::make_frame() {
  FrameMessage m;
  m.seq = frame_seq_++;
  const Frame frame = render_frame(state_.scene, state_.scene.camera, render_options_);
  m.width = static_cast<std::uint32_t>(frame.width);
  m.height = static_cast<std::uint32_t>(frame.height);
  const auto rgb = to_rgb8(frame, state_.scene.background);
  m.rgba.reserve(frame.pixels.size() * 4);
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    m.rgba.insert(m.rgba.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i),
                  rgb.begin() + static_cast<std::ptrdiff_t>(3 * i + 3));
    m.rgba.push_back(255);
  }
  return m;
}

Message EngineEndpoint::make_hover() const {
  HoverMessage m;
  if (state_.hover) m.target = HoverMessage::Target{state_.hover->lens_id, state_.hover->kind};
  return m;
}

std::vector<Message> EngineEndpoint::handle(const Message& message) {
  std::vector<Message> out;
  if (closed_) return out;

  if (const auto* hello = std::get_if<Hello>(&message)) {
    if (hello->version != kVersion) {
      out.emplace_back(ErrorMessage{"protocol version mismatch: viewer speaks v" +
                                    std::to_string(hello->version) + ", engine speaks v" +
                                    std::to_string(kVersion)});
      closed_ = true;
      return out;
    }
    handshake_done_ = true;
    out.emplace_back(Hello{kVersion});
    out.emplace_back(SceneSnapshot{serialize_scene(state_.scene)});
    out.push_back(make_hover());
    if (stream_frames_) out.push_back(make_frame());
    return out;
  }
  if (!handshake_done_) {
    out.emplace_back(ErrorMessage{"handshake required: send HELLO first"});
    return out;
  }
  if (const auto* ev = std::get_if<EventMessage>(&message)) {
    ++events_received_;
    try {
      apply_event_in_place(state_, ev->event);
    } catch (const Error& e) {
      out.emplace_back(ErrorMessage{"event " + std::to_string(events_received_) + " rejected: " + e.what()});
      return out;
    }
    applied_.push_back(ev->event);
    out.emplace_back(Ack{events_received_, state_.version});
    out.push_back(make_hover());
    if (stream_frames_) out.push_back(make_frame());
    return out;
  }
  out.emplace_back(ErrorMessage{"unexpected message kind " +
                                std::to_string(static_cast<int>(kind_of(message))) + " from viewer"});
  return out;
}

void write_message(int fd, const Message& message) {
  const auto bytes = encode(message);
  write_all(fd, bytes.data(), bytes.size());
}

std::optional<Message> read_message(int fd) {
  std::uint8_t len_bytes[4];
  if (!read_all(fd, len_bytes, 4)) return std::nullopt;
  Reader len(len_bytes);
  const auto size = len.u32();
  if (size == 0 || size > kMaxBodySize) {
    throw Error(ErrorKind::protocol, "invalid message length " + std::to_string(size));
  }
  std::vector<std::uint8_t> body(size);
  if (!read_all(fd, body.data(), body.size())) throw Error(ErrorKind::protocol, "connection closed mid-message");
  return decode_body(body);
}

void serve_connection(int fd, EngineEndpoint& endpoint) {
  endpoint.reset_connection();
  try {
    while (!endpoint.closed()) {
      std::optional<Message> in;
      try {
        in = read_message(fd);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::protocol) throw;
        write_message(fd, ErrorMessage{e.what()});
        return;
      }
      if (!in) return;
      for (const auto& reply : endpoint.handle(*in)) write_message(fd, reply);
    }
  } catch (const PeerClosed&) {
  }
}

int connect_unix_socket(const std::filesystem::path& socket_path) {
  const std::string path = socket_path.string();
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw Error(ErrorKind::io, "socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorKind::io, std::string("socket() failed: ") + std::strerror(errno));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw Error(ErrorKind::io, "cannot connect to " + path + ": " + err);
  }
  return fd;
}

void serve_unix_socket(const std::filesystem::path& socket_path, EngineEndpoint& endpoint,
                       std::size_t max_connections) {
  const int listener = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (listener < 0) throw Error(ErrorKind::io, std::string("socket() failed: ") + std::strerror(errno));
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const std::string path = socket_path.string();
  if (path.size() >= sizeof(addr.sun_path)) {
    ::close(listener);
    throw Error(ErrorKind::io, "socket path too long: " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  ::unlink(path.c_str());
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(listener, 1) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listener);
    throw Error(ErrorKind::io, "cannot listen on " + path + ": " + err);
  }
  for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      const std::string err = std::strerror(errno);
      ::close(listener);
      throw Error(ErrorKind::io, "accept failed: " + err);
    }
    try {
      serve_connection(fd, endpoint);
    } catch (...) {
      ::close(fd);
      ::close(listener);
      ::unlink(path.c_str());
      throw;
    }
    ::close(fd);
  }
  ::close(listener);
  ::unlink(path.c_str());
}

}  // namespace qlens::protocol
