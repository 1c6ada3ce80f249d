#include "qlens/event_log.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <optional>

#include "qlens/error.hpp"

namespace qlens {
namespace {

std::string real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::parse, "event log line " + std::to_string(line_no) + ": " + what);
}

double parse_real(std::string_view field, std::size_t line_no, const char* name) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
    fail(line_no, std::string("bad ") + name + " '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

std::string format_event(const InteractionEvent& event) {
  const auto& t = event.pose.translation;
  const auto& q = event.pose.rotation;
  std::string out = std::to_string(event.timestamp_ms) + "," + std::string(to_string(event.device));
  for (const double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) out += "," + real(v);
  out += ",";
  if (event.buttons == 0) {
    out += "-";
  } else {
    bool first = true;
    for (const Button b : kButtonOrder) {
      if (!event.has(b)) continue;
      if (!first) out += "|";
      out += button_name(b);
      first = false;
    }
  }
  return out;
}

InteractionEvent parse_event_line(std::string_view line, std::size_t line_no) {
  std::array<std::string_view, 10> fields;
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto part = trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (count == fields.size()) fail(line_no, "too many fields (expected 10)");
    fields[count++] = part;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (count != fields.size()) {
    fail(line_no, "expected 10 comma-separated fields, got " + std::to_string(count));
  }

  InteractionEvent e;
  const auto ts = fields[0];
  const auto res = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp_ms);
  if (res.ec != std::errc() || res.ptr != ts.data() + ts.size()) {
    fail(line_no, "bad timestamp '" + std::string(ts) + "'");
  }
  try {
    e.device = parse_device(fields[1]);
  } catch (const Error&) {
    fail(line_no, "unknown device '" + std::string(fields[1]) + "'");
  }
  static constexpr const char* kNames[] = {"tx", "ty", "tz", "qw", "qx", "qy", "qz"};
  double v[7];
  for (int i = 0; i < 7; ++i) v[i] = parse_real(fields[static_cast<std::size_t>(2 + i)], line_no, kNames[i]);
  e.pose.translation = Vec3(v[0], v[1], v[2]);
  e.pose.rotation = Quat(v[3], v[4], v[5], v[6]);

  const auto flags = fields[9];
  if (flags != "-" && !flags.empty()) {
    std::size_t pos = 0;
    while (pos <= flags.size()) {
      const auto bar = flags.find('|', pos);
      const auto name = trim(flags.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos));
      std::optional<Button> match;
      for (const Button b : kButtonOrder) {
        if (button_name(b) == name) match = b;
      }
      if (!match) fail(line_no, "unknown button flag '" + std::string(name) + "'");
      e.buttons |= *match;
      if (bar == std::string_view::npos) break;
      pos = bar + 1;
    }
  }
  return e;
}

std::vector<InteractionEvent> parse_event_log(std::string_view text) {
  std::vector<InteractionEvent> events;
  std::array<std::optional<std::int64_t>, 2> last{};
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto e = parse_event_line(line, line_no);
    auto& prev = last[static_cast<std::size_t>(e.device)];
    if (prev && e.timestamp_ms < *prev) {
      fail(line_no, "timestamp " + std::to_string(e.timestamp_ms) + " decreases (previous " +
                        std::to_string(*prev) + " on " + std::string(to_string(e.device)) + ")");
    }
    prev = e.timestamp_ms;
    events.push_back(e);
  }
  return events;
}

std::vector<InteractionEvent> load_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open event log '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_event_log(text);
}

std::string format_event_log(std::span<const InteractionEvent> events) {
  std::string out = "# timestamp,device,tx,ty,tz,qw,qx,qy,qz,buttons\n";
  for (const auto& e : events) out += format_event(e) + "\n";
  return out;
}

void save_event_log(const std::filesystem::path& path, std::span<const InteractionEvent> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write event log '" + path.string() + "'");
  out << format_event_log(events);
}

}  // namespace qlens
