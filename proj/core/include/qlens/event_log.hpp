#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qlens/session.hpp"

namespace qlens {

// One event per line:
//   timestamp,device,tx,ty,tz,qw,qx,qy,qz,buttons
// `buttons` is "-" or '|'-joined flag names. Blank lines and lines starting
// with '#' are skipped. Reals are written in shortest round-trip form.

std::string format_event(const InteractionEvent& event);

/// Parses one non-comment line; `line_no` is used in error messages.
InteractionEvent parse_event_line(std::string_view line, std::size_t line_no);

/// Parses a whole log and rejects timestamps that decrease on a device.
std::vector<InteractionEvent> parse_event_log(std::string_view text);
std::vector<InteractionEvent> load_event_log(const std::filesystem::path& path);

std::string format_event_log(std::span<const InteractionEvent> events);
void save_event_log(const std::filesystem::path& path, std::span<const InteractionEvent> events);

}  // namespace qlens
