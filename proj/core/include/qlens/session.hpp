#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "qlens/geometry.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/scene.hpp"

namespace qlens {

enum class Device : std::uint8_t { primary = 0, secondary = 1 };

std::string_view to_string(Device device) noexcept;
Device parse_device(std::string_view text);

/// Edge-triggered button flags carried by an event.
enum Button : std::uint32_t {
  kGripPressed = 1U << 0,
  kTriggerPressed = 1U << 1,
  kTriggerReleased = 1U << 2,
  kToggleAttribute = 1U << 3,
  kCycleMode = 1U << 4,
  kToggleLock = 1U << 5,
};
inline constexpr std::uint32_t kAllButtons = (1U << 6) - 1;

std::string_view button_name(Button button) noexcept;
inline constexpr std::array<Button, 6> kButtonOrder{kGripPressed,      kTriggerPressed, kTriggerReleased,
                                                    kToggleAttribute, kCycleMode,      kToggleLock};

/// Device-agnostic 6-DOF controller sample in the normalized volume frame.
struct InteractionEvent {
  std::int64_t timestamp_ms = 0;
  Device device = Device::primary;
  RigidTransform pose;
  std::uint32_t buttons = 0;

  bool has(Button b) const noexcept { return (buttons & b) != 0; }
};

bool bitwise_equal(const InteractionEvent& a, const InteractionEvent& b);

/// Scale gesture: l = l0 (1 + outward displacement / kScaleReference).
inline constexpr double kScaleReference = 0.2;
inline constexpr double kMinLensLength = 0.02;
inline constexpr double kMaxLensLength = 1.0;
inline constexpr double kNewLensLength = 0.25;

struct GrabDrag {
  LensId lens = 0;
  RigidTransform offset;  // controller^-1 * lens pose at grab time
};

struct ScaleDrag {
  LensId lens = 0;
  Vec3 anchor = Vec3::Zero();
  Vec3 initial_position = Vec3::Zero();
  double initial_length = 0.0;
};

struct CurvatureDrag {
  LensId lens = 0;
  HandleKind handle = HandleKind::k1_pos;
  Vec3 initial_position = Vec3::Zero();
  double initial_k = 0.0;
};

using Drag = std::variant<GrabDrag, ScaleDrag, CurvatureDrag>;

LensId drag_lens(const Drag& drag) noexcept;

struct DeviceState {
  std::optional<RigidTransform> pose;
  std::optional<Drag> drag;
  std::optional<std::int64_t> last_timestamp;
};

/// Scene plus transient interaction state. Only `scene` is persistent.
struct SessionState {
  Scene scene;
  std::array<DeviceState, 2> devices;
  std::optional<ControlPointHandle> hover;
  std::optional<LensId> selected;
  LensId next_lens_id = 1;
  std::uint64_t version = 0;
  std::optional<std::string> notice;  // set when an event was ignored, e.g. a locked lens

  DeviceState& device(Device d) { return devices[static_cast<std::size_t>(d)]; }
  const DeviceState& device(Device d) const { return devices[static_cast<std::size_t>(d)]; }
};

/// Fresh session around an existing scene; next_lens_id continues after the
/// largest lens id present.
SessionState make_session(Scene scene);

/// Applies one event in place. Throws a validation error (leaving the state
/// untouched) for a non-rigid pose or a timestamp that goes backwards on its
/// device.
void apply_event_in_place(SessionState& state, const InteractionEvent& event);

inline SessionState apply_event(SessionState state, const InteractionEvent& event) {
  apply_event_in_place(state, event);
  return state;
}

}  // namespace qlens
