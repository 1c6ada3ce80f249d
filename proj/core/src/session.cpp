#include "qlens/session.hpp"

#include <cmath>
#include <string>

#include "qlens/error.hpp"

namespace qlens {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Device other(Device d) { return d == Device::primary ? Device::secondary : Device::primary; }

void end_drags_on(SessionState& state, LensId id) {
  for (auto& dev : state.devices) {
    if (dev.drag && drag_lens(*dev.drag) == id) dev.drag.reset();
  }
}

void release(SessionState& state, Device device) {
  auto& dev = state.device(device);
  if (!dev.drag) return;
  // Scaling is a secondary action of a grab and cannot outlive it.
  if (const auto* grab = std::get_if<GrabDrag>(&*dev.drag)) {
    auto& peer = state.device(other(device));
    if (peer.drag && std::holds_alternative<ScaleDrag>(*peer.drag) &&
        drag_lens(*peer.drag) == grab->lens) {
      peer.drag.reset();
    }
  }
  dev.drag.reset();
}

void instantiate(SessionState& state, const RigidTransform& pose) {
  QuadricLens lens;
  lens.id = state.next_lens_id++;
  lens.pose = pose;
  lens.length = kNewLensLength;
  state.scene.lenses.push_back(lens);
  state.selected = lens.id;
}

void press_trigger(SessionState& state, Device device, const RigidTransform& pose) {
  auto& dev = state.device(device);
  if (dev.drag) return;
  auto& scene = state.scene;
  const Vec3& position = pose.translation;

  const auto& peer = state.device(other(device));
  if (peer.drag) {
    if (const auto* grab = std::get_if<GrabDrag>(&*peer.drag)) {
      const QuadricLens* lens = scene.find_lens(grab->lens);
      if (lens && !lens->locked) {
        dev.drag = ScaleDrag{lens->id, lens->pose.translation, position, lens->length};
        state.selected = lens->id;
        return;
      }
    }
  }

  const double radius = scene.settings.grab_radius;
  const auto nearest = nearest_control_point(scene.lenses, position);
  if (nearest && nearest->distance <= radius) {
    const QuadricLens* lens = scene.find_lens(nearest->handle.lens_id);
    if (nearest->handle.kind == HandleKind::origin) {
      dev.drag = GrabDrag{lens->id, pose.inverse().compose(lens->pose)};
    } else {
      const bool first = nearest->handle.kind == HandleKind::k1_pos ||
                         nearest->handle.kind == HandleKind::k1_neg;
      dev.drag = CurvatureDrag{lens->id, nearest->handle.kind, position, first ? lens->k1 : lens->k2};
    }
    state.selected = lens->id;
    return;
  }

  const auto any = nearest_control_point_any(scene.lenses, position);
  if (any && any->distance <= radius) {
    state.notice = "lens " + std::to_string(any->handle.lens_id) + " is locked";
  }
}

void toggle_lock(SessionState& state, Device device, const Vec3& position) {
  auto& scene = state.scene;
  std::optional<LensId> target;
  const auto& dev = state.device(device);
  if (dev.drag && std::holds_alternative<GrabDrag>(*dev.drag)) {
    target = drag_lens(*dev.drag);
  } else if (state.hover) {
    target = state.hover->lens_id;
  } else if (const auto any = nearest_control_point_any(scene.lenses, position);
             any && any->distance <= scene.settings.grab_radius) {
    target = any->handle.lens_id;
  }
  if (!target) return;
  QuadricLens* lens = scene.find_lens(*target);
  if (!lens) return;
  lens->locked = !lens->locked;
  if (lens->locked) end_drags_on(state, lens->id);
}

void apply_motion(SessionState& state, Device device, const RigidTransform& pose) {
  auto& dev = state.device(device);
  if (!dev.drag) return;
  auto& scene = state.scene;
  QuadricLens* lens = scene.find_lens(drag_lens(*dev.drag));
  if (!lens || lens->locked) {
    dev.drag.reset();
    return;
  }
  const auto& settings = scene.settings;
  std::visit(Overloaded{
                 [&](const GrabDrag& g) { lens->pose = pose.compose(g.offset); },
                 [&](const ScaleDrag& s) {
                   const double displacement = (pose.translation - s.anchor).norm() -
                                               (s.initial_position - s.anchor).norm();
                   lens->length = std::clamp(s.initial_length * (1.0 + displacement / kScaleReference),
                                             kMinLensLength, kMaxLensLength);
                 },
                 [&](const CurvatureDrag& c) {
                   // Constrained to the lens-local +z axis.
                   const Vec3 axis = lens->pose.apply_vector(Vec3::UnitZ());
                   const double dz = (pose.translation - c.initial_position).dot(axis);
                   QuadricLens base = *lens;
                   (c.handle == HandleKind::k1_pos || c.handle == HandleKind::k1_neg ? base.k1 : base.k2) =
                       c.initial_k;
                   *lens = set_curvature(base, c.handle, dz, settings.curvature_sensitivity,
                                         settings.curvature_mapping)
                               .lens;
                 },
             },
             *dev.drag);
}

}  // namespace

std::string_view to_string(Device device) noexcept {
  return device == Device::primary ? "primary" : "secondary";
}

Device parse_device(std::string_view text) {
  if (text == "primary" || text == "primary_controller") return Device::primary;
  if (text == "secondary" || text == "secondary_controller") return Device::secondary;
  throw Error(ErrorKind::parse, "unknown device '" + std::string(text) + "'");
}

std::string_view button_name(Button button) noexcept {
  switch (button) {
    case kGripPressed: return "grip_pressed";
    case kTriggerPressed: return "trigger_pressed";
    case kTriggerReleased: return "trigger_released";
    case kToggleAttribute: return "toggle_attribute";
    case kCycleMode: return "cycle_mode";
    case kToggleLock: return "toggle_lock";
  }
  return "?";
}

bool bitwise_equal(const InteractionEvent& a, const InteractionEvent& b) {
  return a.timestamp_ms == b.timestamp_ms && a.device == b.device && bitwise_equal(a.pose, b.pose) &&
         a.buttons == b.buttons;
}

LensId drag_lens(const Drag& drag) noexcept {
  return std::visit([](const auto& d) { return d.lens; }, drag);
}

SessionState make_session(Scene scene) {
  SessionState state;
  for (const auto& lens : scene.lenses) state.next_lens_id = std::max(state.next_lens_id, lens.id + 1);
  state.scene = std::move(scene);
  return state;
}

void apply_event_in_place(SessionState& state, const InteractionEvent& event) {
  if (!event.pose.translation.allFinite() || !event.pose.rotation.coeffs().allFinite() ||
      !event.pose.is_rigid()) {
    throw Error(ErrorKind::validation, "rejected event at t=" + std::to_string(event.timestamp_ms) +
                                           ": pose rotation is not orthonormal");
  }
  if ((event.buttons & ~kAllButtons) != 0) {
    throw Error(ErrorKind::validation, "rejected event at t=" + std::to_string(event.timestamp_ms) +
                                           ": unknown button bits");
  }
  auto& dev = state.device(event.device);
  if (dev.last_timestamp && event.timestamp_ms < *dev.last_timestamp) {
    throw Error(ErrorKind::validation, "rejected event: timestamp " + std::to_string(event.timestamp_ms) +
                                           " precedes " + std::to_string(*dev.last_timestamp) + " on " +
                                           std::string(to_string(event.device)));
  }

  RigidTransform pose = event.pose;
  pose.rotation.normalize();
  dev.last_timestamp = event.timestamp_ms;
  dev.pose = pose;
  state.notice.reset();

  if (event.has(kTriggerReleased)) release(state, event.device);
  if (event.has(kGripPressed)) instantiate(state, pose);
  if (event.has(kTriggerPressed)) press_trigger(state, event.device, pose);
  if (event.has(kToggleLock)) toggle_lock(state, event.device, pose.translation);
  if (event.has(kToggleAttribute)) {
    auto& attr = state.scene.settings.focus.attribute;
    attr = attr == FocusAttribute::scalar ? FocusAttribute::gradient_magnitude : FocusAttribute::scalar;
  }
  if (event.has(kCycleMode)) {
    auto& mode = state.scene.settings.context.mode;
    mode = next_mode(mode);
  }

  apply_motion(state, event.device, pose);

  const auto nearest = nearest_control_point(state.scene.lenses, pose.translation);
  if (nearest && nearest->distance <= state.scene.settings.grab_radius) {
    state.hover = nearest->handle;
  } else {
    state.hover.reset();
  }
  ++state.version;
}

}  // namespace qlens
