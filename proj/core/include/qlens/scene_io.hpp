#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qlens/scene.hpp"
#include "qlens/session.hpp"

namespace qlens {

inline constexpr std::string_view kSceneFormatTag = "qlens-scene";
inline constexpr int kSceneFormatVersion = 1;

/// JSON scene document of the persistent fields (volume source, camera,
/// background, settings, lenses). Output is deterministic.
std::string serialize_scene(const Scene& scene);

/// Parses a scene document without loading its volume. Errors are `parse`
/// for malformed JSON (with line and column), missing keys or wrong types,
/// `unsupported_format` for an unknown format/version tag, and `validation`
/// for out-of-range values; every message names the offending field.
Scene parse_scene(std::string_view document);

/// Loads the grid described by `scene.volume_source`. Relative QVOL paths
/// resolve against `base_dir`.
void load_scene_volume(Scene& scene, const std::filesystem::path& base_dir);

/// parse_scene + load_scene_volume relative to the file's directory.
Scene load_scene_file(const std::filesystem::path& path);
void save_scene_file(const std::filesystem::path& path, const Scene& scene);

inline std::string serialize_session(const SessionState& state) { return serialize_scene(state.scene); }
inline SessionState deserialize_session(std::string_view document) {
  return make_session(parse_scene(document));
}

/// Field-by-field comparison of the persistent content (bitwise on reals).
bool scenes_equal(const Scene& a, const Scene& b);

}  // namespace qlens
