#include "qlens/scene_io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "qlens/error.hpp"

namespace qlens {
namespace {

using Json = nlohmann::ordered_json;

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] void type_error(const std::string& path, std::string_view expected) {
  throw Error(ErrorKind::parse, "field '" + path + "': expected " + std::string(expected));
}

[[noreturn]] void range_error(const std::string& path, std::string_view what) {
  throw Error(ErrorKind::validation, "field '" + path + "': " + std::string(what));
}

const Json& require(const Json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) type_error(path.empty() ? "<root>" : path, "an object");
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw Error(ErrorKind::parse, "missing required key '" + join(path, key) + "'");
  }
  return *it;
}

const Json* optional(const Json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) type_error(path, "a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) range_error(path, "must be finite");
  return d;
}

std::int64_t as_integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) type_error(path, "an integer");
  return v.get<std::int64_t>();
}

bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) type_error(path, "a boolean");
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) type_error(path, "a string");
  return v.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> as_vector(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N) type_error(path, "an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = as_number(v[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
  return out;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json rgb_json(const Rgb& c) { return Json::array({c.r, c.g, c.b}); }

Rgb as_rgb(const Json& v, const std::string& path) {
  const Vec3 c = as_vector<3>(v, path);
  for (int i = 0; i < 3; ++i) {
    if (c[i] < 0.0 || c[i] > 1.0) range_error(path, "color components must lie in [0,1]");
  }
  return {c.x(), c.y(), c.z()};
}

template <typename F>
auto rethrow_as_field(const std::string& path, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::validation || e.kind() == ErrorKind::unsupported_format) {
      throw Error(e.kind(), "field '" + path + "': " + e.what());
    }
    throw;
  }
}

// ---- writing --------------------------------------------------------------

Json synthetic_json(const SyntheticSpec& s) {
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  j["center"] = vec_json(s.center);
  j["radius"] = s.radius;
  j["width"] = s.width;
  j["amplitude"] = s.amplitude;
  j["background"] = s.background;
  j["axis"] = s.axis;
  j["position"] = s.position;
  return j;
}

Json settings_json(const RenderSettings& s) {
  Json focus;
  focus["n_samples"] = s.focus.n_samples;
  if (s.focus.explicit_step) {
    focus["step"] = *s.focus.explicit_step;
  } else {
    focus["step"] = "auto";
  }
  focus["attribute"] = std::string(to_string(s.focus.attribute));
  focus["colormap"] = std::string(to_string(s.focus.colormap));
  focus["ambient"] = s.focus.ambient;
  focus["diffuse"] = s.focus.diffuse;
  focus["light_direction"] = vec_json(s.focus.light_direction);

  Json context;
  context["mode"] = std::string(to_string(s.context.mode));
  context["global_alpha"] = s.context.global_alpha;
  context["delta_z"] = s.context.delta_z;
  if (s.context.ray_step) {
    context["ray_step"] = *s.context.ray_step;
  } else {
    context["ray_step"] = "auto";
  }
  Json nodes = Json::array();
  for (const auto& n : s.context.transfer_function.nodes) {
    Json node;
    node["position"] = n.position;
    node["color"] = rgb_json(n.color);
    node["opacity"] = n.opacity;
    nodes.push_back(std::move(node));
  }
  context["transfer_function"] = std::move(nodes);

  Json out;
  out["focus"] = std::move(focus);
  out["context"] = std::move(context);
  out["curvature_sensitivity"] = s.curvature_sensitivity;
  out["curvature_mapping"] = std::string(to_string(s.curvature_mapping));
  out["grab_radius"] = s.grab_radius;
  return out;
}

Json lens_json(const QuadricLens& lens) {
  Json j;
  j["id"] = lens.id;
  j["translation"] = vec_json(lens.pose.translation);
  const Quat& q = lens.pose.rotation;
  j["rotation"] = Json::array({q.w(), q.x(), q.y(), q.z()});
  j["length"] = lens.length;
  j["k1"] = lens.k1;
  j["k2"] = lens.k2;
  j["locked"] = lens.locked;
  if (lens.attribute_override) j["attribute"] = std::string(to_string(*lens.attribute_override));
  return j;
}

// ---- reading --------------------------------------------------------------

SyntheticSpec parse_synthetic(const Json& j, const std::string& path) {
  SyntheticSpec s;
  s.kind = rethrow_as_field(join(path, "kind"),
                            [&] { return parse_synthetic_kind(as_string(require(j, "kind", path), join(path, "kind"))); });
  if (const auto* v = optional(j, "center")) s.center = as_vector<3>(*v, join(path, "center"));
  if (const auto* v = optional(j, "radius")) s.radius = as_number(*v, join(path, "radius"));
  if (const auto* v = optional(j, "width")) s.width = as_number(*v, join(path, "width"));
  if (const auto* v = optional(j, "amplitude")) s.amplitude = as_number(*v, join(path, "amplitude"));
  if (const auto* v = optional(j, "background")) s.background = as_number(*v, join(path, "background"));
  if (const auto* v = optional(j, "value")) s.background = as_number(*v, join(path, "value"));
  if (const auto* v = optional(j, "axis")) s.axis = static_cast<int>(as_integer(*v, join(path, "axis")));
  if (const auto* v = optional(j, "position")) s.position = as_number(*v, join(path, "position"));
  rethrow_as_field(path, [&] { s.validate(); });
  return s;
}

VolumeSource parse_volume_source(const Json& j, const std::string& path) {
  if (!j.is_object()) type_error(path, "an object");
  VolumeSource src;
  const auto* file = optional(j, "path");
  const auto* synth = optional(j, "synthetic");
  if ((file == nullptr) == (synth == nullptr)) {
    throw Error(ErrorKind::parse, "field '" + path + "': exactly one of 'path' or 'synthetic' is required");
  }
  if (file) {
    src.path = as_string(*file, join(path, "path"));
  } else {
    src.synthetic = parse_synthetic(*synth, join(path, "synthetic"));
    const auto d = as_vector<3>(require(j, "dims", path), join(path, "dims"));
    src.dims = {static_cast<int>(d.x()), static_cast<int>(d.y()), static_cast<int>(d.z())};
    if (src.dims.x < 2 || src.dims.y < 2 || src.dims.z < 2 || d.x() != src.dims.x ||
        d.y() != src.dims.y || d.z() != src.dims.z) {
      range_error(join(path, "dims"), "must be integers >= 2");
    }
  }
  return src;
}

Camera parse_camera(const Json& j, const std::string& path) {
  Camera c;
  c.eye = as_vector<3>(require(j, "eye", path), join(path, "eye"));
  c.look_at = as_vector<3>(require(j, "look_at", path), join(path, "look_at"));
  if (const auto* v = optional(j, "up")) c.up = as_vector<3>(*v, join(path, "up"));
  if (const auto* v = optional(j, "vertical_fov")) c.vertical_fov = as_number(*v, join(path, "vertical_fov"));
  if (const auto* v = optional(j, "width")) c.width = static_cast<int>(as_integer(*v, join(path, "width")));
  if (const auto* v = optional(j, "height")) c.height = static_cast<int>(as_integer(*v, join(path, "height")));
  rethrow_as_field(path, [&] { c.validate(); });
  return c;
}

FocusSettings parse_focus(const Json& j, const std::string& path) {
  if (!j.is_object()) type_error(path, "an object");
  FocusSettings f;
  if (const auto* v = optional(j, "n_samples")) f.n_samples = static_cast<int>(as_integer(*v, join(path, "n_samples")));
  if (const auto* v = optional(j, "step")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "auto") type_error(join(path, "step"), "\"auto\" or a number");
    } else {
      f.explicit_step = as_number(*v, join(path, "step"));
    }
  }
  if (const auto* v = optional(j, "attribute")) {
    f.attribute = rethrow_as_field(join(path, "attribute"),
                                   [&] { return parse_focus_attribute(as_string(*v, join(path, "attribute"))); });
  }
  if (const auto* v = optional(j, "colormap")) {
    f.colormap = rethrow_as_field(join(path, "colormap"),
                                  [&] { return parse_colormap(as_string(*v, join(path, "colormap"))); });
  }
  if (const auto* v = optional(j, "ambient")) f.ambient = as_number(*v, join(path, "ambient"));
  if (const auto* v = optional(j, "diffuse")) f.diffuse = as_number(*v, join(path, "diffuse"));
  if (const auto* v = optional(j, "light_direction")) {
    const Vec3 d = as_vector<3>(*v, join(path, "light_direction"));
    if (d.norm() == 0.0) range_error(join(path, "light_direction"), "must be non-zero");
    // Stored normalized; an already-unit vector passes through unchanged.
    f.light_direction = std::abs(d.norm() - 1.0) <= 1e-6 ? d : d.normalized();
  }
  rethrow_as_field(path, [&] { f.validate(); });
  return f;
}

ContextSettings parse_context(const Json& j, const std::string& path) {
  if (!j.is_object()) type_error(path, "an object");
  ContextSettings c;
  if (const auto* v = optional(j, "mode")) {
    c.mode = rethrow_as_field(join(path, "mode"),
                              [&] { return parse_context_mode(as_string(*v, join(path, "mode"))); });
  }
  if (const auto* v = optional(j, "global_alpha")) c.global_alpha = as_number(*v, join(path, "global_alpha"));
  if (const auto* v = optional(j, "delta_z")) c.delta_z = as_number(*v, join(path, "delta_z"));
  if (const auto* v = optional(j, "ray_step")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "auto") type_error(join(path, "ray_step"), "\"auto\" or a number");
    } else {
      c.ray_step = as_number(*v, join(path, "ray_step"));
    }
  }
  if (const auto* v = optional(j, "transfer_function")) {
    const std::string tf_path = join(path, "transfer_function");
    if (!v->is_array()) type_error(tf_path, "an array of nodes");
    c.transfer_function.nodes.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string np = tf_path + "[" + std::to_string(i) + "]";
      const Json& n = (*v)[i];
      TransferNode node;
      node.position = as_number(require(n, "position", np), join(np, "position"));
      node.color = as_rgb(require(n, "color", np), join(np, "color"));
      node.opacity = as_number(require(n, "opacity", np), join(np, "opacity"));
      c.transfer_function.nodes.push_back(node);
    }
  }
  rethrow_as_field(path, [&] { c.validate(); });
  return c;
}

RenderSettings parse_settings(const Json& j, const std::string& path) {
  if (!j.is_object()) type_error(path, "an object");
  RenderSettings s;
  if (const auto* v = optional(j, "focus")) s.focus = parse_focus(*v, join(path, "focus"));
  if (const auto* v = optional(j, "context")) s.context = parse_context(*v, join(path, "context"));
  if (const auto* v = optional(j, "curvature_sensitivity")) {
    s.curvature_sensitivity = as_number(*v, join(path, "curvature_sensitivity"));
  }
  if (const auto* v = optional(j, "curvature_mapping")) {
    s.curvature_mapping = rethrow_as_field(join(path, "curvature_mapping"), [&] {
      return parse_curvature_mapping(as_string(*v, join(path, "curvature_mapping")));
    });
  }
  if (const auto* v = optional(j, "grab_radius")) {
    s.grab_radius = as_number(*v, join(path, "grab_radius"));
    if (!(s.grab_radius > 0.0)) range_error(join(path, "grab_radius"), "must be > 0");
  }
  return s;
}

QuadricLens parse_lens(const Json& j, const std::string& path) {
  QuadricLens lens;
  const auto id = as_integer(require(j, "id", path), join(path, "id"));
  if (id < 0 || id > std::numeric_limits<LensId>::max()) range_error(join(path, "id"), "out of range");
  lens.id = static_cast<LensId>(id);
  lens.pose.translation = as_vector<3>(require(j, "translation", path), join(path, "translation"));
  const auto q = as_vector<4>(require(j, "rotation", path), join(path, "rotation"));
  lens.pose.rotation = Quat(q[0], q[1], q[2], q[3]);
  if (!lens.pose.is_rigid()) range_error(join(path, "rotation"), "quaternion must be unit length");
  lens.length = as_number(require(j, "length", path), join(path, "length"));
  if (!(lens.length > 0.0)) range_error(join(path, "length"), "lens length l must be > 0");
  lens.k1 = as_number(require(j, "k1", path), join(path, "k1"));
  lens.k2 = as_number(require(j, "k2", path), join(path, "k2"));
  if (std::abs(lens.k1) > kMaxCurvature) range_error(join(path, "k1"), "|k1| exceeds the curvature bound");
  if (std::abs(lens.k2) > kMaxCurvature) range_error(join(path, "k2"), "|k2| exceeds the curvature bound");
  if (const auto* v = optional(j, "locked")) lens.locked = as_bool(*v, join(path, "locked"));
  if (const auto* v = optional(j, "attribute")) {
    lens.attribute_override = rethrow_as_field(join(path, "attribute"), [&] {
      return parse_focus_attribute(as_string(*v, join(path, "attribute")));
    });
  }
  return lens;
}

}  // namespace

std::string serialize_scene(const Scene& scene) {
  Json doc;
  doc["format"] = std::string(kSceneFormatTag);
  doc["version"] = kSceneFormatVersion;
  Json volume;
  if (scene.volume_source.synthetic) {
    volume["synthetic"] = synthetic_json(*scene.volume_source.synthetic);
    const Dims& d = scene.volume_source.dims;
    volume["dims"] = Json::array({d.x, d.y, d.z});
  } else {
    volume["path"] = scene.volume_source.path;
  }
  doc["volume"] = std::move(volume);
  doc["background"] = rgb_json(scene.background);
  const Camera& c = scene.camera;
  Json camera;
  camera["eye"] = vec_json(c.eye);
  camera["look_at"] = vec_json(c.look_at);
  camera["up"] = vec_json(c.up);
  camera["vertical_fov"] = c.vertical_fov;
  camera["width"] = c.width;
  camera["height"] = c.height;
  doc["camera"] = std::move(camera);
  doc["settings"] = settings_json(scene.settings);
  Json lenses = Json::array();
  for (const auto& lens : scene.lenses) lenses.push_back(lens_json(lens));
  doc["lenses"] = std::move(lenses);
  return doc.dump(2) + "\n";
}

Scene parse_scene(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document.begin(), document.end());
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports the byte offset; translate it to a line number.
    const std::size_t upto = std::min<std::size_t>(e.byte, document.size());
    const auto line = 1 + std::count(document.begin(), document.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorKind::parse, "scene line " + std::to_string(line) + ": " + e.what());
  }
  if (!doc.is_object()) type_error("<root>", "an object");

  const std::string format = as_string(require(doc, "format", ""), "format");
  if (format != kSceneFormatTag) {
    throw Error(ErrorKind::unsupported_format, "unknown scene format tag '" + format + "'");
  }
  const auto version = as_integer(require(doc, "version", ""), "version");
  if (version != kSceneFormatVersion) {
    throw Error(ErrorKind::unsupported_format,
                "unsupported scene version " + std::to_string(version) + " (expected " +
                    std::to_string(kSceneFormatVersion) + ")");
  }

  Scene scene;
  scene.volume_source = parse_volume_source(require(doc, "volume", ""), "volume");
  scene.camera = parse_camera(require(doc, "camera", ""), "camera");
  if (const auto* v = optional(doc, "background")) scene.background = as_rgb(*v, "background");
  if (const auto* v = optional(doc, "settings")) scene.settings = parse_settings(*v, "settings");

  const Json& lenses = require(doc, "lenses", "");
  if (!lenses.is_array()) type_error("lenses", "an array");
  for (std::size_t i = 0; i < lenses.size(); ++i) {
    auto lens = parse_lens(lenses[i], "lenses[" + std::to_string(i) + "]");
    if (scene.find_lens(lens.id)) {
      range_error("lenses[" + std::to_string(i) + "].id", "duplicate lens id " + std::to_string(lens.id));
    }
    scene.lenses.push_back(lens);
  }
  return scene;
}

void load_scene_volume(Scene& scene, const std::filesystem::path& base_dir) {
  const auto& src = scene.volume_source;
  if (src.synthetic) {
    scene.volume = std::make_shared<const VolumeGrid>(generate_synthetic_volume(*src.synthetic, src.dims));
    return;
  }
  std::filesystem::path p(src.path);
  if (p.is_relative()) p = base_dir / p;
  scene.volume = std::make_shared<const VolumeGrid>(load_qvol(p));
}

Scene load_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open scene file '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Scene scene = parse_scene(text);
  load_scene_volume(scene, path.parent_path());
  return scene;
}

void save_scene_file(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write scene file '" + path.string() + "'");
  out << serialize_scene(scene);
  if (!out) throw Error(ErrorKind::io, "short write to '" + path.string() + "'");
}

bool scenes_equal(const Scene& a, const Scene& b) {
  // The serialized form round-trips every persistent field exactly.
  return serialize_scene(a) == serialize_scene(b);
}

}  // namespace qlens
