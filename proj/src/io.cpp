#include "squasplat/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace squasplat {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

using Json = nlohmann::ordered_json;

namespace {

template <int N>
Json vec_json(const Eigen::Matrix<double, N, 1>& v) {
  Json a = Json::array();
  for (int i = 0; i < N; ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> json_vec(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw std::runtime_error(std::string("expected ") + std::to_string(N) +
                             "-vector for '" + what + "'");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

const Json& field(const Json& j, const char* key) {
  if (!j.contains(key)) {
    throw std::runtime_error(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

Json grid_json(const GridSpec& g) {
  return Json{{"lower", vec_json<3>(g.lower)},
              {"upper", vec_json<3>(g.upper)},
              {"resolution", {g.resolution[0], g.resolution[1], g.resolution[2]}}};
}

GridSpec json_grid(const Json& j) {
  GridSpec g;
  g.lower = json_vec<3>(field(j, "lower"), "lower");
  g.upper = json_vec<3>(field(j, "upper"), "upper");
  const Json& r = field(j, "resolution");
  if (!r.is_array() || r.size() != 3) {
    throw std::runtime_error("expected 3 resolution entries");
  }
  for (int a = 0; a < 3; ++a) g.resolution[a] = r[a].get<int>();
  g.validate();
  return g;
}

Json superquadric_json(const Superquadric& sq) {
  return Json{{"center", vec_json<3>(sq.center)},
              {"rotation", vec_json<4>(sq.rotation)},
              {"scale", vec_json<3>(sq.scale)},
              {"eps", vec_json<2>(sq.eps)},
              {"opacity", sq.opacity},
              {"semantics", sq.semantics}};
}

Superquadric json_superquadric(const Json& j) {
  Superquadric sq;
  sq.center = json_vec<3>(field(j, "center"), "center");
  sq.rotation = json_vec<4>(field(j, "rotation"), "rotation");
  sq.scale = json_vec<3>(field(j, "scale"), "scale");
  sq.eps = json_vec<2>(field(j, "eps"), "eps");
  sq.opacity = field(j, "opacity").get<double>();
  sq.semantics = field(j, "semantics").get<std::vector<double>>();
  return sq;
}

Json cluster_json(const SuperquadricCluster& c) {
  Json members = Json::array();
  for (const auto& m : c.members) {
    members.push_back(Json{{"offset", vec_json<3>(m.offset)},
                           {"rotation", vec_json<4>(m.rotation)},
                           {"scale", vec_json<3>(m.scale)},
                           {"eps", vec_json<2>(m.eps)},
                           {"opacity", m.opacity}});
  }
  return Json{{"ref_point", vec_json<3>(c.ref_point)},
              {"semantics", c.semantics},
              {"members", members}};
}

SuperquadricCluster json_cluster(const Json& j) {
  SuperquadricCluster c;
  c.ref_point = json_vec<3>(field(j, "ref_point"), "ref_point");
  c.semantics = field(j, "semantics").get<std::vector<double>>();
  for (const Json& m : field(j, "members")) {
    ClusterMember member;
    member.offset = json_vec<3>(field(m, "offset"), "offset");
    member.rotation = json_vec<4>(field(m, "rotation"), "rotation");
    member.scale = json_vec<3>(field(m, "scale"), "scale");
    member.eps = json_vec<2>(field(m, "eps"), "eps");
    member.opacity = field(m, "opacity").get<double>();
    c.members.push_back(member);
  }
  return c;
}

// Rotation given as a [w, x, y, z] quaternion or as three matrix rows.
FramePose json_pose(const Json& j) {
  const Json& r = field(j, "rotation");
  const Vec3 t = json_vec<3>(field(j, "translation"), "translation");
  const double stamp = j.value("timestamp", 0.0);
  FramePose pose;
  if (r.is_array() && r.size() == 3 && r[0].is_array()) {
    pose.timestamp = stamp;
    pose.translation = t;
    for (int row = 0; row < 3; ++row) {
      pose.rotation.row(row) = json_vec<3>(r[static_cast<std::size_t>(row)], "rotation").transpose();
    }
  } else {
    const Vec4 q = json_vec<4>(r, "rotation");
    if (!(q.norm() > 0.0)) throw std::runtime_error("pose: zero quaternion");
    pose = FramePose::from_quaternion(q, t, stamp);
  }
  pose.validate();
  return pose;
}

Json matrix_json(const Mat3& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec_json<3>(Vec3(m.row(r).transpose())));
  return rows;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(what + ": " + e.what());
  }
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_magic(const char* magic) {
    bytes_.insert(bytes_.end(), magic, magic + 4);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw std::runtime_error("binary file truncated");
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  void expect_magic(const char* magic) {
    for (int i = 0; i < 4; ++i) {
      if (get<char>() != magic[i]) {
        throw std::runtime_error(std::string("bad magic, expected ") + magic);
      }
    }
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Superquadric> SceneDocument::primitives() const {
  std::vector<Superquadric> out = superquadrics;
  auto expanded = expand_clusters(clusters);
  out.insert(out.end(), expanded.begin(), expanded.end());
  return out;
}

std::vector<SuperquadricCluster> SceneDocument::as_clusters() const {
  std::vector<SuperquadricCluster> out = clusters;
  for (const Superquadric& sq : superquadrics) {
    SuperquadricCluster c;
    c.ref_point = sq.center;
    c.semantics = sq.semantics;
    c.members.push_back({Vec3::Zero(), sq.rotation, sq.scale, sq.eps, sq.opacity});
    out.push_back(std::move(c));
  }
  return out;
}

std::string scene_to_string(const SceneDocument& doc) {
  Json j;
  j["version"] = doc.version;
  j["grid"] = grid_json(doc.grid);
  j["field"] = Json{{"lambda", doc.field.lambda}, {"cutoff", doc.field.cutoff}};
  j["num_classes"] = doc.num_classes;
  j["class_names"] = doc.class_names;
  j["superquadrics"] = Json::array();
  for (const auto& sq : doc.superquadrics) {
    j["superquadrics"].push_back(superquadric_json(sq));
  }
  j["clusters"] = Json::array();
  for (const auto& c : doc.clusters) j["clusters"].push_back(cluster_json(c));
  return j.dump(2) + "\n";
}

SceneDocument scene_from_string(const std::string& text) {
  const Json j = parse_json(text, "scene file");
  SceneDocument doc;
  doc.version = field(j, "version").get<int>();
  if (doc.version != kSceneVersion) {
    throw std::runtime_error("scene file: unsupported version " +
                             std::to_string(doc.version));
  }
  doc.grid = json_grid(field(j, "grid"));
  const Json& f = field(j, "field");
  doc.field.lambda = field(f, "lambda").get<double>();
  doc.field.cutoff = field(f, "cutoff").get<double>();
  doc.field.validate();
  doc.num_classes = field(j, "num_classes").get<int>();
  if (doc.num_classes < 1) throw std::runtime_error("scene file: C < 1");
  doc.class_names = j.value("class_names", std::vector<std::string>{});
  for (const Json& s : j.value("superquadrics", Json::array())) {
    doc.superquadrics.push_back(json_superquadric(s));
  }
  for (const Json& c : j.value("clusters", Json::array())) {
    doc.clusters.push_back(json_cluster(c));
  }
  auto check_classes = [&](std::size_t n) {
    if (n != static_cast<std::size_t>(doc.num_classes)) {
      throw std::runtime_error("scene file: semantics length != num_classes");
    }
  };
  for (const auto& sq : doc.superquadrics) check_classes(sq.semantics.size());
  for (const auto& c : doc.clusters) check_classes(c.semantics.size());
  return doc;
}

SceneDocument read_scene(const std::filesystem::path& path) {
  return scene_from_string(read_text(path));
}

void write_scene(const std::filesystem::path& path, const SceneDocument& doc) {
  write_text(path, scene_to_string(doc));
}

std::vector<std::uint8_t> encode_grid(const VoxelGrid& grid,
                                      bool with_probabilities) {
  const bool probs = with_probabilities && grid.has_semantics();
  ByteWriter w;
  w.put_magic("SQVG");
  w.put<std::uint32_t>(kGridVersion);
  for (int a = 0; a < 3; ++a) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.spec.resolution[a]));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.num_classes));
  w.put<std::uint32_t>(probs ? kGridHasProbabilities : 0u);
  for (int a = 0; a < 3; ++a) w.put<double>(grid.spec.lower[a]);
  for (int a = 0; a < 3; ++a) w.put<double>(grid.spec.upper[a]);
  for (double p : grid.occupancy) w.put<float>(static_cast<float>(p));
  for (std::uint16_t l : grid.labels) w.put<std::uint16_t>(l);
  if (probs) {
    for (double p : grid.semantics) w.put<float>(static_cast<float>(p));
  }
  return w.take();
}

VoxelGrid decode_grid(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_magic("SQVG");
  const auto version = r.get<std::uint32_t>();
  if (version != kGridVersion) {
    throw std::runtime_error("grid file: unsupported version " +
                             std::to_string(version));
  }
  GridSpec spec;
  for (int a = 0; a < 3; ++a) {
    spec.resolution[a] = static_cast<int>(r.get<std::uint32_t>());
  }
  const int classes = static_cast<int>(r.get<std::uint32_t>());
  const auto flags = r.get<std::uint32_t>();
  for (int a = 0; a < 3; ++a) spec.lower[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) spec.upper[a] = r.get<double>();
  spec.validate();

  const bool probs = flags & kGridHasProbabilities;
  VoxelGrid grid(spec, classes, probs);
  for (double& p : grid.occupancy) p = r.get<float>();
  for (std::uint16_t& l : grid.labels) l = r.get<std::uint16_t>();
  if (probs) {
    for (double& p : grid.semantics) p = r.get<float>();
  }
  if (!r.at_end()) throw std::runtime_error("grid file: trailing bytes");
  return grid;
}

void write_grid(const std::filesystem::path& path, const VoxelGrid& grid,
                bool with_probabilities) {
  write_bytes(path, encode_grid(grid, with_probabilities));
}

VoxelGrid read_grid(const std::filesystem::path& path) {
  return decode_grid(read_bytes(path));
}

void write_plane(const std::filesystem::path& path, const FeaturePlane& plane) {
  ByteWriter w;
  w.put_magic("SQFP");
  w.put<std::uint32_t>(kPlaneVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(plane.channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(plane.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(plane.width));
  for (float v : plane.data) w.put<float>(v);
  write_bytes(path, w.take());
}

FeaturePlane read_plane(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("SQFP");
  if (r.get<std::uint32_t>() != kPlaneVersion) {
    throw std::runtime_error("plane file: unsupported version");
  }
  const int c = static_cast<int>(r.get<std::uint32_t>());
  const int h = static_cast<int>(r.get<std::uint32_t>());
  const int w = static_cast<int>(r.get<std::uint32_t>());
  FeaturePlane plane(c, h, w);
  for (float& v : plane.data) v = r.get<float>();
  if (!r.at_end()) throw std::runtime_error("plane file: trailing bytes");
  return plane;
}

std::vector<CameraModel> read_rig(const std::filesystem::path& path) {
  const Json j = parse_json(read_text(path), "rig file");
  std::vector<CameraModel> cams;
  for (const Json& c : field(j, "cameras")) {
    CameraModel cam;
    cam.fx = field(c, "fx").get<double>();
    cam.fy = field(c, "fy").get<double>();
    cam.cx = field(c, "cx").get<double>();
    cam.cy = field(c, "cy").get<double>();
    cam.width = field(c, "width").get<int>();
    cam.height = field(c, "height").get<int>();
    cam.z_near = c.value("z_near", 1e-3);
    cam.ego_to_camera = json_pose(c);
    cam.validate();
    cams.push_back(cam);
  }
  return cams;
}

void write_rig(const std::filesystem::path& path,
               const std::vector<CameraModel>& cameras) {
  Json list = Json::array();
  for (const auto& cam : cameras) {
    list.push_back(Json{{"fx", cam.fx},
                        {"fy", cam.fy},
                        {"cx", cam.cx},
                        {"cy", cam.cy},
                        {"width", cam.width},
                        {"height", cam.height},
                        {"rotation", matrix_json(cam.ego_to_camera.rotation)},
                        {"translation", vec_json<3>(cam.ego_to_camera.translation)},
                        {"z_near", cam.z_near}});
  }
  write_text(path, Json{{"cameras", list}}.dump(2) + "\n");
}

std::vector<StreamFrame> read_stream(const std::filesystem::path& path) {
  const Json j = parse_json(read_text(path), "stream file");
  const auto base = path.parent_path();
  std::vector<StreamFrame> frames;
  for (const Json& f : field(j, "frames")) {
    StreamFrame frame;
    frame.pose = f.contains("pose") ? json_pose(f.at("pose"))
                                    : FramePose::identity();
    if (f.contains("scene")) {
      std::filesystem::path scene = f.at("scene").get<std::string>();
      if (scene.is_relative()) scene = base / scene;
      frame.init_clusters = read_scene(scene).as_clusters();
    }
    frames.push_back(std::move(frame));
  }
  if (frames.empty()) throw std::runtime_error("stream file: no frames");
  return frames;
}

RaySet read_rayset(const std::filesystem::path& path) {
  const Json j = parse_json(read_text(path), "ray set file");
  if (j.contains("rays")) {
    RaySet set;
    for (const Json& r : j.at("rays")) {
      Ray ray;
      ray.origin = json_vec<3>(field(r, "origin"), "origin");
      const Vec3 d = json_vec<3>(field(r, "direction"), "direction");
      if (!(d.norm() > 0.0)) throw std::runtime_error("ray set: zero direction");
      ray.direction = d.normalized();
      set.rays.push_back(ray);
    }
    return set;
  }
  RaySetParams params;
  if (j.contains("origin")) params.origin = json_vec<3>(j.at("origin"), "origin");
  params.azimuths = j.value("azimuths", params.azimuths);
  params.elevations_deg = j.value("elevations_deg", params.elevations_deg);
  return make_rayset(params);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace squasplat
