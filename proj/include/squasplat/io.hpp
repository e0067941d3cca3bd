#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "squasplat/grid.hpp"
#include "squasplat/metrics.hpp"
#include "squasplat/scene.hpp"
#include "squasplat/temporal.hpp"
#include "squasplat/viewgeom.hpp"

namespace squasplat {

inline constexpr int kSceneVersion = 1;
inline constexpr std::uint32_t kGridVersion = 1;
inline constexpr std::uint32_t kPlaneVersion = 1;
inline constexpr std::uint32_t kGridHasProbabilities = 1u;

// Contents of a scene file (JSON text).
struct SceneDocument {
  int version = kSceneVersion;
  GridSpec grid = GridSpec::occ3d();
  FieldConfig field;
  int num_classes = 1;
  std::vector<std::string> class_names;
  std::vector<Superquadric> superquadrics;
  std::vector<SuperquadricCluster> clusters;

  // Standalone superquadrics followed by every expanded cluster.
  std::vector<Superquadric> primitives() const;
  // Clusters plus each standalone superquadric as a one-member cluster.
  std::vector<SuperquadricCluster> as_clusters() const;
};

std::string scene_to_string(const SceneDocument& doc);
SceneDocument scene_from_string(const std::string& text);
SceneDocument read_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const SceneDocument& doc);

// Binary grid file, little-endian:
//   "SQVG", u32 version, u32 nx, ny, nz, u32 C, u32 flags,
//   f64 lower[3], f64 upper[3],
//   f32 p_occ[N] (x-fastest), u16 label[N] (0xFFFF empty),
//   f32 prob[N * C] when flags & kGridHasProbabilities.
std::vector<std::uint8_t> encode_grid(const VoxelGrid& grid,
                                      bool with_probabilities);
VoxelGrid decode_grid(const std::vector<std::uint8_t>& bytes);
void write_grid(const std::filesystem::path& path, const VoxelGrid& grid,
                bool with_probabilities);
VoxelGrid read_grid(const std::filesystem::path& path);

// Binary plane file: "SQFP", u32 version, u32 C, H, W, then f32 data.
void write_plane(const std::filesystem::path& path, const FeaturePlane& plane);
FeaturePlane read_plane(const std::filesystem::path& path);

// Camera rig file: {"cameras": [{"fx", "fy", "cx", "cy", "width", "height",
// "rotation", "translation": [x,y,z], "z_near"?}]}, with the rotation and
// translation mapping ego to camera coordinates. Rotations in rig and stream
// files are either a [w,x,y,z] quaternion or three matrix rows; write_rig
// emits matrix rows so rewrites are byte-identical.
std::vector<CameraModel> read_rig(const std::filesystem::path& path);
void write_rig(const std::filesystem::path& path,
               const std::vector<CameraModel>& cameras);

// Stream file: {"frames": [{"pose": {"rotation", "translation", "timestamp"},
// "scene": "<path>"}]}; scene paths resolve relative to the stream file.
std::vector<StreamFrame> read_stream(const std::filesystem::path& path);

// Ray set file: {"rays": [{"origin", "direction"}]} or {"origin",
// "azimuths", "elevations_deg"}.
RaySet read_rayset(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace squasplat
