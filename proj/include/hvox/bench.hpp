#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hvox/buffer.hpp"
#include "hvox/construct.hpp"
#include "hvox/intersect.hpp"
#include "hvox/types.hpp"

namespace hvox {

struct Camera {
  Vec3d position = Vec3d::Zero();
  Vec3d target = -Vec3d::UnitZ();
  Vec3d up = Vec3d::UnitY();
  double fov_degrees = 60.0;
  int width = 512;
  int height = 512;

  /// Throws std::invalid_argument on a bad field of view, size or up vector.
  void validate() const;
  /// Primary ray through the center of pixel (x, y); y grows downward.
  Ray primary_ray(int x, int y) const;
  Vec3d forward() const { return (target - position).normalized(); }
};

/// Looks at the volume center from a fixed diagonal vantage point.
Camera default_camera(const Coord& resolution, int width = 512, int height = 512);

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> pixels;  // row-major RGBA words

  std::uint32_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Image&) const = default;
};

struct RenderOptions {
  bool restart_sv = false;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
};

/// Scales the RGB channels by `weight` in [0, 1]; alpha is kept.
Voxel shade(Voxel color, double weight);

/// One primary ray per pixel; hits are shaded by |normal . view direction|, misses are 0.
Image render(const Volume& volume, const Camera& camera, const RenderOptions& options = {});

/// P6 with the alpha channel dropped.
void write_ppm(const Image& image, const std::filesystem::path& path);
/// P5 holding only the alpha channel.
void write_alpha_pgm(const Image& image, const std::filesystem::path& path);

struct FrameTiming {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  double min_ms = 0.0;
  std::vector<double> frames_ms;
};

/// Renders one warm-up frame, then `frames` timed frames.
FrameTiming time_render(const Volume& volume, const Camera& camera, int frames, const RenderOptions& options = {});

struct ParetoPoint {
  double size = 0.0;
  double time = 0.0;
  std::size_t id = 0;
  bool operator==(const ParetoPoint&) const = default;
};

/// Points not strictly dominated by another point, sorted by size (then time, then id).
std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points);

/// Peak working memory, in bytes, of constructing `plan` from `source`.
std::size_t peak_construction_memory(const FormatPlan& plan, VoxelSource& source,
                                     const ConstructOptions& options = {});

struct BenchRecord {
  std::string model;
  std::string format;
  std::string flags;
  std::uint64_t size_bytes = 0;
  double frame_ms_mean = 0.0;
  double frame_ms_std = 0.0;
  std::uint64_t peak_mem_bytes = 0;
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const BenchRecord& record);

/// Analytic test scenes: "spheres" (sparse shells over a ground slab),
/// "uniform" (solid single color), "noise" (random 25% occupancy).
std::function<Voxel(const Coord&)> procedural_scene(const std::string& name, const Coord& resolution,
                                                    std::uint64_t seed = 1);

struct BenchModel {
  std::string name;
  std::optional<std::filesystem::path> mesh;
  std::optional<std::string> procedural;
};

// Line-oriented manifest:
//   frames = 16            width = 512        height = 512
//   chunk_exp = 6          flags = whole-level-dedup restart-sv
//   format = R(4³) G(5)    (repeatable)
//   [model NAME]  followed by  mesh = path.obj  or  procedural = spheres
struct BenchManifest {
  int frames = 16;
  int width = 512;
  int height = 512;
  int chunk_exp = ChunkedVoxelSource::kDefaultChunkLog2;
  bool whole_level_dedup = false;
  bool restart_sv = false;
  std::vector<std::string> formats;
  std::vector<BenchModel> models;
};

BenchManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {});

/// Builds, sizes, times and measures every (model, format) pair.
std::vector<BenchRecord> run_bench(const BenchManifest& manifest,
                                   const std::function<void(const BenchRecord&)>& on_record = {});

}  // namespace hvox
