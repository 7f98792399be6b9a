#include "hvox/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hvox {

void Camera::validate() const {
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) throw std::invalid_argument("field of view must be in (0, 180)");
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  const Vec3d f = target - position;
  if (f.norm() == 0.0) throw std::invalid_argument("camera position equals target");
  if (f.normalized().cross(up).norm() < 1e-9) throw std::invalid_argument("up vector is collinear with view");
}

Ray Camera::primary_ray(int x, int y) const {
  const Vec3d f = forward();
  const Vec3d right = f.cross(up).normalized();
  const Vec3d true_up = right.cross(f);
  const double tan_half = std::tan(fov_degrees * M_PI / 360.0);
  const double aspect = static_cast<double>(width) / height;
  const double u = (2.0 * (x + 0.5) / width - 1.0) * tan_half * aspect;
  const double v = (1.0 - 2.0 * (y + 0.5) / height) * tan_half;
  Ray ray;
  ray.origin = position;
  ray.direction = (f + u * right + v * true_up).normalized();
  return ray;
}

Camera default_camera(const Coord& resolution, int width, int height) {
  const Vec3d res = resolution.cast<double>();
  Camera cam;
  cam.target = res / 2.0;
  cam.position = cam.target + res.maxCoeff() * Vec3d(0.85, 0.6, 1.25);
  cam.up = Vec3d::UnitY();
  cam.fov_degrees = 45.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

Voxel shade(Voxel color, double weight) {
  weight = std::clamp(weight, 0.0, 1.0);
  Voxel out = color & 0xff000000u;
  for (int c = 0; c < 3; ++c) {
    const auto v = static_cast<std::uint32_t>(std::lround(channel(color, c) * weight));
    out |= std::min<std::uint32_t>(v, 255u) << (8 * c);
  }
  return out;
}

Image render(const Volume& volume, const Camera& camera, const RenderOptions& options) {
  camera.validate();
  Image image{camera.width, camera.height,
              std::vector<std::uint32_t>(static_cast<std::size_t>(camera.width) * camera.height, 0u)};
  const Vec3d light = camera.forward();
  IntersectOptions iopts;
  iopts.restart_sv = options.restart_sv;

  auto render_rows = [&](int row_begin, int row_end) {
    for (int y = row_begin; y < row_end; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        const auto hit = intersect_root(volume, camera.primary_ray(x, y), iopts);
        if (!hit) continue;
        const double weight = std::abs(hit->normal.cast<double>().dot(light));
        image.pixels[static_cast<std::size_t>(y) * camera.width + x] = shade(hit->color, weight);
      }
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(camera.height));
  if (threads <= 1) {
    render_rows(0, camera.height);
    return image;
  }
  std::vector<std::thread> workers;
  const int band = (camera.height + static_cast<int>(threads) - 1) / static_cast<int>(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(t) * band;
    const int end = std::min(camera.height, begin + band);
    if (begin < end) workers.emplace_back(render_rows, begin, end);
  }
  for (auto& w : workers) w.join();
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (std::uint32_t px : image.pixels) {
    const char rgb[3] = {static_cast<char>(channel(px, 0)), static_cast<char>(channel(px, 1)),
                         static_cast<char>(channel(px, 2))};
    out.write(rgb, 3);
  }
}

void write_alpha_pgm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (std::uint32_t px : image.pixels) out.put(static_cast<char>(channel(px, 3)));
}

FrameTiming time_render(const Volume& volume, const Camera& camera, int frames, const RenderOptions& options) {
  if (frames < 1) throw std::invalid_argument("need at least one timed frame");
  render(volume, camera, options);
  FrameTiming timing;
  for (int i = 0; i < frames; ++i) {
    const auto start = std::chrono::steady_clock::now();
    render(volume, camera, options);
    const auto stop = std::chrono::steady_clock::now();
    timing.frames_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  double sum = 0.0;
  for (double f : timing.frames_ms) sum += f;
  timing.mean_ms = sum / frames;
  double var = 0.0;
  for (double f : timing.frames_ms) var += (f - timing.mean_ms) * (f - timing.mean_ms);
  timing.stddev_ms = std::sqrt(var / frames);
  timing.min_ms = *std::min_element(timing.frames_ms.begin(), timing.frames_ms.end());
  return timing;
}

std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points) {
  std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.size != b.size) return a.size < b.size;
    if (a.time != b.time) return a.time < b.time;
    return a.id < b.id;
  });
  std::vector<ParetoPoint> frontier;
  double best_smaller = std::numeric_limits<double>::infinity();  // min time over strictly smaller sizes
  for (std::size_t i = 0; i < points.size();) {
    std::size_t j = i;
    while (j < points.size() && points[j].size == points[i].size) ++j;
    const double group_min = points[i].time;
    if (group_min < best_smaller) {
      for (std::size_t k = i; k < j && points[k].time == group_min; ++k) frontier.push_back(points[k]);
    }
    best_smaller = std::min(best_smaller, group_min);
    i = j;
  }
  return frontier;
}

std::size_t peak_construction_memory(const FormatPlan& plan, VoxelSource& source, const ConstructOptions& options) {
  ConstructStats stats;
  construct_volume(plan, source, options, &stats);
  return stats.peak_bytes;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void write_csv_header(std::ostream& out) {
  out << "model,format,flags,size_bytes,frame_ms_mean,frame_ms_std,peak_mem_bytes\n";
}

void write_csv_row(std::ostream& out, const BenchRecord& r) {
  out << csv_field(r.model) << ',' << csv_field(r.format) << ',' << csv_field(r.flags) << ',' << r.size_bytes << ','
      << std::fixed << std::setprecision(4) << r.frame_ms_mean << ',' << r.frame_ms_std << ','
      << std::defaultfloat << r.peak_mem_bytes << '\n';
}

std::function<Voxel(const Coord&)> procedural_scene(const std::string& name, const Coord& resolution,
                                                    std::uint64_t seed) {
  if (name == "uniform") {
    return [](const Coord&) { return make_rgba(200, 180, 120, 255); };
  }
  if (name == "noise") {
    return [seed](const Coord& p) -> Voxel {
      const std::uint64_t h = splitmix64(seed ^ splitmix64(encode3(p)));
      if ((h & 3u) != 0) return kEmptyVoxel;
      return static_cast<Voxel>(h >> 32) | 0xff000000u;
    };
  }
  if (name == "spheres") {
    struct Sphere {
      Vec3d center;
      double radius;
      Voxel color;
    };
    const Vec3d res = resolution.cast<double>();
    const double scale = res.minCoeff();
    std::vector<Sphere> spheres;
    const double layout[][4] = {{0.30, 0.35, 0.30, 0.18}, {0.70, 0.30, 0.65, 0.15}, {0.55, 0.70, 0.40, 0.20},
                                {0.25, 0.62, 0.75, 0.12}, {0.78, 0.76, 0.80, 0.10}};
    const Voxel colors[] = {make_rgba(230, 80, 60, 255), make_rgba(80, 200, 90, 255), make_rgba(70, 110, 230, 255),
                            make_rgba(240, 210, 60, 255), make_rgba(200, 90, 220, 255)};
    for (int i = 0; i < 5; ++i)
      spheres.push_back({Vec3d(layout[i][0], layout[i][1], layout[i][2]).cwiseProduct(res), layout[i][3] * scale,
                         colors[i]});
    const double slab = std::max(1.0, res.y() / 64.0);
    const double shell = std::sqrt(3.0) / 2.0;
    return [spheres, slab, shell](const Coord& p) -> Voxel {
      const Vec3d c = p.cast<double>() + Vec3d::Constant(0.5);
      for (const Sphere& s : spheres) {
        const double d2 = (c - s.center).squaredNorm();
        const double lo = std::max(0.0, s.radius - shell);
        const double hi = s.radius + shell;
        if (d2 >= lo * lo && d2 <= hi * hi) return s.color;
      }
      if (c.y() < slab) return make_rgba(150, 150, 150, 255);
      return kEmptyVoxel;
    };
  }
  throw std::invalid_argument("unknown procedural scene '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("manifest: bad integer for '" + key + "': " + value);
  }
}

}  // namespace

BenchManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  BenchManifest m;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.rfind("[model", 0) != 0)
        throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": expected [model NAME]");
      BenchModel model;
      model.name = trim(line.substr(6, line.size() - 7));
      if (model.name.empty()) throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": empty model name");
      m.models.push_back(model);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "mesh" || key == "procedural") {
      if (m.models.empty())
        throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": '" + key + "' outside a model");
      if (key == "mesh") {
        const std::filesystem::path p(value);
        m.models.back().mesh = p.is_absolute() ? p : base_dir / p;
      } else {
        m.models.back().procedural = value;
      }
    } else if (key == "format") {
      compile_plan(value);
      m.formats.push_back(value);
    } else if (key == "frames") {
      m.frames = parse_int(value, key);
    } else if (key == "width") {
      m.width = parse_int(value, key);
    } else if (key == "height") {
      m.height = parse_int(value, key);
    } else if (key == "chunk_exp") {
      m.chunk_exp = parse_int(value, key);
    } else if (key == "flags") {
      std::istringstream fs(value);
      std::string flag;
      while (fs >> flag) {
        if (flag == "whole-level-dedup") m.whole_level_dedup = true;
        else if (flag == "restart-sv") m.restart_sv = true;
        else throw std::invalid_argument("manifest: unknown flag '" + flag + "'");
      }
    } else {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  for (const auto& model : m.models)
    if (!model.mesh && !model.procedural)
      throw std::invalid_argument("manifest: model '" + model.name + "' needs mesh or procedural");
  return m;
}

std::vector<BenchRecord> run_bench(const BenchManifest& manifest,
                                   const std::function<void(const BenchRecord&)>& on_record) {
  std::vector<BenchRecord> records;
  std::string flags;
  if (manifest.whole_level_dedup) flags += "whole-level-dedup";
  if (manifest.restart_sv) flags += std::string(flags.empty() ? "" : " ") + "restart-sv";

  for (const BenchModel& model : manifest.models) {
    std::optional<Mesh> mesh;
    if (model.mesh) mesh = load_mesh(*model.mesh);
    for (const std::string& signature : manifest.formats) {
      const FormatPlan plan = compile_plan(signature);
      ConstructOptions copts;
      copts.whole_level_dedup = manifest.whole_level_dedup;
      ConstructStats stats;
      Volume volume;
      if (mesh) {
        ChunkedVoxelSource source(*mesh, plan.resolution(), manifest.chunk_exp);
        volume = construct_volume(plan, source, copts, &stats);
      } else {
        FunctionSource source(plan.resolution(), procedural_scene(*model.procedural, plan.resolution()));
        volume = construct_volume(plan, source, copts, &stats);
      }
      RenderOptions ropts;
      ropts.restart_sv = manifest.restart_sv;
      const FrameTiming timing =
          time_render(volume, default_camera(plan.resolution(), manifest.width, manifest.height), manifest.frames, ropts);

      BenchRecord r;
      r.model = model.name;
      r.format = plan.signature();
      r.flags = flags;
      r.size_bytes = hvox_header_bytes(plan) + volume.buffer.size_bytes();
      r.frame_ms_mean = timing.mean_ms;
      r.frame_ms_std = timing.stddev_ms;
      r.peak_mem_bytes = stats.peak_bytes;
      if (on_record) on_record(r);
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace hvox
