// hvox: build, inspect, render and benchmark hybrid voxel volumes.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hvox/bench.hpp"
#include "hvox/buffer.hpp"
#include "hvox/construct.hpp"
#include "hvox/format.hpp"
#include "hvox/intersect.hpp"
#include "hvox/voxelizer.hpp"

namespace {

constexpr const char* kProceduralPrefix = "procedural:";

hvox::Vec3d to_vec(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid voxel format toolkit"};
  app.require_subcommand(1);

  std::string signature;
  auto* validate = app.add_subcommand("validate", "Parse and validate a format signature");
  validate->add_option("format", signature, "Format signature, e.g. \"R(4, 4, 4) G(8)\"")->required();

  std::string mesh_path, out_path;
  bool whole_level_dedup = false;
  int chunk_exp = hvox::ChunkedVoxelSource::kDefaultChunkLog2;
  auto* construct = app.add_subcommand("construct", "Voxelize a mesh into a .hvox volume");
  construct->add_option("mesh", mesh_path, "OBJ mesh, or procedural:<spheres|uniform|noise>")->required();
  construct->add_option("format", signature, "Format signature")->required();
  construct->add_option("-o,--output", out_path, "Output .hvox path")->required();
  construct->add_flag("--whole-level-dedup", whole_level_dedup, "Share SVDAG node maps across a level");
  construct->add_option("--chunk-exp", chunk_exp, "log2 of the voxelizer chunk edge")->check(CLI::Range(0, 10));

  std::string hvox_path, alpha_path;
  bool restart_sv = false;
  int width = 512, height = 512;
  unsigned threads = 0;
  double fov = 45.0;
  std::vector<double> eye, target, up;
  auto* render = app.add_subcommand("render", "Ray trace a .hvox volume to a PPM image");
  render->add_option("hvox", hvox_path, "Input .hvox")->required()->check(CLI::ExistingFile);
  render->add_option("-o,--output", out_path, "Output .ppm (P6, alpha dropped)")->required();
  render->add_option("--alpha", alpha_path, "Also write the alpha channel as a P5 .pgm");
  render->add_flag("--restart-sv", restart_sv, "Stackless restart traversal for SVO/SVDAG levels");
  render->add_option("--width", width)->check(CLI::PositiveNumber);
  render->add_option("--height", height)->check(CLI::PositiveNumber);
  render->add_option("--fov", fov, "Vertical field of view in degrees");
  render->add_option("--eye", eye, "Camera position x y z (voxel units)")->expected(3);
  render->add_option("--target", target, "Look-at point x y z")->expected(3);
  render->add_option("--up", up, "Up vector x y z")->expected(3);
  render->add_option("--threads", threads, "Worker threads (0 = all cores)");

  std::int64_t qx = 0, qy = 0, qz = 0;
  auto* query = app.add_subcommand("query", "Print the voxel stored at a coordinate");
  query->add_option("hvox", hvox_path, "Input .hvox")->required()->check(CLI::ExistingFile);
  query->add_option("x", qx)->required();
  query->add_option("y", qy)->required();
  query->add_option("z", qz)->required();

  std::string manifest_path;
  auto* bench = app.add_subcommand("bench", "Run a benchmark manifest and write CSV results");
  bench->add_option("manifest", manifest_path, "Manifest file")->required()->check(CLI::ExistingFile);
  bench->add_option("-o,--output", out_path, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const hvox::FormatPlan plan = hvox::compile_plan(signature);
      const auto& r = plan.resolution();
      std::cout << plan.signature() << "\nresolution " << r.x() << " x " << r.y() << " x " << r.z() << '\n';
    } else if (*construct) {
      const hvox::FormatPlan plan = hvox::compile_plan(signature);
      hvox::ConstructOptions options;
      options.whole_level_dedup = whole_level_dedup;
      hvox::ConstructStats stats;
      hvox::Volume volume;
      if (mesh_path.rfind(kProceduralPrefix, 0) == 0) {
        hvox::FunctionSource source(
            plan.resolution(),
            hvox::procedural_scene(mesh_path.substr(std::string(kProceduralPrefix).size()), plan.resolution()));
        volume = hvox::construct_volume(plan, source, options, &stats);
      } else {
        hvox::ChunkedVoxelSource source(hvox::load_mesh(mesh_path), plan.resolution(), chunk_exp);
        volume = hvox::construct_volume(plan, source, options, &stats);
      }
      hvox::save_hvox(volume, out_path);
      std::cout << "format      " << plan.signature() << '\n'
                << "words       " << volume.buffer.size() << '\n'
                << "file bytes  " << hvox::hvox_header_bytes(plan) + volume.buffer.size_bytes() << '\n'
                << "peak memory " << stats.peak_bytes << " bytes\n";
    } else if (*render) {
      const hvox::Volume volume = hvox::load_hvox(hvox_path);
      hvox::Camera camera = hvox::default_camera(volume.plan.resolution(), width, height);
      camera.fov_degrees = fov;
      if (!eye.empty()) camera.position = to_vec(eye);
      if (!target.empty()) camera.target = to_vec(target);
      if (!up.empty()) camera.up = to_vec(up);
      hvox::RenderOptions options;
      options.restart_sv = restart_sv;
      options.threads = threads;
      const hvox::Image image = hvox::render(volume, camera, options);
      hvox::write_ppm(image, out_path);
      if (!alpha_path.empty()) hvox::write_alpha_pgm(image, alpha_path);
    } else if (*query) {
      const hvox::Volume volume = hvox::load_hvox(hvox_path);
      const hvox::Voxel v = hvox::point_query(volume, hvox::Coord(qx, qy, qz));
      std::printf("0x%08x\n", v);
    } else if (*bench) {
      std::ifstream in(manifest_path);
      const hvox::BenchManifest manifest =
          hvox::parse_manifest(in, std::filesystem::path(manifest_path).parent_path());
      std::ofstream csv(out_path);
      if (!csv) throw std::runtime_error("cannot open " + out_path);
      hvox::write_csv_header(csv);
      const auto records = hvox::run_bench(manifest, [&](const hvox::BenchRecord& r) {
        hvox::write_csv_row(csv, r);
        csv.flush();
        std::cerr << r.model << "  " << r.format << "  " << r.size_bytes << " B  " << r.frame_ms_mean << " ms\n";
      });
      std::map<std::string, std::vector<hvox::ParetoPoint>> by_model;
      for (std::size_t i = 0; i < records.size(); ++i)
        by_model[records[i].model].push_back(
            {static_cast<double>(records[i].size_bytes), records[i].frame_ms_mean, i});
      for (const auto& [model, points] : by_model) {
        std::cout << "pareto frontier for " << model << ":\n";
        for (const auto& p : hvox::pareto_frontier(points))
          std::cout << "  " << records[p.id].format << "  " << records[p.id].size_bytes << " B  "
                    << records[p.id].frame_ms_mean << " ms\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
