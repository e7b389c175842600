// Copyright 2026 The lcfusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lcf/dataset.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "binary_io.hpp"
#include "lcf/config.hpp"

namespace lcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kBlobVersion = 1;
constexpr std::size_t kPointFields = 5;  // x, y, z, intensity, object

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <class M>
void read_matrix(const json& rows, M& m) {
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(m.rows())) {
    throw std::runtime_error("scene sidecar: bad matrix");
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows.at(r).at(c).get<double>();
  }
}

json box_json(const Box3D& b) {
  return {{"center", {b.center.x(), b.center.y(), b.center.z()}},
          {"size", {b.size.x(), b.size.y(), b.size.z()}},
          {"yaw", b.yaw},
          {"velocity", {b.velocity.x(), b.velocity.y()}},
          {"class", b.class_id}};
}

Box3D box_from_json(const json& j) {
  Box3D b;
  const json& c = j.at("center");
  const json& s = j.at("size");
  const json& v = j.at("velocity");
  b.center = Vec3(c.at(0), c.at(1), c.at(2));
  b.size = Vec3(s.at(0), s.at(1), s.at(2));
  b.yaw = j.at("yaw");
  b.velocity = Vec2(v.at(0), v.at(1));
  b.class_id = j.at("class");
  return b;
}

json range_json(const DetectionRange& r) {
  return {{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min},
          {"y_max", r.y_max}, {"z_min", r.z_min}, {"z_max", r.z_max}};
}

DetectionRange range_from_json(const json& j) {
  DetectionRange r;
  r.x_min = j.at("x_min");
  r.x_max = j.at("x_max");
  r.y_min = j.at("y_min");
  r.y_max = j.at("y_max");
  r.z_min = j.at("z_min");
  r.z_max = j.at("z_max");
  return r;
}

std::string camera_blob(std::size_t v, std::size_t m, std::size_t t) {
  return "camera_v" + std::to_string(v) + "_m" + std::to_string(m) + "_t" + std::to_string(t) + ".bin";
}

std::string scene_dir_name(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05llu", static_cast<unsigned long long>(id));
  return buf;
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error(path.string() + " is not valid JSON");
  return doc;
}

void copy_into(FeatureMap& map, const Tensor& t, const std::string& what) {
  if (t.shape() != map.data.shape()) {
    throw std::runtime_error(what + ": shape " + shape_string(t.shape()) + " does not match " +
                             shape_string(map.data.shape()));
  }
  map.data = t;
}

}  // namespace

std::uint64_t sim_config_hash(const SimConfig& cfg) { return json_hash(to_json(cfg)); }

std::vector<SceneSample> generate_scenes(const SimConfig& cfg, std::uint64_t seed, std::size_t count,
                                         std::size_t threads) {
  cfg.validate();
  std::vector<SceneSample> scenes(count);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < count; i += stride) {
      Rng rng(mix_seed(seed, i));
      scenes[i] = generate_scene(cfg, i, rng);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    work(0, 1);
    return scenes;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      try {
        work(k, threads);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return scenes;
}

void write_blob(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("LCFB", 4);
  binary::put_uint<std::uint32_t>(out, kBlobVersion);
  binary::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  binary::put_uint<std::uint32_t>(out, 0);
  for (std::size_t d : t.shape()) binary::put_uint<std::uint64_t>(out, d);
  for (double v : t.data()) binary::put_f32(out, v);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Tensor read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  binary::expect_magic(in, "LCFB", 4, path);
  if (binary::get_uint<std::uint32_t>(in) != kBlobVersion) throw std::runtime_error(path + ": unsupported blob version");
  const std::uint32_t rank = binary::get_uint<std::uint32_t>(in);
  binary::get_uint<std::uint32_t>(in);
  Shape shape(rank);
  for (std::size_t& d : shape) d = binary::get_uint<std::uint64_t>(in);
  Tensor t(shape);
  for (double& v : t.data()) v = binary::get_f32(in);
  return t;
}

void write_scene(const std::string& dir, const SceneSample& scene) {
  const fs::path root(dir);
  fs::create_directories(root);

  json views = json::array();
  for (const CameraView& v : scene.rig.views) {
    views.push_back({{"intrinsics", matrix_json(v.intrinsics)},
                     {"extrinsics", matrix_json(v.extrinsics.matrix())},
                     {"width", v.width},
                     {"height", v.height}});
  }
  json poses = json::array();
  for (const Rigid3& p : scene.rig.ego_poses) poses.push_back(matrix_json(p.matrix()));
  json boxes = json::array();
  for (const Box3D& b : scene.boxes) boxes.push_back(box_json(b));

  const CameraFeatureSet& cam = scene.camera;
  const LidarFeaturePyramid& lidar = scene.lidar;
  json sidecar = {
      {"scene_id", scene.scene_id},
      {"seed", scene.seed},
      {"frame_interval", scene.frame_interval},
      {"boxes", boxes},
      {"rig", {{"views", views}, {"ego_poses", poses}}},
      {"points", {{"frames", scene.points.size()}, {"fields", {"x", "y", "z", "intensity", "object"}}}},
      {"camera",
       {{"views", cam.num_views()},
        {"strides", cam.strides()},
        {"frames", cam.num_frames()},
        {"channels", cam.channels()},
        {"image_width", scene.rig.views.empty() ? 0 : scene.rig.views[0].width},
        {"image_height", scene.rig.views.empty() ? 0 : scene.rig.views[0].height}}},
      {"lidar",
       {{"range", range_json(lidar.range())},
        {"base_cells", lidar.num_scales() ? lidar.at(0).width : 0},
        {"scales", lidar.num_scales()},
        {"channels", lidar.channels()}}}};
  write_json_file(root / "scene.json", sidecar);

  for (std::size_t t = 0; t < scene.points.size(); ++t) {
    const PointCloud& cloud = scene.points[t];
    Tensor pts({cloud.size(), kPointFields});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const LidarPoint& p = cloud[i];
      double* row = pts.raw() + i * kPointFields;
      row[0] = p.x;
      row[1] = p.y;
      row[2] = p.z;
      row[3] = p.intensity;
      row[4] = p.object;
    }
    write_blob((root / ("points_t" + std::to_string(t) + ".bin")).string(), pts);
  }
  for (std::size_t v = 0; v < cam.num_views(); ++v) {
    for (std::size_t m = 0; m < cam.num_scales(); ++m) {
      for (std::size_t t = 0; t < cam.num_frames(); ++t) {
        write_blob((root / camera_blob(v, m, t)).string(), cam.at(v, m, t).data);
      }
    }
  }
  for (std::size_t r = 0; r < lidar.num_scales(); ++r) {
    write_blob((root / ("lidar_r" + std::to_string(r) + ".bin")).string(), lidar.at(r).data);
  }
}

SceneSample read_scene(const std::string& dir) {
  const fs::path root(dir);
  const json j = read_json_file(root / "scene.json");
  SceneSample s;
  try {
    s.scene_id = j.at("scene_id");
    s.seed = j.at("seed");
    s.frame_interval = j.at("frame_interval");
    for (const json& b : j.at("boxes")) s.boxes.push_back(box_from_json(b));

    s.rig.views.clear();
    for (const json& v : j.at("rig").at("views")) {
      CameraView view;
      read_matrix(v.at("intrinsics"), view.intrinsics);
      Eigen::Matrix4d e;
      read_matrix(v.at("extrinsics"), e);
      view.extrinsics.matrix() = e;
      view.width = v.at("width");
      view.height = v.at("height");
      s.rig.views.push_back(view);
    }
    s.rig.ego_poses.clear();
    for (const json& p : j.at("rig").at("ego_poses")) {
      Eigen::Matrix4d m;
      read_matrix(p, m);
      Rigid3 pose;
      pose.matrix() = m;
      s.rig.ego_poses.push_back(pose);
    }

    const std::size_t frames = j.at("points").at("frames");
    for (std::size_t t = 0; t < frames; ++t) {
      const Tensor pts = read_blob((root / ("points_t" + std::to_string(t) + ".bin")).string());
      if (pts.rank() != 2 || pts.dim(1) != kPointFields) throw std::runtime_error(dir + ": bad point blob");
      PointCloud cloud(pts.dim(0));
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double* row = pts.raw() + i * kPointFields;
        cloud[i] = LidarPoint{row[0], row[1], row[2], row[3], static_cast<int>(row[4])};
      }
      s.points.push_back(std::move(cloud));
    }

    const json& c = j.at("camera");
    s.camera = CameraFeatureSet(c.at("views"), c.at("strides").get<std::vector<std::size_t>>(), c.at("frames"),
                                c.at("image_width"), c.at("image_height"), c.at("channels"));
    for (std::size_t v = 0; v < s.camera.num_views(); ++v) {
      for (std::size_t m = 0; m < s.camera.num_scales(); ++m) {
        for (std::size_t t = 0; t < s.camera.num_frames(); ++t) {
          const std::string name = camera_blob(v, m, t);
          copy_into(s.camera.at(v, m, t), read_blob((root / name).string()), name);
        }
      }
    }

    const json& l = j.at("lidar");
    s.lidar = LidarFeaturePyramid(range_from_json(l.at("range")), l.at("base_cells"), l.at("scales"),
                                  l.at("channels"));
    for (std::size_t r = 0; r < s.lidar.num_scales(); ++r) {
      const std::string name = "lidar_r" + std::to_string(r) + ".bin";
      copy_into(s.lidar.at(r), read_blob((root / name).string()), name);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(dir + "/scene.json: " + e.what());
  }
  s.rig.validate();
  return s;
}

void write_dataset(const std::string& root, const SimConfig& cfg, std::uint64_t seed,
                   const std::vector<SceneSample>& scenes, bool force) {
  const fs::path dir(root);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error(root + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw std::runtime_error(root + " is not empty (use --force to replace it)");
      if (!fs::exists(dir / "manifest.json")) {
        throw std::runtime_error(root + " is not empty and does not hold a dataset; refusing to replace it");
      }
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);

  json entries = json::array();
  for (const SceneSample& s : scenes) {
    const std::string name = scene_dir_name(s.scene_id);
    write_scene((dir / name).string(), s);
    entries.push_back({{"id", s.scene_id}, {"seed", s.seed}, {"dir", name}});
  }
  json manifest = {{"format_version", kDatasetFormatVersion},
                   {"seed", seed},
                   {"config_hash", hex64(sim_config_hash(cfg))},
                   {"version", version_string()},
                   {"sim", to_json(cfg)},
                   {"scenes", entries}};
  write_json_file(dir / "manifest.json", manifest);
}

DatasetManifest read_manifest(const std::string& root) {
  const json j = read_json_file(fs::path(root) / "manifest.json");
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version");
    if (m.format_version != kDatasetFormatVersion) {
      throw std::runtime_error(root + ": unsupported dataset format " + std::to_string(m.format_version));
    }
    m.seed = j.at("seed");
    m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    m.version = j.at("version");
    m.sim = j.at("sim");
    for (const json& e : j.at("scenes")) m.scenes.push_back({e.at("id"), e.at("seed"), e.at("dir")});
  } catch (const json::exception& e) {
    throw std::runtime_error(root + "/manifest.json: " + e.what());
  }
  return m;
}

std::vector<SceneSample> read_dataset(const std::string& root, const DatasetManifest& manifest) {
  std::vector<SceneSample> scenes;
  scenes.reserve(manifest.scenes.size());
  for (const SceneEntry& e : manifest.scenes) scenes.push_back(read_scene((fs::path(root) / e.dir).string()));
  return scenes;
}

}  // namespace lcf
