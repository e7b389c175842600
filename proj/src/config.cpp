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

#include "lcf/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#ifndef LCF_VERSION
#define LCF_VERSION "0.1.0"
#endif

namespace lcf {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, unsigned long> == std::is_same_v<std::size_t, unsigned long>,
              "seeds are read through the size_t overload");

namespace {

// The field lists below are shared by the writer and the strict reader so
// the two directions cannot drift apart.

const char* fusion_name(FusionMode m) { return m == FusionMode::kEqual ? "equal" : "uaf"; }

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

const char* kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kNone: return "none";
    case ScenarioKind::kFovLimited: return "fov_limited";
    case ScenarioKind::kObjectFailure: return "object_failure";
    case ScenarioKind::kFrontOcclusion: return "front_occlusion";
    case ScenarioKind::kStuck: return "stuck";
  }
  return "none";
}

const char* stale_name(StaleSensor s) {
  switch (s) {
    case StaleSensor::kCamera: return "camera";
    case StaleSensor::kLidar: return "lidar";
    case StaleSensor::kBoth: return "both";
  }
  return "camera";
}

class Writer {
 public:
  explicit Writer(json& out) : out_(out) { out_ = json::object(); }

  template <class T>
  void operator()(const char* key, const T& value) { out_[key] = value; }
  void operator()(const char* key, const FusionMode& m) { out_[key] = fusion_name(m); }
  void operator()(const char* key, const OptimizerKind& k) { out_[key] = optimizer_name(k); }
  void operator()(const char* key, const ScenarioKind& k) { out_[key] = kind_name(k); }
  void operator()(const char* key, const StaleSensor& s) { out_[key] = stale_name(s); }

  template <class F>
  void section(const char* key, F&& fields) {
    Writer child(out_[key]);
    fields(child);
  }

 private:
  json& out_;
};

class Reader {
 public:
  Reader(const json& in, std::string path) : in_(in), path_(std::move(path)) {
    if (!in_.is_object()) throw ConfigError(where("") + ": expected an object");
    for (auto it = in_.begin(); it != in_.end(); ++it) unused_.insert(it.key());
  }

  void operator()(const char* key, std::size_t& v) {
    if (const json* j = take(key)) {
      if (!j->is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
      v = j->get<std::size_t>();
    }
  }
  void operator()(const char* key, int& v) {
    if (const json* j = take(key)) {
      if (!j->is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      v = j->get<int>();
    }
  }
  void operator()(const char* key, double& v) {
    if (const json* j = take(key)) {
      if (!j->is_number()) throw ConfigError(where(key) + ": expected a number");
      v = j->get<double>();
    }
  }
  void operator()(const char* key, bool& v) {
    if (const json* j = take(key)) {
      if (!j->is_boolean()) throw ConfigError(where(key) + ": expected true or false");
      v = j->get<bool>();
    }
  }
  void operator()(const char* key, std::string& v) {
    if (const json* j = take(key)) {
      if (!j->is_string()) throw ConfigError(where(key) + ": expected a string");
      v = j->get<std::string>();
    }
  }
  template <class T>
  void operator()(const char* key, std::vector<T>& v) {
    if (const json* j = take(key)) {
      if (!j->is_array()) throw ConfigError(where(key) + ": expected an array");
      v = read_array<T>(*j, key);
    }
  }
  template <class T, std::size_t N>
  void operator()(const char* key, std::array<T, N>& v) {
    if (const json* j = take(key)) {
      if (!j->is_array() || j->size() != N) {
        throw ConfigError(where(key) + ": expected an array of " + std::to_string(N));
      }
      std::vector<T> items = read_array<T>(*j, key);
      std::copy(items.begin(), items.end(), v.begin());
    }
  }
  void operator()(const char* key, FusionMode& m) {
    m = pick<FusionMode>(key, m, {{"uaf", FusionMode::kUncertainty}, {"equal", FusionMode::kEqual}});
  }
  void operator()(const char* key, OptimizerKind& k) {
    k = pick<OptimizerKind>(key, k, {{"adam", OptimizerKind::kAdam}, {"sgd", OptimizerKind::kSgd}});
  }
  void operator()(const char* key, ScenarioKind& k) {
    k = pick<ScenarioKind>(key, k,
                           {{"none", ScenarioKind::kNone},
                            {"fov_limited", ScenarioKind::kFovLimited},
                            {"object_failure", ScenarioKind::kObjectFailure},
                            {"front_occlusion", ScenarioKind::kFrontOcclusion},
                            {"stuck", ScenarioKind::kStuck}});
  }
  void operator()(const char* key, StaleSensor& s) {
    s = pick<StaleSensor>(key, s,
                          {{"camera", StaleSensor::kCamera},
                           {"lidar", StaleSensor::kLidar},
                           {"both", StaleSensor::kBoth}});
  }

  template <class F>
  void section(const char* key, F&& fields) {
    if (const json* j = take(key)) {
      Reader child(*j, where(key));
      fields(child);
      child.finish();
    }
  }

  void finish() const {
    if (!unused_.empty()) throw ConfigError("unknown config key '" + where(*unused_.begin()) + "'");
  }

 private:
  const json* take(const std::string& key) {
    auto it = in_.find(key);
    if (it == in_.end()) return nullptr;
    unused_.erase(key);
    return &*it;
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  template <class T>
  std::vector<T> read_array(const json& arr, const char* key) {
    std::vector<T> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      json wrapper = json::object();
      wrapper["item"] = arr[i];
      Reader item(wrapper, where(key) + "[" + std::to_string(i) + "]");
      T value{};
      item("item", value);
      out.push_back(value);
    }
    return out;
  }

  template <class E>
  E pick(const char* key, E current, std::initializer_list<std::pair<const char*, E>> names) {
    const json* j = take(key);
    if (!j) return current;
    if (j->is_string()) {
      for (const auto& [name, value] : names) {
        if (j->get<std::string>() == name) return value;
      }
    }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    throw ConfigError(where(key) + ": expected one of " + allowed);
  }

  const json& in_;
  std::string path_;
  std::set<std::string> unused_;
};

template <class V, class Range>
void visit_range(V& v, Range& r) {
  v("x_min", r.x_min);
  v("x_max", r.x_max);
  v("y_min", r.y_min);
  v("y_max", r.y_max);
  v("z_min", r.z_min);
  v("z_max", r.z_max);
}

template <class V, class Sim>
void visit_sim(V& v, Sim& s) {
  v("num_views", s.num_views);
  v("image_width", s.image_width);
  v("image_height", s.image_height);
  v("horizontal_fov_deg", s.horizontal_fov_deg);
  v("camera_height", s.camera_height);
  v("camera_strides", s.camera_strides);
  v("num_frames", s.num_frames);
  v("frame_interval", s.frame_interval);
  v("ego_speed", s.ego_speed);
  v("lidar_height", s.lidar_height);
  v("channels", s.channels);
  v.section("range", [&](V& c) { visit_range(c, s.range); });
  v("bev_cells", s.bev_cells);
  v("bev_scales", s.bev_scales);
  v("min_objects", s.min_objects);
  v("max_objects", s.max_objects);
  v("class_mix", s.class_mix);
  v("min_distance", s.min_distance);
  v("max_distance", s.max_distance);
  v("lidar_density", s.lidar_density);
  v("clutter_points", s.clutter_points);
  v("camera_noise", s.camera_noise);
  v("max_placement_retries", s.max_placement_retries);
}

template <class V, class Spec>
void visit_scenario(V& v, Spec& s) {
  v("kind", s.kind);
  v("fov_deg", s.fov_deg);
  v("frame_rate", s.frame_rate);
  v("object_rate", s.object_rate);
  v("stale", s.stale);
  v("seed", s.seed);
}

template <class V, class Cfg>
void visit_run(V& v, Cfg& c) {
  v("seed", c.seed);
  v.section("model", [&](V& m) {
    m("layers", c.model.layers);
    m("num_classes", c.model.num_classes);
    m("channels", c.model.sampling.channels);
    m("points", c.model.sampling.points);
    m("lidar_scales", c.model.sampling.lidar_scales);
    m("camera_scales", c.model.sampling.camera_scales);
    m("frames", c.model.sampling.frames);
    m("offset_limit", c.model.sampling.offset_limit);
    m("ring_radius", c.model.sampling.ring_radius);
    m.section("range", [&](V& r) { visit_range(r, c.model.range); });
  });
  v.section("queries", [&](V& q) {
    q("num_queries", c.queries.num_queries);
    q("num_proposals", c.queries.num_proposals);
    q("nms_iou", c.queries.nms_iou);
    q("pixel_sigma", c.queries.pixel_sigma);
    q("depth_log_sigma", c.queries.depth_log_sigma);
    q("size_log_sigma", c.queries.size_log_sigma);
    q("yaw_sigma", c.queries.yaw_sigma);
    q("velocity_sigma", c.queries.velocity_sigma);
    q("miss_rate", c.queries.miss_rate);
    q("false_positives_per_view", c.queries.false_positives_per_view);
    q("score_slope", c.queries.score_slope);
    q("noise_cap", c.queries.noise_cap);
  });
  v.section("data", [&](V& d) {
    d("num_scenes", c.data.num_scenes);
    d.section("sim", [&](V& s) { visit_sim(s, c.data.sim); });
  });
  v.section("train", [&](V& t) {
    t("steps", c.train.steps);
    t("batch_size", c.train.batch_size);
    t("optimizer", c.train.optimizer);
    t("learning_rate", c.train.learning_rate);
    t("momentum", c.train.momentum);
    t("clip_norm", c.train.clip_norm);
    t.section("loss", [&](V& l) {
      l("classification", c.train.loss.classification);
      l("box", c.train.loss.box);
      l("uncertainty", c.train.loss.uncertainty);
      l("regression", c.train.loss.regression);
      l("focal_alpha", c.train.loss.focal_alpha);
      l("code", c.train.loss.code);
      l("match_classification", c.train.loss.match.classification);
      l("match_box", c.train.loss.match.box);
    });
  });
  v.section("eval", [&](V& e) {
    e("thresholds", c.eval.metrics.thresholds);
    e("tp_threshold", c.eval.metrics.tp_threshold);
    e("bin_edges", c.eval.metrics.bin_edges);
    e("fusion", c.eval.fusion);
    e("oracle_uncertainty", c.eval.oracle_uncertainty);
    e("min_score", c.eval.min_score);
    e("scenarios", c.eval.scenarios);
  });
  v.section("scenario", [&](V& s) { visit_scenario(s, c.scenario); });
  v.section("io", [&](V& io) {
    io("dataset", c.io.dataset);
    io("checkpoint", c.io.checkpoint);
    io("train_log", c.io.train_log);
    io("output", c.io.output);
  });
}

json parse_value(std::string_view text) {
  json value = json::parse(text.begin(), text.end(), nullptr, false);
  if (value.is_discarded()) return json(std::string(text));
  return value;
}

}  // namespace

RunConfig::RunConfig() {
  queries.num_queries = 60;
  queries.num_proposals = 20;
  queries.pixel_sigma = 2.0;
  queries.depth_log_sigma = 0.05;
}

void RunConfig::validate() const {
  auto check = [](auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  check([&] { model.validate(); });
  check([&] { queries.validate(); });
  check([&] { data.sim.validate(); });
  check([&] { train_config().validate(); });
  check([&] {
    EvalConfig m = eval.metrics;
    m.num_classes = model.num_classes;
    m.validate();
  });
  check([&] { scenario.validate(); });
  for (const std::string& name : eval.scenarios) {
    check([&] { parse_scenario(name, seed); });
  }
  const SimConfig& s = data.sim;
  const RoiSamplingConfig& m = model.sampling;
  if (m.channels != s.channels) throw ConfigError("model.channels must equal data.sim.channels");
  if (m.camera_scales != s.camera_strides.size()) {
    throw ConfigError("model.camera_scales must equal the number of data.sim.camera_strides");
  }
  if (m.lidar_scales != s.bev_scales) throw ConfigError("model.lidar_scales must equal data.sim.bev_scales");
  if (m.frames != s.num_frames) throw ConfigError("model.frames must equal data.sim.num_frames");
  if (model.num_classes != static_cast<std::size_t>(kNumClasses)) {
    throw ConfigError("model.num_classes must be " + std::to_string(kNumClasses));
  }
  const DetectionRange& a = model.range;
  const DetectionRange& b = s.range;
  if (a.x_min != b.x_min || a.x_max != b.x_max || a.y_min != b.y_min || a.y_max != b.y_max ||
      a.z_min != b.z_min || a.z_max != b.z_max) {
    throw ConfigError("model.range must equal data.sim.range");
  }
  if (data.num_scenes == 0) throw ConfigError("data.num_scenes must be positive");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.queries = queries;
  return t;
}

InferConfig RunConfig::infer_config() const {
  InferConfig c;
  c.queries = queries;
  c.decode.fusion = eval.fusion;
  c.decode.oracle_uncertainty = eval.oracle_uncertainty;
  c.seed = seed;
  c.min_score = eval.min_score;
  return c;
}

json to_json(const RunConfig& cfg) {
  json out;
  Writer w(out);
  visit_run(w, cfg);
  return out;
}

json to_json(const SimConfig& cfg) {
  json out;
  Writer w(out);
  visit_sim(w, cfg);
  return out;
}

json to_json(const ScenarioSpec& spec) {
  json out;
  Writer w(out);
  visit_scenario(w, spec);
  return out;
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig cfg;
  Reader r(doc, "");
  visit_run(r, cfg);
  r.finish();
  return cfg;
}

void apply_override(json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key.path=value");
  }
  const std::string path(assignment.substr(0, eq));
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + path + "' is a section, not a value");
  *node = parse_value(assignment.substr(eq + 1));
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    cfg = run_config_from_json(doc);
  }
  if (!overrides.empty()) {
    json doc = to_json(cfg);
    for (const std::string& o : overrides) apply_override(doc, o);
    cfg = run_config_from_json(doc);
  }
  cfg.validate();
  return cfg;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t json_hash(const json& doc) { return fnv1a64(doc.dump()); }

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

const char* version_string() { return LCF_VERSION; }

}  // namespace lcf
