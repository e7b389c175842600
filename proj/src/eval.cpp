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

#include "lcf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lcf/scene.hpp"

namespace lcf {

namespace {

constexpr double kMinRecall = 0.1;
constexpr double kMinPrecision = 0.1;
constexpr std::size_t kRecallPoints = 101;

double bev_distance(const Box3D& a, const Box3D& b) { return (a.center.head<2>() - b.center.head<2>()).norm(); }

double ego_distance(const Box3D& b) { return b.center.head<2>().norm(); }

std::vector<std::size_t> score_order(std::span<const Detection> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].box.score > preds[b].box.score; });
  return order;
}

std::vector<Detection> of_class(std::span<const Detection> dets, int class_id) {
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    if (d.box.class_id == class_id) out.push_back(d);
  }
  return out;
}

// Linear interpolation with numpy.interp semantics: left value below the
// first sample, 0 beyond the last.
double interp(double x, const std::vector<double>& xs, const std::vector<double>& ys) {
  if (x < xs.front()) return ys.front();
  if (x > xs.back()) return 0.0;
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs.begin()) - 1;
  if (j + 1 == xs.size()) return ys.back();
  const double t = (x - xs[j]) / (xs[j + 1] - xs[j]);
  return ys[j] + t * (ys[j + 1] - ys[j]);
}

std::size_t bin_of(double distance, std::span<const double> edges) {
  std::size_t b = 0;
  while (b + 1 < edges.size() && distance >= edges[b + 1]) ++b;
  return b;
}

}  // namespace

std::vector<int> match_for_ap(std::span<const Detection> preds, std::span<const Detection> gts, double threshold) {
  std::vector<int> match(preds.size(), -1);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : score_order(preds)) {
    const Detection& p = preds[i];
    double best = std::numeric_limits<double>::infinity();
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].scene != p.scene || gts[g].box.class_id != p.box.class_id) continue;
      const double d = bev_distance(p.box, gts[g].box);
      if (d < best) {
        best = d;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best <= threshold) {
      match[i] = best_gt;
      taken[static_cast<std::size_t>(best_gt)] = true;
    }
  }
  return match;
}

double average_precision_from_flags(std::span<const std::uint8_t> tp_sorted, std::size_t num_gt) {
  if (num_gt == 0 || tp_sorted.empty()) return 0.0;
  std::vector<double> recall, precision;
  double tp = 0.0, fp = 0.0;
  for (std::uint8_t t : tp_sorted) {
    (t ? tp : fp) += 1.0;
    recall.push_back(tp / static_cast<double>(num_gt));
    precision.push_back(tp / (tp + fp));
  }
  const std::size_t first = static_cast<std::size_t>(std::lround(100.0 * kMinRecall)) + 1;
  double sum = 0.0;
  for (std::size_t k = first; k < kRecallPoints; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(kRecallPoints - 1);
    sum += std::max(0.0, interp(r, recall, precision) - kMinPrecision);
  }
  return sum / static_cast<double>(kRecallPoints - first) / (1.0 - kMinPrecision);
}

double average_precision(std::span<const Detection> preds, std::span<const Detection> gts, double threshold) {
  const std::vector<int> match = match_for_ap(preds, gts, threshold);
  std::vector<std::uint8_t> flags;
  for (std::size_t i : score_order(preds)) flags.push_back(match[i] >= 0);
  return average_precision_from_flags(flags, gts.size());
}

double aligned_scale_error(const Vec3& a, const Vec3& b) {
  const double inter = a.cwiseMin(b).prod();
  return 1.0 - inter / (a.prod() + b.prod() - inter);
}

TpErrors tp_errors(std::span<const std::pair<Box3D, Box3D>> pairs) {
  TpErrors e;
  e.matches = pairs.size();
  if (pairs.empty()) return e;
  e.translation = e.scale = e.orientation = e.velocity = 0.0;
  for (const auto& [p, g] : pairs) {
    e.translation += bev_distance(p, g);
    e.scale += aligned_scale_error(p.size, g.size);
    e.orientation += std::fabs(normalize_yaw(p.yaw - g.yaw));
    e.velocity += (p.velocity - g.velocity).norm();
  }
  const double n = static_cast<double>(pairs.size());
  e.translation /= n;
  e.scale /= n;
  e.orientation /= n;
  e.velocity /= n;
  return e;
}

double nds(double mean_ap, std::span<const double> mean_tp_errors) {
  double sum = 5.0 * mean_ap;
  for (double x : mean_tp_errors) {
    if (!(x >= 0.0)) throw std::invalid_argument("nds: error terms must be non-negative");
    sum += 1.0 - std::min(1.0, x);
  }
  return sum / (5.0 + static_cast<double>(mean_tp_errors.size()));
}

std::vector<DistanceBin> distance_binned_ap(std::span<const Detection> preds, std::span<const Detection> gts,
                                            std::span<const double> edges, std::span<const double> thresholds,
                                            std::size_t num_classes) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end())) {
    throw std::invalid_argument("distance_binned_ap: bin edges must be non-empty and ascending");
  }
  const std::size_t nb = edges.size();
  std::vector<DistanceBin> bins(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    bins[b].min = edges[b];
    bins[b].max = b + 1 < nb ? edges[b + 1] : std::numeric_limits<double>::infinity();
  }
  for (const Detection& g : gts) ++bins[bin_of(ego_distance(g.box), edges)].num_gt;

  std::vector<double> sum(nb, 0.0);
  std::vector<std::size_t> count(nb, 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto cp = of_class(preds, static_cast<int>(c));
    const auto cg = of_class(gts, static_cast<int>(c));
    std::vector<std::size_t> gt_bin, gt_per_bin(nb, 0);
    for (const Detection& g : cg) {
      gt_bin.push_back(bin_of(ego_distance(g.box), edges));
      ++gt_per_bin[gt_bin.back()];
    }
    for (double th : thresholds) {
      const std::vector<int> match = match_for_ap(cp, cg, th);
      std::vector<std::vector<std::uint8_t>> flags(nb);
      for (std::size_t i : score_order(cp)) {
        const std::size_t b = match[i] >= 0 ? gt_bin[static_cast<std::size_t>(match[i])]
                                            : bin_of(ego_distance(cp[i].box), edges);
        flags[b].push_back(match[i] >= 0);
      }
      for (std::size_t b = 0; b < nb; ++b) {
        if (gt_per_bin[b] == 0) continue;
        sum[b] += average_precision_from_flags(flags[b], gt_per_bin[b]);
        ++count[b];
      }
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (count[b] > 0) bins[b].ap = sum[b] / static_cast<double>(count[b]);
  }
  return bins;
}

void EvalConfig::validate() const {
  if (thresholds.empty()) throw std::invalid_argument("eval.thresholds must not be empty");
  for (double t : thresholds) {
    if (!(t > 0.0)) throw std::invalid_argument("eval.thresholds must be positive");
  }
  if (!(tp_threshold > 0.0)) throw std::invalid_argument("eval.tp_threshold must be positive");
  if (bin_edges.empty() || !std::is_sorted(bin_edges.begin(), bin_edges.end())) {
    throw std::invalid_argument("eval.bin_edges must be non-empty and ascending");
  }
  if (num_classes == 0) throw std::invalid_argument("eval.num_classes must be positive");
}

MetricsReport evaluate(std::span<const Detection> preds, std::span<const Detection> gts, std::size_t num_scenes,
                       const EvalConfig& cfg) {
  cfg.validate();
  MetricsReport r;
  r.thresholds = cfg.thresholds;
  r.num_scenes = num_scenes;
  r.classes.resize(cfg.num_classes);
  std::size_t present = 0;
  double ap_sum = 0.0;
  TpErrors err_sum;
  err_sum.translation = err_sum.scale = err_sum.orientation = err_sum.velocity = 0.0;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    const auto cp = of_class(preds, static_cast<int>(c));
    const auto cg = of_class(gts, static_cast<int>(c));
    ClassMetrics& m = r.classes[c];
    m.num_gt = cg.size();
    m.num_pred = cp.size();
    for (double th : cfg.thresholds) m.ap.push_back(average_precision(cp, cg, th));
    const std::vector<int> match = match_for_ap(cp, cg, cfg.tp_threshold);
    std::vector<std::pair<Box3D, Box3D>> pairs;
    for (std::size_t i = 0; i < cp.size(); ++i) {
      if (match[i] >= 0) pairs.emplace_back(cp[i].box, cg[static_cast<std::size_t>(match[i])].box);
    }
    m.errors = tp_errors(pairs);
    if (m.num_gt == 0) continue;
    ++present;
    ap_sum += std::accumulate(m.ap.begin(), m.ap.end(), 0.0) / static_cast<double>(m.ap.size());
    err_sum.translation += m.errors.translation;
    err_sum.scale += m.errors.scale;
    err_sum.orientation += m.errors.orientation;
    err_sum.velocity += m.errors.velocity;
    err_sum.matches += m.errors.matches;
  }
  if (present > 0) {
    const double n = static_cast<double>(present);
    r.mean_ap = ap_sum / n;
    r.mean_errors = err_sum;
    r.mean_errors.translation /= n;
    r.mean_errors.scale /= n;
    r.mean_errors.orientation /= n;
    r.mean_errors.velocity /= n;
  }
  const double errs[] = {r.mean_errors.translation, r.mean_errors.scale, r.mean_errors.orientation,
                         r.mean_errors.velocity};
  r.nds = nds(r.mean_ap, errs);
  r.bins = distance_binned_ap(preds, gts, cfg.bin_edges, cfg.thresholds, cfg.num_classes);
  return r;
}

double mean_ap_at(const MetricsReport& report, double threshold) {
  const auto it = std::find(report.thresholds.begin(), report.thresholds.end(), threshold);
  if (it == report.thresholds.end()) throw std::out_of_range("mean_ap_at: threshold not evaluated");
  const std::size_t k = static_cast<std::size_t>(it - report.thresholds.begin());
  double sum = 0.0;
  std::size_t n = 0;
  for (const ClassMetrics& c : report.classes) {
    if (c.num_gt == 0) continue;
    sum += c.ap[k];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

nlohmann::json errors_json(const TpErrors& e) {
  return {{"ate", e.translation}, {"ase", e.scale}, {"aoe", e.orientation}, {"ave", e.velocity}, {"matches", e.matches}};
}

std::string threshold_key(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["num_scenes"] = r.num_scenes;
  j["thresholds"] = r.thresholds;
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const ClassMetrics& m = r.classes[c];
    nlohmann::json ap = nlohmann::json::object();
    for (std::size_t k = 0; k < r.thresholds.size(); ++k) ap[threshold_key(r.thresholds[k])] = m.ap[k];
    classes[class_name(static_cast<int>(c))] = {
        {"ap", ap}, {"num_gt", m.num_gt}, {"num_pred", m.num_pred}, {"errors", errors_json(m.errors)}};
  }
  j["classes"] = classes;
  j["map"] = r.mean_ap;
  j["errors"] = errors_json(r.mean_errors);
  j["nds"] = r.nds;
  nlohmann::json bins = nlohmann::json::array();
  for (const DistanceBin& b : r.bins) {
    bins.push_back({{"min", b.min},
                    {"max", std::isinf(b.max) ? nlohmann::json(nullptr) : nlohmann::json(b.max)},
                    {"num_gt", b.num_gt},
                    {"ap", b.ap ? nlohmann::json(*b.ap) : nlohmann::json(nullptr)}});
  }
  j["distance_bins"] = bins;
  return j;
}

std::string bins_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "min,max,num_gt,ap\n";
  for (const DistanceBin& b : r.bins) {
    os << b.min << ',';
    if (!std::isinf(b.max)) os << b.max;
    os << ',' << b.num_gt << ',';
    if (b.ap) os << *b.ap;
    os << '\n';
  }
  return os.str();
}

}  // namespace lcf
