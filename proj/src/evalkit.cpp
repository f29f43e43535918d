#include "tcanet/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

namespace tcanet::evalkit {

double tiou(const Interval& a, const Interval& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<double> threshold_range(double lo, double step, double hi) {
  if (!(step > 0.0) || hi < lo) throw ArgumentError("threshold_range: invalid bounds");
  std::vector<double> out;
  const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) {
    out.push_back(std::round((lo + i * step) * 1e9) / 1e9);
  }
  return out;
}

namespace {

std::vector<Proposal> ranked(std::vector<Proposal> proposals) {
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  return proposals;
}

// Greedy one-to-one matching of ranked proposals; returns the matched count.
std::size_t greedy_matches(const std::vector<Proposal>& ranked_props, std::size_t keep,
                           const std::vector<Interval>& gts, double threshold) {
  std::vector<bool> used(gts.size(), false);
  std::size_t matched = 0;
  for (std::size_t p = 0; p < keep; ++p) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double overlap = tiou(ranked_props[p].interval(), gts[g]);
      if (overlap >= threshold && overlap > best) {
        best = overlap;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      used[best_gt] = true;
      ++matched;
    }
  }
  return matched;
}

}  // namespace

double average_recall_at_an(const std::vector<VideoProposals>& videos, int an,
                            const std::vector<double>& thresholds) {
  if (an < 1) throw ArgumentError("average_recall_at_an: AN must be >= 1");
  if (thresholds.empty()) throw ArgumentError("average_recall_at_an: no thresholds");
  std::vector<double> matched(thresholds.size(), 0.0);
  double total_gt = 0.0;
  for (const auto& video : videos) {
    if (video.ground_truths.empty()) continue;
    const auto props = ranked(video.proposals);
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(an), props.size());
    total_gt += static_cast<double>(video.ground_truths.size());
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      matched[t] += static_cast<double>(greedy_matches(props, keep, video.ground_truths, thresholds[t]));
    }
  }
  if (total_gt == 0.0) return 0.0;
  double sum = 0.0;
  for (double m : matched) sum += m / total_gt;
  return sum / static_cast<double>(thresholds.size());
}

double auc(const std::vector<VideoProposals>& videos, const std::vector<double>& thresholds,
           int max_an) {
  if (max_an < 1) throw ArgumentError("auc: max AN must be >= 1");
  double sum = 0.0;
  for (int an = 1; an <= max_an; ++an) sum += average_recall_at_an(videos, an, thresholds);
  return 100.0 * sum / static_cast<double>(max_an);
}

double average_precision(const std::vector<bool>& is_true_positive, std::size_t num_gt) {
  if (num_gt == 0 || is_true_positive.empty()) return 0.0;
  const std::size_t n = is_true_positive.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_true_positive[i]) tp += 1.0;
    precision[i] = tp / static_cast<double>(i + 1);
    recall[i] = tp / static_cast<double>(num_gt);
  }
  // Precision envelope: running maximum from the tail.
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

MapResult detection_map(const std::vector<VideoDetections>& videos,
                        const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ArgumentError("detection_map: no thresholds");

  struct Pooled {
    std::size_t video;
    Detection det;
  };
  std::map<int, std::vector<Pooled>> dets_by_class;
  std::map<int, std::size_t> gt_count;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    for (const auto& d : videos[v].detections) dets_by_class[d.class_id].push_back({v, d});
    for (const auto& g : videos[v].ground_truths) ++gt_count[g.class_id];
  }
  for (auto& [cls, dets] : dets_by_class) {
    std::stable_sort(dets.begin(), dets.end(), [&](const Pooled& a, const Pooled& b) {
      if (a.det.score != b.det.score) return a.det.score > b.det.score;
      const auto& va = videos[a.video].video_id;
      const auto& vb = videos[b.video].video_id;
      return std::tie(va, a.det.start) < std::tie(vb, b.det.start);
    });
  }

  MapResult result;
  for (double theta : thresholds) {
    double ap_sum = 0.0;
    std::size_t classes = 0;
    for (const auto& [cls, n_gt] : gt_count) {
      if (n_gt == 0) continue;
      ++classes;
      const auto it = dets_by_class.find(cls);
      if (it == dets_by_class.end()) continue;
      std::vector<std::vector<bool>> used(videos.size());
      for (std::size_t v = 0; v < videos.size(); ++v) used[v].assign(videos[v].ground_truths.size(), false);
      std::vector<bool> tp;
      tp.reserve(it->second.size());
      for (const auto& pooled : it->second) {
        const auto& gts = videos[pooled.video].ground_truths;
        double best = -1.0;
        std::size_t best_gt = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (gts[g].class_id != cls || used[pooled.video][g]) continue;
          const double overlap =
              tiou({pooled.det.start, pooled.det.end}, {gts[g].start, gts[g].end});
          if (overlap >= theta && overlap > best) {
            best = overlap;
            best_gt = g;
          }
        }
        if (best_gt < gts.size()) used[pooled.video][best_gt] = true;
        tp.push_back(best_gt < gts.size());
      }
      ap_sum += average_precision(tp, n_gt);
    }
    result.map_at[theta] = classes > 0 ? ap_sum / static_cast<double>(classes) : 0.0;
  }
  double total = 0.0;
  for (const auto& [theta, value] : result.map_at) total += value;
  result.average_map = total / static_cast<double>(result.map_at.size());
  return result;
}

EvalReport evaluate(const std::vector<VideoDetections>& videos, const EvalOptions& opts) {
  std::vector<VideoProposals> proposal_sets;
  proposal_sets.reserve(videos.size());
  for (const auto& v : videos) {
    VideoProposals vp;
    for (const auto& d : v.detections) vp.proposals.push_back({d.start, d.end, d.score});
    for (const auto& g : v.ground_truths) vp.ground_truths.push_back({g.start, g.end});
    proposal_sets.push_back(std::move(vp));
  }
  EvalReport report;
  double sum = 0.0;
  for (int an = 1; an <= opts.max_an; ++an) {
    const double ar = average_recall_at_an(proposal_sets, an, opts.ar_thresholds);
    report.ar_at_an[an] = ar;
    sum += ar;
  }
  report.auc = 100.0 * sum / static_cast<double>(opts.max_an);
  const auto map = detection_map(videos, opts.map_thresholds);
  report.map_at = map.map_at;
  report.average_map = map.average_map;
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  auto ar = nlohmann::json::array();
  for (const auto& [an, value] : report.ar_at_an) ar.push_back({{"an", an}, {"ar", value}});
  auto map = nlohmann::json::array();
  for (const auto& [theta, value] : report.map_at) map.push_back({{"tiou", theta}, {"map", value}});
  return {{"ar_at_an", std::move(ar)},
          {"auc", report.auc},
          {"map_at", std::move(map)},
          {"average_map", report.average_map}};
}

std::string ar_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "an,ar\n";
  for (const auto& [an, value] : report.ar_at_an) out << an << ',' << value << '\n';
  return out.str();
}

std::string map_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "tiou,map\n";
  for (const auto& [theta, value] : report.map_at) out << theta << ',' << value << '\n';
  return out.str();
}

}  // namespace tcanet::evalkit
