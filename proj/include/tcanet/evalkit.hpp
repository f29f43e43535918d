#pragma once

#include "tcanet/common.hpp"

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace tcanet::evalkit {

/// Temporal intersection over union; 0 for disjoint or empty unions.
double tiou(const Interval& a, const Interval& b);

/// [lo:step:hi] inclusive, rounded to avoid accumulated drift.
std::vector<double> threshold_range(double lo, double step, double hi);

/// Proposals and ground truths of one video.
struct VideoProposals {
  std::vector<Proposal> proposals;
  std::vector<Interval> ground_truths;
};

/// Recall averaged over thresholds, pooled over all ground truths of all videos.
/// Each video keeps its top `an` proposals by score; matching is greedy one-to-one
/// in descending score order, each proposal taking its best unmatched ground truth.
double average_recall_at_an(const std::vector<VideoProposals>& videos, int an,
                            const std::vector<double>& thresholds);

/// Mean AR over AN = 1..max_an, in percent.
double auc(const std::vector<VideoProposals>& videos, const std::vector<double>& thresholds,
           int max_an = 100);

struct Detection {
  double start = 0.0;
  double end = 0.0;
  int class_id = 0;
  double score = 0.0;
};

struct ClassedGroundTruth {
  double start = 0.0;
  double end = 0.0;
  int class_id = 0;
};

struct VideoDetections {
  std::string video_id;
  std::vector<Detection> detections;
  std::vector<ClassedGroundTruth> ground_truths;
};

struct MapResult {
  std::map<double, double> map_at;
  double average_map = 0.0;
};

/// Mean average precision per threshold with all-points interpolation.
MapResult detection_map(const std::vector<VideoDetections>& videos,
                        const std::vector<double>& thresholds);

/// Average precision of a ranked TP/FP sequence against `num_gt` ground truths.
double average_precision(const std::vector<bool>& is_true_positive, std::size_t num_gt);

struct EvalReport {
  std::map<int, double> ar_at_an;
  double auc = 0.0;
  std::map<double, double> map_at;
  double average_map = 0.0;
};

struct EvalOptions {
  std::vector<double> ar_thresholds = threshold_range(0.5, 0.05, 0.95);
  std::vector<double> map_thresholds = threshold_range(0.5, 0.05, 0.95);
  int max_an = 100;
};

EvalReport evaluate(const std::vector<VideoDetections>& videos, const EvalOptions& opts = {});

nlohmann::json report_to_json(const EvalReport& report);
std::string ar_csv(const EvalReport& report);
std::string map_csv(const EvalReport& report);

}  // namespace tcanet::evalkit
