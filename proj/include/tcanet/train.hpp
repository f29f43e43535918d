#pragma once

#include "tcanet/common.hpp"
#include "tcanet/model.hpp"
#include "tcanet/postproc.hpp"
#include "tcanet/seqio.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tcanet::train {

enum class SampleKind { positive, incomplete, negative };

const char* to_string(SampleKind kind);

struct LabeledProposal {
  Proposal proposal;
  std::optional<Interval> matched_gt;
  double g_iou = 0.0;
  SampleKind kind = SampleKind::negative;
};

/// Which interval the confidence target rates: the stage input or its refined output.
enum class IouTarget { input, refined };

struct TrainConfig {
  double i_p = 0.7;
  double i_n = 0.3;
  double lambda = 1.0;
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;

  int samples_per_kind = 8;
  int top_k_candidates = 100;
  double grad_clip = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  IouTarget iou_target = IouTarget::input;
  bool detach_stage_inputs = false;
  // Let the loss differentiate through g_iou and the regression targets as
  // functions of each stage's input. Off: targets are constants.
  bool target_gradients = true;
  postproc::SoftNmsConfig preselect_nms;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Best tIoU over `gts` (ties to the earliest ground-truth start) and the kind it implies.
std::vector<LabeledProposal> assign_labels(const std::vector<Proposal>& candidates,
                                           const std::vector<Interval>& gts, double i_p, double i_n);

struct SampleResult {
  std::vector<LabeledProposal> samples;  // positives, then incomplete, then negatives
  int empty_kinds = 0;
};

/// Up to `per_kind` of each kind without replacement; smaller non-empty kinds
/// are topped up with replacement to keep the 1:1:1 ratio.
SampleResult sample_balanced(const std::vector<LabeledProposal>& labeled, int per_kind, std::uint64_t seed);

struct RegressionTargets {
  double start = 0.0;
  double end = 0.0;
  double center = 0.0;
  double width = 0.0;
};

/// The offsets for which apply_offsets(p, ...) returns g exactly.
RegressionTargets regression_targets(const Interval& p, const Interval& g);

double smooth_l1(double x);

struct StagePrediction {
  double ds = 0.0, de = 0.0, dx = 0.0, dw = 0.0;
  double conf = 0.0;
};

struct LossBreakdown {
  double total = 0.0;
  double iou = 0.0;
  double reg = 0.0;
  std::size_t num_samples = 0;
  std::size_t num_positive = 0;
};

/// L_iou over every sample, L_reg over positives (0 when there are none), total = L_iou + lambda * L_reg.
LossBreakdown stage_loss(const std::vector<StagePrediction>& predictions,
                         const std::vector<LabeledProposal>& labels, double lambda);

/// One video ready for a training step.
struct TrainItem {
  const seqio::FeatureSequence* features = nullptr;
  std::vector<Interval> gts;
  std::vector<LabeledProposal> samples;
};

struct BatchLoss {
  double total = 0.0;
  double iou = 0.0;  // summed over stages
  double reg = 0.0;  // summed over stages, before lambda
  std::vector<LossBreakdown> per_stage;
  std::vector<Matrix> grads;  // model_tensors order; empty unless requested
};

/// Summed stage losses over a batch. Each stage is supervised against its own
/// input proposal: matching, g_iou, kind and targets are recomputed per stage.
BatchLoss batch_loss(const Model& model, const std::vector<TrainItem>& batch, const TrainConfig& cfg,
                     bool with_grads);

/// Candidates after Soft-NMS and top-k preselection, labeled against the ground truths.
std::vector<LabeledProposal> prepare_candidates(const seqio::VideoAnnotation& ann, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double mean_total = 0.0;
  double mean_iou = 0.0;
  double mean_reg = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  int empty_kind_events = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam on the summed stage losses with global-norm clipping. Deterministic for
/// a fixed seed.
TrainResult train_model(const std::vector<seqio::Video>& dataset, Model model, const TrainConfig& cfg);

std::string history_csv(const std::vector<EpochStats>& history);

class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double learning_rate);

 private:
  double beta1_, beta2_, eps_;
  std::vector<Matrix> m_, v_;
  int t_ = 0;
};

/// Returns the loss at `params`; fills `grads` (same shapes) when non-null.
using LossWithGradient = std::function<double(const std::vector<Matrix>& params, std::vector<Matrix>* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_tensor;
  Eigen::Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences against the implemented gradient; relative error is
/// |a - n| / max(|a|, |n|, 1e-8). `max_per_tensor == 0` checks every entry.
GradCheckResult grad_check(const LossWithGradient& fn, const std::vector<Matrix>& params, double epsilon,
                           const std::vector<std::string>& names = {}, std::size_t max_per_tensor = 0);

/// Loss-with-gradient of the full encoder + refiner on a fixed batch; the
/// parameter vector follows model_tensors order.
LossWithGradient pipeline_objective(const Model& model, std::vector<TrainItem> batch, const TrainConfig& cfg);

}  // namespace tcanet::train
