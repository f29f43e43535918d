#pragma once

#include "tcanet/autodiff.hpp"
#include "tcanet/common.hpp"

#include <random>
#include <vector>

namespace tcanet::tbr {

/// Conv weights are stored (kernel * in) x out so that a "same" 1-D convolution
/// is one product with the im2col matrix; biases are 1 x out. The frame_end
/// tensors are empty when the frame head is shared between both boundaries.
template <class T>
struct TbrTensors {
  T frame_conv1_w, frame_conv1_b, frame_conv2_w, frame_conv2_b;
  T frame_end_conv1_w, frame_end_conv1_b, frame_end_conv2_w, frame_end_conv2_b;
  T segment_conv1_w, segment_conv1_b, segment_conv2_w, segment_conv2_b;

  template <class A, class B, class F>
  static void zip(A& a, B& b, F&& f) {
    f("frame.conv1.weight", a.frame_conv1_w, b.frame_conv1_w);
    f("frame.conv1.bias", a.frame_conv1_b, b.frame_conv1_b);
    f("frame.conv2.weight", a.frame_conv2_w, b.frame_conv2_w);
    f("frame.conv2.bias", a.frame_conv2_b, b.frame_conv2_b);
    f("frame_end.conv1.weight", a.frame_end_conv1_w, b.frame_end_conv1_w);
    f("frame_end.conv1.bias", a.frame_end_conv1_b, b.frame_end_conv1_b);
    f("frame_end.conv2.weight", a.frame_end_conv2_w, b.frame_end_conv2_w);
    f("frame_end.conv2.bias", a.frame_end_conv2_b, b.frame_end_conv2_b);
    f("segment.conv1.weight", a.segment_conv1_w, b.segment_conv1_w);
    f("segment.conv1.bias", a.segment_conv1_b, b.segment_conv1_b);
    f("segment.conv2.weight", a.segment_conv2_w, b.segment_conv2_w);
    f("segment.conv2.bias", a.segment_conv2_b, b.segment_conv2_b);
  }

  template <class Self, class F>
  static void each(Self& self, F&& f) {
    zip(self, self, [&](const char* name, auto& x, auto&) { f(name, x); });
  }
};

struct TbrSettings {
  int bins = 8;                   // K samples per region
  double boundary_extent = 0.25;  // boundary region half-width as a fraction of w_p
  double tau = 0.5;
  int frame_kernel = 3;
  int segment_kernel = 3;
  bool share_frame_head = true;
};

struct TbrStageParams : TbrTensors<Matrix>, TbrSettings {
  Eigen::Index channels() const { return frame_conv1_w.rows() / frame_kernel; }
  Eigen::Index hidden() const { return frame_conv1_w.cols(); }
  void validate() const;
};

using TbrStageVars = TbrTensors<ad::Var>;

/// Uniform(+-1/sqrt(fan_in)) conv weights, zero biases.
TbrStageParams init_stage(Eigen::Index channels, Eigen::Index hidden, const TbrSettings& settings,
                          std::mt19937_64& rng);

/// Every weight and bias zero: the stage leaves proposals unchanged with conf 0.5.
TbrStageParams zero_stage(Eigen::Index channels, Eigen::Index hidden, const TbrSettings& settings);

TbrStageVars bind_stage(ad::Tape& tape, const TbrStageParams& params);

struct Contexts {
  Matrix start;   // K x C
  Matrix center;  // K x C
  Matrix end;     // K x C
};

/// Linear-interpolation sampling of the starting, internal and ending regions.
/// Time t reads fractional row t * (valid_len - 1); `valid_len < 0` means T.
Contexts temporal_roi_align(const Matrix& fenc, const Interval& p, int bins, double boundary_extent,
                            Eigen::Index valid_len = -1);

/// "Same"-length 1-D convolution with zero padding (kernel - 1) / 2.
Matrix conv1d(const Matrix& x, const Matrix& weight, const Matrix& bias, int kernel);

struct FrameOffsets {
  double start = 0.0;
  double end = 0.0;
};

FrameOffsets frame_level_head(const Matrix& fs, const Matrix& fe, const TbrStageParams& params);

struct SegmentOutputs {
  double center = 0.0;
  double width = 0.0;
  double conf = 0.5;  // sigmoid of the third channel
};

SegmentOutputs segment_level_head(const Matrix& fs, const Matrix& fc, const Matrix& fe,
                                  const TbrStageParams& params);

struct OffsetProposals {
  Interval frame;    // (s1, e1)
  Interval segment;  // (s2, e2)
};

OffsetProposals apply_offsets(const Interval& p, double ds, double de, double dx, double dw);

Interval fuse_proposals(const Interval& frame, const Interval& segment, double tau);

struct RefinedProposal {
  double start = 0.0;
  double end = 0.0;
  double conf = 0.0;
  double ds = 0.0, de = 0.0, dx = 0.0, dw = 0.0;
  bool degenerate = false;
};

enum class ConfMode { last, product };

struct RefineDiagnostics {
  std::size_t degenerate = 0;
};

/// Per input proposal, the output of every stage in order.
std::vector<std::vector<RefinedProposal>> tbr_refine(const Matrix& fenc, Eigen::Index valid_len,
                                                     const std::vector<Proposal>& proposals,
                                                     const std::vector<TbrStageParams>& stages,
                                                     RefineDiagnostics* diagnostics = nullptr);

/// S_TCANet from the per-stage outputs of one proposal.
double final_confidence(const std::vector<RefinedProposal>& stages, ConfMode mode);

// Differentiable building blocks.

ad::Var conv1d(ad::Var x, ad::Var weight, ad::Var bias, int kernel);

/// Samples K rows at times t_k = a_k * start + b_k * end.
ad::Var sample_rows(ad::Var fenc, Eigen::Index valid_len, ad::Var start, ad::Var end,
                    const std::vector<std::pair<double, double>>& coefficients);

struct ContextVars {
  ad::Var start, center, end;
};

ContextVars temporal_roi_align(ad::Var fenc, Eigen::Index valid_len, ad::Var start, ad::Var end, int bins,
                               double boundary_extent);

struct StageVars {
  ad::Var in_start, in_end;
  ad::Var ds, de, dx, dw, conf;  // conf is this stage's own p_conf
  ad::Var out_start, out_end;
  bool degenerate = false;
};

/// Stage outputs narrower than this count as degenerate.
inline constexpr double kMinWidth = 1e-6;

/// Progressive refinement of one proposal. Each stage consumes the previous
/// stage's clamped output; a degenerate stage output passes its input through.
std::vector<StageVars> tbr_chain(ad::Var fenc, Eigen::Index valid_len, ad::Var start, ad::Var end,
                                 const std::vector<TbrStageVars>& vars,
                                 const std::vector<TbrStageParams>& stages, bool detach_inputs = false);

}  // namespace tcanet::tbr
