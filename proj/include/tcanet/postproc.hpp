#pragma once

#include "tcanet/common.hpp"

#include <vector>

namespace tcanet::postproc {

struct SoftNmsConfig {
  double sigma = 0.4;
  double score_floor = 1e-3;
  int top_k = 100;

  void validate() const;
};

/// S_proposal = S_ext * S_tcanet; both factors must lie in [0, 1].
double fuse_scores(double s_ext, double s_tcanet);

/// Gaussian Soft-NMS. Repeatedly selects the best remaining proposal (ties: earlier
/// start, then shorter) and decays every other score by exp(-tIoU^2 / sigma).
/// Intervals are never modified.
std::vector<Proposal> soft_nms(const std::vector<Proposal>& proposals, const SoftNmsConfig& cfg = {});

}  // namespace tcanet::postproc
