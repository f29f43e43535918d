#include "tcanet/postproc.hpp"

#include "tcanet/evalkit.hpp"

#include <cmath>

namespace tcanet::postproc {

void SoftNmsConfig::validate() const {
  if (!(sigma > 0.0)) throw ArgumentError("soft_nms: sigma must be > 0");
  if (!(score_floor >= 0.0 && score_floor < 1.0)) throw ArgumentError("soft_nms: score_floor must be in [0, 1)");
  if (top_k < 1) throw ArgumentError("soft_nms: top_k must be >= 1");
}

double fuse_scores(double s_ext, double s_tcanet) {
  if (!(s_ext >= 0.0 && s_ext <= 1.0) || !(s_tcanet >= 0.0 && s_tcanet <= 1.0)) {
    throw ArgumentError("fuse_scores: scores must lie in [0, 1]");
  }
  return s_ext * s_tcanet;
}

std::vector<Proposal> soft_nms(const std::vector<Proposal>& proposals, const SoftNmsConfig& cfg) {
  cfg.validate();
  std::vector<Proposal> remaining = proposals;
  std::vector<Proposal> selected;
  const auto better = [](const Proposal& a, const Proposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.length() < b.length();
  };
  while (!remaining.empty() && selected.size() < static_cast<std::size_t>(cfg.top_k)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      if (better(remaining[i], remaining[best])) best = i;
    }
    if (remaining[best].score < cfg.score_floor) break;
    const Proposal chosen = remaining[best];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    for (auto& r : remaining) {
      const double overlap = evalkit::tiou(chosen.interval(), r.interval());
      r.score *= std::exp(-overlap * overlap / cfg.sigma);
    }
    selected.push_back(chosen);
  }
  return selected;
}

}  // namespace tcanet::postproc
