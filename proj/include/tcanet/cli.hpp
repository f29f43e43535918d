#pragma once

#include "tcanet/common.hpp"
#include "tcanet/evalkit.hpp"
#include "tcanet/model.hpp"
#include "tcanet/seqio.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace tcanet::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // I/O, format and data errors
inline constexpr int kUsage = 2;
inline constexpr int kGradCheckFailed = 3;

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> artifact_paths;
  double wall_time = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);

/// `<out>.manifest.json`, next to the output rather than inside it.
std::filesystem::path manifest_path(const std::filesystem::path& out);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_digest(const nlohmann::json& resolved);

struct VideoProposalList {
  std::string video_id;
  std::vector<Proposal> proposals;
  std::vector<int> class_ids;  // empty, or one per proposal
};

nlohmann::json proposals_to_json(const std::vector<VideoProposalList>& videos);
std::vector<VideoProposalList> proposals_from_json(const nlohmann::json& j);

seqio::SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const seqio::SynthConfig& c);
evalkit::EvalOptions eval_options_from_json(const nlohmann::json& j);
nlohmann::json eval_options_to_json(const evalkit::EvalOptions& o);

struct RefineSettings {
  int stages = 0;    // 0 keeps every stage of the checkpoint
  double tau = -1;   // < 0 keeps the checkpoint value
  bool soft_nms = false;
  postproc::SoftNmsConfig nms;
};

/// The checkpoint with the stage count and tau overrides applied.
Model apply_refine_settings(Model model, const RefineSettings& s);

std::vector<VideoProposalList> refine_dataset(const Model& model, const std::vector<seqio::Video>& videos,
                                              const RefineSettings& s);

/// Scores proposals against the dataset's ground truths. mAP uses the
/// proposals' class ids when present, otherwise every interval is class 0.
evalkit::EvalReport evaluate_proposals(const std::vector<seqio::Video>& videos,
                                       const std::vector<VideoProposalList>& proposals,
                                       const evalkit::EvalOptions& opts);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace tcanet::cli
