#pragma once

#include "tcanet/autodiff.hpp"
#include "tcanet/lgte.hpp"
#include "tcanet/postproc.hpp"
#include "tcanet/seqio.hpp"
#include "tcanet/tbr.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tcanet {

struct ModelConfig {
  int channels = 32;
  int num_blocks = 2;
  int ffn_hidden = 0;  // 0 selects 4 * channels
  lgte::LgteSettings lgte;
  int num_stages = 3;
  int head_hidden = 512;
  tbr::TbrSettings tbr;
  tbr::ConfMode conf_mode = tbr::ConfMode::last;

  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
/// Missing keys keep the values already in `base`.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct Model {
  ModelConfig config;
  lgte::EncoderParams encoder;
  std::vector<tbr::TbrStageParams> stages;
};

Model init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Non-empty tensors in a fixed order, named like "lgte.block0.gamma" or
/// "tbr.stage1.segment.conv2.weight".
std::vector<std::pair<std::string, Matrix*>> model_tensors(Model& model);
std::vector<std::pair<std::string, const Matrix*>> model_tensors(const Model& model);

struct ModelVars {
  std::vector<lgte::LgteBlockVars> blocks;
  std::vector<tbr::TbrStageVars> stages;

  /// Bound parameters in model_tensors order.
  std::vector<ad::Var> list() const;
};

ModelVars bind_model(ad::Tape& tape, const Model& model);

/// Runs every LGTE block on `features` (T x C) with padding masked past valid_len.
ad::Var encode(ad::Var features, Eigen::Index valid_len, const ModelVars& vars, const Model& model);

// Checkpoint: "TCAP", u32 version, u32 config length, config JSON (UTF-8),
// u32 tensor count, then per tensor: u32 name length, name, u32 rank,
// u32 dims[rank], little-endian f32 data in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

struct RefineOptions {
  bool apply_soft_nms = false;
  postproc::SoftNmsConfig nms;
};

struct VideoRefinement {
  std::vector<Proposal> proposals;  // fused scores, descending
  std::vector<std::vector<tbr::RefinedProposal>> stages;  // per input candidate
  std::size_t degenerate = 0;
};

/// Encodes the sequence, refines every candidate through all stages and
/// fuses scores as candidate score times S_TCANet.
VideoRefinement refine_video(const Model& model, const seqio::FeatureSequence& seq,
                             const std::vector<Proposal>& candidates, const RefineOptions& opts = {});

}  // namespace tcanet
