#pragma once

#include "tcanet/common.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tcanet::seqio {

/// A T x C snippet feature matrix. Rows at or beyond `valid_len` are zero padding.
struct FeatureSequence {
  Matrix features;
  std::uint32_t snippet_interval = 1;
  std::size_t valid_len = 0;

  std::size_t length() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(features.cols()); }
};

/// Builds a sequence and checks every invariant (finite values, zero tail).
FeatureSequence make_sequence(Matrix features, std::uint32_t snippet_interval,
                              std::size_t valid_len);

/// Same, with valid_len = T.
FeatureSequence make_sequence(Matrix features, std::uint32_t snippet_interval = 1);

struct GroundTruth {
  double start = 0.0;
  double end = 0.0;
  int class_id = 0;

  Interval interval() const { return {start, end}; }
  bool operator==(const GroundTruth&) const = default;
};

struct VideoAnnotation {
  std::string video_id;
  double duration_sec = 0.0;
  std::vector<GroundTruth> ground_truths;
  std::vector<Proposal> candidates;

  std::vector<Interval> gt_intervals() const;
  bool operator==(const VideoAnnotation&) const = default;
};

// Feature file: "TCAF", u32 version, u32 T, u32 C, u32 snippet_interval,
// u32 valid_len, then T*C little-endian f32 row-major.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::span<const std::uint8_t> bytes);
FeatureSequence load_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureSequence& seq);

nlohmann::json candidates_to_json(const std::vector<Proposal>& proposals);
std::vector<Proposal> candidates_from_json(const nlohmann::json& j);

nlohmann::json annotation_to_json(const VideoAnnotation& ann);
VideoAnnotation annotation_from_json(const nlohmann::json& j);
VideoAnnotation load_annotation(const std::filesystem::path& path);
void write_annotation(const std::filesystem::path& path, const VideoAnnotation& ann);

/// Zero-pads to `target_len` rows. Never truncates.
FeatureSequence pad_to(const FeatureSequence& seq, std::size_t target_len);

struct SynthConfig {
  std::size_t num_videos = 50;
  std::size_t length = 128;
  std::size_t channels = 32;
  std::size_t min_actions = 1;
  std::size_t max_actions = 3;
  double jitter_scale = 0.3;
  std::uint64_t seed = 0;

  std::size_t candidates_per_action = 8;
  std::size_t num_classes = 4;
  double min_action_len = 0.08;
  double max_action_len = 0.3;
  double signal = 1.0;
  double noise_std = 0.5;
  double score_noise = 0.05;
  std::uint32_t snippet_interval = 8;
  double fps = 30.0;

  void validate() const;
};

struct Video {
  FeatureSequence features;
  VideoAnnotation annotation;
};

/// Deterministic synthetic dataset. Each action paints a class pattern over the
/// rows inside its interval (row i sits at time i / (T - 1)); candidates are
/// jittered copies of the ground truths scored by their tIoU plus noise.
std::vector<Video> synth_dataset(const SynthConfig& cfg);

/// Writes `<id>.tcaf` and `<id>.json` per video into `dir`.
void write_dataset(const std::filesystem::path& dir, const std::vector<Video>& videos);

/// Loads every `<id>.json` annotation in `dir` with its `<id>.tcaf`, sorted by id.
std::vector<Video> load_dataset(const std::filesystem::path& dir);

}  // namespace tcanet::seqio
