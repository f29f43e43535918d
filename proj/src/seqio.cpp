#include "tcanet/seqio.hpp"

#include "tcanet/evalkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace tcanet::seqio {
namespace {

constexpr char kMagic[4] = {'T', 'C', 'A', 'F'};
constexpr std::size_t kHeaderBytes = 4 + 5 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

double require_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw FormatError(std::string("missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace

FeatureSequence make_sequence(Matrix features, std::uint32_t snippet_interval,
                              std::size_t valid_len) {
  if (features.rows() < 1 || features.cols() < 1) {
    throw ArgumentError("feature sequence needs T >= 1 and C >= 1");
  }
  if (snippet_interval < 1) throw ArgumentError("snippet interval must be positive");
  if (valid_len > static_cast<std::size_t>(features.rows())) {
    throw ArgumentError("valid_len exceeds sequence length");
  }
  if (!features.allFinite()) throw DataError("feature sequence contains non-finite values");
  const auto tail = static_cast<Eigen::Index>(features.rows() - valid_len);
  if (tail > 0 && !features.bottomRows(tail).isZero(0.0)) {
    throw DataError("padding rows beyond valid_len must be zero");
  }
  return FeatureSequence{std::move(features), snippet_interval, valid_len};
}

FeatureSequence make_sequence(Matrix features, std::uint32_t snippet_interval) {
  const auto rows = static_cast<std::size_t>(features.rows());
  return make_sequence(std::move(features), snippet_interval, rows);
}

std::vector<Interval> VideoAnnotation::gt_intervals() const {
  std::vector<Interval> out;
  out.reserve(ground_truths.size());
  for (const auto& g : ground_truths) out.push_back(g.interval());
  return out;
}

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  const auto rows = seq.features.rows();
  const auto cols = seq.features.cols();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(rows * cols) * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  put_u32(out, seq.snippet_interval);
  put_u32(out, static_cast<std::uint32_t>(seq.valid_len));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(seq.features(r, c))));
    }
  }
  return out;
}

FeatureSequence decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("feature file: bad magic or truncated header");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFeatureFormatVersion) {
    throw FormatError("feature file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t cols = get_u32(bytes, 12);
  const std::uint32_t interval = get_u32(bytes, 16);
  const std::uint32_t valid_len = get_u32(bytes, 20);
  if (rows == 0 || cols == 0 || interval == 0 || valid_len > rows) {
    throw FormatError("feature file: invalid header fields");
  }
  const std::uint64_t payload = static_cast<std::uint64_t>(rows) * cols * 4;
  if (bytes.size() - kHeaderBytes != payload) {
    throw FormatError("feature file: payload length does not match T*C*4");
  }
  Matrix features(rows, cols);
  std::size_t offset = kHeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      features(r, c) = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
    }
  }
  return make_sequence(std::move(features), interval, valid_len);
}

FeatureSequence load_features(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_features(bytes);
}

void write_features(const std::filesystem::path& path, const FeatureSequence& seq) {
  const auto bytes = encode_features(seq);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

nlohmann::json candidates_to_json(const std::vector<Proposal>& proposals) {
  auto arr = nlohmann::json::array();
  for (const auto& p : proposals) {
    arr.push_back({{"start", p.start}, {"end", p.end}, {"score", p.score}});
  }
  return arr;
}

std::vector<Proposal> candidates_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("candidates must be a JSON array");
  std::vector<Proposal> out;
  out.reserve(j.size());
  for (const auto& c : j) {
    Proposal p{require_number(c, "start"), require_number(c, "end"), require_number(c, "score")};
    if (!(p.start < p.end)) throw DataError("candidate with end <= start");
    out.push_back(p);
  }
  return out;
}

nlohmann::json annotation_to_json(const VideoAnnotation& ann) {
  auto gts = nlohmann::json::array();
  for (const auto& g : ann.ground_truths) {
    gts.push_back({{"start", g.start}, {"end", g.end}, {"class_id", g.class_id}});
  }
  return {{"video_id", ann.video_id},
          {"duration_sec", ann.duration_sec},
          {"ground_truths", std::move(gts)},
          {"candidates", candidates_to_json(ann.candidates)}};
}

VideoAnnotation annotation_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("video_id") || !j.at("video_id").is_string()) {
    throw FormatError("annotation: missing video_id");
  }
  VideoAnnotation ann;
  ann.video_id = j.at("video_id").get<std::string>();
  ann.duration_sec = require_number(j, "duration_sec");
  if (j.contains("ground_truths")) {
    for (const auto& g : j.at("ground_truths")) {
      GroundTruth gt{require_number(g, "start"), require_number(g, "end"),
                     g.contains("class_id") ? g.at("class_id").get<int>() : 0};
      if (!(0.0 <= gt.start && gt.start < gt.end && gt.end <= 1.0)) {
        throw DataError("annotation " + ann.video_id + ": ground truth outside 0 <= start < end <= 1");
      }
      ann.ground_truths.push_back(gt);
    }
  }
  if (j.contains("candidates")) ann.candidates = candidates_from_json(j.at("candidates"));
  return ann;
}

VideoAnnotation load_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return annotation_from_json(j);
}

void write_annotation(const std::filesystem::path& path, const VideoAnnotation& ann) {
  write_file(path, annotation_to_json(ann).dump(2) + "\n");
}

FeatureSequence pad_to(const FeatureSequence& seq, std::size_t target_len) {
  if (target_len < seq.valid_len) {
    throw ArgumentError("pad_to: target length below valid_len");
  }
  const auto keep = std::min<std::size_t>(seq.length(), target_len);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(target_len), seq.features.cols());
  out.topRows(static_cast<Eigen::Index>(keep)) = seq.features.topRows(static_cast<Eigen::Index>(keep));
  return FeatureSequence{std::move(out), seq.snippet_interval, seq.valid_len};
}

void SynthConfig::validate() const {
  if (num_videos < 1 || length < 1 || channels < 1) {
    throw ArgumentError("synth: num_videos, T and C must be >= 1");
  }
  if (!(jitter_scale > 0.0)) throw ArgumentError("synth: jitter_scale must be > 0");
  if (min_actions < 1 || max_actions < min_actions) {
    throw ArgumentError("synth: invalid actions_per_video range");
  }
  if (!(0.0 < min_action_len && min_action_len <= max_action_len && max_action_len < 1.0)) {
    throw ArgumentError("synth: invalid action length range");
  }
  if (static_cast<double>(max_actions) * max_action_len >= 1.0) {
    throw ArgumentError("synth: max_actions * max_action_len must stay below 1");
  }
  if (candidates_per_action < 1 || num_classes < 1 || snippet_interval < 1) {
    throw ArgumentError("synth: counts must be >= 1");
  }
  if (noise_std < 0.0 || score_noise < 0.0) throw ArgumentError("synth: noise must be >= 0");
}

std::vector<Video> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const auto T = static_cast<Eigen::Index>(cfg.length);
  const auto C = static_cast<Eigen::Index>(cfg.channels);

  std::mt19937_64 class_rng(substream_seed(cfg.seed, "classes"));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::RowVectorXd> patterns;
  for (std::size_t k = 0; k < cfg.num_classes; ++k) {
    Eigen::RowVectorXd p(C);
    for (Eigen::Index c = 0; c < C; ++c) p(c) = cfg.signal * unit(class_rng);
    patterns.push_back(std::move(p));
  }

  const std::uint64_t data_seed = substream_seed(cfg.seed, "data");
  std::vector<Video> videos;
  videos.reserve(cfg.num_videos);
  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    std::mt19937_64 rng(substream_seed(data_seed, v));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const auto span = cfg.max_actions - cfg.min_actions + 1;
    const std::size_t n_actions =
        cfg.min_actions + std::min<std::size_t>(span - 1, static_cast<std::size_t>(uniform(rng) * span));
    std::vector<double> lengths(n_actions);
    double total = 0.0;
    for (auto& len : lengths) {
      len = cfg.min_action_len + (cfg.max_action_len - cfg.min_action_len) * uniform(rng);
      total += len;
    }
    std::vector<double> gaps(n_actions + 1);
    double gap_sum = 0.0;
    for (auto& g : gaps) {
      g = 0.1 + uniform(rng);
      gap_sum += g;
    }
    const double free_time = 1.0 - total;

    VideoAnnotation ann;
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%05zu", v);
    ann.video_id = id;
    ann.duration_sec = static_cast<double>(cfg.length * cfg.snippet_interval) / cfg.fps;

    Matrix features(T, C);
    for (Eigen::Index r = 0; r < T; ++r) {
      for (Eigen::Index c = 0; c < C; ++c) features(r, c) = cfg.noise_std * unit(rng);
    }

    double cursor = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      cursor += free_time * gaps[a] / gap_sum;
      const double start = cursor;
      const double end = std::min(1.0, cursor + lengths[a]);
      cursor = end;
      const int cls = static_cast<int>(std::min<std::size_t>(
          cfg.num_classes - 1, static_cast<std::size_t>(uniform(rng) * cfg.num_classes)));
      ann.ground_truths.push_back({start, end, cls});
      for (Eigen::Index r = 0; r < T; ++r) {
        const double t = T > 1 ? static_cast<double>(r) / static_cast<double>(T - 1) : 0.0;
        if (t >= start && t <= end) features.row(r) += patterns[static_cast<std::size_t>(cls)];
      }
    }

    for (const auto& gt : ann.ground_truths) {
      const double width = gt.end - gt.start;
      std::normal_distribution<double> jitter(0.0, cfg.jitter_scale * width);
      std::normal_distribution<double> score_jitter(0.0, cfg.score_noise);
      for (std::size_t k = 0; k < cfg.candidates_per_action; ++k) {
        Proposal cand{gt.start, gt.end, 0.0};
        for (int attempt = 0; attempt < 32; ++attempt) {
          const double s = std::clamp(gt.start + jitter(rng), 0.0, 1.0);
          const double e = std::clamp(gt.end + jitter(rng), 0.0, 1.0);
          if (e - s > 1e-3) {
            cand.start = s;
            cand.end = e;
            break;
          }
        }
        const double overlap = evalkit::tiou(cand.interval(), gt.interval());
        cand.score = std::clamp(overlap + (cfg.score_noise > 0.0 ? score_jitter(rng) : 0.0), 0.0, 1.0);
        ann.candidates.push_back(cand);
      }
    }

    videos.push_back(Video{make_sequence(std::move(features), cfg.snippet_interval), std::move(ann)});
  }
  return videos;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Video>& videos) {
  std::filesystem::create_directories(dir);
  for (const auto& v : videos) {
    write_features(dir / (v.annotation.video_id + ".tcaf"), v.features);
    write_annotation(dir / (v.annotation.video_id + ".json"), v.annotation);
  }
}

std::vector<Video> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> annotations;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      annotations.push_back(entry.path());
    }
  }
  std::sort(annotations.begin(), annotations.end());
  std::vector<Video> videos;
  for (const auto& path : annotations) {
    auto ann = load_annotation(path);
    auto feat_path = path;
    feat_path.replace_extension(".tcaf");
    videos.push_back(Video{load_features(feat_path), std::move(ann)});
  }
  if (videos.empty()) throw FormatError("no annotations found in " + dir.string());
  return videos;
}

}  // namespace tcanet::seqio
