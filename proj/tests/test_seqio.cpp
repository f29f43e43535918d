#include "tcanet/evalkit.hpp"
#include "tcanet/seqio.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace tcanet;
using namespace tcanet::seqio;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tcanet_seqio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> handmade_file(std::uint32_t T, std::uint32_t C, std::size_t n_values) {
  std::vector<std::uint8_t> out{'T', 'C', 'A', 'F'};
  put_u32(out, 1);
  put_u32(out, T);
  put_u32(out, C);
  put_u32(out, 1);
  put_u32(out, T);
  for (std::size_t i = 0; i < n_values; ++i) {
    const float f = 0.5f * static_cast<float>(i);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

}  // namespace

TEST(FeatureFile, DecodesHandmadeHeader) {
  const auto seq = decode_features(handmade_file(4, 2, 8));
  ASSERT_EQ(seq.features.rows(), 4);
  ASSERT_EQ(seq.features.cols(), 2);
  EXPECT_EQ(seq.valid_len, 4u);
  EXPECT_DOUBLE_EQ(seq.features(0, 1), 0.5);  // row-major payload
  EXPECT_DOUBLE_EQ(seq.features(3, 1), 3.5);
}

TEST(FeatureFile, WrongPayloadLengthIsFormatError) {
  EXPECT_THROW(decode_features(handmade_file(4, 2, 7)), FormatError);
  EXPECT_THROW(decode_features(handmade_file(4, 2, 9)), FormatError);
  auto bad_magic = handmade_file(4, 2, 8);
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_features(bad_magic), FormatError);
}

TEST(FeatureFile, RewriteIsByteIdentical) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 2.0f);
  const auto dir = scratch_dir("rewrite");
  for (int c = 0; c < 20; ++c) {
    const int T = 1 + static_cast<int>(rng() % 20), C = 1 + static_cast<int>(rng() % 6);
    Matrix m(T, C);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);  // float-representable
    const auto p = dir / "a.tcaf";
    const auto q = dir / "b.tcaf";
    write_features(p, make_sequence(m, 4));
    const auto loaded = load_features(p);
    EXPECT_EQ(loaded.features, m);
    EXPECT_EQ(loaded.snippet_interval, 4u);
    write_features(q, loaded);
    EXPECT_EQ(read_bytes(p), read_bytes(q));
  }
}

TEST(FeatureFile, RejectsNonFinite) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(make_sequence(m), DataError);
}

TEST(Padding, SameLengthIsIdentity) {
  const Matrix m = Matrix::Random(3, 4);
  const auto seq = make_sequence(m);
  const auto out = pad_to(seq, 3);
  EXPECT_EQ(out.features, m);
  EXPECT_EQ(out.valid_len, 3u);
}

TEST(Padding, AppendsZeroRows) {
  const Matrix m = Matrix::Random(3, 4);
  const auto out = pad_to(make_sequence(m), 5);
  ASSERT_EQ(out.features.rows(), 5);
  EXPECT_TRUE(out.features.bottomRows(2).isZero(0.0));
  EXPECT_EQ(out.features.topRows(3), m);
  EXPECT_EQ(out.valid_len, 3u);
  EXPECT_DOUBLE_EQ(out.features.sum(), m.sum());
}

TEST(Padding, ShorterTargetIsRejected) {
  EXPECT_THROW(pad_to(make_sequence(Matrix::Ones(4, 2)), 3), ArgumentError);
}

TEST(Padding, RandomSumsAndRowsPreserved) {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 100; ++c) {
    const auto T = static_cast<Eigen::Index>(1 + rng() % 12);
    const Matrix m = Matrix::Random(T, 3);
    const auto seq = make_sequence(m);
    const auto out = pad_to(seq, static_cast<std::size_t>(T) + rng() % 6);
    EXPECT_EQ(out.features.topRows(T), m);
    EXPECT_EQ(out.valid_len, seq.valid_len);
    EXPECT_NEAR(out.features.sum(), m.sum(), 1e-12);
  }
}

TEST(Annotation, JsonRoundTrip) {
  VideoAnnotation ann;
  ann.video_id = "clip";
  ann.duration_sec = 12.5;
  ann.ground_truths = {{0.1, 0.3, 2}, {0.5, 0.9, 0}};
  ann.candidates = {{0.1, 0.31, 0.8}, {0.45, 0.92, 0.4}};
  EXPECT_EQ(annotation_from_json(annotation_to_json(ann)), ann);
  EXPECT_THROW(annotation_from_json(nlohmann::json::object()), FormatError);
}

TEST(Synth, SameConfigGivesIdenticalData) {
  SynthConfig cfg;
  cfg.num_videos = 5;
  cfg.seed = 7;
  const auto a = synth_dataset(cfg);
  const auto b = synth_dataset(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features.features, b[i].features.features);
    EXPECT_EQ(a[i].annotation, b[i].annotation);
  }
  cfg.seed = 8;
  EXPECT_NE(synth_dataset(cfg)[0].features.features, a[0].features.features);
}

TEST(Synth, PrefixIsStableWhenAddingVideos) {
  SynthConfig cfg;
  cfg.num_videos = 3;
  const auto small = synth_dataset(cfg);
  cfg.num_videos = 6;
  const auto large = synth_dataset(cfg);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].annotation, large[i].annotation);
}

TEST(Synth, VanishingJitterGivesExactCandidates) {
  SynthConfig cfg;
  cfg.num_videos = 20;
  cfg.jitter_scale = 1e-9;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : synth_dataset(cfg)) {
    const auto gts = v.annotation.gt_intervals();
    for (const auto& c : v.annotation.candidates) {
      double best = 0.0;
      for (const auto& g : gts) best = std::max(best, evalkit::tiou(c.interval(), g));
      sum += best;
      ++n;
    }
  }
  EXPECT_NEAR(sum / static_cast<double>(n), 1.0, 1e-6);
}

TEST(Synth, DefaultJitterCandidateOverlapFixture) {
  // Mean best tIoU of candidates for the default generator at jitter 0.3, seed 7.
  SynthConfig cfg;
  cfg.num_videos = 50;
  cfg.seed = 7;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : synth_dataset(cfg)) {
    for (const auto& c : v.annotation.candidates) {
      double best = 0.0;
      for (const auto& g : v.annotation.gt_intervals()) best = std::max(best, evalkit::tiou(c.interval(), g));
      sum += best;
      ++n;
    }
  }
  EXPECT_NEAR(sum / static_cast<double>(n), 0.6220907199266833, 1e-12);
}

TEST(Synth, ActionsAreOrderedAndInsideUnitInterval) {
  SynthConfig cfg;
  cfg.num_videos = 30;
  for (const auto& v : synth_dataset(cfg)) {
    double last_end = 0.0;
    for (const auto& g : v.annotation.ground_truths) {
      EXPECT_GE(g.start, last_end);
      EXPECT_LT(g.start, g.end);
      EXPECT_LE(g.end, 1.0);
      last_end = g.end;
    }
    for (const auto& c : v.annotation.candidates) {
      EXPECT_GE(c.start, 0.0);
      EXPECT_LE(c.end, 1.0);
      EXPECT_LT(c.start, c.end);
      EXPECT_GE(c.score, 0.0);
      EXPECT_LE(c.score, 1.0);
    }
  }
}

TEST(Dataset, WriteLoadRoundTrip) {
  SynthConfig cfg;
  cfg.num_videos = 4;
  cfg.length = 16;
  cfg.channels = 3;
  const auto videos = synth_dataset(cfg);
  const auto dir = scratch_dir("dataset");
  write_dataset(dir, videos);
  const auto loaded = load_dataset(dir);
  ASSERT_EQ(loaded.size(), videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    EXPECT_EQ(loaded[i].annotation, videos[i].annotation);
    EXPECT_TRUE(loaded[i].features.features.isApprox(videos[i].features.features, 1e-6));
  }
}
