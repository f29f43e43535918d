#include "tcanet/tbr.hpp"
#include "tcanet/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

using namespace tcanet;
using namespace tcanet::train;

namespace {

LabeledProposal labeled(SampleKind kind, double start) {
  LabeledProposal l;
  l.proposal = {start, start + 0.1, 0.5};
  l.kind = kind;
  return l;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.num_blocks = 1;
  cfg.lgte.num_groups = 2;
  cfg.lgte.num_local_groups = 1;
  cfg.lgte.window_size = 3;
  cfg.num_stages = 2;
  cfg.head_hidden = 8;
  cfg.tbr.bins = 4;
  return cfg;
}

std::vector<seqio::Video> small_dataset(std::size_t n, std::uint64_t seed) {
  seqio::SynthConfig s;
  s.num_videos = n;
  s.length = 32;
  s.channels = 8;
  s.candidates_per_action = 6;
  s.seed = seed;
  return seqio::synth_dataset(s);
}

}  // namespace

TEST(Labels, PerfectMatchIsPositive) {
  const auto l = assign_labels({{0.1, 0.3, 0.5}}, {{0.1, 0.3}}, 0.7, 0.3);
  EXPECT_EQ(l[0].kind, SampleKind::positive);
  EXPECT_EQ(l[0].g_iou, 1.0);
}

TEST(Labels, DisjointIsNegative) {
  const auto l = assign_labels({{0.5, 0.6, 0.5}}, {{0.1, 0.3}}, 0.7, 0.3);
  EXPECT_EQ(l[0].kind, SampleKind::negative);
  EXPECT_EQ(l[0].g_iou, 0.0);
}

TEST(Labels, PartialOverlapIsIncomplete) {
  const auto l = assign_labels({{0.0, 0.3, 0.5}}, {{0.1, 0.3}}, 0.7, 0.3);
  EXPECT_NEAR(l[0].g_iou, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(l[0].kind, SampleKind::incomplete);
}

TEST(Labels, ThresholdTiesAreIncomplete) {
  // tIoU exactly 0.5 with i_p = 0.5 and with i_n = 0.5.
  const auto a = assign_labels({{0.0, 0.5, 0.5}}, {{0.0, 0.25}}, 0.5, 0.3);
  EXPECT_EQ(a[0].g_iou, 0.5);
  EXPECT_EQ(a[0].kind, SampleKind::incomplete);
  const auto b = assign_labels({{0.0, 0.5, 0.5}}, {{0.0, 0.25}}, 0.7, 0.5);
  EXPECT_EQ(b[0].kind, SampleKind::incomplete);
}

TEST(Labels, NoGroundTruthsMeansNegatives) {
  const auto l = assign_labels({{0.1, 0.3, 0.5}, {0.4, 0.9, 0.2}}, {}, 0.7, 0.3);
  for (const auto& x : l) {
    EXPECT_EQ(x.kind, SampleKind::negative);
    EXPECT_EQ(x.g_iou, 0.0);
    EXPECT_FALSE(x.matched_gt.has_value());
  }
}

TEST(Labels, MatchesBestGroundTruth) {
  const auto l = assign_labels({{0.5, 0.72, 0.5}}, {{0.1, 0.3}, {0.5, 0.7}}, 0.7, 0.3);
  ASSERT_TRUE(l[0].matched_gt.has_value());
  EXPECT_EQ(l[0].matched_gt->start, 0.5);
}

TEST(Sampling, ExactSizesReturnFullSet) {
  std::vector<LabeledProposal> in;
  for (int i = 0; i < 3; ++i) {
    in.push_back(labeled(SampleKind::positive, 0.1 * i));
    in.push_back(labeled(SampleKind::incomplete, 0.1 * i + 0.01));
    in.push_back(labeled(SampleKind::negative, 0.1 * i + 0.02));
  }
  const auto r = sample_balanced(in, 3, 9);
  ASSERT_EQ(r.samples.size(), 9u);
  EXPECT_EQ(r.empty_kinds, 0);
  std::multiset<double> want, got;
  for (const auto& x : in) want.insert(x.proposal.start);
  for (const auto& x : r.samples) got.insert(x.proposal.start);
  EXPECT_EQ(want, got);
}

TEST(Sampling, DeterministicForSeed) {
  std::vector<LabeledProposal> in;
  for (int i = 0; i < 30; ++i) in.push_back(labeled(static_cast<SampleKind>(i % 3), 0.01 * i));
  const auto a = sample_balanced(in, 4, 5).samples;
  const auto b = sample_balanced(in, 4, 5).samples;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].proposal, b[i].proposal);
}

TEST(Sampling, EmptyKindIsCountedAndUndersizedIsUpsampled) {
  std::vector<LabeledProposal> in = {labeled(SampleKind::positive, 0.0), labeled(SampleKind::negative, 0.2),
                                     labeled(SampleKind::negative, 0.3), labeled(SampleKind::negative, 0.4)};
  const auto r = sample_balanced(in, 3, 1);
  EXPECT_EQ(r.empty_kinds, 1);
  ASSERT_EQ(r.samples.size(), 6u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.samples[static_cast<std::size_t>(i)].kind, SampleKind::positive);
}

TEST(Sampling, UniformWithinKind) {
  // Pick 2 of 5 positives 10^4 times; every member should appear with rate 2/5.
  std::vector<LabeledProposal> in;
  for (int i = 0; i < 5; ++i) in.push_back(labeled(SampleKind::positive, 0.1 * i));
  std::map<double, int> counts;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    for (const auto& x : sample_balanced(in, 2, static_cast<std::uint64_t>(d)).samples) ++counts[x.proposal.start];
  }
  double chi2 = 0.0;
  const double expected = draws * 2.0 / 5.0;
  for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_EQ(counts.size(), 5u);
  EXPECT_LT(chi2, 18.47);  // 4 dof, p = 0.001
}

TEST(Targets, IdentityIsZero) {
  const auto t = regression_targets({0.2, 0.5}, {0.2, 0.5});
  EXPECT_EQ(t.start, 0.0);
  EXPECT_EQ(t.end, 0.0);
  EXPECT_EQ(t.center, 0.0);
  EXPECT_EQ(t.width, 0.0);
}

TEST(Targets, Example) {
  const auto t = regression_targets({0.1, 0.7}, {0.2, 0.6});
  EXPECT_NEAR(t.start, -1.0 / 6.0, 1e-15);
  EXPECT_NEAR(t.end, 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(t.center, 0.0, 1e-15);
  EXPECT_NEAR(t.width, std::log(2.0 / 3.0), 1e-15);
  EXPECT_THROW(regression_targets({0.1, 0.7}, {0.3, 0.3}), ArgumentError);
}

TEST(Targets, RoundTripRecoversGroundTruth) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 1000; ++c) {
    const double a = u(rng) * 0.9, b = u(rng) * 0.9;
    const Interval p{a, a + 0.01 + u(rng) * 0.09}, g{b, b + 0.01 + u(rng) * 0.09};
    const auto t = regression_targets(p, g);
    const auto o = tbr::apply_offsets(p, t.start, t.end, t.center, t.width);
    EXPECT_NEAR(o.frame.start, g.start, 1e-12);
    EXPECT_NEAR(o.frame.end, g.end, 1e-12);
    EXPECT_NEAR(o.segment.start, g.start, 1e-12);
    EXPECT_NEAR(o.segment.end, g.end, 1e-12);
  }
}

TEST(SmoothL1, Examples) {
  EXPECT_EQ(smooth_l1(0.0), 0.0);
  EXPECT_EQ(smooth_l1(0.5), 0.125);
  EXPECT_EQ(smooth_l1(-0.5), 0.125);
  EXPECT_EQ(smooth_l1(2.0), 1.5);
  EXPECT_EQ(smooth_l1(1.0), 0.5);
}

TEST(StageLoss, PerfectPredictionsGiveZero) {
  const auto labels = assign_labels({{0.1, 0.7, 0.5}, {0.0, 0.3, 0.5}}, {{0.2, 0.6}}, 0.7, 0.3);
  std::vector<StagePrediction> preds;
  for (const auto& l : labels) {
    StagePrediction p;
    p.conf = l.g_iou;
    if (l.matched_gt) {
      const auto t = regression_targets(l.proposal.interval(), *l.matched_gt);
      p.ds = t.start;
      p.de = t.end;
      p.dx = t.center;
      p.dw = t.width;
    }
    preds.push_back(p);
  }
  EXPECT_EQ(stage_loss(preds, labels, 1.0).total, 0.0);
}

TEST(StageLoss, SingleNegativeSample) {
  const auto labels = assign_labels({{0.8, 0.9, 0.5}}, {{0.1, 0.3}}, 0.7, 0.3);
  StagePrediction p;
  p.conf = 0.5;
  const auto r = stage_loss({p}, labels, 1.0);
  EXPECT_EQ(r.iou, 0.125);
  EXPECT_EQ(r.reg, 0.0);
  EXPECT_EQ(r.total, 0.125);
  EXPECT_EQ(r.num_positive, 0u);
}

TEST(StageLoss, LambdaZeroIgnoresRegression) {
  const auto labels = assign_labels({{0.1, 0.3, 0.5}}, {{0.1, 0.3}}, 0.7, 0.3);
  StagePrediction p;
  p.conf = 0.2;
  p.ds = 3.0;
  const auto r = stage_loss({p}, labels, 0.0);
  EXPECT_GT(r.reg, 0.0);
  EXPECT_EQ(r.total, r.iou);
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig cfg;
  cfg.lambda = 0.5;
  cfg.samples_per_kind = 3;
  cfg.iou_target = IouTarget::refined;
  cfg.preselect_nms.sigma = 0.7;
  const auto back = train_config_from_json(train_config_to_json(cfg));
  EXPECT_EQ(back.lambda, 0.5);
  EXPECT_EQ(back.samples_per_kind, 3);
  EXPECT_EQ(back.iou_target, IouTarget::refined);
  EXPECT_EQ(back.preselect_nms.sigma, 0.7);
  TrainConfig bad;
  bad.i_n = 0.8;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(Training, ZeroLearningRateLeavesParameters) {
  const auto data = small_dataset(4, 1);
  const auto model = init_model(small_config(), 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.samples_per_kind = 2;
  const auto r = train_model(data, model, cfg);
  const auto before = model_tensors(model);
  const auto after = model_tensors(r.model);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(*before[i].second, *after[i].second) << before[i].first;
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(Training, IsDeterministic) {
  const auto data = small_dataset(4, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.samples_per_kind = 2;
  cfg.seed = 5;
  const auto a = train_model(data, init_model(small_config(), 1), cfg);
  const auto b = train_model(data, init_model(small_config(), 1), cfg);
  EXPECT_EQ(encode_checkpoint(a.model), encode_checkpoint(b.model));
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
}

TEST(Training, LossDecreasesOnSyntheticData) {
  const auto data = small_dataset(50, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.samples_per_kind = 4;
  cfg.learning_rate = 3e-3;
  const auto r = train_model(data, init_model(small_config(), 2), cfg);
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_LT(r.history.back().mean_total, r.history.front().mean_total);
}

TEST(Training, HistoryCsvShape) {
  const std::vector<EpochStats> h = {{1, 1.0, 0.5, 0.5}, {2, 0.8, 0.4, 0.4}};
  const auto csv = history_csv(h);
  EXPECT_EQ(csv.rfind("epoch,mean_total,mean_iou,mean_reg\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Training, NonFiniteLossAborts) {
  const auto data = small_dataset(2, 4);
  auto model = init_model(small_config(), 1);
  model.stages[0].segment_conv2_b(0, 1) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.samples_per_kind = 1;
  EXPECT_THROW(train_model(data, model, cfg), TrainingError);
}

TEST(GradCheck, QuadraticIsExact) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix theta(4, 3);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = n(rng);
  const LossWithGradient fn = [](const std::vector<Matrix>& x, std::vector<Matrix>* g) {
    if (g != nullptr) *g = {x[0]};
    return 0.5 * x[0].squaredNorm();
  };
  EXPECT_LT(grad_check(fn, {theta}, 1e-5).max_rel_error, 1e-8);
}

TEST(GradCheck, DetectsCorruptedEntry) {
  Matrix theta = Matrix::Constant(3, 3, 0.7);
  const LossWithGradient fn = [](const std::vector<Matrix>& x, std::vector<Matrix>* g) {
    if (g != nullptr) {
      *g = {x[0]};
      (*g)[0](1, 2) *= 2.0;
    }
    return 0.5 * x[0].squaredNorm();
  };
  const auto r = grad_check(fn, {theta}, 1e-5, {"theta"});
  EXPECT_GT(r.max_rel_error, 0.3);
  EXPECT_EQ(r.worst_tensor, "theta");
  EXPECT_EQ(r.worst_index, 7);  // column-major (1, 2)
}

TEST(GradCheck, TinyPipeline) {
  auto cfg = small_config();
  cfg.channels = 4;
  cfg.lgte.num_groups = 2;
  cfg.head_hidden = 3;
  cfg.num_stages = 1;
  const auto model = init_model(cfg, 9);
  seqio::SynthConfig s;
  s.num_videos = 1;
  s.length = 10;
  s.channels = 4;
  s.candidates_per_action = 3;
  const auto data = seqio::synth_dataset(s);
  TrainConfig tc;
  TrainItem item;
  item.features = &data[0].features;
  item.gts = data[0].annotation.gt_intervals();
  item.samples = sample_balanced(prepare_candidates(data[0].annotation, tc), 1, 3).samples;
  const auto fn = pipeline_objective(model, {item}, tc);
  std::vector<Matrix> params;
  std::vector<std::string> names;
  for (const auto& [name, m] : model_tensors(model)) {
    params.push_back(*m);
    names.push_back(name);
  }
  const auto r = grad_check(fn, params, 1e-5, names);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "] " << r.worst_analytic << " vs "
                                   << r.worst_numeric;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Matrix p = Matrix::Zero(1, 2);
  Adam opt(0.9, 0.999, 1e-8);
  Matrix g(1, 2);
  g << 2.0, -0.5;
  opt.step({&p}, {g}, 0.1);
  EXPECT_NEAR(p(0, 0), -0.1, 1e-8);
  EXPECT_NEAR(p(0, 1), 0.1, 1e-8);
}
