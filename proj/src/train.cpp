#include "tcanet/train.hpp"

#include "tcanet/evalkit.hpp"
#include "tcanet/tbr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace tcanet::train {
namespace {

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

SampleKind kind_for(double g_iou, double i_p, double i_n) {
  if (g_iou > i_p) return SampleKind::positive;
  if (g_iou < i_n) return SampleKind::negative;
  return SampleKind::incomplete;
}

// tIoU of a differentiable interval against a fixed one.
ad::Var tiou_var(ad::Var start, ad::Var end, const Interval& g) {
  ad::Tape& tape = *start.tape();
  const auto inter = ad::maximum(ad::minimum(end, tape.constant(g.end)) - ad::maximum(start, tape.constant(g.start)),
                                 tape.constant(0.0));
  const auto uni = (end - start) + g.length() - inter;
  return inter / uni;
}

ad::Var sum_all(const std::vector<ad::Var>& terms) { return ad::sum(ad::vcat(terms)); }

}  // namespace

const char* to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::positive:
      return "positive";
    case SampleKind::incomplete:
      return "incomplete";
    case SampleKind::negative:
      return "negative";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(0.0 <= i_n && i_n < i_p && i_p <= 1.0)) throw ArgumentError("train: need 0 <= i_n < i_p <= 1");
  if (!(lambda >= 0.0)) throw ArgumentError("train: lambda must be >= 0");
  if (!(learning_rate >= 0.0)) throw ArgumentError("train: learning_rate must be >= 0");
  if (batch_size < 1 || epochs < 0 || samples_per_kind < 1 || top_k_candidates < 1) {
    throw ArgumentError("train: batch_size, samples_per_kind and top_k_candidates must be >= 1");
  }
  if (!(grad_clip > 0.0)) throw ArgumentError("train: grad_clip must be > 0");
  preselect_nms.validate();
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"i_p", cfg.i_p},
          {"i_n", cfg.i_n},
          {"lambda", cfg.lambda},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"samples_per_kind", cfg.samples_per_kind},
          {"top_k_candidates", cfg.top_k_candidates},
          {"grad_clip", cfg.grad_clip},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"adam_eps", cfg.adam_eps},
          {"iou_target", cfg.iou_target == IouTarget::input ? "input" : "refined"},
          {"detach_stage_inputs", cfg.detach_stage_inputs},
          {"target_gradients", cfg.target_gradients},
          {"preselect_nms",
           {{"sigma", cfg.preselect_nms.sigma},
            {"score_floor", cfg.preselect_nms.score_floor},
            {"top_k", cfg.preselect_nms.top_k}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
  if (!j.is_object()) throw FormatError("train config must be a JSON object");
  read_if(j, "i_p", cfg.i_p);
  read_if(j, "i_n", cfg.i_n);
  read_if(j, "lambda", cfg.lambda);
  read_if(j, "learning_rate", cfg.learning_rate);
  read_if(j, "batch_size", cfg.batch_size);
  read_if(j, "epochs", cfg.epochs);
  read_if(j, "seed", cfg.seed);
  read_if(j, "samples_per_kind", cfg.samples_per_kind);
  read_if(j, "top_k_candidates", cfg.top_k_candidates);
  read_if(j, "grad_clip", cfg.grad_clip);
  read_if(j, "beta1", cfg.beta1);
  read_if(j, "beta2", cfg.beta2);
  read_if(j, "adam_eps", cfg.adam_eps);
  if (j.contains("iou_target")) {
    const auto v = j.at("iou_target").get<std::string>();
    if (v == "input") {
      cfg.iou_target = IouTarget::input;
    } else if (v == "refined") {
      cfg.iou_target = IouTarget::refined;
    } else {
      throw ArgumentError("unknown iou_target '" + v + "'");
    }
  }
  read_if(j, "detach_stage_inputs", cfg.detach_stage_inputs);
  read_if(j, "target_gradients", cfg.target_gradients);
  if (j.contains("preselect_nms")) {
    const auto& n = j.at("preselect_nms");
    read_if(n, "sigma", cfg.preselect_nms.sigma);
    read_if(n, "score_floor", cfg.preselect_nms.score_floor);
    read_if(n, "top_k", cfg.preselect_nms.top_k);
  }
  cfg.validate();
  return cfg;
}

std::vector<LabeledProposal> assign_labels(const std::vector<Proposal>& candidates,
                                           const std::vector<Interval>& gts, double i_p, double i_n) {
  if (!(0.0 <= i_n && i_n < i_p && i_p <= 1.0)) throw ArgumentError("assign_labels: need 0 <= i_n < i_p <= 1");
  std::vector<LabeledProposal> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    LabeledProposal lp;
    lp.proposal = c;
    std::size_t best = gts.size();
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double overlap = evalkit::tiou(c.interval(), gts[g]);
      if (best == gts.size() || overlap > best_iou || (overlap == best_iou && gts[g].start < gts[best].start)) {
        best = g;
        best_iou = overlap;
      }
    }
    if (best < gts.size()) lp.matched_gt = gts[best];
    lp.g_iou = best_iou;
    lp.kind = kind_for(best_iou, i_p, i_n);
    out.push_back(lp);
  }
  return out;
}

SampleResult sample_balanced(const std::vector<LabeledProposal>& labeled, int per_kind, std::uint64_t seed) {
  if (per_kind < 1) throw ArgumentError("sample_balanced: per_kind must be >= 1");
  std::mt19937_64 rng(seed);
  SampleResult result;
  for (const SampleKind kind : {SampleKind::positive, SampleKind::incomplete, SampleKind::negative}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      if (labeled[i].kind == kind) members.push_back(i);
    }
    const auto want = static_cast<std::size_t>(per_kind);
    if (members.empty()) {
      ++result.empty_kinds;
      continue;
    }
    if (members.size() >= want) {
      for (std::size_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
        std::swap(members[i], members[pick(rng)]);
        result.samples.push_back(labeled[members[i]]);
      }
    } else {
      for (const auto m : members) result.samples.push_back(labeled[m]);
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t i = members.size(); i < want; ++i) result.samples.push_back(labeled[members[pick(rng)]]);
    }
  }
  return result;
}

RegressionTargets regression_targets(const Interval& p, const Interval& g) {
  const double wp = p.length();
  const double wg = g.length();
  if (!(wp > 0.0)) throw ArgumentError("regression_targets: proposal must have positive width");
  if (!(wg > 0.0)) throw ArgumentError("regression_targets: ground truth must have positive width");
  return {(p.start - g.start) / wp, (p.end - g.end) / wp, (p.center() - g.center()) / wp, std::log(wg / wp)};
}

double smooth_l1(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

LossBreakdown stage_loss(const std::vector<StagePrediction>& predictions,
                         const std::vector<LabeledProposal>& labels, double lambda) {
  if (predictions.size() != labels.size()) throw ArgumentError("stage_loss: predictions and labels differ in length");
  LossBreakdown out;
  out.num_samples = labels.size();
  double iou_sum = 0.0;
  double reg_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& pr = predictions[i];
    const auto& lb = labels[i];
    iou_sum += smooth_l1(pr.conf - lb.g_iou);
    if (lb.kind != SampleKind::positive) continue;
    if (!lb.matched_gt) throw ArgumentError("stage_loss: positive sample without a matched ground truth");
    const auto t = regression_targets(lb.proposal.interval(), *lb.matched_gt);
    reg_sum += smooth_l1(pr.dx - t.center) + smooth_l1(pr.dw - t.width) + smooth_l1(pr.ds - t.start) +
               smooth_l1(pr.de - t.end);
    ++out.num_positive;
  }
  out.iou = labels.empty() ? 0.0 : iou_sum / static_cast<double>(labels.size());
  out.reg = out.num_positive == 0 ? 0.0 : reg_sum / static_cast<double>(out.num_positive);
  out.total = out.iou + lambda * out.reg;
  return out;
}

BatchLoss batch_loss(const Model& model, const std::vector<TrainItem>& batch, const TrainConfig& cfg,
                     bool with_grads) {
  const std::size_t n_stages = model.stages.size();
  ad::Tape tape(with_grads);
  const ModelVars vars = bind_model(tape, model);

  std::vector<std::vector<ad::Var>> iou_terms(n_stages), reg_terms(n_stages);
  for (const auto& item : batch) {
    if (item.features == nullptr) throw ArgumentError("batch_loss: item without features");
    if (item.samples.empty()) continue;
    const auto valid = static_cast<Eigen::Index>(item.features->valid_len);
    const ad::Var fenc = encode(tape.constant(item.features->features), valid, vars, model);
    for (const auto& sample : item.samples) {
      const auto chain = tbr::tbr_chain(fenc, valid, tape.constant(sample.proposal.start),
                                        tape.constant(sample.proposal.end), vars.stages, model.stages,
                                        cfg.detach_stage_inputs);
      for (std::size_t t = 0; t < n_stages; ++t) {
        const auto& st = chain[t];
        const Proposal input{st.in_start.scalar(), st.in_end.scalar(), 0.0};
        const auto label = assign_labels({input}, item.gts, cfg.i_p, cfg.i_n).front();
        // Targets are functions of the stage input; they only carry gradient on request.
        const ad::Var in_s = cfg.target_gradients ? st.in_start : tape.constant(st.in_start.value());
        const ad::Var in_e = cfg.target_gradients ? st.in_end : tape.constant(st.in_end.value());
        ad::Var g_iou = tape.constant(0.0);
        if (label.matched_gt) {
          if (cfg.iou_target == IouTarget::input) {
            g_iou = tiou_var(in_s, in_e, *label.matched_gt);
          } else if (cfg.target_gradients) {
            g_iou = tiou_var(st.out_start, st.out_end, *label.matched_gt);
          } else {
            g_iou = tape.constant(
                evalkit::tiou({st.out_start.scalar(), st.out_end.scalar()}, *label.matched_gt));
          }
        }
        iou_terms[t].push_back(ad::smooth_l1(st.conf - g_iou));
        if (label.kind != SampleKind::positive) continue;
        const Interval& g = *label.matched_gt;
        const auto w = in_e - in_s;
        const auto gs = (in_s - g.start) / w;
        const auto ge = (in_e - g.end) / w;
        const auto gx = ((in_s + in_e) * 0.5 - g.center()) / w;
        const auto gw = ad::log(tape.constant(g.length()) / w);
        reg_terms[t].push_back(ad::smooth_l1(st.dx - gx) + ad::smooth_l1(st.dw - gw) + ad::smooth_l1(st.ds - gs) +
                               ad::smooth_l1(st.de - ge));
      }
    }
  }

  BatchLoss out;
  std::vector<ad::Var> objective;
  for (std::size_t t = 0; t < n_stages; ++t) {
    LossBreakdown br;
    br.num_samples = iou_terms[t].size();
    br.num_positive = reg_terms[t].size();
    if (iou_terms[t].empty()) {
      out.per_stage.push_back(br);
      continue;
    }
    const auto l_iou = sum_all(iou_terms[t]) * (1.0 / static_cast<double>(br.num_samples));
    objective.push_back(l_iou);
    br.iou = l_iou.scalar();
    if (!reg_terms[t].empty()) {
      const auto l_reg = sum_all(reg_terms[t]) * (1.0 / static_cast<double>(br.num_positive));
      objective.push_back(l_reg * cfg.lambda);
      br.reg = l_reg.scalar();
    }
    br.total = br.iou + cfg.lambda * br.reg;
    out.iou += br.iou;
    out.reg += br.reg;
    out.per_stage.push_back(br);
  }
  if (objective.empty()) {
    if (with_grads) {
      for (const auto& [name, m] : model_tensors(model)) out.grads.push_back(Matrix::Zero(m->rows(), m->cols()));
    }
    return out;
  }
  const ad::Var total = sum_all(objective);
  out.total = total.scalar();
  if (with_grads) {
    tape.backward(total);
    for (const auto& v : vars.list()) out.grads.push_back(tape.grad(v));
  }
  return out;
}

std::vector<LabeledProposal> prepare_candidates(const seqio::VideoAnnotation& ann, const TrainConfig& cfg) {
  postproc::SoftNmsConfig nms = cfg.preselect_nms;
  nms.top_k = cfg.top_k_candidates;
  const auto kept = postproc::soft_nms(ann.candidates, nms);
  return assign_labels(kept, ann.gt_intervals(), cfg.i_p, cfg.i_n);
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double learning_rate) {
  if (params.size() != grads.size()) throw ArgumentError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, t_);
  const double bias2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseAbs2();
    const Matrix m_hat = m_[i] / bias1;
    const Matrix v_hat = v_[i] / bias2;
    *params[i] -= (learning_rate * m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
  }
}

TrainResult train_model(const std::vector<seqio::Video>& dataset, Model model, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw ArgumentError("train_model: empty dataset");
  for (const auto& v : dataset) {
    if (static_cast<int>(v.features.channels()) != model.config.channels) {
      throw ArgumentError("train_model: feature width differs from the model's channel count");
    }
  }

  std::vector<std::vector<LabeledProposal>> pools;
  std::vector<std::vector<Interval>> gts;
  for (const auto& v : dataset) {
    pools.push_back(prepare_candidates(v.annotation, cfg));
    gts.push_back(v.annotation.gt_intervals());
  }

  TrainResult result;
  std::vector<Matrix*> params;
  std::vector<std::string> names;
  for (auto& [name, m] : model_tensors(model)) {
    params.push_back(m);
    names.push_back(name);
  }
  Adam adam(cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::mt19937_64 order_rng(substream_seed(cfg.seed, "order"));
  const std::uint64_t sampling_seed = substream_seed(cfg.seed, "sampling");

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochStats stats;
    stats.epoch = epoch + 1;
    int batches = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrainItem> batch;
      for (std::size_t i = first; i < last; ++i) {
        const std::size_t idx = order[i];
        auto sampled = sample_balanced(
            pools[idx], cfg.samples_per_kind,
            substream_seed(sampling_seed, static_cast<std::uint64_t>(epoch) * dataset.size() + idx));
        result.empty_kind_events += sampled.empty_kinds;
        batch.push_back(TrainItem{&dataset[idx].features, gts[idx], std::move(sampled.samples)});
      }
      auto loss = batch_loss(model, batch, cfg, true);

      double grad_norm_sq = 0.0;
      for (const auto& g : loss.grads) grad_norm_sq += g.squaredNorm();
      if (!std::isfinite(loss.total) || !std::isfinite(grad_norm_sq)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch + 1 << ", batch " << batches + 1 << " (loss " << loss.total
            << "); parameter norms:";
        for (std::size_t i = 0; i < params.size(); ++i) msg << ' ' << names[i] << '=' << params[i]->norm();
        throw TrainingError(msg.str());
      }
      const double grad_norm = std::sqrt(grad_norm_sq);
      if (grad_norm > cfg.grad_clip) {
        for (auto& g : loss.grads) g *= cfg.grad_clip / grad_norm;
      }
      adam.step(params, loss.grads, cfg.learning_rate);

      stats.mean_total += loss.total;
      stats.mean_iou += loss.iou;
      stats.mean_reg += loss.reg;
      ++batches;
    }
    if (batches > 0) {
      stats.mean_total /= batches;
      stats.mean_iou /= batches;
      stats.mean_reg /= batches;
    }
    result.history.push_back(stats);
  }
  result.model = std::move(model);
  return result;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,mean_total,mean_iou,mean_reg\n";
  for (const auto& h : history) out << h.epoch << ',' << h.mean_total << ',' << h.mean_iou << ',' << h.mean_reg << '\n';
  return out.str();
}

GradCheckResult grad_check(const LossWithGradient& fn, const std::vector<Matrix>& params, double epsilon,
                           const std::vector<std::string>& names, std::size_t max_per_tensor) {
  if (!(epsilon > 0.0)) throw ArgumentError("grad_check: epsilon must be > 0");
  std::vector<Matrix> analytic;
  fn(params, &analytic);
  if (analytic.size() != params.size()) throw ArgumentError("grad_check: gradient count differs from parameters");

  GradCheckResult result;
  std::vector<Matrix> work = params;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const Eigen::Index n = work[i].size();
    if (analytic[i].size() != n) throw ArgumentError("grad_check: gradient shape differs from parameter");
    const Eigen::Index stride =
        max_per_tensor == 0 ? 1 : std::max<Eigen::Index>(1, n / static_cast<Eigen::Index>(max_per_tensor));
    for (Eigen::Index j = 0; j < n; j += stride) {
      double* slot = work[i].data() + j;
      const double original = *slot;
      const double up = original + epsilon;
      const double down = original - epsilon;
      *slot = up;
      const double f_up = fn(work, nullptr);
      *slot = down;
      const double f_down = fn(work, nullptr);
      *slot = original;
      const double numeric = (f_up - f_down) / (up - down);
      const double a = analytic[i].data()[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.checked;
      if (rel > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = rel;
        result.worst_tensor = i < names.size() ? names[i] : std::to_string(i);
        result.worst_index = j;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

LossWithGradient pipeline_objective(const Model& model, std::vector<TrainItem> batch, const TrainConfig& cfg) {
  return [model, batch = std::move(batch), cfg](const std::vector<Matrix>& params, std::vector<Matrix>* grads) {
    Model m = model;
    auto slots = model_tensors(m);
    if (slots.size() != params.size()) throw ArgumentError("pipeline_objective: parameter count mismatch");
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i].second = params[i];
    auto loss = batch_loss(m, batch, cfg, grads != nullptr);
    if (grads != nullptr) *grads = std::move(loss.grads);
    return loss.total;
  };
}

}  // namespace tcanet::train
