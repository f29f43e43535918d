#include "tcanet/tbr.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace tcanet::tbr {
namespace {

using Coefficients = std::vector<std::pair<double, double>>;

// Bin centers of the three regions, written as t = a * start + b * end.
Coefficients start_region(int bins, double extent) {
  Coefficients out;
  for (int k = 0; k < bins; ++k) {
    const double c = extent * (2.0 * (k + 0.5) / bins - 1.0);
    out.emplace_back(1.0 - c, c);
  }
  return out;
}

Coefficients center_region(int bins) {
  Coefficients out;
  for (int k = 0; k < bins; ++k) {
    const double u = (k + 0.5) / bins;
    out.emplace_back(1.0 - u, u);
  }
  return out;
}

Coefficients end_region(int bins, double extent) {
  Coefficients out;
  for (int k = 0; k < bins; ++k) {
    const double c = extent * (2.0 * (k + 0.5) / bins - 1.0);
    out.emplace_back(-c, 1.0 + c);
  }
  return out;
}

Matrix im2col(const Matrix& x, int kernel) {
  const Eigen::Index L = x.rows();
  const Eigen::Index C = x.cols();
  const int pad = (kernel - 1) / 2;
  Matrix cols = Matrix::Zero(L, kernel * C);
  for (Eigen::Index t = 0; t < L; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = t + j - pad;
      if (src >= 0 && src < L) cols.block(t, j * C, 1, C) = x.row(src);
    }
  }
  return cols;
}

void check_conv(Eigen::Index in_channels, const Matrix& weight, const Matrix& bias, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ArgumentError("conv1d: kernel must be odd and >= 1");
  if (weight.rows() != kernel * in_channels) throw ArgumentError("conv1d: weight rows != kernel * in_channels");
  if (bias.rows() != 1 || bias.cols() != weight.cols()) throw ArgumentError("conv1d: bias must be 1 x out");
}

ad::Var conv_stack(ad::Var x, ad::Var w1, ad::Var b1, ad::Var w2, ad::Var b2, int kernel) {
  return conv1d(ad::relu(conv1d(x, w1, b1, kernel)), w2, b2, kernel);
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace

void TbrStageParams::validate() const {
  if (bins < 1) throw ArgumentError("tbr: bins must be >= 1");
  if (!(boundary_extent > 0.0 && boundary_extent <= 0.5)) throw ArgumentError("tbr: boundary_extent must be in (0, 0.5]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tbr: tau must be in [0, 1]");
  const Eigen::Index C = channels();
  const Eigen::Index H = hidden();
  if (C < 1 || H < 1) throw ArgumentError("tbr: empty head");
  check_conv(C, frame_conv1_w, frame_conv1_b, frame_kernel);
  check_conv(H, frame_conv2_w, frame_conv2_b, frame_kernel);
  if (frame_conv2_w.cols() != 1) throw ArgumentError("tbr: frame head must output one channel");
  if (!share_frame_head) {
    check_conv(C, frame_end_conv1_w, frame_end_conv1_b, frame_kernel);
    check_conv(frame_end_conv1_w.cols(), frame_end_conv2_w, frame_end_conv2_b, frame_kernel);
    if (frame_end_conv2_w.cols() != 1) throw ArgumentError("tbr: frame head must output one channel");
  }
  check_conv(C, segment_conv1_w, segment_conv1_b, segment_kernel);
  check_conv(segment_conv1_w.cols(), segment_conv2_w, segment_conv2_b, segment_kernel);
  if (segment_conv2_w.cols() != 3) throw ArgumentError("tbr: segment head must output three channels");
}

TbrStageParams init_stage(Eigen::Index channels, Eigen::Index hidden, const TbrSettings& settings,
                          std::mt19937_64& rng) {
  TbrStageParams p;
  static_cast<TbrSettings&>(p) = settings;
  const int kf = settings.frame_kernel;
  const int ks = settings.segment_kernel;
  p.frame_conv1_w = uniform_matrix(kf * channels, hidden, rng);
  p.frame_conv1_b = Matrix::Zero(1, hidden);
  p.frame_conv2_w = uniform_matrix(kf * hidden, 1, rng);
  p.frame_conv2_b = Matrix::Zero(1, 1);
  if (!settings.share_frame_head) {
    p.frame_end_conv1_w = uniform_matrix(kf * channels, hidden, rng);
    p.frame_end_conv1_b = Matrix::Zero(1, hidden);
    p.frame_end_conv2_w = uniform_matrix(kf * hidden, 1, rng);
    p.frame_end_conv2_b = Matrix::Zero(1, 1);
  }
  p.segment_conv1_w = uniform_matrix(ks * channels, hidden, rng);
  p.segment_conv1_b = Matrix::Zero(1, hidden);
  p.segment_conv2_w = uniform_matrix(ks * hidden, 3, rng);
  p.segment_conv2_b = Matrix::Zero(1, 3);
  p.validate();
  return p;
}

TbrStageParams zero_stage(Eigen::Index channels, Eigen::Index hidden, const TbrSettings& settings) {
  std::mt19937_64 rng(0);
  TbrStageParams p = init_stage(channels, hidden, settings, rng);
  TbrTensors<Matrix>::each(p, [](const char*, Matrix& m) { m.setZero(); });
  return p;
}

TbrStageVars bind_stage(ad::Tape& tape, const TbrStageParams& params) {
  TbrStageVars vars;
  TbrTensors<Matrix>::zip(params, vars, [&tape](const char*, const Matrix& m, ad::Var& v) {
    if (m.size() > 0) v = tape.parameter(m);
  });
  return vars;
}

Matrix conv1d(const Matrix& x, const Matrix& weight, const Matrix& bias, int kernel) {
  check_conv(x.cols(), weight, bias, kernel);
  Matrix out = im2col(x, kernel) * weight;
  out.rowwise() += bias.row(0);
  return out;
}

ad::Var conv1d(ad::Var x, ad::Var weight, ad::Var bias, int kernel) {
  check_conv(x.cols(), weight.value(), bias.value(), kernel);
  auto cols = std::make_shared<Matrix>(im2col(x.value(), kernel));
  Matrix out = *cols * weight.value();
  out.rowwise() += bias.value().row(0);
  return x.tape()->record(std::move(out), {x, weight, bias}, [x, weight, bias, cols, kernel](const Matrix& g, ad::Tape& t) {
    if (t.requires_grad(weight)) t.accumulate(weight, cols->transpose() * g);
    if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
    if (!t.requires_grad(x)) return;
    const Matrix dcols = g * weight.value().transpose();
    const Eigen::Index L = x.rows();
    const Eigen::Index C = x.cols();
    const int pad = (kernel - 1) / 2;
    Matrix dx = Matrix::Zero(L, C);
    for (Eigen::Index r = 0; r < L; ++r) {
      for (int j = 0; j < kernel; ++j) {
        const Eigen::Index src = r + j - pad;
        if (src >= 0 && src < L) dx.row(src) += dcols.block(r, j * C, 1, C);
      }
    }
    t.accumulate(x, dx);
  });
}

ad::Var sample_rows(ad::Var fenc, Eigen::Index valid_len, ad::Var start, ad::Var end,
                    const std::vector<std::pair<double, double>>& coefficients) {
  const Eigen::Index L = valid_len < 0 ? fenc.rows() : valid_len;
  if (L < 1 || L > fenc.rows()) throw ArgumentError("temporal_roi_align: valid_len out of range");
  const double s = start.scalar();
  const double e = end.scalar();
  const auto K = static_cast<Eigen::Index>(coefficients.size());
  const Eigen::Index C = fenc.cols();

  struct Tap {
    Eigen::Index lo, hi;
    double frac;
    bool inside;  // d/dt is nonzero only strictly inside [0, 1]
  };
  auto taps = std::make_shared<std::vector<Tap>>();
  taps->reserve(coefficients.size());
  Matrix out(K, C);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto [a, b] = coefficients[static_cast<std::size_t>(k)];
    const double t = a * s + b * e;
    Tap tap{0, 0, 0.0, false};
    if (L > 1 && t > 0.0 && t < 1.0) {
      const double u = t * static_cast<double>(L - 1);
      tap.lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(u)), L - 1);
      tap.hi = std::min<Eigen::Index>(tap.lo + 1, L - 1);
      tap.frac = u - static_cast<double>(tap.lo);
      tap.inside = true;
    } else if (L > 1 && t >= 1.0) {
      tap.lo = tap.hi = L - 1;
    }
    out.row(k) = (1.0 - tap.frac) * fenc.value().row(tap.lo) + tap.frac * fenc.value().row(tap.hi);
    taps->push_back(tap);
  }
  return fenc.tape()->record(std::move(out), {fenc, start, end},
                             [fenc, start, end, taps, coefficients, L](const Matrix& g, ad::Tape& t) {
                               Matrix dfenc = Matrix::Zero(fenc.rows(), fenc.cols());
                               double ds = 0.0;
                               double de = 0.0;
                               for (std::size_t k = 0; k < taps->size(); ++k) {
                                 const Tap& tap = (*taps)[k];
                                 const auto row = static_cast<Eigen::Index>(k);
                                 dfenc.row(tap.lo) += (1.0 - tap.frac) * g.row(row);
                                 dfenc.row(tap.hi) += tap.frac * g.row(row);
                                 if (!tap.inside) continue;
                                 const double dt = g.row(row).dot(fenc.value().row(tap.hi) - fenc.value().row(tap.lo)) *
                                                   static_cast<double>(L - 1);
                                 ds += coefficients[k].first * dt;
                                 de += coefficients[k].second * dt;
                               }
                               t.accumulate(fenc, dfenc);
                               t.accumulate(start, Matrix::Constant(1, 1, ds));
                               t.accumulate(end, Matrix::Constant(1, 1, de));
                             });
}

ContextVars temporal_roi_align(ad::Var fenc, Eigen::Index valid_len, ad::Var start, ad::Var end, int bins,
                               double boundary_extent) {
  if (bins < 1) throw ArgumentError("temporal_roi_align: bins must be >= 1");
  if (!(end.scalar() > start.scalar())) throw ArgumentError("temporal_roi_align: zero-length proposal");
  return {sample_rows(fenc, valid_len, start, end, start_region(bins, boundary_extent)),
          sample_rows(fenc, valid_len, start, end, center_region(bins)),
          sample_rows(fenc, valid_len, start, end, end_region(bins, boundary_extent))};
}

Contexts temporal_roi_align(const Matrix& fenc, const Interval& p, int bins, double boundary_extent,
                            Eigen::Index valid_len) {
  ad::Tape tape(false);
  const auto ctx = temporal_roi_align(tape.constant(fenc), valid_len, tape.constant(p.start),
                                      tape.constant(p.end), bins, boundary_extent);
  return {ctx.start.value(), ctx.center.value(), ctx.end.value()};
}

FrameOffsets frame_level_head(const Matrix& fs, const Matrix& fe, const TbrStageParams& params) {
  params.validate();
  if (fs.cols() != params.channels() || fe.cols() != params.channels()) {
    throw ArgumentError("frame_level_head: context width differs from head input channels");
  }
  ad::Tape tape(false);
  const auto v = bind_stage(tape, params);
  const int k = params.frame_kernel;
  const auto start = ad::mean_rows(conv_stack(tape.constant(fs), v.frame_conv1_w, v.frame_conv1_b,
                                              v.frame_conv2_w, v.frame_conv2_b, k));
  const auto end =
      params.share_frame_head
          ? ad::mean_rows(conv_stack(tape.constant(fe), v.frame_conv1_w, v.frame_conv1_b, v.frame_conv2_w,
                                     v.frame_conv2_b, k))
          : ad::mean_rows(conv_stack(tape.constant(fe), v.frame_end_conv1_w, v.frame_end_conv1_b,
                                     v.frame_end_conv2_w, v.frame_end_conv2_b, k));
  return {start.scalar(), end.scalar()};
}

SegmentOutputs segment_level_head(const Matrix& fs, const Matrix& fc, const Matrix& fe,
                                  const TbrStageParams& params) {
  params.validate();
  if (fs.cols() != params.channels() || fc.cols() != params.channels() || fe.cols() != params.channels()) {
    throw ArgumentError("segment_level_head: context width differs from head input channels");
  }
  ad::Tape tape(false);
  const auto v = bind_stage(tape, params);
  const auto fa = ad::vcat({tape.constant(fs), tape.constant(fc), tape.constant(fe)});
  const Matrix out = ad::mean_rows(conv_stack(fa, v.segment_conv1_w, v.segment_conv1_b, v.segment_conv2_w,
                                              v.segment_conv2_b, params.segment_kernel))
                         .value();
  const double logit = out(0, 2);
  return {out(0, 0), out(0, 1), logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit))};
}

OffsetProposals apply_offsets(const Interval& p, double ds, double de, double dx, double dw) {
  // x2 -/+ w2 / 2 with x2 = x - dx * w, written around the endpoints so zero
  // offsets reproduce p bit for bit.
  const double w = p.length();
  const double half_growth = (w - w * std::exp(dw)) / 2.0;
  const double shift = dx * w;
  return {{p.start - ds * w, p.end - de * w}, {p.start + half_growth - shift, p.end - half_growth - shift}};
}

Interval fuse_proposals(const Interval& frame, const Interval& segment, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("fuse_proposals: tau must be in [0, 1]");
  return {tau * frame.start + (1.0 - tau) * segment.start, tau * frame.end + (1.0 - tau) * segment.end};
}

std::vector<StageVars> tbr_chain(ad::Var fenc, Eigen::Index valid_len, ad::Var start, ad::Var end,
                                 const std::vector<TbrStageVars>& vars,
                                 const std::vector<TbrStageParams>& stages, bool detach_inputs) {
  if (stages.empty()) throw ArgumentError("tbr_refine: at least one stage required");
  if (vars.size() != stages.size()) throw ArgumentError("tbr_chain: vars and stages differ in length");
  ad::Tape& tape = *fenc.tape();
  std::vector<StageVars> out;
  out.reserve(stages.size());
  ad::Var s = start;
  ad::Var e = end;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& p = stages[i];
    const auto& v = vars[i];
    if (fenc.cols() != p.channels()) throw ArgumentError("tbr: encoded width differs from head input channels");
    StageVars st;
    st.in_start = s;
    st.in_end = e;

    const auto ctx = temporal_roi_align(fenc, valid_len, s, e, p.bins, p.boundary_extent);
    const int kf = p.frame_kernel;
    st.ds = ad::mean_rows(conv_stack(ctx.start, v.frame_conv1_w, v.frame_conv1_b, v.frame_conv2_w, v.frame_conv2_b, kf));
    st.de = p.share_frame_head
                ? ad::mean_rows(conv_stack(ctx.end, v.frame_conv1_w, v.frame_conv1_b, v.frame_conv2_w, v.frame_conv2_b, kf))
                : ad::mean_rows(conv_stack(ctx.end, v.frame_end_conv1_w, v.frame_end_conv1_b, v.frame_end_conv2_w,
                                           v.frame_end_conv2_b, kf));
    const auto seg = ad::mean_rows(conv_stack(ad::vcat({ctx.start, ctx.center, ctx.end}), v.segment_conv1_w,
                                              v.segment_conv1_b, v.segment_conv2_w, v.segment_conv2_b,
                                              p.segment_kernel));
    st.dx = ad::element(seg, 0, 0);
    st.dw = ad::element(seg, 0, 1);
    st.conf = ad::sigmoid(ad::element(seg, 0, 2));

    const auto w = e - s;
    const auto s1 = s - st.ds * w;
    const auto e1 = e - st.de * w;
    const auto half_growth = (w - w * ad::exp(st.dw)) * 0.5;
    const auto shift = st.dx * w;
    const auto s2 = s + half_growth - shift;
    const auto e2 = e - half_growth - shift;
    const auto fused_s = s1 * p.tau + s2 * (1.0 - p.tau);
    const auto fused_e = e1 * p.tau + e2 * (1.0 - p.tau);
    st.out_start = ad::clamp(fused_s, 0.0, 1.0);
    st.out_end = ad::clamp(fused_e, 0.0, 1.0);
    if (!(st.out_end.scalar() - st.out_start.scalar() >= kMinWidth)) {
      st.degenerate = true;
      st.out_start = s;
      st.out_end = e;
    }
    if (detach_inputs) {
      s = tape.constant(st.out_start.value());
      e = tape.constant(st.out_end.value());
    } else {
      s = st.out_start;
      e = st.out_end;
    }
    out.push_back(st);
  }
  return out;
}

std::vector<std::vector<RefinedProposal>> tbr_refine(const Matrix& fenc, Eigen::Index valid_len,
                                                     const std::vector<Proposal>& proposals,
                                                     const std::vector<TbrStageParams>& stages,
                                                     RefineDiagnostics* diagnostics) {
  if (stages.empty()) throw ArgumentError("tbr_refine: at least one stage required");
  ad::Tape tape(false);
  std::vector<TbrStageVars> vars;
  for (const auto& st : stages) {
    st.validate();
    vars.push_back(bind_stage(tape, st));
  }
  const ad::Var fv = tape.constant(fenc);
  std::vector<std::vector<RefinedProposal>> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) {
    if (!(p.end > p.start)) throw ArgumentError("tbr_refine: zero-length proposal");
    const auto chain = tbr_chain(fv, valid_len, tape.constant(p.start), tape.constant(p.end), vars, stages);
    std::vector<RefinedProposal> refined;
    refined.reserve(chain.size());
    for (const auto& st : chain) {
      RefinedProposal r;
      r.start = st.out_start.scalar();
      r.end = st.out_end.scalar();
      r.conf = st.conf.scalar();
      r.ds = st.ds.scalar();
      r.de = st.de.scalar();
      r.dx = st.dx.scalar();
      r.dw = st.dw.scalar();
      r.degenerate = st.degenerate;
      if (st.degenerate) {
        if (!refined.empty()) r.conf = refined.back().conf;
        if (diagnostics != nullptr) ++diagnostics->degenerate;
      }
      refined.push_back(r);
    }
    out.push_back(std::move(refined));
  }
  return out;
}

double final_confidence(const std::vector<RefinedProposal>& stages, ConfMode mode) {
  if (stages.empty()) throw ArgumentError("final_confidence: no stages");
  if (mode == ConfMode::last) return stages.back().conf;
  double product = 1.0;
  for (const auto& s : stages) product *= s.conf;
  return product;
}

}  // namespace tcanet::tbr
