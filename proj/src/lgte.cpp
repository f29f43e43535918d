#include "tcanet/lgte.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace tcanet::lgte {
namespace {

// Single-group masked attention. `half_window < 0` selects global attention.
// Writes the dense T x T weight matrix (zeros off-support) when requested.
Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v, int half_window,
                        Eigen::Index valid_len, double scale, Matrix* weights) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() || k.cols() != v.cols()) {
    throw ArgumentError("attention: q, k, v must share shape");
  }
  const Eigen::Index T = q.rows();
  const Eigen::Index n_valid = valid_len < 0 ? T : std::min(valid_len, T);
  Matrix out = Matrix::Zero(T, v.cols());
  if (weights != nullptr) weights->setZero(T, T);
  Vector w;
  for (Eigen::Index i = 0; i < T; ++i) {
    const Eigen::Index lo = half_window < 0 ? 0 : std::max<Eigen::Index>(0, i - half_window);
    const Eigen::Index hi = half_window < 0 ? n_valid - 1 : std::min<Eigen::Index>(n_valid - 1, i + half_window);
    if (lo > hi) continue;
    const Eigen::Index m = hi - lo + 1;
    w.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) w(j) = q.row(i).dot(k.row(lo + j)) * scale;
    const double top = w.maxCoeff();
    w = (w.array() - top).exp();
    w /= w.sum();
    for (Eigen::Index j = 0; j < m; ++j) out.row(i) += w(j) * v.row(lo + j);
    if (weights != nullptr) weights->row(i).segment(lo, m) = w.transpose();
  }
  return out;
}

double scale_for(const LgteSettings& s, Eigen::Index channels) {
  const Eigen::Index d = s.scale_mode == ScaleMode::group_dim ? channels / s.num_groups : channels;
  return 1.0 / std::sqrt(static_cast<double>(d));
}

void require_window(int window_size) {
  if (window_size < 1 || window_size % 2 == 0) throw ArgumentError("window_size must be odd and >= 1");
}

}  // namespace

void LgteBlockParams::validate() const {
  const Eigen::Index C = channels();
  if (C < 1 || num_groups < 1 || C % num_groups != 0) {
    throw ArgumentError("lgte: channels must be divisible by num_groups");
  }
  if (num_local_groups < 0 || num_local_groups > num_groups) {
    throw ArgumentError("lgte: num_local_groups must lie in [0, num_groups]");
  }
  require_window(window_size);
  const auto square = [C](const Matrix& m) { return m.rows() == C && m.cols() == C; };
  const auto row = [](const Matrix& m, Eigen::Index n) { return m.rows() == 1 && m.cols() == n; };
  const Eigen::Index H = hidden();
  if (!square(gamma) || !square(rho) || !square(phi) || !square(w_o) || ffn_w1.rows() != C || H < 1 ||
      !row(ffn_b1, H) || ffn_w2.rows() != H || ffn_w2.cols() != C || !row(ffn_b2, C) ||
      !row(ln1_gain, C) || !row(ln1_shift, C) || !row(ln2_gain, C) || !row(ln2_shift, C)) {
    throw ArgumentError("lgte: parameter shapes are inconsistent");
  }
}

LgteBlockParams init_block(Eigen::Index channels, Eigen::Index hidden, const LgteSettings& settings,
                           std::mt19937_64& rng) {
  if (hidden == 0) hidden = 4 * channels;
  const auto uniform = [&rng](Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(static_cast<double>(rows)),
                                                1.0 / std::sqrt(static_cast<double>(rows)));
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    }
    return m;
  };
  LgteBlockParams p;
  static_cast<LgteSettings&>(p) = settings;
  p.gamma = uniform(channels, channels);
  p.rho = uniform(channels, channels);
  p.phi = uniform(channels, channels);
  p.w_o = uniform(channels, channels);
  p.ffn_w1 = uniform(channels, hidden);
  p.ffn_b1 = Matrix::Zero(1, hidden);
  p.ffn_w2 = uniform(hidden, channels);
  p.ffn_b2 = Matrix::Zero(1, channels);
  p.ln1_gain = Matrix::Ones(1, channels);
  p.ln1_shift = Matrix::Zero(1, channels);
  p.ln2_gain = Matrix::Ones(1, channels);
  p.ln2_shift = Matrix::Zero(1, channels);
  p.validate();
  return p;
}

Vector scaled_group_softmax(const Vector& sims, int d) {
  if (d < 1) throw ArgumentError("scaled_group_softmax: d must be >= 1");
  if (sims.size() == 0) return sims;
  Vector w = sims / std::sqrt(static_cast<double>(d));
  w = (w.array() - w.maxCoeff()).exp();
  return w / w.sum();
}

Matrix lte_group_forward(const Matrix& q, const Matrix& k, const Matrix& v, int window_size,
                         Eigen::Index valid_len) {
  require_window(window_size);
  return masked_attention(q, k, v, window_size / 2, valid_len, 1.0 / std::sqrt(static_cast<double>(q.cols())),
                          nullptr);
}

Matrix gte_group_forward(const Matrix& q, const Matrix& k, const Matrix& v, Eigen::Index valid_len) {
  return masked_attention(q, k, v, -1, valid_len, 1.0 / std::sqrt(static_cast<double>(q.cols())), nullptr);
}

LgteBlockVars bind_block(ad::Tape& tape, const LgteBlockParams& params) {
  LgteBlockVars vars;
  LgteTensors<Matrix>::zip(params, vars, [&tape](const char*, const Matrix& m, ad::Var& v) {
    v = tape.parameter(m);
  });
  return vars;
}

ad::Var grouped_attention(ad::Var q, ad::Var k, ad::Var v, const LgteSettings& settings,
                          Eigen::Index valid_len) {
  const Eigen::Index T = q.rows();
  const Eigen::Index C = q.cols();
  if (k.rows() != T || v.rows() != T || k.cols() != C || v.cols() != C) {
    throw ArgumentError("grouped_attention: q, k, v must share shape");
  }
  if (settings.num_groups < 1 || C % settings.num_groups != 0) {
    throw ArgumentError("grouped_attention: channels not divisible by num_groups");
  }
  require_window(settings.window_size);
  const Eigen::Index d = C / settings.num_groups;
  const double scale = scale_for(settings, C);
  const int half = settings.window_size / 2;
  const bool keep_weights = q.tape()->recording();

  auto weights = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(settings.num_groups));
  Matrix out(T, C);
  for (int g = 0; g < settings.num_groups; ++g) {
    const Eigen::Index c0 = g * d;
    out.middleCols(c0, d) = masked_attention(
        q.value().middleCols(c0, d), k.value().middleCols(c0, d), v.value().middleCols(c0, d),
        g < settings.num_local_groups ? half : -1, valid_len, scale,
        keep_weights ? &(*weights)[static_cast<std::size_t>(g)] : nullptr);
  }

  return q.tape()->record(std::move(out), {q, k, v}, [q, k, v, weights, d, scale](const Matrix& grad, ad::Tape& t) {
    const Eigen::Index T = grad.rows();
    Matrix dq = Matrix::Zero(T, grad.cols());
    Matrix dk = Matrix::Zero(T, grad.cols());
    Matrix dv = Matrix::Zero(T, grad.cols());
    for (std::size_t g = 0; g < weights->size(); ++g) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(g) * d;
      const Matrix& W = (*weights)[g];
      const auto G = grad.middleCols(c0, d);
      dv.middleCols(c0, d) = W.transpose() * G;
      Matrix dW = G * v.value().middleCols(c0, d).transpose();
      Matrix dS = W.cwiseProduct(dW);
      const Vector row_sums = dS.rowwise().sum();
      dS -= (W.array().colwise() * row_sums.array()).matrix();
      dq.middleCols(c0, d) = scale * dS * k.value().middleCols(c0, d);
      dk.middleCols(c0, d) = scale * dS.transpose() * q.value().middleCols(c0, d);
    }
    t.accumulate(q, dq);
    t.accumulate(k, dk);
    t.accumulate(v, dv);
  });
}

ad::Var lgte_block(ad::Var features, const LgteBlockVars& vars, const LgteSettings& settings,
                   Eigen::Index valid_len) {
  if (features.cols() != vars.gamma.rows()) throw ArgumentError("lgte_block: channel mismatch");
  if (valid_len > features.rows()) throw ArgumentError("lgte_block: valid_len exceeds T");
  const ad::Var q = ad::matmul(features, vars.gamma);
  const ad::Var k = ad::matmul(features, vars.rho);
  const ad::Var v = ad::matmul(features, vars.phi);
  const ad::Var attended = grouped_attention(q, k, v, settings, valid_len);
  const ad::Var fa = ad::matmul(attended, vars.w_o);
  const ad::Var fb = settings.residual_mode == ResidualMode::ln_skip
                         ? ad::layer_norm(fa, vars.ln1_gain, vars.ln1_shift) + fa
                         : ad::layer_norm(features + fa, vars.ln1_gain, vars.ln1_shift);
  const ad::Var hidden = ad::relu(ad::add_row(ad::matmul(fb, vars.ffn_w1), vars.ffn_b1));
  const ad::Var ffn = ad::add_row(ad::matmul(hidden, vars.ffn_w2), vars.ffn_b2);
  const ad::Var out = ad::layer_norm(ffn + fb, vars.ln2_gain, vars.ln2_shift);
  return ad::zero_rows_from(out, valid_len);
}

Matrix lgte_block_forward(const Matrix& features, const LgteBlockParams& params, Eigen::Index valid_len) {
  params.validate();
  ad::Tape tape(false);
  const auto vars = bind_block(tape, params);
  return lgte_block(tape.constant(features), vars, params, valid_len).value();
}

Matrix encoder_forward(const seqio::FeatureSequence& seq, const EncoderParams& params) {
  ad::Tape tape(false);
  ad::Var x = tape.constant(seq.features);
  const auto valid = static_cast<Eigen::Index>(seq.valid_len);
  for (const auto& block : params.blocks) {
    block.validate();
    if (block.channels() != x.cols()) throw ArgumentError("encoder: block channel width differs from input");
    x = lgte_block(x, bind_block(tape, block), block, valid);
  }
  return x.value();
}

}  // namespace tcanet::lgte
