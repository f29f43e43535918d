#pragma once

#include "tcanet/autodiff.hpp"
#include "tcanet/common.hpp"
#include "tcanet/seqio.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tcanet::lgte {

/// Softmax temperature: sqrt(C / N) per group, or sqrt(C) over all channels.
enum class ScaleMode { group_dim, full_dim };

/// `ln_skip`: f_b = LN(f_a) + f_a.  `standard`: f_b = LN(F + f_a).
enum class ResidualMode { ln_skip, standard };

/// Learnable tensors of one block. Row vectors (biases, norms) are 1 x n.
template <class T>
struct LgteTensors {
  T gamma, rho, phi, w_o;
  T ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  T ln1_gain, ln1_shift, ln2_gain, ln2_shift;

  template <class A, class B, class F>
  static void zip(A& a, B& b, F&& f) {
    f("gamma", a.gamma, b.gamma);
    f("rho", a.rho, b.rho);
    f("phi", a.phi, b.phi);
    f("w_o", a.w_o, b.w_o);
    f("ffn.w1", a.ffn_w1, b.ffn_w1);
    f("ffn.b1", a.ffn_b1, b.ffn_b1);
    f("ffn.w2", a.ffn_w2, b.ffn_w2);
    f("ffn.b2", a.ffn_b2, b.ffn_b2);
    f("ln1.gain", a.ln1_gain, b.ln1_gain);
    f("ln1.shift", a.ln1_shift, b.ln1_shift);
    f("ln2.gain", a.ln2_gain, b.ln2_gain);
    f("ln2.shift", a.ln2_shift, b.ln2_shift);
  }

  template <class Self, class F>
  static void each(Self& self, F&& f) {
    zip(self, self, [&](const char* name, auto& x, auto&) { f(name, x); });
  }
};

struct LgteSettings {
  int num_groups = 8;
  int num_local_groups = 4;
  int window_size = 9;
  ScaleMode scale_mode = ScaleMode::group_dim;
  ResidualMode residual_mode = ResidualMode::ln_skip;
};

struct LgteBlockParams : LgteTensors<Matrix>, LgteSettings {
  Eigen::Index channels() const { return gamma.rows(); }
  Eigen::Index hidden() const { return ffn_w1.cols(); }
  /// Throws ArgumentError on inconsistent shapes or settings.
  void validate() const;
};

using LgteBlockVars = LgteTensors<ad::Var>;

struct EncoderParams {
  std::vector<LgteBlockParams> blocks;
};

/// Uniform(+-1/sqrt(fan_in)) projections, zero biases, unit LayerNorm gains.
/// `hidden == 0` selects 4 * channels.
LgteBlockParams init_block(Eigen::Index channels, Eigen::Index hidden, const LgteSettings& settings,
                           std::mt19937_64& rng);

/// softmax(sims / sqrt(d)) with max subtraction.
Vector scaled_group_softmax(const Vector& sims, int d);

/// Windowed attention of one group. Keys outside [0, valid_len) are excluded;
/// `valid_len < 0` means all rows.
Matrix lte_group_forward(const Matrix& q, const Matrix& k, const Matrix& v, int window_size,
                         Eigen::Index valid_len = -1);

/// Full attention of one group over rows [0, valid_len).
Matrix gte_group_forward(const Matrix& q, const Matrix& k, const Matrix& v, Eigen::Index valid_len = -1);

Matrix lgte_block_forward(const Matrix& features, const LgteBlockParams& params, Eigen::Index valid_len);

Matrix encoder_forward(const seqio::FeatureSequence& seq, const EncoderParams& params);

LgteBlockVars bind_block(ad::Tape& tape, const LgteBlockParams& params);

/// Splits q/k/v into `settings.num_groups` channel groups; the first
/// `num_local_groups` attend within the window, the rest globally.
ad::Var grouped_attention(ad::Var q, ad::Var k, ad::Var v, const LgteSettings& settings,
                          Eigen::Index valid_len);

ad::Var lgte_block(ad::Var features, const LgteBlockVars& vars, const LgteSettings& settings,
                   Eigen::Index valid_len);

}  // namespace tcanet::lgte
