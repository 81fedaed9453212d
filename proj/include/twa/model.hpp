#pragma once

// Small teacher-forced encoder-decoder with hand-written reverse mode.
//
// Layout: learned token + position embeddings, one encoder block
// (self-attention, tanh feed-forward, residuals) and one decoder block
// (causal self-attention, cross-attention, feed-forward, residuals),
// followed by an untied output projection. Activations are row-major
// sequences: a (length x embed_dim) matrix per sequence.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twa/common.hpp"

namespace twa {

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 32;
  int hidden_dim = 64;
  int num_heads = 2;
  int max_src_len = 32;
  int max_tgt_len = 32;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct AttentionParams {
  Matrix<Scalar> wq, wk, wv, wo;  // embed_dim x embed_dim
};

template <typename Scalar>
struct FeedForwardParams {
  Matrix<Scalar> w1, b1;  // d x h, 1 x h
  Matrix<Scalar> w2, b2;  // h x d, 1 x d
};

/// All trainable tensors. Gradients and optimizer moments reuse this type.
template <typename Scalar>
struct Parameters {
  Matrix<Scalar> src_embed, tgt_embed;  // vocab x d
  Matrix<Scalar> src_pos, tgt_pos;      // max_len x d
  AttentionParams<Scalar> enc_attn;
  FeedForwardParams<Scalar> enc_ff;
  AttentionParams<Scalar> dec_self_attn;
  AttentionParams<Scalar> dec_cross_attn;
  FeedForwardParams<Scalar> dec_ff;
  Matrix<Scalar> out_w;  // d x vocab
  Matrix<Scalar> out_b;  // 1 x vocab

  /// Visits (name, tensor) in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::vector<Matrix<Scalar>*> tensors() {
    std::vector<Matrix<Scalar>*> out;
    for_each([&](auto&&, Matrix<Scalar>& m) { out.push_back(&m); });
    return out;
  }
  std::vector<const Matrix<Scalar>*> tensors() const {
    std::vector<const Matrix<Scalar>*> out;
    for_each([&](auto&&, const Matrix<Scalar>& m) { out.push_back(&m); });
    return out;
  }

  std::size_t count() const;
  Parameters zeros_like() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& p, F& f) {
    f("src_embed", p.src_embed);
    f("tgt_embed", p.tgt_embed);
    f("src_pos", p.src_pos);
    f("tgt_pos", p.tgt_pos);
    visit_attention("enc_attn", p.enc_attn, f);
    visit_ff("enc_ff", p.enc_ff, f);
    visit_attention("dec_self_attn", p.dec_self_attn, f);
    visit_attention("dec_cross_attn", p.dec_cross_attn, f);
    visit_ff("dec_ff", p.dec_ff, f);
    f("out_w", p.out_w);
    f("out_b", p.out_b);
  }
  template <typename A, typename F>
  static void visit_attention(const std::string& prefix, A& a, F& f) {
    f(prefix + ".wq", a.wq);
    f(prefix + ".wk", a.wk);
    f(prefix + ".wv", a.wv);
    f(prefix + ".wo", a.wo);
  }
  template <typename B, typename F>
  static void visit_ff(const std::string& prefix, B& b, F& f) {
    f(prefix + ".w1", b.w1);
    f(prefix + ".b1", b.b1);
    f(prefix + ".w2", b.w2);
    f(prefix + ".b2", b.b2);
  }
};

// Parameter-set arithmetic (structure must match).
template <typename Scalar>
void axpy(Scalar alpha, const Parameters<Scalar>& x, Parameters<Scalar>& y);
template <typename Scalar>
void scale(Parameters<Scalar>& x, Scalar alpha);
template <typename Scalar>
Scalar dot(const Parameters<Scalar>& a, const Parameters<Scalar>& b);
template <typename Scalar>
Scalar squared_norm(const Parameters<Scalar>& x);
template <typename Scalar>
bool all_finite(const Parameters<Scalar>& x);

template <typename Scalar>
struct Seq2SeqModel {
  ModelConfig config;
  Parameters<Scalar> params;

  std::size_t parameter_count() const { return params.count(); }
};

/// Uniform(-0.08, 0.08) initialization from config.seed.
template <typename Scalar>
Seq2SeqModel<Scalar> make_model(const ModelConfig& config);

template <typename To, typename From>
Seq2SeqModel<To> cast_model(const Seq2SeqModel<From>& model);

template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> xq, xkv;   // inputs
  Matrix<Scalar> q, k, v;   // projections
  std::vector<Matrix<Scalar>> probs;  // per head, rows = queries
  Matrix<Scalar> heads;     // concatenated head outputs
};

template <typename Scalar>
struct FeedForwardCache {
  Matrix<Scalar> x, h;  // input, tanh activations
};

/// Activations from one forward pass. backward() consumes it once.
template <typename Scalar>
struct ForwardTrace {
  std::vector<int> src, tgt;
  AttentionCache<Scalar> enc_attn;
  FeedForwardCache<Scalar> enc_ff;
  Matrix<Scalar> enc_out;
  AttentionCache<Scalar> dec_self_attn;
  AttentionCache<Scalar> dec_cross_attn;
  FeedForwardCache<Scalar> dec_ff;
  Matrix<Scalar> dec_out;
  bool consumed = false;
};

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> logits;  // tgt.size() x vocab; row t conditions on tgt[0..t]
  ForwardTrace<Scalar> trace;
};

/// Throws DataError on out-of-range ids or over-length sequences.
template <typename Scalar>
ForwardResult<Scalar> forward(const Seq2SeqModel<Scalar>& model, std::span<const int> src, std::span<const int> tgt);

/// Gradient of sum(grad_logits .* logits) with respect to every parameter.
/// Throws std::logic_error if the trace was already consumed.
template <typename Scalar>
Parameters<Scalar> backward(const Seq2SeqModel<Scalar>& model, ForwardTrace<Scalar>& trace,
                            const Matrix<Scalar>& grad_logits);

/// Accumulating variant: adds into `grads`.
template <typename Scalar>
void backward(const Seq2SeqModel<Scalar>& model, ForwardTrace<Scalar>& trace, const Matrix<Scalar>& grad_logits,
              Parameters<Scalar>& grads);

/// Argmax decoding (ties to the lowest id) until EOS or max_len tokens.
/// The result excludes BOS and includes EOS when produced.
template <typename Scalar>
std::vector<int> greedy_decode(const Seq2SeqModel<Scalar>& model, std::span<const int> src, int max_len);

/// Row-wise log-softmax.
template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& logits);

/// log p(tgt[t + 1] | ...) for t = 0 .. tgt.size() - 2.
template <typename Scalar>
Vector<Scalar> realized_logprobs(const Matrix<Scalar>& logits, std::span<const int> tgt);

/// dL/dlogits given dL/dlog p of the realized tokens. The last row is zero.
template <typename Scalar>
Matrix<Scalar> logit_gradient(const Matrix<Scalar>& logits, std::span<const int> tgt,
                              const Vector<Scalar>& grad_logp);

}  // namespace twa
