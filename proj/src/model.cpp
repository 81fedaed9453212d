#include "twa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "twa/tokenizer.hpp"

namespace twa {

void ModelConfig::validate() const {
  if (vocab_size <= 0 || embed_dim <= 0 || hidden_dim <= 0 || num_heads <= 0 || max_src_len <= 0 ||
      max_tgt_len <= 0) {
    throw UsageError("model dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) throw UsageError("embed_dim must be divisible by num_heads");
  if (vocab_size < kNumReserved) throw UsageError("vocab_size must cover the reserved ids");
}

template <typename Scalar>
std::size_t Parameters<Scalar>::count() const {
  std::size_t n = 0;
  for_each([&](auto&&, const Matrix<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::zeros_like() const {
  Parameters<Scalar> out = *this;
  out.for_each([](auto&&, Matrix<Scalar>& m) { m.setZero(); });
  return out;
}

template <typename Scalar>
void axpy(Scalar alpha, const Parameters<Scalar>& x, Parameters<Scalar>& y) {
  const auto xs = x.tensors();
  const auto ys = y.tensors();
  for (std::size_t i = 0; i < xs.size(); ++i) *ys[i] += alpha * *xs[i];
}

template <typename Scalar>
void scale(Parameters<Scalar>& x, Scalar alpha) {
  x.for_each([&](auto&&, Matrix<Scalar>& m) { m *= alpha; });
}

template <typename Scalar>
Scalar dot(const Parameters<Scalar>& a, const Parameters<Scalar>& b) {
  const auto as = a.tensors();
  const auto bs = b.tensors();
  Scalar s{0};
  for (std::size_t i = 0; i < as.size(); ++i) s += as[i]->cwiseProduct(*bs[i]).sum();
  return s;
}

template <typename Scalar>
Scalar squared_norm(const Parameters<Scalar>& x) {
  Scalar s{0};
  x.for_each([&](auto&&, const Matrix<Scalar>& m) { s += m.squaredNorm(); });
  return s;
}

template <typename Scalar>
bool all_finite(const Parameters<Scalar>& x) {
  bool ok = true;
  x.for_each([&](auto&&, const Matrix<Scalar>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename Scalar>
Seq2SeqModel<Scalar> make_model(const ModelConfig& config) {
  config.validate();
  const int d = config.embed_dim;
  const int h = config.hidden_dim;
  const int v = config.vocab_size;
  Seq2SeqModel<Scalar> model;
  model.config = config;
  auto& p = model.params;
  p.src_embed.resize(v, d);
  p.tgt_embed.resize(v, d);
  p.src_pos.resize(config.max_src_len, d);
  p.tgt_pos.resize(config.max_tgt_len, d);
  for (auto* a : {&p.enc_attn, &p.dec_self_attn, &p.dec_cross_attn}) {
    a->wq.resize(d, d);
    a->wk.resize(d, d);
    a->wv.resize(d, d);
    a->wo.resize(d, d);
  }
  for (auto* f : {&p.enc_ff, &p.dec_ff}) {
    f->w1.resize(d, h);
    f->b1.resize(1, h);
    f->w2.resize(h, d);
    f->b2.resize(1, d);
  }
  p.out_w.resize(d, v);
  p.out_b.resize(1, v);

  Rng rng(derive_seed(config.seed, "init"));
  // Column-major fill order, tensor by tensor in visit order.
  p.for_each([&](auto&&, Matrix<Scalar>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-0.08, 0.08));
    }
  });
  return model;
}

template <typename To, typename From>
Seq2SeqModel<To> cast_model(const Seq2SeqModel<From>& model) {
  Seq2SeqModel<To> out;
  out.config = model.config;
  // Shapes first, then values.
  out.params = make_model<To>(model.config).params;
  const auto src = model.params.tensors();
  const auto dst = out.params.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<To>();
  return out;
}

namespace {

template <typename Scalar>
void softmax_rows(Matrix<Scalar>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const Scalar mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

template <typename Scalar>
Matrix<Scalar> attention_forward(const AttentionParams<Scalar>& a, const Matrix<Scalar>& xq,
                                 const Matrix<Scalar>& xkv, int num_heads, bool causal,
                                 AttentionCache<Scalar>& cache) {
  const Eigen::Index d = a.wq.cols();
  const Eigen::Index dh = d / num_heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const Eigen::Index tq = xq.rows();
  const Eigen::Index tk = xkv.rows();

  cache.xq = xq;
  cache.xkv = xkv;
  cache.q.noalias() = xq * a.wq;
  cache.k.noalias() = xkv * a.wk;
  cache.v.noalias() = xkv * a.wv;
  cache.probs.resize(static_cast<std::size_t>(num_heads));
  cache.heads.resize(tq, d);
  for (int hd = 0; hd < num_heads; ++hd) {
    const Eigen::Index c0 = hd * dh;
    Matrix<Scalar> scores = scale * (cache.q.middleCols(c0, dh) * cache.k.middleCols(c0, dh).transpose());
    if (causal) {
      for (Eigen::Index i = 0; i < tq; ++i) {
        for (Eigen::Index j = i + 1; j < tk; ++j) scores(i, j) = -std::numeric_limits<Scalar>::infinity();
      }
    }
    softmax_rows(scores);
    cache.heads.middleCols(c0, dh).noalias() = scores * cache.v.middleCols(c0, dh);
    cache.probs[static_cast<std::size_t>(hd)] = std::move(scores);
  }
  return cache.heads * a.wo;
}

// Returns (d xq, d xkv); accumulates weight gradients into `g`.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> attention_backward(const AttentionParams<Scalar>& a,
                                                             const AttentionCache<Scalar>& cache,
                                                             const Matrix<Scalar>& d_out,
                                                             AttentionParams<Scalar>& g) {
  const Eigen::Index d = a.wq.cols();
  const auto num_heads = static_cast<Eigen::Index>(cache.probs.size());
  const Eigen::Index dh = d / num_heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  g.wo.noalias() += cache.heads.transpose() * d_out;
  const Matrix<Scalar> d_heads = d_out * a.wo.transpose();

  Matrix<Scalar> dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
  for (Eigen::Index hd = 0; hd < num_heads; ++hd) {
    const Eigen::Index c0 = hd * dh;
    const auto& p = cache.probs[static_cast<std::size_t>(hd)];
    const auto d_head = d_heads.middleCols(c0, dh);
    const Matrix<Scalar> dp = d_head * cache.v.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh).noalias() = p.transpose() * d_head;
    // softmax backward, row-wise
    const Vector<Scalar> row_dot = (dp.cwiseProduct(p)).rowwise().sum();
    const Matrix<Scalar> ds = scale * p.cwiseProduct(dp - row_dot.replicate(1, dp.cols()));
    dq.middleCols(c0, dh).noalias() = ds * cache.k.middleCols(c0, dh);
    dk.middleCols(c0, dh).noalias() = ds.transpose() * cache.q.middleCols(c0, dh);
  }
  g.wq.noalias() += cache.xq.transpose() * dq;
  g.wk.noalias() += cache.xkv.transpose() * dk;
  g.wv.noalias() += cache.xkv.transpose() * dv;
  Matrix<Scalar> dxq = dq * a.wq.transpose();
  Matrix<Scalar> dxkv = dk * a.wk.transpose();
  dxkv.noalias() += dv * a.wv.transpose();
  return {std::move(dxq), std::move(dxkv)};
}

template <typename Scalar>
Matrix<Scalar> feed_forward(const FeedForwardParams<Scalar>& f, const Matrix<Scalar>& x,
                            FeedForwardCache<Scalar>& cache) {
  cache.x = x;
  cache.h = ((x * f.w1).rowwise() + f.b1.row(0)).array().tanh().matrix();
  return (cache.h * f.w2).rowwise() + f.b2.row(0);
}

template <typename Scalar>
Matrix<Scalar> feed_forward_backward(const FeedForwardParams<Scalar>& f, const FeedForwardCache<Scalar>& cache,
                                     const Matrix<Scalar>& d_out, FeedForwardParams<Scalar>& g) {
  g.w2.noalias() += cache.h.transpose() * d_out;
  g.b2 += d_out.colwise().sum();
  const Matrix<Scalar> dz =
      (d_out * f.w2.transpose()).cwiseProduct((Scalar(1) - cache.h.array().square()).matrix());
  g.w1.noalias() += cache.x.transpose() * dz;
  g.b1 += dz.colwise().sum();
  return dz * f.w1.transpose();
}

template <typename Scalar>
void check_ids(const Seq2SeqModel<Scalar>& model, std::span<const int> ids, int max_len, const char* what) {
  if (ids.empty()) throw DataError(std::string(what) + " sequence is empty");
  if (static_cast<int>(ids.size()) > max_len) {
    throw DataError(std::string(what) + " length " + std::to_string(ids.size()) + " exceeds maximum " +
                    std::to_string(max_len));
  }
  for (int id : ids) {
    if (id < 0 || id >= model.config.vocab_size) {
      throw DataError(std::string(what) + " token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(model.config.vocab_size));
    }
  }
}

template <typename Scalar>
Matrix<Scalar> embed(const Matrix<Scalar>& table, const Matrix<Scalar>& pos, std::span<const int> ids) {
  Matrix<Scalar> x(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]) + pos.row(static_cast<Eigen::Index>(i));
  }
  return x;
}

template <typename Scalar>
Matrix<Scalar> encode_source(const Seq2SeqModel<Scalar>& model, std::span<const int> src,
                             ForwardTrace<Scalar>& trace) {
  const auto& p = model.params;
  const int heads = model.config.num_heads;
  const Matrix<Scalar> x0 = embed(p.src_embed, p.src_pos, src);
  const Matrix<Scalar> x1 = x0 + attention_forward(p.enc_attn, x0, x0, heads, false, trace.enc_attn);
  return x1 + feed_forward(p.enc_ff, x1, trace.enc_ff);
}

template <typename Scalar>
Matrix<Scalar> decode_target(const Seq2SeqModel<Scalar>& model, const Matrix<Scalar>& enc_out,
                             std::span<const int> tgt, ForwardTrace<Scalar>& trace) {
  const auto& p = model.params;
  const int heads = model.config.num_heads;
  const Matrix<Scalar> y0 = embed(p.tgt_embed, p.tgt_pos, tgt);
  const Matrix<Scalar> y1 = y0 + attention_forward(p.dec_self_attn, y0, y0, heads, true, trace.dec_self_attn);
  const Matrix<Scalar> y2 = y1 + attention_forward(p.dec_cross_attn, y1, enc_out, heads, false, trace.dec_cross_attn);
  trace.dec_out = y2 + feed_forward(p.dec_ff, y2, trace.dec_ff);
  return (trace.dec_out * p.out_w).rowwise() + p.out_b.row(0);
}

}  // namespace

template <typename Scalar>
ForwardResult<Scalar> forward(const Seq2SeqModel<Scalar>& model, std::span<const int> src, std::span<const int> tgt) {
  check_ids(model, src, model.config.max_src_len, "source");
  check_ids(model, tgt, model.config.max_tgt_len, "target");
  ForwardResult<Scalar> r;
  r.trace.src.assign(src.begin(), src.end());
  r.trace.tgt.assign(tgt.begin(), tgt.end());
  r.trace.enc_out = encode_source(model, src, r.trace);
  r.logits = decode_target(model, r.trace.enc_out, tgt, r.trace);
  return r;
}

template <typename Scalar>
void backward(const Seq2SeqModel<Scalar>& model, ForwardTrace<Scalar>& trace, const Matrix<Scalar>& grad_logits,
              Parameters<Scalar>& g) {
  if (trace.consumed) throw std::logic_error("backward: forward trace already consumed");
  const auto n = static_cast<Eigen::Index>(trace.tgt.size());
  if (grad_logits.rows() != n || grad_logits.cols() != model.config.vocab_size) {
    throw std::invalid_argument("backward: grad_logits shape does not match the trace");
  }
  trace.consumed = true;
  const auto& p = model.params;

  g.out_w.noalias() += trace.dec_out.transpose() * grad_logits;
  g.out_b += grad_logits.colwise().sum();
  Matrix<Scalar> dy = grad_logits * p.out_w.transpose();  // d dec_out

  // y3 = y2 + ff(y2)
  dy += feed_forward_backward(p.dec_ff, trace.dec_ff, dy, g.dec_ff);
  // y2 = y1 + cross(y1, enc)
  auto [dy1_cross, d_enc] = attention_backward(p.dec_cross_attn, trace.dec_cross_attn, dy, g.dec_cross_attn);
  dy += dy1_cross;
  // y1 = y0 + self(y0, y0)
  auto [dq_self, dkv_self] = attention_backward(p.dec_self_attn, trace.dec_self_attn, dy, g.dec_self_attn);
  dy += dq_self + dkv_self;
  for (Eigen::Index i = 0; i < n; ++i) {
    g.tgt_embed.row(trace.tgt[static_cast<std::size_t>(i)]) += dy.row(i);
  }
  g.tgt_pos.topRows(n) += dy;

  // Encoder: h = x1 + ff(x1), x1 = x0 + attn(x0, x0)
  Matrix<Scalar> dx = d_enc;
  dx += feed_forward_backward(p.enc_ff, trace.enc_ff, dx, g.enc_ff);
  auto [dq_enc, dkv_enc] = attention_backward(p.enc_attn, trace.enc_attn, dx, g.enc_attn);
  dx += dq_enc + dkv_enc;
  const auto m = static_cast<Eigen::Index>(trace.src.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    g.src_embed.row(trace.src[static_cast<std::size_t>(i)]) += dx.row(i);
  }
  g.src_pos.topRows(m) += dx;
}

template <typename Scalar>
Parameters<Scalar> backward(const Seq2SeqModel<Scalar>& model, ForwardTrace<Scalar>& trace,
                            const Matrix<Scalar>& grad_logits) {
  Parameters<Scalar> g = model.params.zeros_like();
  backward(model, trace, grad_logits, g);
  return g;
}

template <typename Scalar>
std::vector<int> greedy_decode(const Seq2SeqModel<Scalar>& model, std::span<const int> src, int max_len) {
  check_ids(model, src, model.config.max_src_len, "source");
  ForwardTrace<Scalar> scratch;
  const Matrix<Scalar> enc = encode_source(model, src, scratch);
  std::vector<int> tgt{kBos};
  std::vector<int> out;
  const int limit = std::min(max_len, model.config.max_tgt_len - 1);
  for (int step = 0; step < limit; ++step) {
    const Matrix<Scalar> logits = decode_target(model, enc, std::span<const int>(tgt), scratch);
    const auto row = logits.row(logits.rows() - 1);
    int best = 0;
    for (Eigen::Index j = 1; j < row.size(); ++j) {
      if (row(j) > row(best)) best = static_cast<int>(j);
    }
    out.push_back(best);
    if (best == kEos) break;
    tgt.push_back(best);
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const Scalar mx = row.maxCoeff();
    const Scalar lse = mx + std::log((row.array() - mx).exp().sum());
    out.row(i) = row.array() - lse;
  }
  return out;
}

template <typename Scalar>
Vector<Scalar> realized_logprobs(const Matrix<Scalar>& logits, std::span<const int> tgt) {
  const auto n = static_cast<Eigen::Index>(tgt.size());
  if (logits.rows() != n) throw std::invalid_argument("realized_logprobs: logits rows != target length");
  Vector<Scalar> out(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index t = 0; t + 1 < n; ++t) {
    const auto row = logits.row(t);
    const Scalar mx = row.maxCoeff();
    const Scalar lse = mx + std::log((row.array() - mx).exp().sum());
    out(t) = row(tgt[static_cast<std::size_t>(t + 1)]) - lse;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> logit_gradient(const Matrix<Scalar>& logits, std::span<const int> tgt,
                              const Vector<Scalar>& grad_logp) {
  const auto n = static_cast<Eigen::Index>(tgt.size());
  if (grad_logp.size() != n - 1) throw std::invalid_argument("logit_gradient: length mismatch");
  Matrix<Scalar> g = Matrix<Scalar>::Zero(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t + 1 < n; ++t) {
    const Scalar gt = grad_logp(t);
    if (gt == Scalar(0)) continue;
    const auto row = logits.row(t);
    const Scalar mx = row.maxCoeff();
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> prob = (row.array() - mx).exp();
    prob /= prob.sum();
    // d log p_y / d z = onehot(y) - softmax(z)
    g.row(t) = -gt * prob;
    g(t, tgt[static_cast<std::size_t>(t + 1)]) += gt;
  }
  return g;
}

#define TWA_INSTANTIATE_MODEL(S)                                                                          \
  template struct Parameters<S>;                                                                          \
  template void axpy<S>(S, const Parameters<S>&, Parameters<S>&);                                         \
  template void scale<S>(Parameters<S>&, S);                                                              \
  template S dot<S>(const Parameters<S>&, const Parameters<S>&);                                          \
  template S squared_norm<S>(const Parameters<S>&);                                                       \
  template bool all_finite<S>(const Parameters<S>&);                                                      \
  template Seq2SeqModel<S> make_model<S>(const ModelConfig&);                                             \
  template ForwardResult<S> forward<S>(const Seq2SeqModel<S>&, std::span<const int>, std::span<const int>); \
  template Parameters<S> backward<S>(const Seq2SeqModel<S>&, ForwardTrace<S>&, const Matrix<S>&);         \
  template void backward<S>(const Seq2SeqModel<S>&, ForwardTrace<S>&, const Matrix<S>&, Parameters<S>&);  \
  template std::vector<int> greedy_decode<S>(const Seq2SeqModel<S>&, std::span<const int>, int);          \
  template Matrix<S> log_softmax<S>(const Matrix<S>&);                                                    \
  template Vector<S> realized_logprobs<S>(const Matrix<S>&, std::span<const int>);                        \
  template Matrix<S> logit_gradient<S>(const Matrix<S>&, std::span<const int>, const Vector<S>&);

TWA_INSTANTIATE_MODEL(float)
TWA_INSTANTIATE_MODEL(double)
#undef TWA_INSTANTIATE_MODEL

template Seq2SeqModel<float> cast_model<float, double>(const Seq2SeqModel<double>&);
template Seq2SeqModel<double> cast_model<double, float>(const Seq2SeqModel<float>&);
template Seq2SeqModel<double> cast_model<double, double>(const Seq2SeqModel<double>&);

}  // namespace twa
