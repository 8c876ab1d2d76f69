#ifndef MPCITE_ENCODER_HPP_
#define MPCITE_ENCODER_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mpcite/common.hpp"
#include "mpcite/rng.hpp"
#include "mpcite/sampling.hpp"
#include "mpcite/vocab.hpp"

namespace mpcite {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct EncoderConfig {
  int blocks = 2;        // L, per level
  int hidden = 64;       // H
  int heads = 4;         // A
  int ffn = 256;
  int max_tokens = 64;   // per sentence, EOS included
  int max_sentences = 40;
  double dropout = 0.1;

  void validate() const {
    if (blocks < 1 || hidden < 1 || heads < 1 || ffn < 1 || max_tokens < 1 ||
        max_sentences < 1) {
      throw Error("encoder config: all dimensions must be >= 1");
    }
    if (hidden % heads != 0) {
      throw Error("encoder config: hidden size must be divisible by head count");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw Error("encoder config: dropout must be in [0, 1)");
    }
  }

  bool operator==(const EncoderConfig&) const = default;
};

// Table 2 scale; training at this size needs real hardware.
inline EncoderConfig paper_scale_config() {
  EncoderConfig cfg;
  cfg.blocks = 6;
  cfg.hidden = 768;
  cfg.heads = 12;
  cfg.ffn = 3072;
  return cfg;
}

template <typename S>
constexpr S layer_norm_eps() {
  if constexpr (sizeof(S) >= 8) {
    return S(1e-12);
  } else {
    return S(1e-5);
  }
}

template <typename S>
struct BlockParams {
  VecX<S> ln1_gain, ln1_bias;
  MatX<S> wq, wk, wv, wo;  // H x H
  VecX<S> bq, bk, bv, bo;
  VecX<S> ln2_gain, ln2_bias;
  MatX<S> w1;  // H x F
  VecX<S> b1;
  MatX<S> w2;  // F x H
  VecX<S> b2;
};

// Weights of one hierarchical encoder: shared token embedding, L
// sentence-level blocks, L document-level blocks, output layer norm.
// Positional tables are sinusoidal and derived, not trained.
template <typename S>
struct EncoderParams {
  EncoderConfig config;
  int vocab_size = 0;
  MatX<S> embedding;  // V x H
  std::vector<BlockParams<S>> sentence_blocks;
  std::vector<BlockParams<S>> document_blocks;
  VecX<S> out_gain, out_bias;
  MatX<S> pe_tokens, pe_sentences;  // derived
};

template <typename S>
struct TensorRef {
  std::string name;
  S* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
};

namespace detail {

template <typename S>
void block_refs(const std::string& prefix, BlockParams<S>& b,
                std::vector<TensorRef<S>>& out) {
  auto push = [&](const char* name, auto& t) {
    out.push_back({prefix + name, t.data(), t.rows(), t.cols()});
  };
  push(".ln1.gain", b.ln1_gain);
  push(".ln1.bias", b.ln1_bias);
  push(".attn.wq", b.wq);
  push(".attn.bq", b.bq);
  push(".attn.wk", b.wk);
  push(".attn.bk", b.bk);
  push(".attn.wv", b.wv);
  push(".attn.bv", b.bv);
  push(".attn.wo", b.wo);
  push(".attn.bo", b.bo);
  push(".ln2.gain", b.ln2_gain);
  push(".ln2.bias", b.ln2_bias);
  push(".ffn.w1", b.w1);
  push(".ffn.b1", b.b1);
  push(".ffn.w2", b.w2);
  push(".ffn.b2", b.b2);
}

}  // namespace detail

// Flat named views over every trainable tensor, in a fixed order shared by
// the optimizer, the checkpoint format, and the gradient checker.
template <typename S>
std::vector<TensorRef<S>> tensor_refs(EncoderParams<S>& p) {
  std::vector<TensorRef<S>> out;
  out.push_back({"embedding", p.embedding.data(), p.embedding.rows(), p.embedding.cols()});
  for (std::size_t i = 0; i < p.sentence_blocks.size(); ++i) {
    detail::block_refs("sent." + std::to_string(i), p.sentence_blocks[i], out);
  }
  for (std::size_t i = 0; i < p.document_blocks.size(); ++i) {
    detail::block_refs("doc." + std::to_string(i), p.document_blocks[i], out);
  }
  out.push_back({"out_ln.gain", p.out_gain.data(), p.out_gain.rows(), 1});
  out.push_back({"out_ln.bias", p.out_bias.data(), p.out_bias.rows(), 1});
  return out;
}

template <typename S>
MatX<S> sinusoidal_encoding(int positions, int hidden) {
  MatX<S> pe(positions, hidden);
  for (int pos = 0; pos < positions; ++pos) {
    for (int i = 0; i < hidden; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / hidden;
      const double angle = pos / std::pow(10000.0, exponent);
      pe(pos, i) = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename S>
void allocate_params(EncoderParams<S>& p) {
  const auto& c = p.config;
  p.embedding.setZero(p.vocab_size, c.hidden);
  auto make_block = [&]() {
    BlockParams<S> b;
    b.ln1_gain.setZero(c.hidden);
    b.ln1_bias.setZero(c.hidden);
    b.wq.setZero(c.hidden, c.hidden);
    b.wk.setZero(c.hidden, c.hidden);
    b.wv.setZero(c.hidden, c.hidden);
    b.wo.setZero(c.hidden, c.hidden);
    b.bq.setZero(c.hidden);
    b.bk.setZero(c.hidden);
    b.bv.setZero(c.hidden);
    b.bo.setZero(c.hidden);
    b.ln2_gain.setZero(c.hidden);
    b.ln2_bias.setZero(c.hidden);
    b.w1.setZero(c.hidden, c.ffn);
    b.b1.setZero(c.ffn);
    b.w2.setZero(c.ffn, c.hidden);
    b.b2.setZero(c.hidden);
    return b;
  };
  p.sentence_blocks.assign(c.blocks, make_block());
  p.document_blocks.assign(c.blocks, make_block());
  p.out_gain.setZero(c.hidden);
  p.out_bias.setZero(c.hidden);
  p.pe_tokens = sinusoidal_encoding<S>(c.max_tokens, c.hidden);
  p.pe_sentences = sinusoidal_encoding<S>(c.max_sentences, c.hidden);
}

template <typename S>
EncoderParams<S> zeros_like(const EncoderParams<S>& other) {
  EncoderParams<S> p;
  p.config = other.config;
  p.vocab_size = other.vocab_size;
  allocate_params(p);
  return p;
}

template <typename S>
EncoderParams<S> init_params(const EncoderConfig& config, int vocab_size, Rng& rng) {
  config.validate();
  if (vocab_size < 3) throw Error("encoder: vocab size must cover the reserved tokens");
  EncoderParams<S> p;
  p.config = config;
  p.vocab_size = vocab_size;
  allocate_params(p);

  auto fill_normal = [&](auto& t, double std) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        t(i, j) = static_cast<S>(rng.normal() * std);
      }
    }
  };
  auto xavier = [&](MatX<S>& t) {
    fill_normal(t, std::sqrt(2.0 / static_cast<double>(t.rows() + t.cols())));
  };

  fill_normal(p.embedding, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  auto init_block = [&](BlockParams<S>& b) {
    b.ln1_gain.setOnes();
    b.ln2_gain.setOnes();
    xavier(b.wq);
    xavier(b.wk);
    xavier(b.wv);
    xavier(b.wo);
    xavier(b.w1);
    xavier(b.w2);
  };
  for (auto& b : p.sentence_blocks) init_block(b);
  for (auto& b : p.document_blocks) init_block(b);
  p.out_gain.setOnes();
  return p;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

template <typename S>
struct LayerNormCache {
  VecX<S> inv;   // 1/sqrt(var + eps) per row
  MatX<S> xhat;  // normalized pre-gain
};

template <typename S>
struct BlockCache {
  MatX<S> x_in;
  LayerNormCache<S> ln1;
  MatX<S> n1;  // ln1 output
  MatX<S> q, k, v;
  std::vector<MatX<S>> probs;  // per head, T x T
  MatX<S> attn_concat;
  MatX<S> drop_attn;  // scaled dropout mask; empty when dropout is off
  MatX<S> x_mid;
  LayerNormCache<S> ln2;
  MatX<S> n2;
  MatX<S> z;  // FFN pre-activation
  MatX<S> g;  // FFN activation
  MatX<S> drop_ffn;
  MatX<S> x_out;
};

template <typename S>
struct SentenceCache {
  std::vector<int> ids;
  std::vector<char> mask;  // 1 = attendable token
  int real_count = 0;
  MatX<S> x0;
  MatX<S> drop_emb;
  std::vector<BlockCache<S>> blocks;
};

template <typename S>
struct ForwardRecord {
  bool valid = false;
  std::vector<SentenceCache<S>> sentences;
  MatX<S> sentence_vectors;  // n_sent x H, mean-pooled
  MatX<S> doc_x0;
  MatX<S> doc_drop_emb;
  std::vector<BlockCache<S>> doc_blocks;
  VecX<S> pooled;  // sum over document positions
  LayerNormCache<S> out_ln;
  VecX<S> output;
};

// Arithmetic mean over unmasked rows.
template <typename S>
VecX<S> mean_pool(const MatX<S>& rows, const std::vector<char>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != rows.rows()) {
    throw Error("mean_pool: mask length does not match row count");
  }
  VecX<S> sum = VecX<S>::Zero(rows.cols());
  int count = 0;
  for (Eigen::Index t = 0; t < rows.rows(); ++t) {
    if (mask[t]) {
      sum += rows.row(t).transpose();
      ++count;
    }
  }
  if (count == 0) throw Error("mean_pool: all positions masked");
  return sum / static_cast<S>(count);
}

namespace detail {

template <typename S>
MatX<S> layer_norm(const MatX<S>& x, const VecX<S>& gain, const VecX<S>& bias,
                   LayerNormCache<S>& cache) {
  const S eps = layer_norm_eps<S>();
  const Eigen::Index rows = x.rows(), cols = x.cols();
  cache.inv.resize(rows);
  cache.xhat.resize(rows, cols);
  MatX<S> out(rows, cols);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const S mu = x.row(t).mean();
    auto centered = (x.row(t).array() - mu).eval();
    const S var = centered.square().sum() / static_cast<S>(cols);
    const S inv = S(1) / std::sqrt(var + eps);
    cache.inv(t) = inv;
    cache.xhat.row(t) = centered * inv;
    out.row(t) =
        cache.xhat.row(t).cwiseProduct(gain.transpose()) + bias.transpose();
  }
  return out;
}

// Accumulates dgain/dbias, returns dx.
template <typename S>
MatX<S> layer_norm_backward(const MatX<S>& dy, const LayerNormCache<S>& cache,
                            const VecX<S>& gain, VecX<S>& dgain, VecX<S>& dbias) {
  const Eigen::Index rows = dy.rows(), cols = dy.cols();
  MatX<S> dx(rows, cols);
  for (Eigen::Index t = 0; t < rows; ++t) {
    auto dxhat = dy.row(t).cwiseProduct(gain.transpose()).eval();
    const S m1 = dxhat.mean();
    const S m2 = dxhat.cwiseProduct(cache.xhat.row(t)).mean();
    dx.row(t) = (dxhat.array() - m1 - cache.xhat.row(t).array() * m2) * cache.inv(t);
  }
  dgain += (dy.cwiseProduct(cache.xhat)).colwise().sum().transpose();
  dbias += dy.colwise().sum().transpose();
  return dx;
}

template <typename S>
S gelu_scalar(S z) {
  return S(0.5) * z * (S(1) + std::erf(z * S(M_SQRT1_2)));
}

template <typename S>
S gelu_grad_scalar(S z) {
  const S phi = std::exp(S(-0.5) * z * z) * S(0.3989422804014327);
  return S(0.5) * (S(1) + std::erf(z * S(M_SQRT1_2))) + z * phi;
}

template <typename S>
MatX<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  MatX<S> mask(rows, cols);
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (Eigen::Index h = 0; h < cols; ++h) {
      mask(t, h) = rng.uniform() >= p ? scale : S(0);
    }
  }
  return mask;
}

// Pre-layer-norm transformer block. `mask` marks attendable key positions.
template <typename S>
MatX<S> block_forward(const BlockParams<S>& b, const MatX<S>& x,
                      const std::vector<char>& mask, int heads, double dropout,
                      Rng* dropout_rng, BlockCache<S>& cache) {
  const Eigen::Index T = x.rows(), H = x.cols();
  const Eigen::Index dh = H / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  const bool use_dropout = dropout > 0.0 && dropout_rng != nullptr;

  cache.x_in = x;
  cache.n1 = layer_norm(x, b.ln1_gain, b.ln1_bias, cache.ln1);
  cache.q = cache.n1 * b.wq;
  cache.q.rowwise() += b.bq.transpose();
  cache.k = cache.n1 * b.wk;
  cache.k.rowwise() += b.bk.transpose();
  cache.v = cache.n1 * b.wv;
  cache.v.rowwise() += b.bv.transpose();

  bool any_masked = false;
  for (char m : mask) {
    if (!m) any_masked = true;
  }

  cache.probs.assign(heads, MatX<S>());
  cache.attn_concat.resize(T, H);
  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    MatX<S> scores = qh * kh.transpose() * scale;
    if (any_masked) {
      for (Eigen::Index j = 0; j < T; ++j) {
        if (!mask[j]) scores.col(j).setConstant(-std::numeric_limits<S>::infinity());
      }
    }
    MatX<S>& prob = cache.probs[h];
    prob.resize(T, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const S rowmax = scores.row(t).maxCoeff();
      auto ex = (scores.row(t).array() - rowmax).exp().eval();
      prob.row(t) = ex / ex.sum();
    }
    cache.attn_concat.middleCols(h * dh, dh) = prob * vh;
  }

  MatX<S> attn_out = cache.attn_concat * b.wo;
  attn_out.rowwise() += b.bo.transpose();
  if (use_dropout) {
    cache.drop_attn = dropout_mask<S>(T, H, dropout, *dropout_rng);
    attn_out = attn_out.cwiseProduct(cache.drop_attn);
  }
  cache.x_mid = x + attn_out;

  cache.n2 = layer_norm(cache.x_mid, b.ln2_gain, b.ln2_bias, cache.ln2);
  cache.z = cache.n2 * b.w1;
  cache.z.rowwise() += b.b1.transpose();
  cache.g = cache.z.unaryExpr([](S v) { return gelu_scalar(v); });
  MatX<S> ffn_out = cache.g * b.w2;
  ffn_out.rowwise() += b.b2.transpose();
  if (use_dropout) {
    cache.drop_ffn = dropout_mask<S>(T, H, dropout, *dropout_rng);
    ffn_out = ffn_out.cwiseProduct(cache.drop_ffn);
  }
  cache.x_out = cache.x_mid + ffn_out;
  return cache.x_out;
}

template <typename S>
MatX<S> block_backward(const BlockParams<S>& b, const BlockCache<S>& cache,
                       const MatX<S>& dx_out, int heads, BlockParams<S>& gb) {
  const Eigen::Index T = dx_out.rows(), H = dx_out.cols();
  const Eigen::Index dh = H / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  MatX<S> dffn = cache.drop_ffn.size() > 0 ? dx_out.cwiseProduct(cache.drop_ffn).eval()
                                           : dx_out;
  MatX<S> dg = dffn * b.w2.transpose();
  gb.w2 += cache.g.transpose() * dffn;
  gb.b2 += dffn.colwise().sum().transpose();
  MatX<S> dz =
      dg.cwiseProduct(cache.z.unaryExpr([](S v) { return gelu_grad_scalar(v); }));
  MatX<S> dn2 = dz * b.w1.transpose();
  gb.w1 += cache.n2.transpose() * dz;
  gb.b1 += dz.colwise().sum().transpose();

  MatX<S> dx_mid = dx_out + layer_norm_backward(dn2, cache.ln2, b.ln2_gain,
                                                gb.ln2_gain, gb.ln2_bias);

  MatX<S> dattn = cache.drop_attn.size() > 0
                      ? dx_mid.cwiseProduct(cache.drop_attn).eval()
                      : dx_mid;
  MatX<S> dconcat = dattn * b.wo.transpose();
  gb.wo += cache.attn_concat.transpose() * dattn;
  gb.bo += dattn.colwise().sum().transpose();

  MatX<S> dq(T, H), dk(T, H), dv(T, H);
  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    const MatX<S>& prob = cache.probs[h];
    auto dOh = dconcat.middleCols(h * dh, dh);

    MatX<S> dprob = dOh * vh.transpose();
    dv.middleCols(h * dh, dh) = prob.transpose() * dOh;

    MatX<S> dscores(T, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const S dot = dprob.row(t).cwiseProduct(prob.row(t)).sum();
      dscores.row(t) = prob.row(t).cwiseProduct(dprob.row(t).array() - dot);
    }
    dq.middleCols(h * dh, dh) = dscores * kh * scale;
    dk.middleCols(h * dh, dh) = dscores.transpose() * qh * scale;
  }

  MatX<S> dn1 = dq * b.wq.transpose() + dk * b.wk.transpose() + dv * b.wv.transpose();
  gb.wq += cache.n1.transpose() * dq;
  gb.bq += dq.colwise().sum().transpose();
  gb.wk += cache.n1.transpose() * dk;
  gb.bk += dk.colwise().sum().transpose();
  gb.wv += cache.n1.transpose() * dv;
  gb.bv += dv.colwise().sum().transpose();

  return dx_mid + layer_norm_backward(dn1, cache.ln1, b.ln1_gain, gb.ln1_gain,
                                      gb.ln1_bias);
}

}  // namespace detail

// Hierarchical forward pass: tokens -> sentence vectors (MEAN pooling over
// unmasked positions) -> document blocks -> SUM pooling -> layer norm.
template <typename S>
VecX<S> encode_tokens(const EncoderParams<S>& params, const TokenizedSentences& sentences,
                      ForwardRecord<S>* record = nullptr, Rng* dropout_rng = nullptr) {
  const auto& cfg = params.config;
  if (sentences.empty()) throw Error("encode: sample has no sentences");
  if (static_cast<int>(sentences.size()) > cfg.max_sentences) {
    throw Error("encode: " + std::to_string(sentences.size()) +
                " sentences exceed the configured maximum of " +
                std::to_string(cfg.max_sentences));
  }
  const double dropout = dropout_rng ? cfg.dropout : 0.0;

  ForwardRecord<S> local;
  ForwardRecord<S>& rec = record ? *record : local;
  rec = ForwardRecord<S>();
  rec.sentences.resize(sentences.size());

  const int H = cfg.hidden;
  const S emb_scale = std::sqrt(static_cast<S>(H));
  rec.sentence_vectors.resize(static_cast<Eigen::Index>(sentences.size()), H);

  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& ids = sentences[s];
    if (ids.empty()) throw Error("encode: empty tokenized sentence");
    if (static_cast<int>(ids.size()) > cfg.max_tokens) {
      throw Error("encode: sentence of " + std::to_string(ids.size()) +
                  " tokens exceeds max_tokens=" + std::to_string(cfg.max_tokens));
    }
    SentenceCache<S>& sc = rec.sentences[s];
    sc.ids = ids;
    sc.mask.resize(ids.size());
    sc.real_count = 0;
    const Eigen::Index T = static_cast<Eigen::Index>(ids.size());
    sc.x0.resize(T, H);
    for (Eigen::Index t = 0; t < T; ++t) {
      const int id = ids[t];
      if (id < 0 || id >= params.vocab_size) {
        throw Error("encode: token id " + std::to_string(id) + " outside vocab");
      }
      sc.mask[t] = id != Vocab::kPad;
      if (sc.mask[t]) ++sc.real_count;
      sc.x0.row(t) =
          params.embedding.row(id) * emb_scale + params.pe_tokens.row(t);
    }
    if (sc.real_count == 0) throw Error("encode: sentence is all padding");
    if (dropout > 0.0) {
      sc.drop_emb = detail::dropout_mask<S>(T, H, dropout, *dropout_rng);
      sc.x0 = sc.x0.cwiseProduct(sc.drop_emb);
    }

    sc.blocks.resize(cfg.blocks);
    MatX<S> x = sc.x0;
    for (int l = 0; l < cfg.blocks; ++l) {
      x = detail::block_forward(params.sentence_blocks[l], x, sc.mask, cfg.heads,
                                dropout, dropout_rng, sc.blocks[l]);
    }
    rec.sentence_vectors.row(static_cast<Eigen::Index>(s)) =
        mean_pool(sc.blocks.back().x_out, sc.mask).transpose();
  }

  const Eigen::Index n_sent = rec.sentence_vectors.rows();
  rec.doc_x0 = rec.sentence_vectors + params.pe_sentences.topRows(n_sent);
  if (dropout > 0.0) {
    rec.doc_drop_emb = detail::dropout_mask<S>(n_sent, H, dropout, *dropout_rng);
    rec.doc_x0 = rec.doc_x0.cwiseProduct(rec.doc_drop_emb);
  }
  const std::vector<char> doc_mask(static_cast<std::size_t>(n_sent), 1);
  rec.doc_blocks.resize(cfg.blocks);
  MatX<S> x = rec.doc_x0;
  for (int l = 0; l < cfg.blocks; ++l) {
    x = detail::block_forward(params.document_blocks[l], x, doc_mask, cfg.heads,
                              dropout, dropout_rng, rec.doc_blocks[l]);
  }

  rec.pooled = x.colwise().sum().transpose();
  MatX<S> pooled_row = rec.pooled.transpose();
  MatX<S> normed =
      detail::layer_norm(pooled_row, params.out_gain, params.out_bias, rec.out_ln);
  rec.output = normed.row(0).transpose();
  rec.valid = true;
  return rec.output;
}

template <typename S>
VecX<S> encode(const EncoderParams<S>& params, const Vocab& vocab,
               const ContextSample& sample, ForwardRecord<S>* record = nullptr,
               Rng* dropout_rng = nullptr) {
  return encode_tokens(params, tokenize_sample(sample, vocab, params.config.max_tokens),
                       record, dropout_rng);
}

// Exact reverse-mode gradients for every parameter tensor, accumulated into
// `grads` (shaped via zeros_like). Dropout is replayed from the record.
template <typename S>
void encode_backward(const EncoderParams<S>& params, const ForwardRecord<S>& record,
                     const VecX<S>& d_output, EncoderParams<S>& grads) {
  if (!record.valid) throw Error("encode_backward: no forward record");
  const auto& cfg = params.config;
  const int H = cfg.hidden;
  if (d_output.size() != H) throw Error("encode_backward: gradient dimension mismatch");

  MatX<S> d_normed = d_output.transpose();
  MatX<S> d_pooled_row = detail::layer_norm_backward(
      d_normed, record.out_ln, params.out_gain, grads.out_gain, grads.out_bias);

  const Eigen::Index n_sent = record.sentence_vectors.rows();
  // SUM pooling broadcasts the gradient to every document position.
  MatX<S> dx = d_pooled_row.colwise().replicate(n_sent);

  for (int l = cfg.blocks - 1; l >= 0; --l) {
    dx = detail::block_backward(params.document_blocks[l], record.doc_blocks[l], dx,
                                cfg.heads, grads.document_blocks[l]);
  }
  if (record.doc_drop_emb.size() > 0) dx = dx.cwiseProduct(record.doc_drop_emb);

  const S emb_scale = std::sqrt(static_cast<S>(H));
  for (Eigen::Index s = 0; s < n_sent; ++s) {
    const SentenceCache<S>& sc = record.sentences[static_cast<std::size_t>(s)];
    const Eigen::Index T = static_cast<Eigen::Index>(sc.ids.size());

    // MEAN pooling: spread over unmasked positions.
    MatX<S> ds = MatX<S>::Zero(T, H);
    const S inv_count = S(1) / static_cast<S>(sc.real_count);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (sc.mask[t]) ds.row(t) = dx.row(s) * inv_count;
    }
    for (int l = cfg.blocks - 1; l >= 0; --l) {
      ds = detail::block_backward(params.sentence_blocks[l], sc.blocks[l], ds,
                                  cfg.heads, grads.sentence_blocks[l]);
    }
    if (sc.drop_emb.size() > 0) ds = ds.cwiseProduct(sc.drop_emb);
    for (Eigen::Index t = 0; t < T; ++t) {
      grads.embedding.row(sc.ids[static_cast<std::size_t>(t)]) += ds.row(t) * emb_scale;
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

template <typename S>
using EmbeddingLoss = std::function<std::pair<S, VecX<S>>(const VecX<S>&)>;

struct GradCheckOptions {
  double tolerance = 1e-5;
  int coords_per_tensor = 20;
  std::uint64_t seed = 1;
  double step = 1e-3;  // h = step * max(1, |theta|)
};

struct TensorCheck {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

template <typename S>
GradCheckReport grad_check(const EncoderConfig& config, int vocab_size,
                           const EmbeddingLoss<S>& loss_fn, const GradCheckOptions& opt) {
  Rng rng(mix_seed(opt.seed, "grad_check"));
  EncoderParams<S> params = init_params<S>(config, vocab_size, rng);

  // Small fixed sample; one sentence carries trailing padding to cover masks.
  TokenizedSentences sentences;
  const int n_sent = 3;
  for (int s = 0; s < n_sent; ++s) {
    std::vector<int> ids;
    const int len = 4 + s;
    for (int t = 0; t < len; ++t) {
      ids.push_back(3 + static_cast<int>(rng.uniform_below(
                            static_cast<std::uint64_t>(vocab_size - 3))));
    }
    ids.push_back(Vocab::kEos);
    if (s == 1) ids.push_back(Vocab::kPad);
    sentences.push_back(std::move(ids));
  }

  auto eval_loss = [&](EncoderParams<S>& p) {
    VecX<S> emb = encode_tokens(p, sentences);
    return loss_fn(emb).first;
  };

  ForwardRecord<S> record;
  VecX<S> emb = encode_tokens(params, sentences, &record);
  auto [value, d_emb] = loss_fn(emb);
  (void)value;
  EncoderParams<S> grads = zeros_like(params);
  encode_backward(params, record, d_emb, grads);

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads);
  for (std::size_t ti = 0; ti < prefs.size(); ++ti) {
    TensorCheck check;
    check.name = prefs[ti].name;
    const Eigen::Index n = prefs[ti].size();
    const int n_coords = std::min<Eigen::Index>(n, opt.coords_per_tensor);
    auto coords = rng.sample_indices(static_cast<std::size_t>(n),
                                     static_cast<std::size_t>(n_coords));
    for (std::size_t c : coords) {
      S* theta = prefs[ti].data + c;
      const S orig = *theta;
      const S h = static_cast<S>(opt.step) * std::max(S(1), std::abs(orig));
      *theta = orig + h;
      const S up = eval_loss(params);
      *theta = orig - h;
      const S down = eval_loss(params);
      *theta = orig;
      const double fd = static_cast<double>(up - down) / (2.0 * static_cast<double>(h));
      const double an = static_cast<double>(grefs[ti].data[c]);
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(an));
      const double denom = std::max(std::abs(an), std::abs(fd));
      const double err = denom < 1e-10 ? 0.0 : std::abs(an - fd) / denom;
      check.max_rel_err = std::max(check.max_rel_err, err);
    }
    report.max_rel_err = std::max(report.max_rel_err, check.max_rel_err);
    report.tensors.push_back(std::move(check));
  }
  report.pass = report.max_rel_err <= opt.tolerance;
  return report;
}

}  // namespace mpcite

#endif  // MPCITE_ENCODER_HPP_
