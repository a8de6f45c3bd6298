#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bem/tokenizer.hpp"

namespace bem {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

inline constexpr double kLayerNormEps = 1e-12;

// Post-LN transformer encoder hyperparameters. Activation is the tanh GELU.
struct EncoderConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 64;
  double dropout_rate = 0.1;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
  bool operator==(const EncoderConfig&) const = default;
};

template <typename T>
struct LayerParams {
  Mat<T> q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;  // [d, d], biases [1, d]
  Mat<T> ln1_g, ln1_b;
  Mat<T> ff1_w, ff1_b;  // [d, d_ff], [1, d_ff]
  Mat<T> ff2_w, ff2_b;  // [d_ff, d], [1, d]
  Mat<T> ln2_g, ln2_b;
};

// Every tensor is a matrix; biases and norm parameters are single rows.
// Gradients use the same type.
template <typename T>
struct EncoderParams {
  EncoderConfig config;
  Mat<T> token_embedding;     // [vocab, d]
  Mat<T> position_embedding;  // [max_len, d]
  Mat<T> emb_ln_g, emb_ln_b;
  std::vector<LayerParams<T>> layers;

  // Visits tensors in canonical order with their canonical names.
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  std::size_t parameter_count() const;
  void set_zero();
  static EncoderParams zeros(const EncoderConfig& cfg);

  template <typename U>
  EncoderParams<U> cast() const;
};

template <typename T>
EncoderParams<T> init_params(const EncoderConfig& cfg, std::uint64_t seed);


// Final-layer states. Rows at and beyond `lengths[b]` are padding: zero and
// excluded from attention.
template <typename T>
struct HiddenStates {
  std::vector<Mat<T>> states;  // one [seq_len, d] matrix per batch row
  std::vector<std::size_t> lengths;
  std::size_t seq_len = 0;

  std::size_t batch() const { return states.size(); }
  bool mask(std::size_t b, std::size_t t) const { return t < lengths[b]; }
};

template <typename T>
struct LayerRecord {
  Mat<T> x_in, q, k, v, context, attn_out, drop1, x1_xhat, ff_pre, ff_act, drop2, x2_xhat;
  std::vector<Mat<T>> probs;  // per head [L, L]
  RowVec<T> ln1_inv_std, ln2_inv_std;  // per row
};

template <typename T>
struct SequenceRecord {
  std::vector<TokenId> ids;
  Mat<T> emb_xhat, emb_drop;
  RowVec<T> emb_inv_std;
  std::vector<LayerRecord<T>> layers;
};

// Activations retained by forward for the matching backward.
template <typename T>
struct ForwardRecord {
  std::vector<SequenceRecord<T>> sequences;
  std::size_t seq_len = 0;
};

template <typename T>
struct ForwardResult {
  HiddenStates<T> hidden;
  ForwardRecord<T> record;
};

// Dropout masks derive from (dropout_seed, row_offset + batch row, site,
// element) so the pass is replayable and chunked batches see the same masks
// as one large batch. Eval mode applies no dropout.
template <typename T>
ForwardResult<T> forward(const EncoderParams<T>& p, const std::vector<TokenizedInput>& batch,
                         bool train_mode, std::uint64_t dropout_seed, std::size_t row_offset = 0);

// Accumulates parameter gradients into `grads` and returns the gradient with
// respect to each position's summed (token + position) input embedding.
// `d_out` holds one [seq_len, d] matrix per batch row; padded rows are ignored.
template <typename T>
std::vector<Mat<T>> backward_accumulate(const EncoderParams<T>& p, const ForwardRecord<T>& record,
                                        const std::vector<Mat<T>>& d_out, EncoderParams<T>& grads);

template <typename T>
struct BackwardResult {
  EncoderParams<T> grads;
  std::vector<Mat<T>> d_input_embeddings;
};

template <typename T>
BackwardResult<T> backward(const EncoderParams<T>& p, const ForwardRecord<T>& record,
                           const std::vector<Mat<T>>& d_out);

// Mean of rows [span.begin, span.end) of batch row b.
template <typename T>
RowVec<T> pool_word(const HiddenStates<T>& h, std::size_t b, WordSpan span);
// Row 0 ([CLS]) of batch row b.
template <typename T>
RowVec<T> pool_cls(const HiddenStates<T>& h, std::size_t b);

template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

// ---- template member definitions ----

template <typename T>
template <typename F>
void EncoderParams<T>::visit(F&& f) {
  f(std::string("embeddings.token"), token_embedding);
  f(std::string("embeddings.position"), position_embedding);
  f(std::string("embeddings.ln.gamma"), emb_ln_g);
  f(std::string("embeddings.ln.beta"), emb_ln_b);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string pre = "layer" + std::to_string(i) + ".";
    auto& l = layers[i];
    f(pre + "attn.q.weight", l.q_w);
    f(pre + "attn.q.bias", l.q_b);
    f(pre + "attn.k.weight", l.k_w);
    f(pre + "attn.k.bias", l.k_b);
    f(pre + "attn.v.weight", l.v_w);
    f(pre + "attn.v.bias", l.v_b);
    f(pre + "attn.out.weight", l.o_w);
    f(pre + "attn.out.bias", l.o_b);
    f(pre + "attn.ln.gamma", l.ln1_g);
    f(pre + "attn.ln.beta", l.ln1_b);
    f(pre + "ffn.in.weight", l.ff1_w);
    f(pre + "ffn.in.bias", l.ff1_b);
    f(pre + "ffn.out.weight", l.ff2_w);
    f(pre + "ffn.out.bias", l.ff2_b);
    f(pre + "ffn.ln.gamma", l.ln2_g);
    f(pre + "ffn.ln.beta", l.ln2_b);
  }
}

template <typename T>
template <typename F>
void EncoderParams<T>::visit(F&& f) const {
  const_cast<EncoderParams<T>*>(this)->visit(
      [&](const std::string& name, Mat<T>& m) { f(name, static_cast<const Mat<T>&>(m)); });
}

template <typename T>
template <typename U>
EncoderParams<U> EncoderParams<T>::cast() const {
  EncoderParams<U> out = EncoderParams<U>::zeros(config);
  std::vector<const Mat<T>*> src;
  visit([&](const std::string&, const Mat<T>& m) { src.push_back(&m); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Mat<U>& m) { m = src[i++]->template cast<U>(); });
  return out;
}

}  // namespace bem
