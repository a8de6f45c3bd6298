#include "bem/encoder.hpp"

#include <cmath>

#include "bem/common.hpp"

namespace bem {

void EncoderConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::config, "encoder config: " + m); };
  if (vocab_size < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_len < 1) {
    bad("all dimensions must be >= 1");
  }
  if (d_model % n_heads != 0) bad("n_heads must divide d_model");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout_rate must lie in [0, 1)");
}

template <typename T>
std::size_t EncoderParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
void EncoderParams<T>::set_zero() {
  visit([](const std::string&, Mat<T>& m) { m.setZero(); });
}

template <typename T>
EncoderParams<T> EncoderParams<T>::zeros(const EncoderConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.d_model, f = cfg.d_ff;
  EncoderParams<T> p;
  p.config = cfg;
  p.token_embedding = Mat<T>::Zero(cfg.vocab_size, d);
  p.position_embedding = Mat<T>::Zero(cfg.max_len, d);
  p.emb_ln_g = Mat<T>::Zero(1, d);
  p.emb_ln_b = Mat<T>::Zero(1, d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    for (Mat<T>* w : {&l.q_w, &l.k_w, &l.v_w, &l.o_w}) *w = Mat<T>::Zero(d, d);
    for (Mat<T>* b : {&l.q_b, &l.k_b, &l.v_b, &l.o_b, &l.ln1_g, &l.ln1_b, &l.ff2_b, &l.ln2_g, &l.ln2_b}) {
      *b = Mat<T>::Zero(1, d);
    }
    l.ff1_w = Mat<T>::Zero(d, f);
    l.ff1_b = Mat<T>::Zero(1, f);
    l.ff2_w = Mat<T>::Zero(f, d);
  }
  return p;
}

template <typename T>
EncoderParams<T> init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams<T> p = EncoderParams<T>::zeros(cfg);
  Rng rng(hash_combine(seed, 0xe7c0de));
  constexpr double kStd = 0.02;
  auto normal_fill = [&](Mat<T>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double z = rng.normal();
      while (std::abs(z) > 2.0) z = rng.normal();
      m.data()[i] = static_cast<T>(kStd * z);
    }
  };
  p.visit([&](const std::string& name, Mat<T>& m) {
    if (name.ends_with(".gamma")) {
      m.setOnes();
    } else if (name.ends_with(".weight") || name.starts_with("embeddings.token") ||
               name.starts_with("embeddings.position")) {
      normal_fill(m);
    }
  });
  return p;
}

template <typename T>
T gelu(T x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = static_cast<T>(0.044715);
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::tanh(c * (x + a * x * x * x)));
}

template <typename T>
T gelu_grad(T x) {
  constexpr T c = static_cast<T>(0.7978845608028654);
  constexpr T a = static_cast<T>(0.044715);
  const T t = std::tanh(c * (x + a * x * x * x));
  return static_cast<T>(0.5) * (static_cast<T>(1) + t) +
         static_cast<T>(0.5) * x * (static_cast<T>(1) - t * t) * c * (static_cast<T>(1) + 3 * a * x * x);
}

namespace {

// y = gamma * xhat + beta, row-wise.
template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& xhat, RowVec<T>& inv_std) {
  const Eigen::Index rows = x.rows();
  const T n = static_cast<T>(x.cols());
  xhat.resize(rows, x.cols());
  inv_std.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).sum() / n;
    const T var = (x.row(r).array() - mean).square().sum() / n;
    const T is = static_cast<T>(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    inv_std(r) = is;
    xhat.row(r) = (x.row(r).array() - mean) * is;
  }
  Mat<T> y = (xhat.array().rowwise() * g.row(0).array()).matrix();
  y.rowwise() += b.row(0);
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const RowVec<T>& inv_std,
                           const Mat<T>& g, Mat<T>& dg, Mat<T>& db) {
  dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Mat<T> dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
  const T n = static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_d = dxhat.row(r).sum() / n;
    const T mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
    dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

// Returns a scale mask (0 or 1/(1-p)) or an empty matrix when dropout is off.
template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, bool train_mode,
                    std::uint64_t seed, std::uint64_t batch_row, std::uint64_t site) {
  if (!train_mode || rate <= 0.0) return {};
  Mat<T> m(rows, cols);
  const std::uint64_t base = hash_combine(hash_combine(seed, batch_row), site);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = unit_uniform(hash_combine(base, static_cast<std::uint64_t>(i))) < rate ? T(0) : keep_scale;
  }
  return m;
}

template <typename T>
void apply_mask(Mat<T>& x, const Mat<T>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const EncoderParams<T>& p, const std::vector<TokenizedInput>& batch,
                         bool train_mode, std::uint64_t dropout_seed, std::size_t row_offset) {
  const auto& cfg = p.config;
  const Eigen::Index d = cfg.d_model;
  const int heads = cfg.n_heads;
  const Eigen::Index hd = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  ForwardResult<T> out;
  std::size_t seq_len = 0;
  for (const auto& in : batch) {
    if (in.ids.empty()) throw Error(ErrorKind::validation, "forward: empty sequence");
    if (in.ids.size() > static_cast<std::size_t>(cfg.max_len)) {
      throw Error(ErrorKind::validation, "forward: sequence length " + std::to_string(in.ids.size()) +
                                             " exceeds max_len " + std::to_string(cfg.max_len));
    }
    for (TokenId id : in.ids) {
      if (id < 0 || id >= cfg.vocab_size) {
        throw Error(ErrorKind::validation, "forward: token id " + std::to_string(id) + " out of range");
      }
    }
    seq_len = std::max(seq_len, in.ids.size());
  }
  out.hidden.seq_len = seq_len;
  out.record.seq_len = seq_len;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ids = batch[b].ids;
    const Eigen::Index len = static_cast<Eigen::Index>(ids.size());
    SequenceRecord<T> rec;
    rec.ids = ids;

    Mat<T> x(len, d);
    for (Eigen::Index t = 0; t < len; ++t) {
      x.row(t) = p.token_embedding.row(ids[static_cast<std::size_t>(t)]) + p.position_embedding.row(t);
    }
    x = layer_norm(x, p.emb_ln_g, p.emb_ln_b, rec.emb_xhat, rec.emb_inv_std);
    rec.emb_drop = dropout_mask<T>(len, d, cfg.dropout_rate, train_mode, dropout_seed, row_offset + b, 0);
    apply_mask(x, rec.emb_drop);

    // Padded key positions never enter the score matrices; this is the
    // -inf additive mask with the masked columns removed.
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
      const auto& lp = p.layers[li];
      LayerRecord<T> lr;
      lr.x_in = x;
      lr.q.noalias() = x * lp.q_w;
      lr.q.rowwise() += lp.q_b.row(0);
      lr.k.noalias() = x * lp.k_w;
      lr.k.rowwise() += lp.k_b.row(0);
      lr.v.noalias() = x * lp.v_w;
      lr.v.rowwise() += lp.v_b.row(0);
      lr.context.resize(len, d);
      lr.probs.resize(static_cast<std::size_t>(heads));
      for (int h = 0; h < heads; ++h) {
        const auto qh = lr.q.middleCols(h * hd, hd);
        const auto kh = lr.k.middleCols(h * hd, hd);
        const auto vh = lr.v.middleCols(h * hd, hd);
        Mat<T> s = (qh * kh.transpose()) * scale;
        for (Eigen::Index r = 0; r < len; ++r) {
          const T mx = s.row(r).maxCoeff();
          s.row(r) = (s.row(r).array() - mx).exp().matrix();
          s.row(r) /= s.row(r).sum();
        }
        lr.context.middleCols(h * hd, hd).noalias() = s * vh;
        lr.probs[static_cast<std::size_t>(h)] = std::move(s);
      }
      lr.attn_out.noalias() = lr.context * lp.o_w;
      lr.attn_out.rowwise() += lp.o_b.row(0);
      const std::uint64_t site = 1 + 2 * li;
      lr.drop1 = dropout_mask<T>(len, d, cfg.dropout_rate, train_mode, dropout_seed, row_offset + b, site);
      Mat<T> a = lr.attn_out;
      apply_mask(a, lr.drop1);
      Mat<T> x1 = layer_norm<T>(x + a, lp.ln1_g, lp.ln1_b, lr.x1_xhat, lr.ln1_inv_std);

      lr.ff_pre.noalias() = x1 * lp.ff1_w;
      lr.ff_pre.rowwise() += lp.ff1_b.row(0);
      lr.ff_act = lr.ff_pre.unaryExpr([](T v) { return gelu(v); });
      Mat<T> f;
      f.noalias() = lr.ff_act * lp.ff2_w;
      f.rowwise() += lp.ff2_b.row(0);
      lr.drop2 = dropout_mask<T>(len, d, cfg.dropout_rate, train_mode, dropout_seed, row_offset + b, site + 1);
      apply_mask(f, lr.drop2);
      x = layer_norm<T>(x1 + f, lp.ln2_g, lp.ln2_b, lr.x2_xhat, lr.ln2_inv_std);
      rec.layers.push_back(std::move(lr));
    }

    Mat<T> padded = Mat<T>::Zero(static_cast<Eigen::Index>(seq_len), d);
    padded.topRows(len) = x;
    out.hidden.states.push_back(std::move(padded));
    out.hidden.lengths.push_back(ids.size());
    out.record.sequences.push_back(std::move(rec));
  }
  return out;
}

template <typename T>
std::vector<Mat<T>> backward_accumulate(const EncoderParams<T>& p, const ForwardRecord<T>& record,
                                        const std::vector<Mat<T>>& d_out, EncoderParams<T>& g) {
  const auto& cfg = p.config;
  if (d_out.size() != record.sequences.size()) {
    throw Error(ErrorKind::validation, "backward: d_out batch size does not match the record");
  }
  const Eigen::Index d = cfg.d_model;
  const int heads = cfg.n_heads;
  const Eigen::Index hd = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  std::vector<Mat<T>> d_inputs;
  for (std::size_t b = 0; b < record.sequences.size(); ++b) {
    const auto& rec = record.sequences[b];
    const Eigen::Index len = static_cast<Eigen::Index>(rec.ids.size());
    if (d_out[b].cols() != d || d_out[b].rows() < len) {
      throw Error(ErrorKind::validation, "backward: d_out shape mismatch");
    }
    Mat<T> dx = d_out[b].topRows(len);

    for (std::size_t li = p.layers.size(); li-- > 0;) {
      const auto& lp = p.layers[li];
      auto& lg = g.layers[li];
      const auto& lr = rec.layers[li];

      // x2 = LN(x1 + drop(F))
      Mat<T> dz2 = layer_norm_backward<T>(dx, lr.x2_xhat, lr.ln2_inv_std, lp.ln2_g, lg.ln2_g, lg.ln2_b);
      Mat<T> df = dz2;
      apply_mask(df, lr.drop2);
      // x1 recovered from its normalized form
      Mat<T> x1 = (lr.x1_xhat.array().rowwise() * lp.ln1_g.row(0).array()).matrix();
      x1.rowwise() += lp.ln1_b.row(0);
      lg.ff2_w.noalias() += lr.ff_act.transpose() * df;
      lg.ff2_b.row(0) += df.colwise().sum();
      Mat<T> du = df * lp.ff2_w.transpose();
      du.array() *= lr.ff_pre.unaryExpr([](T v) { return gelu_grad(v); }).array();
      lg.ff1_w.noalias() += x1.transpose() * du;
      lg.ff1_b.row(0) += du.colwise().sum();
      Mat<T> dx1 = dz2;
      dx1.noalias() += du * lp.ff1_w.transpose();

      // x1 = LN(x + drop(A))
      Mat<T> dz1 = layer_norm_backward<T>(dx1, lr.x1_xhat, lr.ln1_inv_std, lp.ln1_g, lg.ln1_g, lg.ln1_b);
      Mat<T> da = dz1;
      apply_mask(da, lr.drop1);
      lg.o_w.noalias() += lr.context.transpose() * da;
      lg.o_b.row(0) += da.colwise().sum();
      const Mat<T> dctx = da * lp.o_w.transpose();
      Mat<T> dq(len, d), dk(len, d), dv(len, d);
      for (int h = 0; h < heads; ++h) {
        const auto& prob = lr.probs[static_cast<std::size_t>(h)];
        const auto dch = dctx.middleCols(h * hd, hd);
        const Mat<T> dp = dch * lr.v.middleCols(h * hd, hd).transpose();
        dv.middleCols(h * hd, hd).noalias() = prob.transpose() * dch;
        Mat<T> ds = prob.cwiseProduct(dp);
        const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
        ds -= (prob.array().colwise() * row_dot.array()).matrix();
        ds *= scale;
        dq.middleCols(h * hd, hd).noalias() = ds * lr.k.middleCols(h * hd, hd);
        dk.middleCols(h * hd, hd).noalias() = ds.transpose() * lr.q.middleCols(h * hd, hd);
      }
      lg.q_w.noalias() += lr.x_in.transpose() * dq;
      lg.q_b.row(0) += dq.colwise().sum();
      lg.k_w.noalias() += lr.x_in.transpose() * dk;
      lg.k_b.row(0) += dk.colwise().sum();
      lg.v_w.noalias() += lr.x_in.transpose() * dv;
      lg.v_b.row(0) += dv.colwise().sum();
      dx = dz1;
      dx.noalias() += dq * lp.q_w.transpose();
      dx.noalias() += dk * lp.k_w.transpose();
      dx.noalias() += dv * lp.v_w.transpose();
    }

    apply_mask(dx, rec.emb_drop);
    Mat<T> de = layer_norm_backward<T>(dx, rec.emb_xhat, rec.emb_inv_std, p.emb_ln_g, g.emb_ln_g, g.emb_ln_b);
    for (Eigen::Index t = 0; t < len; ++t) {
      g.token_embedding.row(rec.ids[static_cast<std::size_t>(t)]) += de.row(t);
      g.position_embedding.row(t) += de.row(t);
    }
    Mat<T> padded = Mat<T>::Zero(static_cast<Eigen::Index>(record.seq_len), d);
    padded.topRows(len) = de;
    d_inputs.push_back(std::move(padded));
  }
  return d_inputs;
}

template <typename T>
BackwardResult<T> backward(const EncoderParams<T>& p, const ForwardRecord<T>& record,
                           const std::vector<Mat<T>>& d_out) {
  BackwardResult<T> r{EncoderParams<T>::zeros(p.config), {}};
  r.d_input_embeddings = backward_accumulate(p, record, d_out, r.grads);
  return r;
}

template <typename T>
RowVec<T> pool_word(const HiddenStates<T>& h, std::size_t b, WordSpan span) {
  if (span.end <= span.begin) throw Error(ErrorKind::validation, "pool_word: empty span");
  if (b >= h.batch() || span.end > h.lengths[b]) {
    throw Error(ErrorKind::validation, "pool_word: span outside the unmasked region");
  }
  const auto n = static_cast<Eigen::Index>(span.size());
  return h.states[b].middleRows(static_cast<Eigen::Index>(span.begin), n).colwise().sum() /
         static_cast<T>(n);
}

template <typename T>
RowVec<T> pool_cls(const HiddenStates<T>& h, std::size_t b) {
  if (b >= h.batch() || h.lengths[b] == 0) throw Error(ErrorKind::validation, "pool_cls: empty sequence");
  return h.states[b].row(0);
}

#define BEM_INSTANTIATE_ENCODER(T)                                                                 \
  template struct EncoderParams<T>;                                                                \
  template EncoderParams<T> init_params<T>(const EncoderConfig&, std::uint64_t);                   \
  template ForwardResult<T> forward<T>(const EncoderParams<T>&, const std::vector<TokenizedInput>&, \
                                       bool, std::uint64_t, std::size_t);                                       \
  template std::vector<Mat<T>> backward_accumulate<T>(const EncoderParams<T>&,                     \
                                                      const ForwardRecord<T>&,                     \
                                                      const std::vector<Mat<T>>&, EncoderParams<T>&); \
  template BackwardResult<T> backward<T>(const EncoderParams<T>&, const ForwardRecord<T>&,         \
                                         const std::vector<Mat<T>>&);                              \
  template RowVec<T> pool_word<T>(const HiddenStates<T>&, std::size_t, WordSpan);                  \
  template RowVec<T> pool_cls<T>(const HiddenStates<T>&, std::size_t);                             \
  template T gelu<T>(T);                                                                           \
  template T gelu_grad<T>(T);

BEM_INSTANTIATE_ENCODER(float)
BEM_INSTANTIATE_ENCODER(double)

}  // namespace bem
