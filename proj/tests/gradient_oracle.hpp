#pragma once

// Finite-difference oracle for the encoder gradient contract. Independent of
// the backward pass: it only calls forward.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bem/common.hpp"
#include "bem/encoder.hpp"

namespace bem::testing {

struct DirectionResult {
  std::string tensor;  // "*" when the direction spans every tensor
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

// Scalar probe: sum over unmasked positions of weights ⊙ hidden.
inline double probe_loss(const EncoderParams<double>& p, const std::vector<TokenizedInput>& batch,
                         const std::vector<Mat<double>>& weights, bool train, std::uint64_t seed) {
  auto res = forward(p, batch, train, seed);
  double s = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto len = static_cast<Eigen::Index>(res.hidden.lengths[b]);
    s += (res.hidden.states[b].topRows(len).array() * weights[b].topRows(len).array()).sum();
  }
  return s;
}

inline std::vector<DirectionResult> check_directions(const EncoderParams<double>& p,
                                                     const std::vector<TokenizedInput>& batch,
                                                     bool train, std::uint64_t dropout_seed,
                                                     int n_directions, std::uint64_t seed,
                                                     double step = 1e-5) {
  Rng rng(seed);
  auto fwd = forward(p, batch, train, dropout_seed);
  std::vector<Mat<double>> weights;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Mat<double> w(fwd.hidden.seq_len, p.config.d_model);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    weights.push_back(std::move(w));
  }
  const auto grads = backward(p, fwd.record, weights).grads;

  // Directions are unit vectors, so |analytic| <= |grad|. Exactly-zero
  // components (e.g. key biases under softmax shift invariance) are compared
  // against this floor instead of against rounding noise.
  double grad_norm2 = 0;
  grads.visit([&](const std::string&, const Mat<double>& m) { grad_norm2 += m.squaredNorm(); });
  const double noise_floor = std::max(1e-6 * std::sqrt(grad_norm2), 1e-12);

  std::vector<std::string> names;
  p.visit([&](const std::string& n, const Mat<double>&) { names.push_back(n); });

  std::vector<DirectionResult> out;
  std::size_t next_tensor = 0;
  for (int k = 0; k < n_directions; ++k) {
    // Cycle single-tensor directions, every fifth spans all tensors.
    const bool all = (k % 5 == 4);
    const std::string target = all ? "*" : names[next_tensor++ % names.size()];
    auto dir = EncoderParams<double>::zeros(p.config);
    double norm2 = 0;
    dir.visit([&](const std::string& n, Mat<double>& m) {
      if (!all && n != target) return;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal();
        norm2 += m.data()[i] * m.data()[i];
      }
    });
    const double inv = 1.0 / std::sqrt(norm2);
    dir.visit([&](const std::string&, Mat<double>& m) { m *= inv; });

    double analytic = 0;
    std::vector<const Mat<double>*> g_list;
    grads.visit([&](const std::string&, const Mat<double>& m) { g_list.push_back(&m); });
    std::size_t idx = 0;
    dir.visit([&](const std::string&, const Mat<double>& m) {
      analytic += (m.array() * g_list[idx++]->array()).sum();
    });

    auto shifted = [&](double eps) {
      auto q = p;
      std::vector<const Mat<double>*> d_list;
      dir.visit([&](const std::string&, const Mat<double>& m) { d_list.push_back(&m); });
      std::size_t j = 0;
      q.visit([&](const std::string&, Mat<double>& m) { m += eps * *d_list[j++]; });
      return probe_loss(q, batch, weights, train, dropout_seed);
    };
    const double numeric = (shifted(step) - shifted(-step)) / (2 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), noise_floor});
    out.push_back({target, analytic, numeric, std::abs(analytic - numeric) / denom});
  }
  return out;
}

}  // namespace bem::testing
