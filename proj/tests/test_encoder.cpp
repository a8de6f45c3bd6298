#include <cmath>

#include "bem/common.hpp"
#include "bem/encoder.hpp"
#include "doctest.h"
#include "gradient_oracle.hpp"

using namespace bem;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.vocab_size = 20;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.max_len = 8;
  cfg.dropout_rate = 0.1;
  return cfg;
}

TokenizedInput seq(std::vector<TokenId> ids) {
  TokenizedInput t;
  t.ids = std::move(ids);
  return t;
}

}  // namespace

TEST_CASE("init_params is deterministic with unit layer-norm scales") {
  auto cfg = small_config();
  auto a = init_params<float>(cfg, 7);
  auto b = init_params<float>(cfg, 7);
  auto c = init_params<float>(cfg, 8);
  CHECK(a.token_embedding == b.token_embedding);
  CHECK(a.layers[0].ff1_w == b.layers[0].ff1_w);
  CHECK(a.token_embedding != c.token_embedding);
  CHECK((a.layers[0].ln1_g.array() == 1.0f).all());
  CHECK((a.emb_ln_g.array() == 1.0f).all());
  CHECK((a.layers[0].q_b.array() == 0.0f).all());
  CHECK((a.layers[0].ln2_b.array() == 0.0f).all());
}

TEST_CASE("init_params weight variance matches the truncated normal") {
  EncoderConfig cfg = small_config();
  cfg.vocab_size = 1000;
  cfg.d_model = 16;
  auto p = init_params<double>(cfg, 3);
  const auto& w = p.token_embedding;  // 16000 elements
  REQUIRE(w.size() >= 10000);
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
  CHECK(var == doctest::Approx(0.02 * 0.02).epsilon(0.2));
  CHECK(w.cwiseAbs().maxCoeff() <= 0.04 + 1e-12);
}

TEST_CASE("forward shapes, finiteness and determinism") {
  auto cfg = small_config();
  auto p = init_params<float>(cfg, 1);
  SUBCASE("[CLS][SEP] only") {
    auto r = forward(p, {seq({kClsId, kSepId})}, false, 0);
    REQUIRE(r.hidden.batch() == 1);
    CHECK(r.hidden.states[0].rows() == 2);
    CHECK(r.hidden.states[0].cols() == 16);
    CHECK(r.hidden.states[0].allFinite());
  }
  SUBCASE("identical batch rows give identical outputs") {
    auto s = seq({kClsId, 5, 6, 7, kSepId});
    auto r = forward(p, {s, s}, false, 0);
    CHECK(r.hidden.states[0] == r.hidden.states[1]);
  }
  SUBCASE("eval mode ignores the dropout seed") {
    auto s = seq({kClsId, 5, 6, kSepId});
    CHECK(forward(p, {s}, false, 1).hidden.states[0] == forward(p, {s}, false, 2).hidden.states[0]);
  }
  SUBCASE("train mode uses dropout; zero rate matches eval") {
    auto s = seq({kClsId, 5, 6, kSepId});
    CHECK(forward(p, {s}, true, 1).hidden.states[0] != forward(p, {s}, false, 1).hidden.states[0]);
    auto cfg0 = cfg;
    cfg0.dropout_rate = 0.0;
    auto p0 = p;
    p0.config = cfg0;
    CHECK(forward(p0, {s}, true, 1).hidden.states[0] == forward(p0, {s}, false, 1).hidden.states[0]);
  }
  SUBCASE("batch permutation equivariance and padding invariance") {
    auto s1 = seq({kClsId, 5, kSepId});
    auto s2 = seq({kClsId, 9, 10, 11, 12, kSepId});
    auto ab = forward(p, {s1, s2}, false, 0);
    auto ba = forward(p, {s2, s1}, false, 0);
    auto alone = forward(p, {s1}, false, 0);
    CHECK(ab.hidden.states[0] == ba.hidden.states[1]);
    CHECK(ab.hidden.states[1] == ba.hidden.states[0]);
    CHECK(ab.hidden.states[0].topRows(3) == alone.hidden.states[0]);
    CHECK(ab.hidden.seq_len == 6);
    CHECK(ab.hidden.states[0].bottomRows(3).isZero());
    CHECK_FALSE(ab.hidden.mask(0, 3));
  }
  SUBCASE("all lengths up to max_len stay finite") {
    for (int len = 2; len <= cfg.max_len; ++len) {
      TokenizedInput s;
      for (int i = 0; i < len; ++i) s.ids.push_back(static_cast<TokenId>((i * 7) % cfg.vocab_size));
      CHECK(forward(p, {s}, true, 3).hidden.states[0].allFinite());
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(forward(p, {seq({kClsId, 20, kSepId})}, false, 0), Error);
    CHECK_THROWS_AS(forward(p, {seq(std::vector<TokenId>(9, 4))}, false, 0), Error);
  }
}

TEST_CASE("backward with zero upstream gradient is zero") {
  auto p = init_params<double>(small_config(), 2);
  auto r = forward(p, {seq({kClsId, 4, 5, kSepId})}, true, 9);
  auto g = backward(p, r.record, {Mat<double>::Zero(4, 16)});
  g.grads.visit([](const std::string& name, const Mat<double>& m) {
    INFO(name);
    CHECK(m.isZero());
  });
}

TEST_CASE("masked positions receive no gradient") {
  auto p = init_params<double>(small_config(), 2);
  auto r = forward(p, {seq({kClsId, 4, kSepId}), seq({kClsId, 5, 6, 7, 8, kSepId})}, false, 0);
  std::vector<Mat<double>> d_out = {Mat<double>::Random(6, 16), Mat<double>::Random(6, 16)};
  auto g = backward(p, r.record, d_out);
  CHECK(g.d_input_embeddings[0].bottomRows(3).isZero());
  CHECK_FALSE(g.d_input_embeddings[0].topRows(3).isZero());
  CHECK(g.grads.token_embedding.row(kPadId).isZero());
  CHECK_THROWS_AS(backward(p, r.record, {Mat<double>::Ones(6, 16)}), Error);
}

TEST_CASE("gradient check against central finite differences") {
  auto cfg = small_config();
  auto p = init_params<double>(cfg, 11);
  // Perturb norms and biases away from their initial constants.
  Rng rng(5);
  p.visit([&](const std::string& name, Mat<double>& m) {
    if (!name.ends_with(".weight") && name.find("embeddings.t") == std::string::npos) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.1 * rng.normal();
    }
  });
  std::vector<TokenizedInput> batch = {seq({kClsId, 4, 5, 6, 7, kSepId}), seq({kClsId, 8, kSepId})};
  for (bool train : {false, true}) {
    auto results = testing::check_directions(p, batch, train, 17, 60, 99);
    for (const auto& r : results) {
      INFO(r.tensor << " analytic=" << r.analytic << " numeric=" << r.numeric);
      CHECK(r.rel_error < 1e-4);
    }
  }
}

TEST_CASE("gelu derivative") {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    const double h = 1e-6;
    CHECK(gelu_grad(x) == doctest::Approx((gelu(x + h) - gelu(x - h)) / (2 * h)).epsilon(1e-7));
  }
  CHECK(gelu(0.0) == 0.0);
}

TEST_CASE("pooling") {
  HiddenStates<double> h;
  Mat<double> m(3, 2);
  m << 1, 1, 3, 3, 5, 7;
  h.states = {m};
  h.lengths = {3};
  h.seq_len = 3;
  CHECK(pool_word(h, 0, {1, 2}) == m.row(1));
  RowVec<double> mean = pool_word(h, 0, {0, 2});
  CHECK(mean(0) == 2.0);
  CHECK(mean(1) == 2.0);
  CHECK(pool_cls(h, 0) == pool_word(h, 0, {0, 1}));
  CHECK_THROWS_AS(pool_word(h, 0, {1, 1}), Error);
  CHECK_THROWS_AS(pool_word(h, 0, {2, 4}), Error);
  Mat<double> same(2, 2);
  same << 4, 5, 4, 5;
  h.states = {same};
  h.lengths = {2};
  CHECK(pool_word(h, 0, {0, 2}) == same.row(0));
}
