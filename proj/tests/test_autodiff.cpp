#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hetmp/tape.hpp"
#include "test_util.hpp"

using namespace hetmp;
using hetmp::testutil::check_grads;

namespace {

ParamStore two_mats(uint64_t seed, int m, int k, int n) {
  Rng rng(seed);
  ParamStore ps;
  ps["a"] = rng.normal_tensor({m, k});
  ps["b"] = rng.normal_tensor({k, n});
  return ps;
}

/// Random constant weighting so sum-based losses exercise every adjoint
/// entry with distinct coefficients.
Tensor weights(std::vector<int> shape, uint64_t seed) {
  Rng rng(seed);
  return rng.normal_tensor(std::move(shape));
}

}  // namespace

TEST_CASE("trivial gradient identities") {
  Rng rng(3);
  ParamStore ps;
  ps["w"] = rng.normal_tensor({3, 4});

  SUBCASE("loss = sum(W) -> grad all ones") {
    Tape tp;
    Var w = tp.param("w", ps["w"]);
    auto grads = tp.grad(tp.sum_all(w));
    for (double v : grads.at("w").data) CHECK(v == 1.0);
  }
  SUBCASE("loss = sum(W*W)/2 -> grad equals W") {
    Tape tp;
    Var w = tp.param("w", ps["w"]);
    auto grads = tp.grad(tp.scale(tp.sum_all(tp.mul(w, w)), 0.5));
    for (size_t i = 0; i < ps["w"].data.size(); ++i)
      CHECK(grads.at("w").data[i] == doctest::Approx(ps["w"].data[i]));
  }
  SUBCASE("disconnected parameter -> zero gradient") {
    ps["lonely"] = rng.normal_tensor({2, 2});
    Tape tp;
    Var w = tp.param("w", ps["w"]);
    tp.param("lonely", ps["lonely"]);
    auto grads = tp.grad(tp.sum_all(w));
    for (double v : grads.at("lonely").data) CHECK(v == 0.0);
  }
}

TEST_CASE("forward trivia") {
  Tape tp;
  SUBCASE("softmax of zeros is uniform") {
    Var s = tp.softmax_rows(tp.constant(Tensor::zeros({1, 3})));
    for (double v : s->value.data) CHECK(v == doctest::Approx(1.0 / 3));
  }
  SUBCASE("matmul with identity is identity") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Var r = tp.matmul(tp.constant(a), tp.constant(Tensor::identity(2)));
    for (int i = 0; i < 4; ++i) CHECK(r->value.data[i] == a.data[i]);
  }
  SUBCASE("dropout p=0 is the identity") {
    Rng rng(5);
    Tensor a = rng.normal_tensor({4, 4});
    Rng drop(9);
    Var r = tp.dropout(tp.constant(a), 0.0, drop, true);
    for (int i = 0; i < 16; ++i) CHECK(r->value.data[i] == a.data[i]);
  }
  SUBCASE("grad of non-scalar loss rejected") {
    Var w = tp.param("w", Tensor::zeros({2, 2}));
    CHECK_THROWS(tp.grad(w));
  }
}

TEST_CASE("finite differences: linear algebra primitives") {
  ParamStore ps = two_mats(11, 4, 3, 5);
  CHECK(check_grads(ps, [](Tape& tp, ParamStore& ps) {
          return tp.sum_all(tp.mul(
              tp.matmul(tp.param("a", ps["a"]), tp.param("b", ps["b"])),
              tp.constant(weights({4, 5}, 1))));
        }) < 1e-4);

  ParamStore ps2 = two_mats(12, 4, 4, 4);
  ps2["b"] = Rng(13).normal_tensor({4, 4});
  CHECK(check_grads(ps2, [](Tape& tp, ParamStore& ps) {
          Var a = tp.param("a", ps["a"]), b = tp.param("b", ps["b"]);
          Var x = tp.add(tp.mul(a, b), tp.sub(tp.scale(a, 0.7), b));
          return tp.sum_all(tp.mul(tp.transpose(x), tp.constant(weights({4, 4}, 2))));
        }) < 1e-4);

  ParamStore ps3;
  ps3["a"] = Rng(14).normal_tensor({4, 3});
  ps3["row"] = Rng(15).normal_tensor({1, 3});
  CHECK(check_grads(ps3, [](Tape& tp, ParamStore& ps) {
          Var x = tp.add_rowvec(tp.param("a", ps["a"]), tp.param("row", ps["row"]));
          return tp.sum_all(tp.mul(x, tp.constant(weights({4, 3}, 3))));
        }) < 1e-4);
}

TEST_CASE("finite differences: nonlinearities") {
  ParamStore ps;
  // Keep relu/leaky-relu inputs away from the kink at 0.
  Rng rng(21);
  ps["a"] = Tensor({3, 4});
  for (auto& v : ps["a"].data)
    v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.5);

  for (auto op : {0, 1, 2, 3}) {
    CAPTURE(op);
    CHECK(check_grads(ps, [op](Tape& tp, ParamStore& ps) {
            Var a = tp.param("a", ps["a"]);
            Var x = op == 0   ? tp.exp_(a)
                    : op == 1 ? tp.tanh_(a)
                    : op == 2 ? tp.relu(a)
                              : tp.leaky_relu(a, 0.2);
            return tp.sum_all(tp.mul(x, tp.constant(weights({3, 4}, 4))));
          }) < 1e-4);
  }

  ParamStore pos;
  pos["a"] = Rng(22).uniform_tensor({3, 3}, 0.5, 2.0);
  CHECK(check_grads(pos, [](Tape& tp, ParamStore& ps) {
          return tp.sum_all(tp.mul(tp.log_(tp.param("a", ps["a"])),
                                   tp.constant(weights({3, 3}, 5))));
        }) < 1e-4);

  ParamStore sm;
  sm["a"] = Rng(23).normal_tensor({4, 5});
  CHECK(check_grads(sm, [](Tape& tp, ParamStore& ps) {
          return tp.sum_all(tp.mul(tp.softmax_rows(tp.param("a", ps["a"])),
                                   tp.constant(weights({4, 5}, 6))));
        }) < 1e-4);
}

TEST_CASE("finite differences: reductions, slicing, concat") {
  ParamStore ps;
  ps["a"] = Rng(31).normal_tensor({5, 4});
  ps["b"] = Rng(32).normal_tensor({5, 3});

  CHECK(check_grads(ps, [](Tape& tp, ParamStore& ps) {
          Var a = tp.param("a", ps["a"]), b = tp.param("b", ps["b"]);
          Var cat = tp.concat_cols({a, b});
          Var s0 = tp.sum_axis(cat, 0);
          Var m1 = tp.mean_axis(cat, 1);
          return tp.add(tp.sum_all(tp.mul(s0, tp.constant(weights({1, 7}, 7)))),
                        tp.mean_all(tp.mul(m1, tp.constant(weights({5, 1}, 8)))));
        }) < 1e-4);

  CHECK(check_grads(ps, [](Tape& tp, ParamStore& ps) {
          Var a = tp.param("a", ps["a"]);
          Var rows = tp.slice_rows(a, 1, 4);
          Var cols = tp.slice_cols(a, 2, 4);
          return tp.add(
              tp.sum_all(tp.mul(rows, tp.constant(weights({3, 4}, 9)))),
              tp.sum_all(tp.mul(cols, tp.constant(weights({5, 2}, 10)))));
        }) < 1e-4);

  Tensor mask = Tensor::zeros({5, 4});
  for (int i = 0; i < 20; i += 3) mask.data[i] = 1.0;
  CHECK(check_grads(ps, [mask](Tape& tp, ParamStore& ps) {
          Var a = tp.param("a", ps["a"]);
          Var x = tp.hadamard_mask(a, mask);
          return tp.sum_all(tp.mul(x, tp.constant(weights({5, 4}, 11))));
        }) < 1e-4);

  CHECK(check_grads(ps, [](Tape& tp, ParamStore& ps) {
          Var a = tp.param("a", ps["a"]);
          return tp.sum_all(tp.mul(tp.add_n({a, tp.scale(a, 2.0), a}),
                                   tp.constant(weights({5, 4}, 12))));
        }) < 1e-4);
}

TEST_CASE("finite differences: graph aggregation primitives") {
  ParamStore ps;
  ps["h"] = Rng(41).normal_tensor({5, 3});
  ps["s"] = Rng(42).normal_tensor({4, 1});
  std::vector<int> idx{0, 2, 4, 2};

  CHECK(check_grads(ps, [idx](Tape& tp, ParamStore& ps) {
          Var h = tp.param("h", ps["h"]);
          Var s = tp.param("s", ps["s"]);
          Var gathered = tp.mul_col(tp.gather_rows(h, idx), s);
          Var scattered = tp.scatter_add_rows(gathered, idx, 5);
          return tp.sum_all(tp.mul(scattered, tp.constant(weights({5, 3}, 13))));
        }) < 1e-4);

  ParamStore seg;
  seg["logits"] = Rng(43).normal_tensor({6, 1});
  std::vector<int> segs{0, 0, 1, 1, 1, 2};
  CHECK(check_grads(seg, [segs](Tape& tp, ParamStore& ps) {
          Var att = tp.segment_softmax(tp.param("logits", ps["logits"]), segs, 3);
          return tp.sum_all(tp.mul(att, tp.constant(weights({6, 1}, 14))));
        }) < 1e-4);
}

TEST_CASE("finite differences: cosine primitives") {
  ParamStore ps;
  ps["h"] = Rng(51).normal_tensor({4, 3});
  std::vector<int> src{0, 1, 2, 3}, dst{1, 2, 3, 0};

  CHECK(check_grads(ps, [src, dst](Tape& tp, ParamStore& ps) {
          Var cos = tp.edge_cosine(tp.param("h", ps["h"]), src, dst);
          return tp.sum_all(tp.mul(cos, tp.constant(weights({4, 1}, 15))));
        }) < 1e-4);

  CHECK(check_grads(ps, [](Tape& tp, ParamStore& ps) {
          Var cos = tp.cosine_matrix(tp.param("h", ps["h"]));
          return tp.sum_all(tp.mul(cos, tp.constant(weights({4, 4}, 16))));
        }) < 1e-4);

  SUBCASE("detached cosine blocks gradient flow") {
    Tape tp;
    Var h = tp.param("h", ps["h"]);
    Var cos = tp.edge_cosine(h, src, dst, /*detach=*/true);
    auto grads = tp.grad(tp.sum_all(cos));
    for (double v : grads.at("h").data) CHECK(v == 0.0);
  }

  SUBCASE("zero-norm embedding yields similarity 0") {
    Tape tp;
    Tensor h = Tensor::zeros({2, 3});
    h.at(1, 0) = 1.0;
    Var cos = tp.edge_cosine(tp.constant(h), {0}, {1});
    CHECK(cos->value.data[0] == 0.0);
  }
}

TEST_CASE("finite differences: losses, batch norm, dropout") {
  ParamStore ps;
  ps["logits"] = Rng(61).normal_tensor({5, 3});
  std::vector<int> labels{0, 2, 1, 1, 0};
  std::vector<bool> mask{true, false, true, true, false};
  CHECK(check_grads(ps, [labels, mask](Tape& tp, ParamStore& ps) {
          return tp.masked_cross_entropy(tp.param("logits", ps["logits"]),
                                         labels, mask);
        }) < 1e-4);

  ParamStore bn;
  bn["x"] = Rng(62).normal_tensor({6, 4});
  bn["g"] = Rng(63).uniform_tensor({1, 4}, 0.5, 1.5);
  bn["b"] = Rng(64).normal_tensor({1, 4});
  CHECK(check_grads(bn, [](Tape& tp, ParamStore& ps) {
          Var y = tp.batch_norm(tp.param("x", ps["x"]), tp.param("g", ps["g"]),
                                tp.param("b", ps["b"]), true);
          return tp.sum_all(tp.mul(y, tp.constant(weights({6, 4}, 17))));
        }) < 1e-4);

  ParamStore dr;
  dr["x"] = Rng(65).normal_tensor({8, 8});
  CHECK(check_grads(dr, [](Tape& tp, ParamStore& ps) {
          Rng drop(7);  // fixed seed: identical mask on every rebuild
          Var y = tp.dropout(tp.param("x", ps["x"]), 0.4, drop, true);
          return tp.sum_all(tp.mul(y, tp.constant(weights({8, 8}, 18))));
        }) < 1e-4);

  SUBCASE("dropout eval mode is identity regardless of p") {
    Tape tp;
    Rng drop(7);
    Tensor x = Rng(66).normal_tensor({4, 4});
    Var y = tp.dropout(tp.constant(x), 0.9, drop, false);
    for (int i = 0; i < 16; ++i) CHECK(y->value.data[i] == x.data[i]);
  }
}

TEST_CASE("finite differences: convolution") {
  ParamStore ps;
  ps["x"] = Rng(71).normal_tensor({4, 4, 2});
  ps["w"] = Rng(72).normal_tensor({3, 3, 2, 3}, 0.5);
  ps["b"] = Rng(73).normal_tensor({1, 3});
  CHECK(check_grads(ps, [](Tape& tp, ParamStore& ps) {
          Var y = tp.conv2d(tp.param("x", ps["x"]), tp.param("w", ps["w"]),
                            tp.param("b", ps["b"]));
          Var part = tp.slice_channels(y, 1, 3);
          return tp.sum_all(tp.mul(part, tp.constant(weights({4, 4, 2}, 19))));
        }) < 1e-4);
}

TEST_CASE("tape replay determinism") {
  ParamStore ps = two_mats(81, 3, 3, 3);
  auto run = [&] {
    Tape tp;
    Var x = tp.matmul(tp.param("a", ps["a"]), tp.param("b", ps["b"]));
    Var loss = tp.sum_all(tp.tanh_(x));
    auto grads = tp.grad(loss);
    return std::make_pair(loss->value.data[0], grads.at("a").data);
  };
  auto [l1, g1] = run();
  auto [l2, g2] = run();
  CHECK(l1 == l2);  // bit-identical
  CHECK(g1 == g2);
}

TEST_CASE("adamw") {
  SUBCASE("zero gradient, zero decay -> unchanged") {
    ParamStore ps;
    ps["p"] = Tensor::scalar(1.25);
    AdamWState st;
    AdamWConfig cfg;
    adamw_step(ps, {{"p", Tensor::scalar(0.0)}}, st, cfg);
    CHECK(ps["p"].data[0] == 1.25);
  }
  SUBCASE("hand-evaluated single step") {
    // p=1, g=1, lr=1e-3: step = lr * mhat / (sqrt(vhat) + eps) with
    // mhat = vhat = 1 after bias correction, so p -> 1 - 1e-3/(1+1e-8).
    ParamStore ps;
    ps["p"] = Tensor::scalar(1.0);
    AdamWState st;
    AdamWConfig cfg;
    adamw_step(ps, {{"p", Tensor::scalar(1.0)}}, st, cfg);
    CHECK(ps["p"].data[0] == doctest::Approx(0.999).epsilon(1e-6));
  }
  SUBCASE("decoupled decay with zero gradient") {
    ParamStore ps;
    ps["p"] = Tensor::scalar(2.0);
    AdamWState st;
    AdamWConfig cfg;
    cfg.weight_decay = 0.01;
    adamw_step(ps, {{"p", Tensor::scalar(0.0)}}, st, cfg);
    CHECK(ps["p"].data[0] == doctest::Approx(2.0 * (1.0 - 0.001 * 0.01)));
  }
}
