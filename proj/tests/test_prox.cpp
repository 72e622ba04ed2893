#include <catch2/catch_amalgamated.hpp>

#include "nritv/prox.hpp"
#include "oracles.hpp"

using namespace nritv;

namespace {

double frob_dist(const JointGradientMatrix& a, const JointGradientMatrix& b) {
  double s = 0;
  for (int j = 0; j < a.cols(); ++j) {
    s += std::norm(a.row1[j] - b.row1[j]);
    s += std::norm(a.row2[j] - b.row2[j]);
  }
  return std::sqrt(s);
}

double frob(const JointGradientMatrix& a) {
  double s = 0;
  for (int j = 0; j < a.cols(); ++j) s += std::norm(a.row1[j]) + std::norm(a.row2[j]);
  return std::sqrt(s);
}

double prox_objective(const JointGradientMatrix& x, const JointGradientMatrix& m, double t) {
  return 0.5 * frob_dist(x, m) * frob_dist(x, m) + t * oracle::nuclear_norm(x);
}

}  // namespace

TEST_CASE("prox_nuclear shrinks a rank-one example", "[prox]") {
  JointGradientMatrix m(2);
  m.row1[0] = 1;  // [[1,0],[0,0]], single singular value 1
  JointGradientMatrix out = prox_nuclear(m, 0.4);
  REQUIRE(std::abs(out.row1[0] - cd{0.6}) <= 1e-14);
  REQUIRE(std::abs(out.row1[1]) <= 1e-14);
  REQUIRE(std::abs(out.row2[0]) <= 1e-14);
  REQUIRE(std::abs(out.row2[1]) <= 1e-14);
}

TEST_CASE("prox_nuclear shrinks each singular value independently", "[prox]") {
  JointGradientMatrix m(2);
  m.row1[0] = 3;  // diag(3, 1)
  m.row2[1] = 1;
  JointGradientMatrix out = prox_nuclear(m, 2.0);
  REQUIRE(std::abs(out.row1[0] - cd{1.0}) <= 1e-14);
  REQUIRE(std::abs(out.row2[1]) <= 1e-14);
}

TEST_CASE("prox_nuclear rejects negative thresholds", "[prox]") {
  JointGradientMatrix m(2);
  REQUIRE_THROWS_AS(prox_nuclear(m, -1.0), ParamError);
}

TEST_CASE("prox_nuclear matches the generic SVD oracle", "[prox]") {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const int cols = 1 + trial % 4;
    JointGradientMatrix m = oracle::random_matrix(cols, rng);
    const double t = rng.uniform01() * 2.0;
    JointGradientMatrix got = prox_nuclear(m, t);
    JointGradientMatrix want = oracle::svd_prox(m, t);
    REQUIRE(frob_dist(got, want) <= 1e-10 * std::max(1.0, frob(m)));
  }
}

TEST_CASE("prox_nuclear output is optimal against sampled perturbations", "[prox]") {
  Rng rng(43);
  for (int trial = 0; trial < 40; ++trial) {
    const int cols = 1 + trial % 4;
    JointGradientMatrix m = oracle::random_matrix(cols, rng);
    const double t = 0.1 + rng.uniform01();
    JointGradientMatrix x = prox_nuclear(m, t);
    const double fx = prox_objective(x, m, t);
    for (int pert = 0; pert < 50; ++pert) {
      JointGradientMatrix z = oracle::random_matrix(cols, rng);
      const double eps = 1e-3 + rng.uniform01() * 0.1;
      JointGradientMatrix y = x;
      for (int j = 0; j < cols; ++j) {
        y.row1[j] += eps * z.row1[j];
        y.row2[j] += eps * z.row2[j];
      }
      REQUIRE(prox_objective(y, m, t) >= fx - 1e-12);
    }
  }
}

TEST_CASE("prox_nuclear is nonexpansive", "[prox]") {
  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const int cols = 1 + trial % 4;
    JointGradientMatrix a = oracle::random_matrix(cols, rng);
    JointGradientMatrix b = oracle::random_matrix(cols, rng);
    const double t = rng.uniform01();
    REQUIRE(frob_dist(prox_nuclear(a, t), prox_nuclear(b, t)) <=
            frob_dist(a, b) + 1e-12);
  }
}

TEST_CASE("prox_nuclear preserves the input column space", "[prox]") {
  Rng rng(45);
  for (int trial = 0; trial < 100; ++trial) {
    const int cols = 2 + trial % 3;
    JointGradientMatrix m = oracle::random_matrix(cols, rng);
    // rank-1 input: second row a complex multiple of the first
    const cd f(0.5, -1.25);
    for (int j = 0; j < cols; ++j) m.row2[j] = f * m.row1[j];
    JointGradientMatrix out = prox_nuclear(m, 0.3);
    // each output column must stay parallel to the input direction (1, f)
    for (int j = 0; j < cols; ++j) {
      const cd resid = out.row2[j] - f * out.row1[j];
      REQUIRE(std::abs(resid) <= 1e-10 * std::max(1.0, frob(m)));
    }
  }
}

TEST_CASE("prox_nuclear value identity: |prox|_* = sum max(s_i - t, 0)", "[prox]") {
  Rng rng(46);
  for (int trial = 0; trial < 200; ++trial) {
    const int cols = 1 + trial % 4;
    JointGradientMatrix m = oracle::random_matrix(cols, rng);
    const double t = rng.uniform01();
    auto [s1, s2] = singular_values(m);
    const double want = std::max(s1 - t, 0.0) + std::max(s2 - t, 0.0);
    const double got = oracle::nuclear_norm(prox_nuclear(m, t));
    REQUIRE(got == Catch::Approx(want).margin(1e-12 * std::max(1.0, s1)));
  }
}

TEST_CASE("one nonzero column gives exactly one nonzero singular value", "[prox]") {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    JointGradientMatrix m(4);
    auto [a, b] = rng.gauss_pair();
    auto [c, d] = rng.gauss_pair();
    m.row1[2] = cd(a, b);
    m.row2[2] = cd(c, d);
    auto [s1, s2] = singular_values(m);
    REQUIRE(s2 <= 1e-12 * s1);
  }
}

TEST_CASE("singular values match the generic SVD oracle", "[prox]") {
  Rng rng(48);
  for (int trial = 0; trial < 500; ++trial) {
    const int cols = 1 + trial % 4;
    JointGradientMatrix m = oracle::random_matrix(cols, rng);
    auto [s1, s2] = singular_values(m);
    auto [o1, o2] = oracle::svd_values(m);
    REQUIRE(s1 == Catch::Approx(o1).margin(1e-12 * std::max(1.0, o1)));
    REQUIRE(s2 == Catch::Approx(o2).margin(1e-12 * std::max(1.0, o1)));
  }
}

TEST_CASE("joint_v_prox with zero threshold is the identity on nu", "[prox]") {
  Rng rng(49);
  const int n = 4, nc = 2;
  GradientFieldSet v = oracle::random_field_set(n, nc, rng);
  std::vector<GradientVectorField> h;
  for (int c = 0; c < nc; ++c) h.push_back(oracle::random_field(n, rng));
  const double tau = 0.37;
  GradientFieldSet out = joint_v_prox(v, h, tau, 0.0);
  for (int c = 0; c < nc; ++c)
    for (Grid s : kGrids) {
      GradientVectorField lh = interp(s, h[c]);
      const auto& got = out.field(s, c);
      const auto& src = v.field(s, c);
      for (size_t k = 0; k < got.comp1.size(); ++k) {
        REQUIRE(got.comp1.v[k] == src.comp1.v[k] - tau * lh.comp1.v[k]);
        REQUIRE(got.comp2.v[k] == src.comp2.v[k] - tau * lh.comp2.v[k]);
      }
    }
}

TEST_CASE("joint_v_prox of zeros is zero", "[prox]") {
  GradientFieldSet v(4, 3);
  std::vector<GradientVectorField> h(3, GradientVectorField(4));
  GradientFieldSet out = joint_v_prox(v, h, 0.5, 0.25);
  for (const auto& f : out.fields) REQUIRE(norm_sq(f) == 0.0);
}

TEST_CASE("joint_v_prox matches the per-pixel oracle loop", "[prox]") {
  Rng rng(50);
  const int n = 4, nc = 2;
  GradientFieldSet v = oracle::random_field_set(n, nc, rng);
  std::vector<GradientVectorField> h;
  for (int c = 0; c < nc; ++c) h.push_back(oracle::random_field(n, rng));
  const double tau = 0.8, lambda = 0.6;
  GradientFieldSet got = joint_v_prox(v, h, tau, lambda);

  for (Grid s : kGrids) {
    std::vector<GradientVectorField> lh;
    for (int c = 0; c < nc; ++c) lh.push_back(interp(s, h[c]));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        JointGradientMatrix m(nc);
        for (int c = 0; c < nc; ++c) {
          m.row1[c] = v.field(s, c).comp1(i, j) - tau * lh[c].comp1(i, j);
          m.row2[c] = v.field(s, c).comp2(i, j) - tau * lh[c].comp2(i, j);
        }
        JointGradientMatrix want = oracle::svd_prox(m, tau * lambda);
        for (int c = 0; c < nc; ++c) {
          REQUIRE(std::abs(got.field(s, c).comp1(i, j) - want.row1[c]) <= 1e-10);
          REQUIRE(std::abs(got.field(s, c).comp2(i, j) - want.row2[c]) <= 1e-10);
        }
      }
  }
}

TEST_CASE("project_nonneg clamps components independently", "[prox]") {
  CImage u(2);
  u(0, 0) = cd(1, 1);
  u(0, 1) = cd(-1, -1);
  u(1, 0) = cd(0.5, -2);
  u(1, 1) = cd(-0.25, 3);
  CImage out = project_nonneg(u);
  REQUIRE(out(0, 0) == cd(1, 1));
  REQUIRE(out(0, 1) == cd(0, 0));
  REQUIRE(out(1, 0) == cd(0.5, 0));
  REQUIRE(out(1, 1) == cd(0, 3));
}

TEST_CASE("prox_r trivial and formula cases", "[prox]") {
  Rng rng(51);
  const int n = 6;
  CImage r = oracle::random_image(n, rng);
  CImage fu = oracle::random_image(n, rng);
  CImage b = oracle::random_image(n, rng);
  const double bt = 0.73;

  // consistent data: pure shrink
  CImage shrunk = prox_r(r, b, b, bt);
  for (size_t k = 0; k < r.size(); ++k)
    REQUIRE(std::abs(shrunk.v[k] - r.v[k] / (1.0 + bt)) <= 1e-14);

  // zero dual, unit step: half the residual
  CImage zero(n);
  CImage half = prox_r(zero, fu, b, 1.0);
  for (size_t k = 0; k < half.size(); ++k)
    REQUIRE(std::abs(half.v[k] - 0.5 * (fu.v[k] - b.v[k])) <= 1e-14);

  CImage out = prox_r(r, fu, b, bt);
  for (size_t k = 0; k < out.size(); ++k) {
    const cd want = (r.v[k] + bt * fu.v[k] - bt * b.v[k]) / (1.0 + bt);
    REQUIRE(std::abs(out.v[k] - want) <= 1e-14);
  }
}

TEST_CASE("update_h trivial and formula cases", "[prox]") {
  Rng rng(52);
  const int n = 5;
  GradientVectorField h = oracle::random_field(n, rng);
  GradientVectorField du = oracle::random_field(n, rng);
  GradientVectorField lv = oracle::random_field(n, rng);
  const double bt = 0.41;

  // satisfied constraint leaves h unchanged
  GradientVectorField same = update_h(h, du, du, bt);
  for (size_t k = 0; k < h.comp1.size(); ++k) {
    REQUIRE(same.comp1.v[k] == h.comp1.v[k]);
    REQUIRE(same.comp2.v[k] == h.comp2.v[k]);
  }

  GradientVectorField zero(n);
  GradientVectorField diff = update_h(zero, du, lv, 1.0);
  for (size_t k = 0; k < diff.comp1.size(); ++k) {
    REQUIRE(std::abs(diff.comp1.v[k] - (lv.comp1.v[k] - du.comp1.v[k])) <= 1e-14);
    REQUIRE(std::abs(diff.comp2.v[k] - (lv.comp2.v[k] - du.comp2.v[k])) <= 1e-14);
  }

  GradientVectorField out = update_h(h, du, lv, bt);
  for (size_t k = 0; k < out.comp1.size(); ++k) {
    REQUIRE(std::abs(out.comp1.v[k] - (h.comp1.v[k] + bt * (lv.comp1.v[k] - du.comp1.v[k]))) <=
            1e-14);
    REQUIRE(std::abs(out.comp2.v[k] - (h.comp2.v[k] + bt * (lv.comp2.v[k] - du.comp2.v[k]))) <=
            1e-14);
  }
}
