#include <catch2/catch_amalgamated.hpp>

#include "nritv/metrics.hpp"
#include "nritv/sim.hpp"
#include "nritv/solver.hpp"
#include "oracles.hpp"

using namespace nritv;

namespace {

SamplingMask full_mask(int n) {
  SamplingMask m(n);
  for (auto& x : m.m) x = 1;
  m.acs_lines = n;
  return m;
}

SensitivitySet unit_coil(int n) {
  SensitivitySet s(n, 1);
  for (cd& x : s[0].v) x = 1;
  return s;
}

MultiContrastImage bordered_random(int n, int nc, uint64_t seed) {
  Rng rng(seed);
  MultiContrastImage u(n, nc);
  for (int c = 0; c < nc; ++c)
    for (int i = 2; i < n - 2; ++i)
      for (int j = 2; j < n - 2; ++j) {
        auto [a, b] = rng.gauss_pair();
        u[c](i, j) = cd(a, b);
      }
  return u;
}

}  // namespace

TEST_CASE("objective trivial values", "[solver]") {
  const int n = 8, nc = 2, np = 2;
  SensitivitySet sens = make_coils(n, np, 0.35, 3);
  SamplingMask mask = full_mask(n);
  MultiContrastImage truth = bordered_random(n, nc, 5);
  KSpaceData ksp = acquire(truth, sens, mask, 0.0, 0);

  MultiContrastImage zero_u(n, nc);
  GradientFieldSet zero_v(n, nc);
  ObjectiveValue at_zero = objective(zero_u, zero_v, ksp, sens, mask, 0.5);
  double b_sq = 0;
  for (const auto& pl : ksp.planes) b_sq += norm_sq(pl);
  REQUIRE(at_zero.total == Catch::Approx(0.5 * b_sq).epsilon(1e-12));

  // exact data on the full mask, lambda irrelevant at v = 0 with u = truth
  ObjectiveValue at_truth = objective(truth, zero_v, ksp, sens, mask, 0.0);
  REQUIRE(at_truth.data_term <= 1e-20 * b_sq);
  REQUIRE(at_truth.reg_term == 0.0);
}

TEST_CASE("objective matches a direct summation oracle", "[solver]") {
  const int n = 8, nc = 2, np = 3;
  Rng rng(11);
  SensitivitySet sens = make_coils(n, np, 0.35, 7);
  SamplingMask mask = make_mask({n, 2.0, 0.4, 13});
  MultiContrastImage truth = bordered_random(n, nc, 17);
  KSpaceData ksp = acquire(truth, sens, mask, 0.05, 19);
  MultiContrastImage u(n, nc);
  for (int c = 0; c < nc; ++c) u[c] = oracle::random_image(n, rng);
  GradientFieldSet v = oracle::random_field_set(n, nc, rng);
  const double lambda = 0.37;

  ObjectiveValue got = objective(u, v, ksp, sens, mask, lambda);

  double data = 0;
  for (int c = 0; c < nc; ++c) {
    auto fu = encode(u[c], sens, mask);
    for (int p = 0; p < np; ++p)
      for (size_t k = 0; k < fu[p].size(); ++k)
        data += std::norm(fu[p].v[k] - ksp.plane(c, p).v[k]);
  }
  data *= 0.5;
  const double reg = lambda * oracle::nuclear_norm_sum(v);
  REQUIRE(got.data_term == Catch::Approx(data).epsilon(1e-12));
  REQUIRE(got.reg_term == Catch::Approx(reg).epsilon(1e-10));
  REQUIRE(got.total == Catch::Approx(data + reg).epsilon(1e-10));

  for (int c = 0; c < nc; ++c) {
    GradientVectorField du = grad(u[c]);
    double rsq = 0;
    GradientVectorField acc(n);
    for (Grid s : kGrids) {
      GradientVectorField t = interp_adjoint(s, v.field(s, c));
      for (size_t k = 0; k < acc.comp1.size(); ++k) {
        acc.comp1.v[k] += t.comp1.v[k];
        acc.comp2.v[k] += t.comp2.v[k];
      }
    }
    for (size_t k = 0; k < acc.comp1.size(); ++k)
      rsq += std::norm(acc.comp1.v[k] - du.comp1.v[k]) +
             std::norm(acc.comp2.v[k] - du.comp2.v[k]);
    REQUIRE(got.constraint_residual[c] == Catch::Approx(std::sqrt(rsq)).epsilon(1e-12));
  }
}

TEST_CASE("zero data reconstructs to zero in one iteration", "[solver]") {
  const int n = 16, nc = 2, np = 2;
  SensitivitySet sens = make_coils(n, np, 0.35, 3);
  SamplingMask mask = make_mask({n, 2.0, 0.4, 5});
  KSpaceData ksp(n, nc, np);
  ReconResult res = reconstruct(ksp, mask, sens, SolverParams{});
  REQUIRE(res.diag.iterations == 1);
  REQUIRE(res.diag.termination == "rel_tol");
  for (int c = 0; c < nc; ++c) REQUIRE(norm_sq(res.u[c]) == 0.0);
}

TEST_CASE("full-mask noiseless reconstruction is data-consistent", "[solver]") {
  const int n = 32;
  PhantomSpec spec;
  spec.n = n;
  spec.num_contrasts = 1;
  MultiContrastImage truth = make_phantom(spec);
  SensitivitySet sens = unit_coil(n);
  SamplingMask mask = full_mask(n);
  KSpaceData ksp = acquire(truth, sens, mask, 0.0, 0);
  ReconResult res = reconstruct(ksp, mask, sens, SolverParams{});
  REQUIRE(snr(res.u[0], truth[0]) >= 50.0);
}

TEST_CASE("undersampled reconstruction improves on zero-filled and stays feasible",
          "[solver]") {
  const int n = 32, nc = 2, np = 4;
  PhantomSpec spec;
  spec.n = n;
  spec.num_contrasts = nc;
  MultiContrastImage truth = make_phantom(spec);
  SensitivitySet sens = make_coils(n, np, 0.35, 21);
  SamplingMask mask = make_mask({n, 3.0, 0.4, 23});
  KSpaceData ksp = acquire(truth, sens, mask, 0.0, 0);

  SolverParams params;
  params.max_iters = 80;
  ReconResult res = reconstruct(ksp, mask, sens, params);

  // feasibility is exact by construction of the u-step
  for (int c = 0; c < nc; ++c)
    for (const cd& x : res.u[c].v) {
      REQUIRE(x.real() >= 0.0);
      REQUIRE(x.imag() >= 0.0);
    }
  for (double t : res.diag.tau) REQUIRE(t > 0.0);
  for (int b : res.diag.backtracks) REQUIRE(b <= params.max_backtracks);
  REQUIRE(res.diag.iterations <= params.max_iters);
  REQUIRE(static_cast<int>(res.diag.objective.size()) == res.diag.iterations);

  MultiContrastImage zf(n, nc);
  for (int c = 0; c < nc; ++c) {
    std::vector<CImage> planes;
    for (int p = 0; p < np; ++p) planes.push_back(ksp.plane(c, p));
    zf[c] = encode_adjoint(planes, sens, mask);
  }
  for (int c = 0; c < nc; ++c) REQUIRE(snr(res.u[c], truth[c]) > snr(zf[c], truth[c]));
}

TEST_CASE("reconstruction traces are deterministic across runs and thread counts",
          "[solver]") {
  const int n = 16, nc = 2, np = 2;
  PhantomSpec spec;
  spec.n = n;
  spec.num_contrasts = nc;
  MultiContrastImage truth = make_phantom(spec);
  SensitivitySet sens = make_coils(n, np, 0.35, 31);
  SamplingMask mask = make_mask({n, 2.0, 0.4, 37});
  KSpaceData ksp = acquire(truth, sens, mask, 0.01, 41);
  SolverParams params;
  params.max_iters = 25;

  set_threads(1);
  ReconResult a = reconstruct(ksp, mask, sens, params);
  ReconResult b = reconstruct(ksp, mask, sens, params);
  REQUIRE(a.diag.objective == b.diag.objective);  // bit-identical at fixed threads
  for (int c = 0; c < nc; ++c) REQUIRE(a.u[c].v == b.u[c].v);

  set_threads(4);
  ReconResult d = reconstruct(ksp, mask, sens, params);
  set_threads(1);
  REQUIRE(a.diag.objective.size() == d.diag.objective.size());
  for (size_t k = 0; k < a.diag.objective.size(); ++k)
    REQUIRE(std::abs(a.diag.objective[k] - d.diag.objective[k]) <=
            1e-12 * std::abs(a.diag.objective[k]));
}

TEST_CASE("gradient-field functional of flat images is zero", "[solver]") {
  MultiContrastImage zero(12, 2);
  NritvValue at_zero = nritv_value(zero, 50, 1e-12);
  REQUIRE(at_zero.value == 0.0);

  MultiContrastImage flat(12, 2);
  for (int c = 0; c < 2; ++c)
    for (cd& x : flat[c].v) x = cd(0.3 + 0.2 * c, 0.1);
  NritvValue at_flat = nritv_value(flat, 50, 1e-12);
  REQUIRE(at_flat.value == 0.0);
}

TEST_CASE("gradient-field functional is rotation invariant", "[solver]") {
  // zero-bordered images keep the optimal fields off the boundary frame,
  // where the discrete conventions would otherwise perturb the identity
  MultiContrastImage u = bordered_random(16, 2, 97);
  NritvValue v1 = nritv_value(u, 20000, 0.0);
  NritvValue v2 = nritv_value(rotate90(u), 20000, 0.0);
  REQUIRE(v1.rel_residual <= 1e-10);
  REQUIRE(v2.rel_residual <= 1e-10);
  const double tol =
      std::max(1e-6 * v1.value, 10.0 * (v1.rel_residual + v2.rel_residual) * v1.value);
  REQUIRE(std::abs(v1.value - v2.value) <= tol);
}

TEST_CASE("mapped optimal fields satisfy the rotated constraints", "[solver]") {
  const int n = 16, nc = 2;
  MultiContrastImage u = bordered_random(n, nc, 131);
  NritvInnerResult inner = nritv_inner_solve(u, 20000, 0.0);
  REQUIRE(inner.rel_residual <= 1e-10);

  MultiContrastImage ru = rotate90(u);
  GradientFieldSet mapped = map_rotated_gf(inner.v);
  double res_sq = 0, du_sq = 0;
  for (int c = 0; c < nc; ++c) {
    GradientVectorField du = grad(ru[c]);
    GradientVectorField acc(n);
    for (Grid s : kGrids) {
      GradientVectorField t = interp_adjoint(s, mapped.field(s, c));
      for (size_t k = 0; k < acc.comp1.size(); ++k) {
        acc.comp1.v[k] += t.comp1.v[k];
        acc.comp2.v[k] += t.comp2.v[k];
      }
    }
    for (size_t k = 0; k < acc.comp1.size(); ++k)
      res_sq += std::norm(acc.comp1.v[k] - du.comp1.v[k]) +
                std::norm(acc.comp2.v[k] - du.comp2.v[k]);
    du_sq += norm_sq(du);
  }
  const double rel = std::sqrt(res_sq / du_sq);
  REQUIRE(rel <= 10.0 * inner.rel_residual + 1e-12);
}

TEST_CASE("single-contrast reduction: nuclear norm of a 2x1 matrix is its length",
          "[solver]") {
  Rng rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    JointGradientMatrix m(1);
    auto [a, b] = rng.gauss_pair();
    auto [c, d] = rng.gauss_pair();
    m.row1[0] = cd(a, b);
    m.row2[0] = cd(c, d);
    const double len = std::sqrt(std::norm(m.row1[0]) + std::norm(m.row2[0]));
    auto [s1, s2] = singular_values(m);
    REQUIRE(s1 == Catch::Approx(len).margin(1e-13 * std::max(1.0, len)));
    REQUIRE(s2 <= 1e-13 * std::max(1.0, len));

    // the 2x1 nuclear prox reduces to vector soft thresholding
    const double t = rng.uniform01();
    JointGradientMatrix out = prox_nuclear(m, t);
    const double f = len > t ? (len - t) / len : 0.0;
    REQUIRE(std::abs(out.row1[0] - f * m.row1[0]) <= 1e-12);
    REQUIRE(std::abs(out.row2[0] - f * m.row2[0]) <= 1e-12);
  }
}

TEST_CASE("single-contrast functional equals the isotropic vector-norm form",
          "[solver]") {
  MultiContrastImage u = bordered_random(16, 1, 151);
  NritvInnerResult inner = nritv_inner_solve(u, 20000, 0.0);
  REQUIRE(inner.rel_residual <= 1e-10);
  // with one contrast the per-pixel matrices are 2x1, so the summed nuclear
  // norm must equal the summed Euclidean lengths of the field vectors
  double l12 = 0;
  for (Grid s : kGrids) {
    const GradientVectorField& f = inner.v.field(s, 0);
    for (size_t k = 0; k < f.comp1.size(); ++k)
      l12 += std::sqrt(std::norm(f.comp1.v[k]) + std::norm(f.comp2.v[k]));
  }
  REQUIRE(inner.value == Catch::Approx(l12).epsilon(1e-10));
}

TEST_CASE("solver parameter validation", "[solver]") {
  SolverParams p;
  p.mu = 1.5;
  REQUIRE_THROWS_AS(p.validate(), ParamError);
  SolverParams q;
  q.lambda = 0;
  REQUIRE_THROWS_AS(q.validate(), ParamError);
  SolverParams r;
  r.tau0 = -1;
  REQUIRE_THROWS_AS(r.validate(), ParamError);
}
