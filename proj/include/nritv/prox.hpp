#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "nritv/core.hpp"
#include "nritv/operators.hpp"
#include "nritv/parallel.hpp"

namespace nritv {

/// 2xN complex matrix stacking all contrasts' gradient components at one
/// pixel of one grid: row 1 holds first components, row 2 second components.
struct JointGradientMatrix {
  std::vector<cd> row1, row2;

  JointGradientMatrix() = default;
  explicit JointGradientMatrix(int cols) : row1(cols), row2(cols) {}

  int cols() const { return static_cast<int>(row1.size()); }
};

namespace detail {

struct Sv2 {
  double s1 = 0, s2 = 0;        // singular values, descending
  cd u11, u12, u21, u22;        // left singular vectors (columns of U)
};

// Closed-form SVD of a 2xN complex matrix. Left singular vectors come from
// the 2x2 Gram matrix M M^H; the singular values are then recomputed as
// |u_i^H M| directly from the matrix, which keeps the small value accurate
// where the Gram route alone loses half the working precision. The SVD loop
// dominates solver runtime, so this avoids a general decomposition; tests
// anchor it to a generic full-SVD oracle.
inline Sv2 sv2xn(const cd* r1, const cd* r2, int cols) {
  double a = 0, d = 0;
  cd b = 0;
  for (int j = 0; j < cols; ++j) {
    a += std::norm(r1[j]);
    d += std::norm(r2[j]);
    b += r1[j] * std::conj(r2[j]);
  }
  Sv2 out;
  const double babs = std::abs(b);
  if (babs < 1e-30) {
    // ties and diagonal Gram: coordinate axes as singular vectors
    if (a >= d) {
      out.u11 = 1;
      out.u22 = 1;
      out.s1 = std::sqrt(a);
      out.s2 = std::sqrt(d);
    } else {
      out.u12 = 1;
      out.u21 = 1;
      out.s1 = std::sqrt(d);
      out.s2 = std::sqrt(a);
    }
    return out;
  }
  const double disc = std::hypot(a - d, 2.0 * babs);
  const double l1 = 0.5 * (a + d + disc);
  const double y = l1 - a;  // real; strictly positive pairing with b != 0
  const double nrm = std::sqrt(babs * babs + y * y);
  out.u11 = b / nrm;
  out.u12 = y / nrm;
  out.u21 = -y / nrm;                // orthonormal complement of (u11, u12)
  out.u22 = std::conj(b) / nrm;
  double s1_sq = 0, s2_sq = 0;
  for (int j = 0; j < cols; ++j) {
    s1_sq += std::norm(std::conj(out.u11) * r1[j] + std::conj(out.u12) * r2[j]);
    s2_sq += std::norm(std::conj(out.u21) * r1[j] + std::conj(out.u22) * r2[j]);
  }
  if (s2_sq > s1_sq) {
    std::swap(s1_sq, s2_sq);
    std::swap(out.u11, out.u21);
    std::swap(out.u12, out.u22);
  }
  out.s1 = std::sqrt(s1_sq);
  out.s2 = std::sqrt(s2_sq);
  return out;
}

// In-place singular-value soft thresholding of the 2xN matrix (r1; r2).
inline void nuclear_shrink_rows(cd* r1, cd* r2, int cols, double t) {
  if (t == 0.0) return;  // exact identity
  const Sv2 sv = sv2xn(r1, r2, cols);
  const double f1 = sv.s1 > t ? (sv.s1 - t) / sv.s1 : 0.0;
  const double f2 = sv.s2 > t ? (sv.s2 - t) / sv.s2 : 0.0;
  if (f1 == 0.0 && f2 == 0.0) {
    for (int j = 0; j < cols; ++j) r1[j] = r2[j] = cd{};
    return;
  }
  for (int j = 0; j < cols; ++j) {
    const cd w1 = std::conj(sv.u11) * r1[j] + std::conj(sv.u12) * r2[j];  // u1^H M
    const cd w2 = std::conj(sv.u21) * r1[j] + std::conj(sv.u22) * r2[j];  // u2^H M
    r1[j] = f1 * sv.u11 * w1 + f2 * sv.u21 * w2;
    r2[j] = f1 * sv.u12 * w1 + f2 * sv.u22 * w2;
  }
}

}  // namespace detail

/// Singular values of a 2xN matrix, descending.
inline std::pair<double, double> singular_values(const JointGradientMatrix& m) {
  auto sv = detail::sv2xn(m.row1.data(), m.row2.data(), m.cols());
  return {sv.s1, sv.s2};
}

/// Nuclear-norm proximal map: U max(S - t, 0) V^H for M = U S V^H; the
/// minimizer of 0.5 |X - M|_F^2 + t |X|_*.
inline JointGradientMatrix prox_nuclear(const JointGradientMatrix& m, double t) {
  if (t < 0) throw ParamError("prox_nuclear: threshold must be nonnegative");
  JointGradientMatrix out = m;
  detail::nuclear_shrink_rows(out.row1.data(), out.row2.data(), out.cols(), t);
  return out;
}

/// Sum of per-pixel nuclear norms over all grids of a field set.
inline double nuclear_norm_sum(const GradientFieldSet& v) {
  const int n = v.n;
  const int nc = v.num_contrasts;
  double total = 0;
  std::vector<cd> r1(nc), r2(nc);
  for (Grid s : kGrids) {
    for (size_t k = 0; k < static_cast<size_t>(n) * n; ++k) {
      for (int c = 0; c < nc; ++c) {
        const GradientVectorField& f = v.field(s, c);
        r1[c] = f.comp1.v[k];
        r2[c] = f.comp2.v[k];
      }
      auto sv = detail::sv2xn(r1.data(), r2.data(), nc);
      total += sv.s1 + sv.s2;
    }
  }
  return total;
}

/// Joint gradient-field update: form nu = v - tau L_s(h_c), then apply the
/// pixel-wise 2xN nuclear prox with threshold tau*lambda on every grid.
inline GradientFieldSet joint_v_prox(const GradientFieldSet& v,
                                     const std::vector<GradientVectorField>& h, double tau,
                                     double lambda) {
  if (!(tau > 0)) throw ParamError("joint_v_prox: tau must be positive");
  if (lambda < 0) throw ParamError("joint_v_prox: lambda must be nonnegative");
  const int n = v.n;
  const int nc = v.num_contrasts;
  require(static_cast<int>(h.size()) == nc, "joint_v_prox: contrast count mismatch");
  for (const auto& hc : h) require(hc.n() == n, "joint_v_prox: field shape mismatch");

  GradientFieldSet nu(n, nc);
  for (int c = 0; c < nc; ++c) {
    for (Grid s : kGrids) {
      GradientVectorField lh = interp(s, h[c]);
      GradientVectorField& dst = nu.field(s, c);
      const GradientVectorField& src = v.field(s, c);
      for (size_t k = 0; k < src.comp1.size(); ++k) {
        dst.comp1.v[k] = src.comp1.v[k] - tau * lh.comp1.v[k];
        dst.comp2.v[k] = src.comp2.v[k] - tau * lh.comp2.v[k];
      }
    }
  }
  const double t = tau * lambda;
  if (t == 0.0) return nu;
  for (Grid s : kGrids) {
    parallel_for(static_cast<size_t>(n) * n, [&](size_t kb, size_t ke) {
      std::vector<cd> r1(nc), r2(nc);
      for (size_t k = kb; k < ke; ++k) {
        for (int c = 0; c < nc; ++c) {
          const GradientVectorField& f = nu.field(s, c);
          r1[c] = f.comp1.v[k];
          r2[c] = f.comp2.v[k];
        }
        detail::nuclear_shrink_rows(r1.data(), r2.data(), nc, t);
        for (int c = 0; c < nc; ++c) {
          GradientVectorField& f = nu.field(s, c);
          f.comp1.v[k] = r1[c];
          f.comp2.v[k] = r2[c];
        }
      }
    });
  }
  return nu;
}

/// Componentwise clamp of real and imaginary parts at zero.
inline CImage project_nonneg(const CImage& u) {
  CImage out(u.n);
  for (size_t k = 0; k < u.size(); ++k)
    out.v[k] = cd(std::max(u.v[k].real(), 0.0), std::max(u.v[k].imag(), 0.0));
  return out;
}

inline MultiContrastImage project_nonneg(const MultiContrastImage& u) {
  MultiContrastImage out(u.n, u.num_contrasts());
  for (int c = 0; c < u.num_contrasts(); ++c) out[c] = project_nonneg(u[c]);
  return out;
}

/// Frequency-residual dual step: (r + bt*Fu - bt*b) / (1 + bt).
inline CImage prox_r(const CImage& r, const CImage& fu, const CImage& b, double beta_tau) {
  if (!(beta_tau > 0)) throw ParamError("prox_r: beta*tau must be positive");
  require(r.n == fu.n && r.n == b.n, "prox_r: shape mismatch");
  CImage out(r.n);
  const double denom = 1.0 + beta_tau;
  for (size_t k = 0; k < r.size(); ++k)
    out.v[k] = (r.v[k] + beta_tau * fu.v[k] - beta_tau * b.v[k]) / denom;
  return out;
}

/// Gradient-field dual ascent: h + bt*(-Du + sum_s L_s^*(v_s)).
inline GradientVectorField update_h(const GradientVectorField& h, const GradientVectorField& du,
                                    const GradientVectorField& lv_sum, double beta_tau) {
  if (!(beta_tau > 0)) throw ParamError("update_h: beta*tau must be positive");
  const int n = h.n();
  require(du.n() == n && lv_sum.n() == n, "update_h: shape mismatch");
  GradientVectorField out(n);
  for (size_t k = 0; k < h.comp1.size(); ++k) {
    out.comp1.v[k] = h.comp1.v[k] + beta_tau * (lv_sum.comp1.v[k] - du.comp1.v[k]);
    out.comp2.v[k] = h.comp2.v[k] + beta_tau * (lv_sum.comp2.v[k] - du.comp2.v[k]);
  }
  return out;
}

}  // namespace nritv
