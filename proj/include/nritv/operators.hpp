#pragma once

#include <vector>

#include "nritv/core.hpp"
#include "nritv/fft.hpp"
#include "nritv/parallel.hpp"

namespace nritv {

// Boundary conventions, fixed once and adjoint-tested:
//  - grad uses Neumann far edges (differences that would read index n are 0);
//  - the grid interpolators use zero-extension for out-of-range neighbors.

/// Forward finite differences D = (D1, D2).
inline GradientVectorField grad(const CImage& u) {
  const int n = u.n;
  if (n < 2) throw ShapeError("grad: image side must be >= 2");
  GradientVectorField out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out.comp1(i, j) = (i + 1 < n) ? u(i + 1, j) - u(i, j) : cd{};
      out.comp2(i, j) = (j + 1 < n) ? u(i, j + 1) - u(i, j) : cd{};
    }
  return out;
}

/// Exact algebraic adjoint of grad (negative divergence under the same
/// boundary rule).
inline CImage grad_adjoint(const GradientVectorField& h) {
  const int n = h.n();
  require(h.comp2.n == n, "grad_adjoint: component size mismatch");
  CImage out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cd s = 0;
      if (i >= 1) s += h.comp1(i - 1, j);
      if (i + 1 < n) s -= h.comp1(i, j);
      if (j >= 1) s += h.comp2(i, j - 1);
      if (j + 1 < n) s -= h.comp2(i, j);
      out(i, j) = s;
    }
  return out;
}

namespace detail {
inline cd at0(const CImage& a, int i, int j) {
  return (i >= 0 && i < a.n && j >= 0 && j < a.n) ? a(i, j) : cd{};
}
}  // namespace detail

/// The grid-to-mesh maps L_s^* appearing in the gradient-field constraint.
inline GradientVectorField interp_adjoint(Grid s, const GradientVectorField& v) {
  using detail::at0;
  const int n = v.n();
  require(v.comp2.n == n, "interp_adjoint: component size mismatch");
  const CImage& v1 = v.comp1;
  const CImage& v2 = v.comp2;
  GradientVectorField out(n);
  switch (s) {
    case Grid::Vertical:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = v1(i, j);
          out.comp2(i, j) = 0.25 * (v2(i, j) + at0(v2, i, j + 1) + at0(v2, i - 1, j) +
                                    at0(v2, i - 1, j + 1));
        }
      return out;
    case Grid::Horizontal:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = 0.25 * (v1(i, j) + at0(v1, i + 1, j) + at0(v1, i, j - 1) +
                                    at0(v1, i + 1, j - 1));
          out.comp2(i, j) = v2(i, j);
        }
      return out;
    case Grid::Center:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = 0.5 * (v1(i, j) + at0(v1, i + 1, j));
          out.comp2(i, j) = 0.5 * (v2(i, j) + at0(v2, i, j + 1));
        }
      return out;
    case Grid::Cross:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = 0.5 * (v1(i, j) + at0(v1, i, j - 1));
          out.comp2(i, j) = 0.5 * (v2(i, j) + at0(v2, i - 1, j));
        }
      return out;
  }
  throw ParamError("interp_adjoint: unknown grid tag");
}

/// L_s, the algebraic transpose of interp_adjoint (stencil offsets negated,
/// zero-extension kept).
inline GradientVectorField interp(Grid s, const GradientVectorField& h) {
  using detail::at0;
  const int n = h.n();
  require(h.comp2.n == n, "interp: component size mismatch");
  const CImage& h1 = h.comp1;
  const CImage& h2 = h.comp2;
  GradientVectorField out(n);
  switch (s) {
    case Grid::Vertical:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = h1(i, j);
          out.comp2(i, j) = 0.25 * (h2(i, j) + at0(h2, i, j - 1) + at0(h2, i + 1, j) +
                                    at0(h2, i + 1, j - 1));
        }
      return out;
    case Grid::Horizontal:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = 0.25 * (h1(i, j) + at0(h1, i - 1, j) + at0(h1, i, j + 1) +
                                    at0(h1, i - 1, j + 1));
          out.comp2(i, j) = h2(i, j);
        }
      return out;
    case Grid::Center:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = 0.5 * (h1(i, j) + at0(h1, i - 1, j));
          out.comp2(i, j) = 0.5 * (h2(i, j) + at0(h2, i, j - 1));
        }
      return out;
    case Grid::Cross:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.comp1(i, j) = 0.5 * (h1(i, j) + at0(h1, i, j + 1));
          out.comp2(i, j) = 0.5 * (h2(i, j) + at0(h2, i + 1, j));
        }
      return out;
  }
  throw ParamError("interp: unknown grid tag");
}

/// Sensitivity-modulated, mask-restricted unitary Fourier encoding:
/// (encode(u))_p = mask * UnitaryFFT2(s_p * u).
inline std::vector<CImage> encode(const CImage& u, const SensitivitySet& sens,
                                  const SamplingMask& mask) {
  const int n = u.n;
  require(sens.n == n && mask.n == n, "encode: shape mismatch");
  const int coils = sens.num_coils();
  std::vector<CImage> out(coils);
  parallel_for(coils, [&](size_t b, size_t e) {
    CImage tmp(n);
    for (size_t p = b; p < e; ++p) {
      const CImage& sp = sens[static_cast<int>(p)];
      for (size_t k = 0; k < tmp.size(); ++k) tmp.v[k] = sp.v[k] * u.v[k];
      fft2_centered(tmp, out[p]);
      for (size_t k = 0; k < tmp.size(); ++k)
        if (!mask.m[k]) out[p].v[k] = cd{};
    }
  });
  return out;
}

/// Adjoint encoding: sum_p conj(s_p) * UnitaryIFFT2(mask * r_p).
inline CImage encode_adjoint(const std::vector<CImage>& r, const SensitivitySet& sens,
                             const SamplingMask& mask) {
  const int coils = sens.num_coils();
  require(static_cast<int>(r.size()) == coils, "encode_adjoint: coil count mismatch");
  const int n = sens.n;
  require(mask.n == n, "encode_adjoint: shape mismatch");
  std::vector<CImage> dec(coils);
  parallel_for(coils, [&](size_t b, size_t e) {
    CImage tmp(n);
    for (size_t p = b; p < e; ++p) {
      require(r[p].n == n, "encode_adjoint: plane shape mismatch");
      for (size_t k = 0; k < tmp.size(); ++k) tmp.v[k] = mask.m[k] ? r[p].v[k] : cd{};
      ifft2_centered(tmp, dec[p]);
    }
  });
  CImage out(n);
  // fixed coil order inside each pixel keeps the reduction deterministic
  for (int p = 0; p < coils; ++p) {
    const CImage& sp = sens[p];
    for (size_t k = 0; k < out.size(); ++k) out.v[k] += std::conj(sp.v[k]) * dec[p].v[k];
  }
  return out;
}

/// 90-degree rotation; rotate90(u)(i, j) = u(j, n-1-i) in 0-based indexing.
inline CImage rotate90(const CImage& u) {
  const int n = u.n;
  CImage out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = u(j, n - 1 - i);
  return out;
}

inline MultiContrastImage rotate90(const MultiContrastImage& u) {
  MultiContrastImage out(u.n, u.num_contrasts());
  for (int c = 0; c < u.num_contrasts(); ++c) out[c] = rotate90(u[c]);
  return out;
}

/// Remaps a gradient-field set onto the grids of the rotated image: each
/// target field is (-R src2, R src1) with the vertical and horizontal grids
/// exchanging roles, and the vertical and cross targets picking up a
/// one-row shift (zero-extended at the far edge). The shifts make the map
/// intertwine the interpolation constraint with image rotation exactly in
/// the interior; the residual boundary slices are the ones an optimal field
/// leaves empty.
inline GradientFieldSet map_rotated_gf(const GradientFieldSet& v) {
  const int n = v.n;
  const int nc = v.num_contrasts;
  GradientFieldSet out(n, nc);
  for (int c = 0; c < nc; ++c) {
    auto swap_rotate = [&](const GradientVectorField& src, GradientVectorField& dst) {
      dst.comp1 = rotate90(src.comp2);
      for (cd& x : dst.comp1.v) x = -x;
      dst.comp2 = rotate90(src.comp1);
    };
    auto swap_rotate_shift = [&](const GradientVectorField& src, GradientVectorField& dst) {
      const CImage r1 = rotate90(src.comp1);
      const CImage r2 = rotate90(src.comp2);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          dst.comp1(i, j) = (i + 1 < n) ? -r2(i + 1, j) : cd{};
          dst.comp2(i, j) = (i + 1 < n) ? r1(i + 1, j) : cd{};
        }
    };
    swap_rotate(v.field(Grid::Center, c), out.field(Grid::Center, c));
    swap_rotate(v.field(Grid::Vertical, c), out.field(Grid::Horizontal, c));
    swap_rotate_shift(v.field(Grid::Cross, c), out.field(Grid::Cross, c));
    swap_rotate_shift(v.field(Grid::Horizontal, c), out.field(Grid::Vertical, c));
  }
  return out;
}

}  // namespace nritv
