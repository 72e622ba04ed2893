#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "nritv/core.hpp"
#include "nritv/operators.hpp"
#include "nritv/random.hpp"

namespace nritv {

/// One ellipse of the head phantom: additive intensity, semi-axes, center
/// and rotation angle in the [-1,1]^2 field of view.
struct PhantomEllipse {
  double intensity, a, b, x0, y0, phi_deg;
};

/// The standard 10-ellipse head-phantom geometry.
inline const std::array<PhantomEllipse, 10>& shepp_logan_geometry() {
  static const std::array<PhantomEllipse, 10> geo = {{
      {2.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  }};
  return geo;
}

/// The classic additive intensities, i.e. the identity remap.
inline std::vector<double> classic_shepp_logan_intensities() {
  std::vector<double> a;
  for (const auto& e : shepp_logan_geometry()) a.push_back(e.intensity);
  return a;
}

/// Flat-top regular hexagon overwritten into one target contrast.
struct Lesion {
  double cx = 0, cy = 0;      // center, normalized [-1,1] coordinates
  double circumradius = 0.1;  // normalized
  double intensity = 1.0;
  int contrast = 1;           // 1-based target contrast
};

struct PhantomSpec {
  int n = 80;
  int num_contrasts = 3;
  // One additive-intensity table of 10 entries per contrast; empty selects
  // the built-in tissue-weighting defaults.
  std::vector<std::vector<double>> remap;
  std::vector<Lesion> lesions;
};

/// Built-in per-contrast intensity tables with distinct tissue orderings
/// (bright-rim/dark-fluid, dark-rim/bright-fluid, flat, fluid-suppressed).
inline std::vector<std::vector<double>> default_contrast_remaps(int num_contrasts) {
  static const std::vector<std::vector<double>> base = {
      {1.00, -0.30, -0.45, -0.45, 0.20, 0.15, 0.15, 0.12, 0.12, 0.12},
      {0.45, -0.15, 0.55, 0.55, -0.12, 0.25, 0.25, 0.20, 0.20, 0.20},
      {0.60, 0.15, 0.05, 0.05, 0.10, -0.20, -0.20, -0.15, -0.15, -0.15},
      {0.75, -0.25, -0.35, -0.35, 0.15, 0.10, 0.10, -0.10, -0.10, -0.10},
  };
  std::vector<std::vector<double>> out;
  for (int c = 0; c < num_contrasts; ++c) out.push_back(base[c % base.size()]);
  return out;
}

namespace detail {

inline bool inside_ellipse(const PhantomEllipse& e, double x, double y) {
  const double phi = e.phi_deg * std::numbers::pi / 180.0;
  const double dx = x - e.x0;
  const double dy = y - e.y0;
  const double xr = dx * std::cos(phi) + dy * std::sin(phi);
  const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
  return (xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0;
}

inline bool inside_hexagon(const Lesion& l, double x, double y) {
  // flat-top regular hexagon: vertices at angles 0, 60, ..., 300 degrees
  const double dx = std::abs(x - l.cx);
  const double dy = std::abs(y - l.cy);
  const double r = l.circumradius;
  const double s3 = std::sqrt(3.0);
  return dy <= 0.5 * s3 * r && s3 * dx + dy <= s3 * r;
}

}  // namespace detail

/// Rasterizes the shared-geometry multi-contrast phantom: per contrast the
/// ellipse intensities come from the remap table, lesions overwrite pixel
/// centers inside their hexagon in the target contrast only, and the result
/// is clamped to [0,1]. Pixel (i,j) centers map to x = (j+0.5)*2/n - 1,
/// y = 1 - (i+0.5)*2/n.
inline MultiContrastImage make_phantom(const PhantomSpec& spec) {
  const int n = spec.n;
  const int nc = spec.num_contrasts;
  if (n < 2) throw ParamError("phantom.n must be >= 2");
  if (nc < 1) throw ParamError("phantom.num_contrasts must be >= 1");
  std::vector<std::vector<double>> remap =
      spec.remap.empty() ? default_contrast_remaps(nc) : spec.remap;
  if (static_cast<int>(remap.size()) != nc)
    throw ParamError("phantom.remap must have one table per contrast");
  const auto& geo = shepp_logan_geometry();
  for (const auto& t : remap)
    if (t.size() != geo.size())
      throw ParamError("phantom.remap tables must have one entry per ellipse");
  for (const Lesion& l : spec.lesions) {
    if (l.contrast < 1 || l.contrast > nc)
      throw ParamError("phantom.lesion contrast out of range");
    if (!(l.circumradius > 0)) throw ParamError("phantom.lesion circumradius must be positive");
  }

  MultiContrastImage out(n, nc);
  const double step = 2.0 / n;
  for (int i = 0; i < n; ++i) {
    const double y = 1.0 - (i + 0.5) * step;
    for (int j = 0; j < n; ++j) {
      const double x = (j + 0.5) * step - 1.0;
      for (int c = 0; c < nc; ++c) {
        double val = 0;
        for (size_t e = 0; e < geo.size(); ++e)
          if (detail::inside_ellipse(geo[e], x, y)) val += remap[c][e];
        out[c](i, j) = val;
      }
      for (const Lesion& l : spec.lesions)
        if (detail::inside_hexagon(l, x, y)) out[l.contrast - 1](i, j) = l.intensity;
    }
  }
  for (int c = 0; c < nc; ++c)
    for (cd& p : out[c].v) p = std::clamp(p.real(), 0.0, 1.0);
  return out;
}

/// Smooth synthetic coil maps: Gaussian magnitude bumps at equally spaced
/// angles on a circle of radius 0.55*n about the FOV center, each with a
/// seed-determined linear phase ramp, normalized so sum_p |s_p|^2 = 1.
inline SensitivitySet make_coils(int n, int num_coils, double width_frac, uint64_t seed) {
  if (num_coils < 1) throw ParamError("coils.count must be >= 1");
  if (n < 2) throw ParamError("coils: image side must be >= 2");
  if (!(width_frac > 0)) throw ParamError("coils.width_frac must be positive");
  SensitivitySet sens(n, num_coils);
  Rng rng(seed);
  const double cx = 0.5 * (n - 1);
  const double cy = 0.5 * (n - 1);
  const double ring = 0.55 * n;
  const double sigma = width_frac * n;
  for (int p = 0; p < num_coils; ++p) {
    const double ang = 2.0 * std::numbers::pi * p / num_coils;
    const double bx = cx + ring * std::cos(ang);
    const double by = cy + ring * std::sin(ang);
    // per-coil phase ramp coefficients, cycles across the FOV
    const double fx = (rng.uniform01() - 0.5) * 2.0 * std::numbers::pi / n;
    const double fy = (rng.uniform01() - 0.5) * 2.0 * std::numbers::pi / n;
    const double f0 = rng.uniform01() * 2.0 * std::numbers::pi;
    CImage& sp = sens[p];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d2 = (i - by) * (i - by) + (j - bx) * (j - bx);
        const double mag = std::exp(-0.5 * d2 / (sigma * sigma));
        const double ph = fx * j + fy * i + f0;
        sp(i, j) = std::polar(mag, ph);
      }
  }
  for (size_t k = 0; k < sens[0].size(); ++k) {
    double sos = 0;
    for (int p = 0; p < num_coils; ++p) sos += std::norm(sens[p].v[k]);
    const double inv = 1.0 / std::sqrt(sos);
    for (int p = 0; p < num_coils; ++p) sens[p].v[k] *= inv;
  }
  sens.sos_normalized = true;
  return sens;
}

struct MaskSpec {
  int n = 80;
  double reduction = 5.0;
  double acs_fraction = 0.4;
  uint64_t seed = 0;
};

/// Cartesian phase-encode-line mask: round(n/R) lines of which
/// floor(acs_fraction*n/R) form a centered contiguous block, the remainder
/// drawn uniformly without replacement from the non-ACS lines. Rows are
/// phase-encode; every selected line spans the full frequency-encode axis.
inline SamplingMask make_mask(const MaskSpec& spec) {
  const int n = spec.n;
  if (n < 2) throw ParamError("mask.n must be >= 2");
  if (!(spec.reduction >= 1.0)) throw ParamError("mask.reduction must be >= 1");
  if (!(spec.acs_fraction >= 0.0 && spec.acs_fraction <= 1.0))
    throw ParamError("mask.acs_fraction must lie in [0,1]");
  const int budget = static_cast<int>(std::llround(n / spec.reduction));
  const int acs = static_cast<int>(std::floor(spec.acs_fraction * n / spec.reduction));
  if (budget < 1) throw ParamError("mask: reduction too large, no lines in budget");
  if (budget > n) throw ParamError("mask: line budget exceeds grid");

  std::vector<uint8_t> line(n, 0);
  // centered block containing the DC line n/2; odd remainder goes to the
  // positive-frequency side
  const int lo = n / 2 - (acs > 0 ? (acs - 1) / 2 : 0);
  for (int k = 0; k < acs; ++k) line[lo + k] = 1;

  std::vector<int> rest;
  for (int k = 0; k < n; ++k)
    if (!line[k]) rest.push_back(k);
  const int extra = budget - acs;
  if (extra > static_cast<int>(rest.size()))
    throw ParamError("mask: line budget exceeds available lines");
  Rng rng(spec.seed);
  for (int k = 0; k < extra; ++k) {  // partial Fisher-Yates
    const size_t pick = k + rng.below(rest.size() - k);
    std::swap(rest[k], rest[pick]);
    line[rest[k]] = 1;
  }

  SamplingMask mask(n);
  mask.reduction = spec.reduction;
  mask.acs_lines = acs;
  mask.seed = spec.seed;
  for (int i = 0; i < n; ++i)
    if (line[i])
      for (int j = 0; j < n; ++j) mask(i, j) = 1;
  return mask;
}

/// Simulated acquisition: b_{c,p} = mask * (UnitaryFFT2(s_p u_c) + eta) with
/// complex white Gaussian noise of total std sigma (sigma/sqrt(2) per
/// component), drawn for every sample before masking so the draw count does
/// not depend on the mask.
inline KSpaceData acquire(const MultiContrastImage& truth, const SensitivitySet& sens,
                          const SamplingMask& mask, double sigma, uint64_t seed) {
  if (sigma < 0) throw ParamError("acquire: sigma must be nonnegative");
  const int n = truth.n;
  require(sens.n == n && mask.n == n, "acquire: shape mismatch");
  const int nc = truth.num_contrasts();
  const int np = sens.num_coils();
  KSpaceData out(n, nc, np);
  Rng rng(seed);
  const double comp_std = sigma / std::sqrt(2.0);
  CImage tmp(n);
  for (int c = 0; c < nc; ++c)
    for (int p = 0; p < np; ++p) {
      const CImage& sp = sens[p];
      for (size_t k = 0; k < tmp.size(); ++k) tmp.v[k] = sp.v[k] * truth[c].v[k];
      CImage& plane = out.plane(c, p);
      fft2_centered(tmp, plane);
      if (sigma > 0)
        for (size_t k = 0; k < plane.size(); ++k) {
          auto [g1, g2] = rng.gauss_pair();
          plane.v[k] += cd(comp_std * g1, comp_std * g2);
        }
      for (size_t k = 0; k < plane.size(); ++k)
        if (!mask.m[k]) plane.v[k] = cd{};
    }
  return out;
}

}  // namespace nritv
