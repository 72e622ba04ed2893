#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "nritv/core.hpp"
#include "nritv/operators.hpp"
#include "nritv/prox.hpp"

namespace nritv {

/// 20 log10(|u| / |u - ref|) on complex values as written; +inf when
/// u == ref exactly, -inf when |u| = 0. Setting conventional_reference puts
/// |ref| in the numerator instead.
inline double snr(const CImage& u, const CImage& ref, bool conventional_reference = false) {
  require(u.n == ref.n, "snr: shape mismatch");
  double num_sq = 0, err_sq = 0;
  for (size_t k = 0; k < u.size(); ++k) {
    num_sq += std::norm(conventional_reference ? ref.v[k] : u.v[k]);
    err_sq += std::norm(u.v[k] - ref.v[k]);
  }
  if (err_sq == 0) return std::numeric_limits<double>::infinity();
  if (num_sq == 0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num_sq / err_sq);
}

/// Mean SSIM over all pixels with the standard constants: 11x11 Gaussian
/// window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range max(ref).
/// Local windows use replicate (clamped-index) padding; no border crop.
inline double ssim(const RImage& u, const RImage& ref) {
  const int n = u.n;
  require(ref.n == n, "ssim: shape mismatch");
  if (n < 11) throw ParamError("ssim: image smaller than the 11x11 window");
  double range = 0;
  bool identical = true;
  for (size_t k = 0; k < ref.size(); ++k) {
    range = std::max(range, ref.v[k]);
    identical = identical && (u.v[k] == ref.v[k]);
  }
  if (identical) return 1.0;
  if (range <= 0) throw ParamError("ssim: reference has no positive dynamic range");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  constexpr int kR = 5;
  double w[2 * kR + 1];
  double wsum = 0;
  for (int k = -kR; k <= kR; ++k) {
    w[k + kR] = std::exp(-0.5 * k * k / (1.5 * 1.5));
    wsum += w[k + kR];
  }
  for (double& x : w) x /= wsum;

  // separable clamped filtering of u, ref, u^2, ref^2, u*ref
  auto filter = [&](const std::vector<double>& src) {
    std::vector<double> mid(src.size()), out(src.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int k = -kR; k <= kR; ++k) {
          int jj = std::clamp(j + k, 0, n - 1);
          s += w[k + kR] * src[static_cast<size_t>(i) * n + jj];
        }
        mid[static_cast<size_t>(i) * n + j] = s;
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int k = -kR; k <= kR; ++k) {
          int ii = std::clamp(i + k, 0, n - 1);
          s += w[k + kR] * mid[static_cast<size_t>(ii) * n + j];
        }
        out[static_cast<size_t>(i) * n + j] = s;
      }
    return out;
  };

  const size_t m = u.size();
  std::vector<double> uu(m), rr(m), ur(m);
  for (size_t k = 0; k < m; ++k) {
    uu[k] = u.v[k] * u.v[k];
    rr[k] = ref.v[k] * ref.v[k];
    ur[k] = u.v[k] * ref.v[k];
  }
  std::vector<double> mu_u = filter(u.v);
  std::vector<double> mu_r = filter(ref.v);
  std::vector<double> m_uu = filter(uu);
  std::vector<double> m_rr = filter(rr);
  std::vector<double> m_ur = filter(ur);

  double acc = 0;
  for (size_t k = 0; k < m; ++k) {
    const double var_u = m_uu[k] - mu_u[k] * mu_u[k];
    const double var_r = m_rr[k] - mu_r[k] * mu_r[k];
    const double cov = m_ur[k] - mu_u[k] * mu_r[k];
    acc += ((2.0 * mu_u[k] * mu_r[k] + c1) * (2.0 * cov + c2)) /
           ((mu_u[k] * mu_u[k] + mu_r[k] * mu_r[k] + c1) * (var_u + var_r + c2));
  }
  return acc / static_cast<double>(m);
}

/// Relative l2 error between vector-stacked coil map sets.
inline double rlne(const SensitivitySet& est, const SensitivitySet& ref) {
  require(est.n == ref.n && est.num_coils() == ref.num_coils(), "rlne: shape mismatch");
  double ref_sq = 0, err_sq = 0;
  for (int p = 0; p < ref.num_coils(); ++p)
    for (size_t k = 0; k < ref[p].size(); ++k) {
      ref_sq += std::norm(ref[p].v[k]);
      err_sq += std::norm(est[p].v[k] - ref[p].v[k]);
    }
  if (ref_sq == 0) throw ParamError("rlne: zero reference");
  return std::sqrt(err_sq / ref_sq);
}

/// Singular values (descending) of the 2xN matrix stacking every contrast's
/// finite-difference vector at pixel (i, j), 0-based.
inline std::pair<double, double> rank_probe(const MultiContrastImage& u, int i, int j) {
  const int n = u.n;
  if (i < 0 || i >= n || j < 0 || j >= n) throw ParamError("rank_probe: index out of range");
  const int nc = u.num_contrasts();
  JointGradientMatrix m(nc);
  for (int c = 0; c < nc; ++c) {
    const CImage& uc = u[c];
    m.row1[c] = (i + 1 < n) ? uc(i + 1, j) - uc(i, j) : cd{};
    m.row2[c] = (j + 1 < n) ? uc(i, j + 1) - uc(i, j) : cd{};
  }
  return singular_values(m);
}

struct MetricReport {
  std::vector<double> snr_db;  // per contrast
  std::vector<double> ssim_v;  // per contrast
  double mean_snr_db = 0;
  double mean_ssim = 0;
  std::optional<double> rlne_v;
};

/// Per-contrast SNR on complex values, SSIM on magnitudes, plus means.
inline MetricReport evaluate_images(const MultiContrastImage& u, const MultiContrastImage& ref,
                                    bool conventional_snr = false) {
  require(u.n == ref.n && u.num_contrasts() == ref.num_contrasts(),
          "evaluate: shape mismatch");
  MetricReport rep;
  for (int c = 0; c < u.num_contrasts(); ++c) {
    rep.snr_db.push_back(snr(u[c], ref[c], conventional_snr));
    rep.ssim_v.push_back(ssim(magnitude(u[c]), magnitude(ref[c])));
  }
  double s1 = 0, s2 = 0;
  for (double x : rep.snr_db) s1 += x;
  for (double x : rep.ssim_v) s2 += x;
  rep.mean_snr_db = s1 / rep.snr_db.size();
  rep.mean_ssim = s2 / rep.ssim_v.size();
  return rep;
}

}  // namespace nritv
