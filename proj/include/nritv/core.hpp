#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nritv {

using cd = std::complex<double>;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), field(std::move(field_path)) {}
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}

/// Square complex image, row-major.
struct CImage {
  int n = 0;
  std::vector<cd> v;

  CImage() = default;
  explicit CImage(int side) : n(side), v(static_cast<size_t>(side) * side) {}

  cd& operator()(int i, int j) { return v[static_cast<size_t>(i) * n + j]; }
  const cd& operator()(int i, int j) const { return v[static_cast<size_t>(i) * n + j]; }
  size_t size() const { return v.size(); }
};

/// Square real image, row-major.
struct RImage {
  int n = 0;
  std::vector<double> v;

  RImage() = default;
  explicit RImage(int side) : n(side), v(static_cast<size_t>(side) * side) {}

  double& operator()(int i, int j) { return v[static_cast<size_t>(i) * n + j]; }
  const double& operator()(int i, int j) const { return v[static_cast<size_t>(i) * n + j]; }
  size_t size() const { return v.size(); }
};

/// Stack of N same-size contrast images; the primal unknown.
struct MultiContrastImage {
  int n = 0;
  std::vector<CImage> contrasts;

  MultiContrastImage() = default;
  MultiContrastImage(int side, int num_contrasts)
      : n(side), contrasts(static_cast<size_t>(num_contrasts), CImage(side)) {}

  int num_contrasts() const { return static_cast<int>(contrasts.size()); }
  CImage& operator[](int c) { return contrasts[c]; }
  const CImage& operator[](int c) const { return contrasts[c]; }
};

/// Two finite-difference components of one image.
struct GradientVectorField {
  CImage comp1, comp2;

  GradientVectorField() = default;
  explicit GradientVectorField(int side) : comp1(side), comp2(side) {}

  int n() const { return comp1.n; }
};

/// The four refined gradient grids.
enum class Grid { Vertical = 0, Horizontal = 1, Center = 2, Cross = 3 };
inline constexpr Grid kGrids[4] = {Grid::Vertical, Grid::Horizontal, Grid::Center, Grid::Cross};
inline constexpr int kNumGrids = 4;

inline const char* grid_name(Grid s) {
  switch (s) {
    case Grid::Vertical: return "vertical";
    case Grid::Horizontal: return "horizontal";
    case Grid::Center: return "center";
    case Grid::Cross: return "cross";
  }
  throw ParamError("unknown grid tag");
}

/// One vector field per (grid, contrast); indexed s*N + c.
struct GradientFieldSet {
  int n = 0;
  int num_contrasts = 0;
  std::vector<GradientVectorField> fields;

  GradientFieldSet() = default;
  GradientFieldSet(int side, int contrasts)
      : n(side),
        num_contrasts(contrasts),
        fields(static_cast<size_t>(kNumGrids) * contrasts, GradientVectorField(side)) {}

  GradientVectorField& field(Grid s, int c) {
    return fields[static_cast<size_t>(s) * num_contrasts + c];
  }
  const GradientVectorField& field(Grid s, int c) const {
    return fields[static_cast<size_t>(s) * num_contrasts + c];
  }
};

/// Cartesian phase-encode-line mask with acquisition metadata.
struct SamplingMask {
  int n = 0;
  std::vector<uint8_t> m;  // row-major, 1 = sampled
  double reduction = 1.0;
  int acs_lines = 0;
  uint64_t seed = 0;

  SamplingMask() = default;
  explicit SamplingMask(int side) : n(side), m(static_cast<size_t>(side) * side, 0) {}

  uint8_t& operator()(int i, int j) { return m[static_cast<size_t>(i) * n + j]; }
  const uint8_t& operator()(int i, int j) const { return m[static_cast<size_t>(i) * n + j]; }
};

/// P complex coil maps; simulated maps carry pixel-wise sum-of-squares 1.
struct SensitivitySet {
  int n = 0;
  std::vector<CImage> maps;
  bool sos_normalized = true;

  SensitivitySet() = default;
  SensitivitySet(int side, int num_coils)
      : n(side), maps(static_cast<size_t>(num_coils), CImage(side)) {}

  int num_coils() const { return static_cast<int>(maps.size()); }
  CImage& operator[](int p) { return maps[p]; }
  const CImage& operator[](int p) const { return maps[p]; }
};

/// Per-(contrast, coil) k-space planes, centered storage (DC at n/2).
struct KSpaceData {
  int n = 0;
  int num_contrasts = 0;
  int num_coils = 0;
  std::vector<CImage> planes;  // indexed c*P + p

  KSpaceData() = default;
  KSpaceData(int side, int contrasts, int coils)
      : n(side),
        num_contrasts(contrasts),
        num_coils(coils),
        planes(static_cast<size_t>(contrasts) * coils, CImage(side)) {}

  CImage& plane(int c, int p) { return planes[static_cast<size_t>(c) * num_coils + p]; }
  const CImage& plane(int c, int p) const {
    return planes[static_cast<size_t>(c) * num_coils + p];
  }
};

// ---- elementwise helpers (serial, fixed accumulation order) ----

inline double norm_sq(const CImage& a) {
  double s = 0;
  for (const cd& x : a.v) s += std::norm(x);
  return s;
}

inline double norm_sq(const GradientVectorField& f) {
  return norm_sq(f.comp1) + norm_sq(f.comp2);
}

inline cd dot(const CImage& a, const CImage& b) {
  require(a.n == b.n, "dot: size mismatch");
  cd s = 0;
  for (size_t k = 0; k < a.v.size(); ++k) s += std::conj(a.v[k]) * b.v[k];
  return s;
}

inline cd dot(const GradientVectorField& a, const GradientVectorField& b) {
  return dot(a.comp1, b.comp1) + dot(a.comp2, b.comp2);
}

inline bool all_finite(const CImage& a) {
  for (const cd& x : a.v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

inline RImage magnitude(const CImage& a) {
  RImage out(a.n);
  for (size_t k = 0; k < a.v.size(); ++k) out.v[k] = std::abs(a.v[k]);
  return out;
}

}  // namespace nritv
