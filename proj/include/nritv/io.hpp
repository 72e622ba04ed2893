#pragma once

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nritv/core.hpp"

static_assert(std::endian::native == std::endian::little,
              "bundle format is little-endian; big-endian hosts need byte swaps");

namespace nritv {

using json = nlohmann::ordered_json;

inline uint64_t fnv1a64(const void* data, size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t k = 0; k < bytes; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Writes bytes to a temp file in the target directory, then renames.
inline void atomic_write(const std::filesystem::path& path, const void* data, size_t bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void atomic_write(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, text.data(), text.size());
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

// ---- complex32 payloads ----------------------------------------------------
// Storage is interleaved re/im 32-bit little-endian floats, row-major;
// computation stays in double.

inline void append_c32(std::vector<char>& out, const CImage& img) {
  for (const cd& x : img.v) {
    const float re = static_cast<float>(x.real());
    const float im = static_cast<float>(x.imag());
    const char* pr = reinterpret_cast<const char*>(&re);
    const char* pi = reinterpret_cast<const char*>(&im);
    out.insert(out.end(), pr, pr + 4);
    out.insert(out.end(), pi, pi + 4);
  }
}

inline void read_c32(const std::vector<char>& bytes, size_t& off, CImage& img) {
  for (cd& x : img.v) {
    float re, im;
    std::memcpy(&re, bytes.data() + off, 4);
    std::memcpy(&im, bytes.data() + off + 4, 4);
    off += 8;
    x = cd(re, im);
  }
}

/// Rounds an image through the 32-bit storage precision, making in-memory
/// data and its serialized form byte-consistent.
inline void quantize_c32(CImage& img) {
  for (cd& x : img.v)
    x = cd(static_cast<double>(static_cast<float>(x.real())),
           static_cast<double>(static_cast<float>(x.imag())));
}

inline void quantize_c32(MultiContrastImage& u) {
  for (auto& c : u.contrasts) quantize_c32(c);
}

inline void quantize_c32(SensitivitySet& s) {
  for (auto& m : s.maps) quantize_c32(m);
}

// ---- dataset bundle ---------------------------------------------------------

struct BundleMeta {
  int format_version = 1;
  int n = 0;
  int num_contrasts = 0;
  int num_coils = 0;
  double reduction = 1.0;
  uint64_t seed = 0;
  double sigma = 0.0;
  std::string layout =
      "kspace:[contrast][coil][row][col] c32le; sens:[coil][row][col] c32le; "
      "truth:[contrast][row][col] c32le; mask:[row][col] u8";
};

inline json meta_to_json(const BundleMeta& m) {
  json j;
  j["format_version"] = m.format_version;
  j["n"] = m.n;
  j["contrasts"] = m.num_contrasts;
  j["coils"] = m.num_coils;
  j["reduction"] = m.reduction;
  j["seed"] = m.seed;
  j["sigma"] = m.sigma;
  j["layout"] = m.layout;
  return j;
}

inline BundleMeta meta_from_json(const json& j) {
  BundleMeta m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.n = j.at("n").get<int>();
    m.num_contrasts = j.at("contrasts").get<int>();
    m.num_coils = j.at("coils").get<int>();
    m.reduction = j.at("reduction").get<double>();
    m.seed = j.at("seed").get<uint64_t>();
    m.sigma = j.at("sigma").get<double>();
    m.layout = j.value("layout", m.layout);
  } catch (const json::exception& e) {
    throw FormatError(std::string("meta.json: ") + e.what());
  }
  if (m.format_version != 1) throw FormatError("meta.json: unsupported format_version");
  if (m.n < 2 || m.num_contrasts < 1 || m.num_coils < 1)
    throw FormatError("meta.json: invalid dimensions");
  return m;
}

struct DatasetBundle {
  BundleMeta meta;
  KSpaceData kspace;
  SamplingMask mask;
  SensitivitySet sens;
  std::optional<MultiContrastImage> truth;
};

/// Writes the bundle directory and returns a manifest with content hashes.
inline json write_bundle(const std::filesystem::path& dir, const DatasetBundle& b) {
  std::filesystem::create_directories(dir);
  json manifest;
  auto emit = [&](const char* name, const std::vector<char>& bytes) {
    atomic_write(dir / name, bytes.data(), bytes.size());
    manifest[name] = {{"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes.data(), bytes.size()))}};
  };

  std::vector<char> ks;
  ks.reserve(b.kspace.planes.size() * b.kspace.planes[0].size() * 8);
  for (const CImage& pl : b.kspace.planes) append_c32(ks, pl);
  emit("kspace.bin", ks);

  std::vector<char> mk(b.mask.m.begin(), b.mask.m.end());
  emit("mask.u8", mk);

  std::vector<char> sn;
  for (const CImage& mp : b.sens.maps) append_c32(sn, mp);
  emit("sens.bin", sn);

  if (b.truth) {
    std::vector<char> tr;
    for (const CImage& c : b.truth->contrasts) append_c32(tr, c);
    emit("truth.bin", tr);
  }

  std::string meta_text = meta_to_json(b.meta).dump(2) + "\n";
  atomic_write(dir / "meta.json", meta_text);
  manifest["meta.json"] = {{"bytes", meta_text.size()},
                           {"fnv1a64", hex64(fnv1a64(meta_text.data(), meta_text.size()))}};
  return manifest;
}

inline void check_size(const std::filesystem::path& p, size_t actual, size_t expected) {
  if (actual != expected)
    throw FormatError(p.string() + ": size " + std::to_string(actual) + " bytes, expected " +
                      std::to_string(expected));
}

inline DatasetBundle read_bundle(const std::filesystem::path& dir) {
  DatasetBundle b;
  json j;
  try {
    j = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
  b.meta = meta_from_json(j);
  const int n = b.meta.n;
  const int nc = b.meta.num_contrasts;
  const int np = b.meta.num_coils;
  const size_t plane_bytes = static_cast<size_t>(n) * n * 8;

  {
    auto bytes = read_file(dir / "kspace.bin");
    check_size(dir / "kspace.bin", bytes.size(), plane_bytes * nc * np);
    b.kspace = KSpaceData(n, nc, np);
    size_t off = 0;
    for (CImage& pl : b.kspace.planes) read_c32(bytes, off, pl);
  }
  {
    auto bytes = read_file(dir / "mask.u8");
    check_size(dir / "mask.u8", bytes.size(), static_cast<size_t>(n) * n);
    b.mask = SamplingMask(n);
    for (size_t k = 0; k < bytes.size(); ++k) {
      const auto u = static_cast<uint8_t>(bytes[k]);
      if (u > 1)
        throw FormatError((dir / "mask.u8").string() + ": non-binary byte at offset " +
                          std::to_string(k));
      b.mask.m[k] = u;
    }
    b.mask.reduction = b.meta.reduction;
    b.mask.seed = b.meta.seed;
  }
  {
    auto bytes = read_file(dir / "sens.bin");
    check_size(dir / "sens.bin", bytes.size(), plane_bytes * np);
    b.sens = SensitivitySet(n, np);
    size_t off = 0;
    for (CImage& mp : b.sens.maps) read_c32(bytes, off, mp);
    double worst = 0;
    for (size_t k = 0; k < b.sens[0].size(); ++k) {
      double sos = 0;
      for (int p = 0; p < np; ++p) sos += std::norm(b.sens[p].v[k]);
      if (sos > 0) worst = std::max(worst, std::abs(sos - 1.0));
    }
    b.sens.sos_normalized = worst <= 1e-6;  // f32 storage; flag, not an error
  }
  if (std::filesystem::exists(dir / "truth.bin")) {
    auto bytes = read_file(dir / "truth.bin");
    check_size(dir / "truth.bin", bytes.size(), plane_bytes * nc);
    MultiContrastImage t(n, nc);
    size_t off = 0;
    for (CImage& c : t.contrasts) read_c32(bytes, off, c);
    b.truth = std::move(t);
  }
  return b;
}

// ---- image stack files (truth.bin / recon.bin layout) ----------------------

inline void write_image_stack(const std::filesystem::path& path, const MultiContrastImage& u) {
  std::vector<char> bytes;
  bytes.reserve(u.contrasts.size() * u[0].size() * 8);
  for (const CImage& c : u.contrasts) append_c32(bytes, c);
  atomic_write(path, bytes.data(), bytes.size());
}

inline MultiContrastImage read_image_stack(const std::filesystem::path& path, int n, int nc) {
  auto bytes = read_file(path);
  check_size(path, bytes.size(), static_cast<size_t>(n) * n * 8 * nc);
  MultiContrastImage u(n, nc);
  size_t off = 0;
  for (CImage& c : u.contrasts) read_c32(bytes, off, c);
  return u;
}

// ---- PNG magnitude export ---------------------------------------------------

/// 8-bit grayscale PNG of |img|, linearly scaled to the image maximum.
inline void write_png_magnitude(const std::filesystem::path& path, const CImage& img) {
  const int n = img.n;
  double peak = 0;
  for (const cd& x : img.v) peak = std::max(peak, std::abs(x));
  std::vector<uint8_t> gray(img.size());
  for (size_t k = 0; k < img.size(); ++k) {
    const double g = peak > 0 ? std::abs(img.v[k]) / peak : 0.0;
    gray[k] = static_cast<uint8_t>(std::lround(255.0 * std::min(1.0, g)));
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  FILE* fp = std::fopen(tmp.c_str(), "wb");
  if (!fp) throw FormatError("cannot open for writing: " + tmp.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw FormatError("png write failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, n, n, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int i = 0; i < n; ++i)
    png_write_row(png, const_cast<png_bytep>(gray.data() + static_cast<size_t>(i) * n));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  std::filesystem::rename(tmp, path);
}

}  // namespace nritv
