#pragma once

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nritv/random.hpp"
#include "nritv/sim.hpp"
#include "nritv/solver.hpp"

namespace nritv {

/// One experiment: phantom + coils + sampling + noise + solver settings.
/// Parsed from a single JSON document and validated field by field; every
/// rejection names the offending field path.
struct ExperimentConfig {
  PhantomSpec phantom;
  double mask_reduction = 5.0;
  double mask_acs_fraction = 0.4;
  int coil_count = 8;
  double coil_width_frac = 0.35;
  double sigma = 0.0;
  uint64_t seed = 0;
  SolverParams solver;
  std::string out_dir = "out";

  MaskSpec mask_spec() const {
    return MaskSpec{phantom.n, mask_reduction, mask_acs_fraction, derive_seed(seed, 1)};
  }
  uint64_t coil_seed() const { return derive_seed(seed, 2); }
  uint64_t noise_seed() const { return derive_seed(seed, 3); }
};

namespace detail {

using cjson = nlohmann::ordered_json;

inline void reject_unknown(const cjson& j, const std::string& path,
                           const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(path + it.key(), "unknown field");
}

inline const cjson& member(const cjson& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + key, "missing required field");
  return *it;
}

inline double num_field(const cjson& j, const std::string& path, const char* key, double lo,
                        double hi) {
  const cjson& f = member(j, path, key);
  if (!f.is_number()) throw ConfigError(path + key, "expected a number");
  const double v = f.get<double>();
  if (!(v >= lo && v <= hi))
    throw ConfigError(path + key, "out of range [" + std::to_string(lo) + ", " +
                                      std::to_string(hi) + "]");
  return v;
}

inline double opt_num(const cjson& j, const std::string& path, const char* key, double lo,
                      double hi, double fallback) {
  if (!j.contains(key)) return fallback;
  return num_field(j, path, key, lo, hi);
}

inline int int_field(const cjson& j, const std::string& path, const char* key, int lo, int hi) {
  const cjson& f = member(j, path, key);
  if (!f.is_number_integer()) throw ConfigError(path + key, "expected an integer");
  const long long v = f.get<long long>();
  if (v < lo || v > hi)
    throw ConfigError(path + key, "out of range [" + std::to_string(lo) + ", " +
                                      std::to_string(hi) + "]");
  return static_cast<int>(v);
}

inline int opt_int(const cjson& j, const std::string& path, const char* key, int lo, int hi,
                   int fallback) {
  if (!j.contains(key)) return fallback;
  return int_field(j, path, key, lo, hi);
}

}  // namespace detail

/// Parses and validates an experiment configuration. The accepted shape is
/// published in configs/config.schema.json.
inline ExperimentConfig parse_config(const nlohmann::ordered_json& j) {
  using detail::cjson;
  if (!j.is_object()) throw ConfigError("", "config root must be a JSON object");
  detail::reject_unknown(j, "",
                         {"phantom", "mask", "coils", "noise", "seed", "solver", "output"});
  ExperimentConfig cfg;

  const cjson& ph = detail::member(j, "", "phantom");
  if (!ph.is_object()) throw ConfigError("phantom", "expected an object");
  detail::reject_unknown(ph, "phantom.", {"n", "contrasts", "remap", "lesions"});
  cfg.phantom.n = detail::int_field(ph, "phantom.", "n", 16, 4096);
  if (cfg.phantom.n % 2 != 0) throw ConfigError("phantom.n", "must be even");
  cfg.phantom.num_contrasts = detail::int_field(ph, "phantom.", "contrasts", 1, 16);
  if (ph.contains("remap")) {
    const cjson& rm = ph["remap"];
    if (!rm.is_array()) throw ConfigError("phantom.remap", "expected an array of tables");
    for (size_t c = 0; c < rm.size(); ++c) {
      const std::string p = "phantom.remap[" + std::to_string(c) + "]";
      if (!rm[c].is_array() || rm[c].size() != shepp_logan_geometry().size())
        throw ConfigError(p, "expected 10 numbers");
      std::vector<double> table;
      for (size_t e = 0; e < rm[c].size(); ++e) {
        if (!rm[c][e].is_number())
          throw ConfigError(p + "[" + std::to_string(e) + "]", "expected a number");
        table.push_back(rm[c][e].get<double>());
      }
      cfg.phantom.remap.push_back(std::move(table));
    }
    if (static_cast<int>(cfg.phantom.remap.size()) != cfg.phantom.num_contrasts)
      throw ConfigError("phantom.remap", "needs one table per contrast");
  }
  if (ph.contains("lesions")) {
    const cjson& ls = ph["lesions"];
    if (!ls.is_array()) throw ConfigError("phantom.lesions", "expected an array");
    for (size_t k = 0; k < ls.size(); ++k) {
      const std::string p = "phantom.lesions[" + std::to_string(k) + "].";
      const cjson& l = ls[k];
      if (!l.is_object()) throw ConfigError(p, "expected an object");
      detail::reject_unknown(l, p, {"center", "circumradius", "intensity", "contrast"});
      Lesion les;
      const cjson& ctr = detail::member(l, p, "center");
      if (!ctr.is_array() || ctr.size() != 2 || !ctr[0].is_number() || !ctr[1].is_number())
        throw ConfigError(p + "center", "expected [x, y]");
      les.cx = ctr[0].get<double>();
      les.cy = ctr[1].get<double>();
      les.circumradius = detail::num_field(l, p, "circumradius", 1e-6, 2.0);
      les.intensity = detail::num_field(l, p, "intensity", 0.0, 1.0);
      les.contrast = detail::int_field(l, p, "contrast", 1, cfg.phantom.num_contrasts);
      cfg.phantom.lesions.push_back(les);
    }
  }

  const cjson& mk = detail::member(j, "", "mask");
  if (!mk.is_object()) throw ConfigError("mask", "expected an object");
  detail::reject_unknown(mk, "mask.", {"reduction", "acs_fraction"});
  cfg.mask_reduction = detail::num_field(mk, "mask.", "reduction", 1.0, 64.0);
  cfg.mask_acs_fraction = detail::opt_num(mk, "mask.", "acs_fraction", 0.0, 1.0, 0.4);

  const cjson& cl = detail::member(j, "", "coils");
  if (!cl.is_object()) throw ConfigError("coils", "expected an object");
  detail::reject_unknown(cl, "coils.", {"count", "width_frac"});
  cfg.coil_count = detail::int_field(cl, "coils.", "count", 1, 128);
  cfg.coil_width_frac = detail::opt_num(cl, "coils.", "width_frac", 0.01, 4.0, 0.35);

  if (j.contains("noise")) {
    const cjson& no = j["noise"];
    if (!no.is_object()) throw ConfigError("noise", "expected an object");
    detail::reject_unknown(no, "noise.", {"sigma"});
    cfg.sigma = detail::opt_num(no, "noise.", "sigma", 0.0, 10.0, 0.0);
  }

  if (j.contains("seed")) {
    const cjson& sd = j["seed"];
    if (!sd.is_number_unsigned() && !sd.is_number_integer())
      throw ConfigError("seed", "expected an unsigned integer");
    cfg.seed = sd.get<uint64_t>();
  }

  if (j.contains("solver")) {
    const cjson& so = j["solver"];
    if (!so.is_object()) throw ConfigError("solver", "expected an object");
    detail::reject_unknown(so, "solver.",
                           {"lambda", "beta", "tau0", "mu", "delta", "theta0", "max_iters",
                            "rel_tol", "max_backtracks"});
    SolverParams& sp = cfg.solver;
    sp.lambda = detail::opt_num(so, "solver.", "lambda", 1e-300, 1e6, sp.lambda);
    sp.beta = detail::opt_num(so, "solver.", "beta", 1e-300, 1e6, sp.beta);
    sp.tau0 = detail::opt_num(so, "solver.", "tau0", 1e-300, 1e6, sp.tau0);
    sp.mu = detail::opt_num(so, "solver.", "mu", 1e-6, 1.0 - 1e-9, sp.mu);
    sp.delta = detail::opt_num(so, "solver.", "delta", 1e-6, 1.0 - 1e-9, sp.delta);
    sp.theta0 = detail::opt_num(so, "solver.", "theta0", 1e-6, 1e6, sp.theta0);
    sp.max_iters = detail::opt_int(so, "solver.", "max_iters", 1, 1000000, sp.max_iters);
    sp.rel_tol = detail::opt_num(so, "solver.", "rel_tol", 0.0, 1.0, sp.rel_tol);
    sp.max_backtracks =
        detail::opt_int(so, "solver.", "max_backtracks", 1, 10000, sp.max_backtracks);
  }

  if (j.contains("output")) {
    const cjson& ou = j["output"];
    if (!ou.is_object()) throw ConfigError("output", "expected an object");
    detail::reject_unknown(ou, "output.", {"dir"});
    if (ou.contains("dir")) {
      if (!ou["dir"].is_string()) throw ConfigError("output.dir", "expected a string");
      cfg.out_dir = ou["dir"].get<std::string>();
    }
  }

  // cross-field checks mirrored from the generators
  const double lines = cfg.phantom.n / cfg.mask_reduction;
  if (std::llround(lines) < 1)
    throw ConfigError("mask.reduction", "too large: no phase-encode lines in budget");
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace nritv
