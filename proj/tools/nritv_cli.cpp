// Batch front end: simulate | reconstruct | evaluate | rankprobe.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "nritv/nritv.hpp"

namespace fs = std::filesystem;
using nritv::json;

namespace {

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("NRITV_THREADS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0') return static_cast<unsigned>(v);
    throw nritv::ConfigError("NRITV_THREADS", "not an unsigned integer");
  }
  return 1;
}

nritv::ExperimentConfig load_config(const std::string& path) {
  auto bytes = nritv::read_file(path);
  try {
    return nritv::parse_config_text(std::string(bytes.begin(), bytes.end()));
  } catch (const nritv::FormatError& e) {
    throw nritv::ConfigError(path, e.what());
  }
}

json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

json params_to_json(const nritv::SolverParams& p) {
  json j;
  j["lambda"] = p.lambda;
  j["beta"] = p.beta;
  j["tau0"] = p.tau0;
  j["mu"] = p.mu;
  j["delta"] = p.delta;
  j["theta0"] = p.theta0;
  j["max_iters"] = p.max_iters;
  j["rel_tol"] = p.rel_tol;
  j["max_backtracks"] = p.max_backtracks;
  return j;
}

json report_to_json(const nritv::MetricReport& rep) {
  json j;
  j["snr_db"] = json::array();
  for (double v : rep.snr_db) j["snr_db"].push_back(json_number(v));
  j["ssim"] = rep.ssim_v;
  j["mean_snr_db"] = json_number(rep.mean_snr_db);
  j["mean_ssim"] = rep.mean_ssim;
  if (rep.rlne_v) j["rlne"] = *rep.rlne_v;
  return j;
}

// Locates the meta.json describing a raw image stack (same directory).
nritv::BundleMeta meta_beside(const fs::path& bin_path) {
  fs::path meta = bin_path.parent_path() / "meta.json";
  if (!fs::exists(meta))
    throw nritv::FormatError("no meta.json next to " + bin_path.string());
  return nritv::meta_from_json(json::parse(nritv::read_file(meta)));
}

int cmd_simulate(const std::string& config_path, std::optional<std::string> out,
                 std::optional<uint64_t> seed) {
  nritv::ExperimentConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_dir = *out;

  nritv::MultiContrastImage truth = nritv::make_phantom(cfg.phantom);
  nritv::quantize_c32(truth);  // bundle payloads are 32-bit; keep k-space
                               // consistent with the stored truth
  nritv::SensitivitySet sens =
      nritv::make_coils(cfg.phantom.n, cfg.coil_count, cfg.coil_width_frac, cfg.coil_seed());
  nritv::quantize_c32(sens);
  nritv::SamplingMask mask = nritv::make_mask(cfg.mask_spec());
  nritv::KSpaceData ksp = nritv::acquire(truth, sens, mask, cfg.sigma, cfg.noise_seed());

  nritv::DatasetBundle bundle;
  bundle.meta.n = cfg.phantom.n;
  bundle.meta.num_contrasts = cfg.phantom.num_contrasts;
  bundle.meta.num_coils = cfg.coil_count;
  bundle.meta.reduction = cfg.mask_reduction;
  bundle.meta.seed = cfg.seed;
  bundle.meta.sigma = cfg.sigma;
  bundle.kspace = std::move(ksp);
  bundle.mask = std::move(mask);
  bundle.sens = std::move(sens);
  bundle.truth = std::move(truth);

  json manifest = nritv::write_bundle(cfg.out_dir, bundle);
  json echo;
  echo["bundle"] = cfg.out_dir;
  echo["files"] = manifest;
  std::cout << echo.dump(2) << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& bundle_dir, std::optional<std::string> config_path,
                    std::optional<std::string> out, std::optional<double> lambda,
                    std::optional<unsigned> max_iters, unsigned threads) {
  nritv::DatasetBundle bundle = nritv::read_bundle(bundle_dir);
  if (!bundle.sens.sos_normalized)
    std::cerr << "note: sensitivity maps are not sum-of-squares normalized\n";

  nritv::SolverParams params;
  if (config_path) params = load_config(*config_path).solver;
  if (lambda) params.lambda = *lambda;
  if (max_iters) params.max_iters = static_cast<int>(*max_iters);

  fs::path out_dir = out ? fs::path(*out) : fs::path(bundle_dir) / "recon";
  fs::create_directories(out_dir);

  nritv::ReconResult res = nritv::reconstruct(bundle.kspace, bundle.mask, bundle.sens, params);

  nritv::MultiContrastImage stored = res.u;
  nritv::quantize_c32(stored);
  nritv::write_image_stack(out_dir / "recon.bin", stored);
  nritv::atomic_write(out_dir / "meta.json",
                      nritv::meta_to_json(bundle.meta).dump(2) + "\n");
  for (int c = 0; c < stored.num_contrasts(); ++c)
    nritv::write_png_magnitude(out_dir / ("recon_c" + std::to_string(c + 1) + ".png"),
                               stored[c]);

  json diag;
  diag["params"] = params_to_json(res.diag.params);
  diag["threads"] = threads;
  diag["iterations"] = res.diag.iterations;
  diag["termination"] = res.diag.termination;
  diag["wall_seconds"] = res.diag.wall_seconds;
  diag["objective"] = res.diag.objective;
  diag["data_term"] = res.diag.data_term;
  diag["reg_term"] = res.diag.reg_term;
  diag["tau"] = res.diag.tau;
  diag["backtracks"] = res.diag.backtracks;
  diag["primal_residual"] = res.diag.primal_residual;
  nritv::atomic_write(out_dir / "diagnostics.json", diag.dump(2) + "\n");

  json echo;
  echo["out"] = out_dir.string();
  echo["iterations"] = res.diag.iterations;
  echo["termination"] = res.diag.termination;
  echo["objective"] =
      res.diag.objective.empty() ? 0.0 : res.diag.objective.back();
  std::cout << echo.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& recon_path, const std::string& truth_path,
                 std::optional<std::string> out) {
  nritv::BundleMeta mr = meta_beside(recon_path);
  nritv::BundleMeta mt = meta_beside(truth_path);
  if (mr.n != mt.n || mr.num_contrasts != mt.num_contrasts)
    throw nritv::ShapeError("evaluate: recon and truth dimensions differ");
  nritv::MultiContrastImage recon =
      nritv::read_image_stack(recon_path, mr.n, mr.num_contrasts);
  nritv::MultiContrastImage truth =
      nritv::read_image_stack(truth_path, mt.n, mt.num_contrasts);
  nritv::MetricReport rep = nritv::evaluate_images(recon, truth);
  json j = report_to_json(rep);
  std::cout << j.dump(2) << "\n";
  if (out) nritv::atomic_write(*out, j.dump(2) + "\n");
  return 0;
}

int cmd_rankprobe(const std::string& target, int row, int col) {
  nritv::MultiContrastImage truth;
  if (fs::is_directory(target)) {
    nritv::DatasetBundle bundle = nritv::read_bundle(target);
    if (!bundle.truth) throw nritv::FormatError(target + ": bundle has no truth.bin");
    truth = std::move(*bundle.truth);
  } else {
    nritv::BundleMeta m = meta_beside(target);
    truth = nritv::read_image_stack(target, m.n, m.num_contrasts);
  }
  if (row < 1 || col < 1) throw nritv::ParamError("rankprobe: indices are 1-based");
  auto [s1, s2] = nritv::rank_probe(truth, row - 1, col - 1);
  json j;
  j["row"] = row;
  j["col"] = col;
  j["sigma1"] = s1;
  j["sigma2"] = s2;
  j["ratio"] = json_number(s1 > 0 ? s2 / s1 : 0.0);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint multi-contrast parallel-MRI reconstruction toolbox"};
  app.require_subcommand(1);

  std::optional<unsigned> threads_flag;
  std::optional<std::string> config_path, out_path;
  std::optional<uint64_t> seed_flag;
  std::optional<double> lambda_flag;
  std::optional<unsigned> max_iters_flag;

  CLI::App* sim = app.add_subcommand("simulate", "Generate a dataset bundle from a config");
  sim->add_option("--config", config_path, "experiment config JSON")->required();
  sim->add_option("--out", out_path, "bundle output directory");
  sim->add_option("--seed", seed_flag, "master seed override");
  sim->add_option("--threads", threads_flag, "worker threads (0 = auto)");

  std::string bundle_dir;
  CLI::App* rec = app.add_subcommand("reconstruct", "Reconstruct a dataset bundle");
  rec->add_option("bundle", bundle_dir, "bundle directory")->required();
  rec->add_option("--config", config_path, "config JSON (solver block)");
  rec->add_option("--out", out_path, "output directory (default <bundle>/recon)");
  rec->add_option("--lambda", lambda_flag, "regularization weight override");
  rec->add_option("--max-iters", max_iters_flag, "iteration cap override");
  rec->add_option("--threads", threads_flag, "worker threads (0 = auto)");

  std::string recon_path, truth_path;
  CLI::App* ev = app.add_subcommand("evaluate", "Score a reconstruction against truth");
  ev->add_option("recon", recon_path, "recon.bin path")->required();
  ev->add_option("truth", truth_path, "truth.bin path")->required();
  ev->add_option("--out", out_path, "write the report JSON here as well");

  std::string probe_target;
  int probe_row = 0, probe_col = 0;
  CLI::App* rp = app.add_subcommand("rankprobe", "Joint-gradient singular values at a pixel");
  rp->add_option("target", probe_target, "bundle directory or image stack .bin")->required();
  rp->add_option("row", probe_row, "pixel row (1-based)")->required();
  rp->add_option("col", probe_col, "pixel column (1-based)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const unsigned threads = resolve_threads(threads_flag);
    nritv::set_threads(threads);
    if (sim->parsed()) return cmd_simulate(*config_path, out_path, seed_flag);
    if (rec->parsed())
      return cmd_reconstruct(bundle_dir, config_path, out_path, lambda_flag, max_iters_flag,
                             threads);
    if (ev->parsed()) return cmd_evaluate(recon_path, truth_path, out_path);
    if (rp->parsed()) return cmd_rankprobe(probe_target, probe_row, probe_col);
  } catch (const nritv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nritv::ParamError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nritv::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const nritv::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const nritv::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
