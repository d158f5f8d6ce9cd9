// floquet-cgo: command-line driver for the cylinder inverse-problem toolkit.
//
//   floquet-cgo <subcommand> [--config path] [--out dir] [--seed int]
//
// Subcommands: run, cgo-check, forward, dn-norm, pairing, recover, kelvin,
// stability-curve.  Settings come from a JSON config file; the --out and
// --seed flags only override the corresponding config values.  The default
// output directory falls back to $FLOQUET_CGO_OUT, then ./fcgo-out.  Every
// invocation writes CSV tables plus a manifest (config echo, config hash,
// module versions, calibrated constants); re-running with the manifest as
// the config reproduces the outputs bit-exactly.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli_commands.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool seed_given = false;
};

void add_common_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file (or manifest)");
  sub->add_option("--out", f.out_dir, "output directory (overrides config)");
  sub->add_option("--seed", f.seed, "RNG seed (overrides config)")
      ->check(CLI::NonNegativeNumber);
}

/// Flags override config; config overrides the environment/default.
std::string resolve_out(const CommonFlags& f, const fcgo::json& cfg) {
  if (!f.out_dir.empty()) return f.out_dir;
  const std::string from_cfg = fcgo::cli::get_or(cfg, "out", std::string());
  if (!from_cfg.empty()) return from_cfg;
  const char* env = std::getenv("FLOQUET_CGO_OUT");
  return env ? std::string(env) : std::string("fcgo-out");
}

std::uint64_t resolve_seed(const CommonFlags& f, const fcgo::json& cfg) {
  if (f.seed_given) return static_cast<std::uint64_t>(f.seed);
  return static_cast<std::uint64_t>(fcgo::cli::get_or(cfg, "seed", 1));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"floquet-cgo: partial-data stability toolkit for the periodic "
               "cylinder Schrodinger problem"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  int rc = 0;
  auto dispatch = [&rc](CommonFlags& f, auto&& handler) {
    const fcgo::json cfg = fcgo::cli::load_config_file(f.config_path);
    rc = handler(cfg, resolve_out(f, cfg), resolve_seed(f, cfg));
  };

  CommonFlags run_f;
  std::string scenario_path;
  auto* sub_run = app.add_subcommand(
      "run", "run a scenario file (sweep over trial/tau/k/eta/delta)");
  sub_run->add_option("scenario", scenario_path, "scenario JSON file")
      ->required();
  add_common_flags(sub_run, run_f);
  sub_run->callback([&] {
    run_f.seed_given = sub_run->count("--seed") > 0;
    rc = fcgo::cli::cmd_run(scenario_path, run_f.out_dir, run_f.seed_given,
                            static_cast<std::uint64_t>(run_f.seed));
  });

  CommonFlags cgo_f;
  auto* sub_cgo = app.add_subcommand(
      "cgo-check", "frequency identities, multiplier norm, remainder decay");
  add_common_flags(sub_cgo, cgo_f);
  sub_cgo->callback([&] {
    cgo_f.seed_given = sub_cgo->count("--seed") > 0;
    dispatch(cgo_f, fcgo::cli::cmd_cgo_check);
  });

  CommonFlags fwd_f;
  auto* sub_fwd = app.add_subcommand(
      "forward", "manufactured-solution convergence orders");
  add_common_flags(sub_fwd, fwd_f);
  sub_fwd->callback([&] {
    fwd_f.seed_given = sub_fwd->count("--seed") > 0;
    dispatch(fwd_f, fcgo::cli::cmd_forward);
  });

  CommonFlags dn_f;
  std::string dn_q1, dn_q2;
  auto* sub_dn = app.add_subcommand(
      "dn-norm", "boundary-map difference norm, sup over fibers");
  add_common_flags(sub_dn, dn_f);
  sub_dn->add_option("--q1", dn_q1, "first potential profile (overrides config)");
  sub_dn->add_option("--q2", dn_q2, "second potential profile (overrides config)");
  sub_dn->callback([&] {
    dn_f.seed_given = sub_dn->count("--seed") > 0;
    const fcgo::json cfg = fcgo::cli::load_config_file(dn_f.config_path);
    rc = fcgo::cli::cmd_dn_norm(cfg, resolve_out(dn_f, cfg),
                                resolve_seed(dn_f, cfg), dn_q1, dn_q2);
  });

  CommonFlags pair_f;
  auto* sub_pair = app.add_subcommand(
      "pairing", "boundary-pairing consistency across refinement levels");
  add_common_flags(sub_pair, pair_f);
  sub_pair->callback([&] {
    pair_f.seed_given = sub_pair->count("--seed") > 0;
    dispatch(pair_f, fcgo::cli::cmd_pairing);
  });

  CommonFlags rec_f;
  auto* sub_rec = app.add_subcommand(
      "recover", "Fourier slices, weighted norm, schedule table");
  add_common_flags(sub_rec, rec_f);
  sub_rec->callback([&] {
    rec_f.seed_given = sub_rec->count("--seed") > 0;
    dispatch(rec_f, fcgo::cli::cmd_recover);
  });

  CommonFlags kel_f;
  std::string kelvin_check;
  auto* sub_kel = app.add_subcommand(
      "kelvin", "inversion-chart checks (sphere map, conjugation, norms)");
  add_common_flags(sub_kel, kel_f);
  sub_kel->add_option(
      "--check", kelvin_check,
      "which check: all | sphere-to-plane | conjugation | equivalence");
  sub_kel->callback([&] {
    kel_f.seed_given = sub_kel->count("--seed") > 0;
    const fcgo::json cfg = fcgo::cli::load_config_file(kel_f.config_path);
    rc = fcgo::cli::cmd_kelvin(cfg, resolve_out(kel_f, cfg),
                               resolve_seed(kel_f, cfg), kelvin_check);
  });

  CommonFlags st_f;
  auto* sub_st = app.add_subcommand(
      "stability-curve", "noise level vs reconstruction error, end to end");
  add_common_flags(sub_st, st_f);
  sub_st->callback([&] {
    st_f.seed_given = sub_st->count("--seed") > 0;
    dispatch(st_f, fcgo::cli::cmd_stability_curve);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const fcgo::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
