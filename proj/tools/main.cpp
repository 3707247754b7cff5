#include <iostream>

#include <CLI11.hpp>

#include "haptic/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = haptic::cli;
  cli::configure_logging();

  CLI::App app{"Proxy-based haptic rendering of point clouds"};
  app.require_subcommand(1);
  cli::Options o;

  auto path_opt = [](CLI::App* sub, const char* name, std::optional<std::filesystem::path>& slot, const char* help) {
    return sub->add_option_function<std::string>(name, [&slot](const std::string& v) { slot = v; }, help);
  };

  auto* simulate = app.add_subcommand("simulate", "Run a scripted trajectory and write the trace");
  path_opt(simulate, "--cloud", o.cloud, "Point cloud (.xyz or ASCII .ply)")->required();
  path_opt(simulate, "--trajectory", o.trajectory, "HIP keyframes, tick,x,y,z")->required();
  path_opt(simulate, "--config", o.config, "Engine config (JSON)");
  path_opt(simulate, "--out", o.out, "Trace file (.csv or .jsonl)")->required();
  simulate->add_option_function<std::int64_t>("--ticks", [&](std::int64_t t) { o.ticks = t; }, "Override max_ticks");

  auto* validate = app.add_subcommand("validate-sphere", "Score rendered forces against the analytic sphere");
  path_opt(validate, "--config", o.config, "Engine config (JSON)");
  path_opt(validate, "--out", o.out, "Report file (JSON)");
  validate->add_option("--scale", o.scale, "Sphere scale; 1.0 gives R = 0.025 m");

  auto* bench = app.add_subcommand("bench", "Time the haptic loop");
  path_opt(bench, "--cloud", o.cloud, "Point cloud")->required();
  path_opt(bench, "--config", o.config, "Engine config (JSON)");
  path_opt(bench, "--trajectory", o.trajectory, "HIP keyframes; default sweeps the cloud diagonal");
  bench->add_option_function<std::int64_t>("--ticks", [&](std::int64_t t) { o.ticks = t; }, "Override max_ticks");

  auto* serve = app.add_subcommand("serve", "Run a live session behind the WebSocket bridge");
  path_opt(serve, "--cloud", o.cloud, "Point cloud")->required();
  path_opt(serve, "--config", o.config, "Engine config (JSON)");
  serve->add_option("--bind", o.bind, "host:port")->capture_default_str();

  auto* info = app.add_subcommand("resample-info", "Print voxel occupancy statistics");
  path_opt(info, "--cloud", o.cloud, "Point cloud")->required();
  path_opt(info, "--config", o.config, "Engine config (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInputError;
  }

  if (*simulate) return cli::cmd_simulate(o, std::cout, std::cerr);
  if (*validate) return cli::cmd_validate_sphere(o, std::cout, std::cerr);
  if (*bench) return cli::cmd_bench(o, std::cout, std::cerr);
  if (*serve) return cli::cmd_serve(o, std::cout, std::cerr);
  return cli::cmd_resample_info(o, std::cout, std::cerr);
}
