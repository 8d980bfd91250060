#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "prp/commands.hpp"
#include "prp/errors.hpp"
#include "prp/parallel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDataError = 2;
constexpr int kCheckFailed = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PrP supervision toolkit: synthetic RGB-D data, ground-truth correspondences, pseudo labels, "
               "losses and evaluation"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir, dataset_dir;
  int threads = 0;
  bool dump_config = false;
  app.add_option("-c,--config", config_path, "JSON run configuration (defaults apply to missing keys)");
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("-o,--out", out_dir, "output directory, overrides the config");
  app.add_option("-d,--dataset", dataset_dir, "dataset directory, overrides the config");
  app.add_option("-t,--threads", threads, "worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--dump-config", dump_config, "print the effective config and exit");

  auto* synth = app.add_subcommand("synth", "render the trajectory and write a dataset");
  auto* pairs = app.add_subcommand("pairs", "sample training pairs and write correspondences");
  auto* labels = app.add_subcommand("labels", "Projective Adaptation pseudo labels");
  auto* eval = app.add_subcommand("eval", "evaluation: homography | pose | register");
  std::string task;
  eval->add_option("task", task, "homography, pose or register")->required();
  auto* losscheck = app.add_subcommand("losscheck", "finite-difference check of the loss gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (!dump_config && app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kConfigError;
  }

  prp::RunConfig config;
  try {
    config = config_path.empty() ? prp::default_config() : prp::load_config(config_path);
    if (seed) config.seed = *seed;
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (!dataset_dir.empty()) config.dataset_dir = dataset_dir;
    config.validate();
  } catch (const prp::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (dump_config) {
    std::cout << prp::to_json(config).dump(2) << '\n';
    return kOk;
  }
  if (threads > 0) prp::set_num_threads(threads);

  try {
    prp::MetricsReport report;
    int code = kOk;
    if (synth->parsed()) {
      report = prp::cmd_synth(config);
      std::cout << "frames " << report.counts.front().second << " seed " << config.seed << '\n';
    } else if (pairs->parsed()) {
      report = prp::cmd_pairs(config);
    } else if (labels->parsed()) {
      report = prp::cmd_labels(config);
    } else if (eval->parsed()) {
      report = prp::cmd_eval(config, prp::parse_eval_task(task));
    } else if (losscheck->parsed()) {
      report = prp::cmd_losscheck(config);
      if (report.metric("passed").value_or(0.0) != 1.0) code = kCheckFailed;
    }
    prp::write_report(report, config.output_dir);
    std::cout << report.to_csv();
    return code;
  } catch (const prp::InvalidSpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const prp::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  }
}
