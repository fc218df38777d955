// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "dgwf/config.hpp"
#include "dgwf/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dgwf::cli {

namespace detail {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

inline void add_common(CLI::App* sub, CommonOptions& opt) {
  sub->add_option("--config", opt.config_path, "Experiment configuration (JSON)")->required();
  sub->add_option("--seed", opt.seed, "Master seed (overrides graph.seed)");
  sub->add_option("--out-dir", opt.out_dir, "Output directory (overrides output.out_dir)");
  sub->add_flag("--quiet", opt.quiet, "Suppress progress messages");
}

}  // namespace detail

/// Command-line entry point. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed interferometric radar imaging experiments"};
  app.name("dgwf");
  bool print_default = false;
  app.add_flag("--print-default-config", print_default, "Print the default configuration and exit");

  detail::CommonOptions opt;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "One DGWF and one GWF run: traces, reconstructions, graph"},
      {"sweep-connectivity", "Iterations to the MSE threshold versus connection probability"},
      {"sweep-receivers", "Final MSE versus number of receivers"},
      {"theory", "RIC constants, Lipschitz bound, and sampled RC / PL checks"},
      {"init-only", "Spectral initialization quality report"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    detail::add_common(sub, opt);
    subs.push_back(sub);
  }
  app.require_subcommand(0, 1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code;
  }

  if (print_default) {
    out << default_config_text();
    return 0;
  }
  CLI::App* chosen = nullptr;
  for (auto* s : subs)
    if (s->parsed()) chosen = s;
  if (chosen == nullptr) {
    err << "error: a subcommand is required\n" << app.help();
    return 2;
  }

  std::mutex log_mutex;
  Logger log{opt.quiet ? nullptr : &out, &log_mutex};
  try {
    ExperimentConfig cfg = load_config(opt.config_path);
    if (opt.seed) cfg.graph.seed = *opt.seed;
    if (!opt.out_dir.empty()) cfg.output.out_dir = opt.out_dir;
    const std::filesystem::path dir(cfg.output.out_dir);
    std::filesystem::create_directories(dir);
    const std::string name = chosen->get_name();
    if (name == "simulate") {
      simulate(cfg, dir, log);
    } else if (name == "sweep-connectivity") {
      sweep_connectivity(cfg, dir, log);
    } else if (name == "sweep-receivers") {
      sweep_receivers(cfg, dir, log);
    } else if (name == "theory") {
      const TheoryReport rep = theory_report(cfg, dir, log);
      if (!opt.quiet)
        for (const auto& [k, v] : report_items(rep)) out << k << " = " << v << '\n';
    } else {
      init_report(cfg, dir, log);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 3;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args, out, err);
}

}  // namespace dgwf::cli
