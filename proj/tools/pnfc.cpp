// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "CLI11.hpp"
#include "pnfc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pnfc: projector-nilpotent functional calculus"};
  app.require_subcommand(1);
  pnfc::cli::Request req;
  std::string out_dir;
  std::uint64_t seed = 0;
  for (const auto& name : pnfc::cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", req.config_path, "INI config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides run.output_dir)");
    sub->add_option("--seed", seed, "seed for randomized probes (overrides run.seed)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pnfc::cli::exit_parse;
  }
  auto* sub = app.get_subcommands().front();
  req.command = sub->get_name();
  if (sub->count("--out")) req.out_dir = out_dir;
  if (sub->count("--seed")) req.seed = seed;

  const pnfc::cli::Outcome out = pnfc::cli::run(req);
  if (out.exit_code == 0) {
    std::cout << req.command << ": " << out.message << '\n';
    for (const auto& a : out.artifacts) std::cout << "  " << a << '\n';
  } else {
    std::cerr << "error: " << out.message << '\n';
    if (!out.artifacts.empty()) std::cerr << "artifacts written\n";
  }
  return out.exit_code;
}
