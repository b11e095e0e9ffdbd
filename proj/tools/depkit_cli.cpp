#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "depkit/cli.hpp"
#include "depkit/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"depkit: depression-severity classification experiments"};
  app.require_subcommand(1);

  depkit::cli::CommandInvocation inv;
  std::string seeds;
  std::vector<std::string> positional;

  const std::map<std::string_view, std::string> about = {
      {"ingest", "validate datasets and summarize class distributions"},
      {"baseline", "fit and score a majority, TF-IDF or doc-vector baseline"},
      {"finetune", "fine-tune an encoder per seed and score it"},
      {"fuse", "fuse cached member runs into an ensemble"},
      {"transfer", "fine-tune on a source dataset, then on the target"},
      {"evaluate", "score the per-seed matrices of a run directory"},
      {"report", "render one table from several run directories"},
      {"gridsearch", "search batch size, learning rate and epochs"}};
  for (auto verb : depkit::cli::kVerbs) {
    auto* sub = app.add_subcommand(std::string(verb), about.at(verb));
    sub->add_option("--config", inv.config_path, "experiment config (JSON)");
    sub->add_option("--set", inv.overrides, "override a config value, key=value (repeatable, last wins)")
        ->allow_extra_args(false);
    sub->add_option("--seeds", seeds, "comma-separated seed list, e.g. 1,2,3");
    sub->add_option("--out", inv.out, "parent directory for run directories")->capture_default_str();
    sub->add_flag("--paper-faithful", inv.paper_faithful, "pin tuned hyperparameters and the default search space");
    sub->add_flag("--toy", inv.toy, "use the toy encoder stand-ins");
    sub->add_flag("-q,--quiet", inv.quiet, "suppress progress output");
    if (verb == "evaluate" || verb == "report") sub->add_option("runs", positional, "run directories");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : depkit::cli::kExitConfig;
  }

  inv.verb = app.get_subcommands().front()->get_name();
  inv.positional.assign(positional.begin(), positional.end());
  if (!seeds.empty()) {
    try {
      inv.seeds = depkit::cli::parse_seed_list(seeds);
    } catch (const depkit::Error& e) {
      std::cerr << "depkit " << inv.verb << ": " << e.what() << '\n';
      return depkit::cli::kExitConfig;
    }
  }
  return depkit::cli::dispatch(inv, std::cout, std::cerr);
}
