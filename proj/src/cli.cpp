#include "depkit/cli.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <ostream>

#include "depkit/error.hpp"
#include "depkit/experiment.hpp"
#include "depkit/text.hpp"

namespace depkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path g_last_run_dir;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Train: return kExitTrain;
    case ErrorCategory::MissingArtifact: return kExitMissingArtifact;
  }
  return 1;
}

json load_config(const fs::path& path) {
  if (path.empty()) throw Error(ErrorKind::ConfigError, "--config is required");
  if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, "config file not found: " + path.string());
  try {
    return json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

// Flags and overrides applied in a fixed order so the manifest can echo them.
json effective_config(json config, const CommandInvocation& inv) {
  for (const auto& o : inv.overrides) apply_override(config, o);
  if (inv.seeds) config["seeds"] = *inv.seeds;
  if (inv.paper_faithful) config["paper_faithful"] = true;
  if (inv.toy) config["toy"] = true;
  return config;
}

std::string config_hash(const json& config) { return text::hex64(text::fnv1a(config.dump())); }

fs::path make_run_dir(const fs::path& out, const std::string& hash) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = std::string(stamp) + "-" + hash.substr(0, 8);
  fs::create_directories(out);
  for (int i = 0;; ++i) {
    fs::path dir = out / (i == 0 ? base : base + "-" + std::to_string(i));
    if (fs::create_directory(dir)) return dir;
  }
}

struct Session {
  const CommandInvocation& inv;
  std::ostream& out;
  RunContext ctx;

  explicit Session(const CommandInvocation& i, std::ostream& o) : inv(i), out(o) {
    ctx.cache_root = inv.cache_root ? *inv.cache_root : default_cache_root();
    if (!inv.quiet) ctx.log = [this](const std::string& m) { out << "  " << m << '\n'; };
  }
};

void write_manifest(const fs::path& run_dir, const CommandInvocation& inv, const std::string& hash, const json& config,
                    const std::vector<int>& seeds, const std::vector<fs::path>& artifacts, bool cached) {
  json arts = json::array();
  for (const auto& a : artifacts) arts.push_back(a.string());
  json manifest = {{"verb", inv.verb},
                   {"config_path", inv.config_path.string()},
                   {"config_hash", hash},
                   {"overrides", inv.overrides},
                   {"seeds", seeds},
                   {"paper_faithful", config.value("paper_faithful", false)},
                   {"toy", config.value("toy", false)},
                   {"artifacts", arts},
                   {"cached", cached}};
  text::write_file_atomic(run_dir / "config.json", config.dump(2) + "\n");
  text::write_file_atomic(run_dir / "run.json", manifest.dump(2) + "\n");
}

ExperimentSpec spec_from(const json& config, const fs::path& config_path) {
  return experiment_from_json(config, fs::absolute(config_path).parent_path());
}

template <class T>
void require_model(const ExperimentSpec& spec, const std::string& verb, const char* what) {
  if (!std::holds_alternative<T>(spec.model))
    throw Error(ErrorKind::ConfigError, "'" + verb + "' needs a config whose model.type is " + what);
}

int run_pipeline(Session& s) {
  const json config = effective_config(load_config(s.inv.config_path), s.inv);
  ExperimentSpec spec = spec_from(config, s.inv.config_path);
  const auto& verb = s.inv.verb;
  if (verb == "baseline") require_model<BaselineSpec>(spec, verb, "baseline");
  if (verb == "fuse") require_model<EnsembleModelSpec>(spec, verb, "ensemble");
  if (verb == "finetune" || verb == "transfer") require_model<EncoderSpec>(spec, verb, "encoder");
  if (verb == "finetune" && spec.transfer_source)
    throw Error(ErrorKind::ConfigError, "config sets transfer_source; use the 'transfer' verb");
  if (verb == "transfer" && !spec.transfer_source)
    throw Error(ErrorKind::ConfigError, "'transfer' needs transfer_source in the config");

  const auto hash = config_hash(config);
  // Everything that can fail before training runs first, so a failing
  // invocation leaves no run directory behind.
  auto prepared = prepare_experiment(spec, s.ctx);
  const auto run_dir = make_run_dir(s.inv.out, hash);
  s.out << verb << ": " << model_label(spec) << " on " << spec.target_dataset << " -> " << run_dir.string() << '\n';
  EvalReport report = [&] {
    try {
      return run_experiment(prepared, s.ctx, run_dir);
    } catch (...) {
      fs::remove_all(run_dir);
      throw;
    }
  }();
  const bool cached = std::all_of(report.cached.begin(), report.cached.end(), [](bool b) { return b; });
  std::vector<fs::path> artifacts = report.artifacts;
  artifacts.push_back(run_dir / "report.json");
  artifacts.push_back(run_dir / "table.txt");
  write_manifest(run_dir, s.inv, hash, to_json(spec), spec.seeds, artifacts, cached);
  s.out << text::read_file(run_dir / "table.txt");
  if (cached) s.out << "all runs served from cache\n";
  g_last_run_dir = run_dir;
  return kExitOk;
}

int run_gridsearch(Session& s) {
  const json config = effective_config(load_config(s.inv.config_path), s.inv);
  ExperimentSpec spec = spec_from(config, s.inv.config_path);
  require_model<EncoderSpec>(spec, s.inv.verb, "encoder");
  // The verb always searches; paper-faithful mode only fixes the space.
  spec.hyperparams.reset();
  spec.paper_faithful = false;
  spec.transfer_source.reset();
  const auto hash = config_hash(config);
  const auto run_dir = make_run_dir(s.inv.out, hash);
  std::string log;
  s.ctx.on_grid_cell = [&](const GridCell& c) {
    json line = {{"batch_size", c.hp.batch_size},
                 {"learning_rate", c.hp.learning_rate},
                 {"num_epochs", c.hp.num_epochs},
                 {"f1_weighted", c.f1_w},
                 {"accuracy", c.accuracy}};
    log += line.dump() + "\n";
    if (!s.inv.quiet) s.out << "  " << line.dump() << '\n';
  };
  PreparedExperiment prepared = [&] {
    try {
      return prepare_experiment(spec, s.ctx);
    } catch (...) {
      fs::remove_all(run_dir);
      throw;
    }
  }();
  text::write_file_atomic(run_dir / "search_log.jsonl", log);
  json chosen = to_json(*prepared.chosen_hp);
  chosen["cells"] = prepared.grid_log.size();
  text::write_file_atomic(run_dir / "chosen_hp.json", chosen.dump(2) + "\n");
  write_manifest(run_dir, s.inv, hash, to_json(spec), {spec.seeds.front()},
                 {run_dir / "search_log.jsonl", run_dir / "chosen_hp.json"}, false);
  s.out << "gridsearch: " << prepared.grid_log.size() << " cells, chosen " << to_json(*prepared.chosen_hp).dump() << " -> "
        << run_dir.string() << '\n';
  g_last_run_dir = run_dir;
  return kExitOk;
}

int run_ingest(Session& s) {
  json config = effective_config(load_config(s.inv.config_path), s.inv);
  // Ingestion only looks at datasets; a placeholder model keeps the config
  // parseable when none is given.
  json parse_view = config;
  if (!parse_view.contains("model")) parse_view["model"] = {{"type", "baseline"}, {"kind", "majority"}};
  if (!parse_view.contains("target") && !parse_view.contains("target_dataset") && parse_view.contains("datasets") &&
      !parse_view["datasets"].empty())
    parse_view["target"] = parse_view["datasets"].begin().key();
  parse_view.erase("transfer_source");
  ExperimentSpec spec = spec_from(parse_view, s.inv.config_path);
  DatasetCatalog catalog(spec.datasets);
  json summary = json::object();
  for (const auto& [name, entry] : spec.datasets) {
    json d = {{"schema", {{"name", catalog.schema(name).name()}, {"levels", catalog.schema(name).levels()}}},
              {"fingerprint", catalog.fingerprint(name)}};
    for (Split split : {Split::Train, Split::Validation, Split::Test}) {
      auto ds = catalog.load(name, split);
      json dist = json::array();
      for (const auto& c : class_distribution(ds))
        dist.push_back({{"level", ds.schema().level_name(c.level)}, {"count", c.count}, {"fraction", c.fraction}});
      d[std::string(to_string(split))] = {{"posts", ds.size()}, {"distribution", dist}};
      s.out << "  " << name << "/" << to_string(split) << ": " << ds.size() << " posts\n";
    }
    summary[name] = d;
  }
  const auto hash = config_hash(config);
  const auto run_dir = make_run_dir(s.inv.out, hash);
  text::write_file_atomic(run_dir / "ingest.json", summary.dump(2) + "\n");
  write_manifest(run_dir, s.inv, hash, config, spec.seeds, {run_dir / "ingest.json"}, false);
  s.out << "ingest: " << spec.datasets.size() << " dataset(s) -> " << run_dir.string() << '\n';
  g_last_run_dir = run_dir;
  return kExitOk;
}

std::vector<std::pair<int, ProbabilityMatrix>> seed_matrices(const fs::path& run_dir) {
  std::vector<std::pair<int, ProbabilityMatrix>> out;
  if (!fs::is_directory(run_dir)) throw Error(ErrorKind::MissingMemberRun, "run directory not found: " + run_dir.string());
  for (const auto& e : fs::directory_iterator(run_dir)) {
    const auto name = e.path().filename().string();
    if (!e.is_directory() || !name.starts_with("seed-")) continue;
    int seed = 0;
    const auto* first = name.data() + 5;
    const auto* last = name.data() + name.size();
    if (auto [p, ec] = std::from_chars(first, last, seed); ec != std::errc() || p != last) continue;
    out.emplace_back(seed, read_probability_matrix(e.path() / "test_proba.tsv"));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (out.empty()) throw Error(ErrorKind::MissingMemberRun, "no seed-*/test_proba.tsv under " + run_dir.string());
  return out;
}

int run_evaluate(Session& s) {
  if (s.inv.positional.size() != 1) throw Error(ErrorKind::ConfigError, "'evaluate' takes exactly one run directory");
  const fs::path src = s.inv.positional.front();
  const fs::path config_path = s.inv.config_path.empty() ? src / "config.json" : s.inv.config_path;
  if (!fs::exists(config_path)) throw Error(ErrorKind::MissingMemberRun, "no config.json in " + src.string());
  const json config = effective_config(load_config(config_path), s.inv);
  ExperimentSpec spec = spec_from(config, config_path);
  auto matrices = seed_matrices(src);
  spec.seeds.clear();
  for (const auto& [seed, pm] : matrices) spec.seeds.push_back(seed);
  EvalReport report = evaluate_matrices(spec, matrices);
  for (const auto& [seed, pm] : matrices) report.artifacts.push_back(src / ("seed-" + std::to_string(seed)) / "test_proba.tsv");

  const auto hash = config_hash(config);
  const auto run_dir = make_run_dir(s.inv.out, hash);
  text::write_file_atomic(run_dir / "report.json", to_json(report).dump(2) + "\n");
  const auto table = render_table({table_row(to_json(report))}, spec.name);
  text::write_file_atomic(run_dir / "table.txt", table);
  write_manifest(run_dir, s.inv, hash, to_json(spec), spec.seeds, {run_dir / "report.json", run_dir / "table.txt"}, true);
  s.out << "evaluate: " << matrices.size() << " seed matrices from " << src.string() << " -> " << run_dir.string() << '\n'
        << table;
  g_last_run_dir = run_dir;
  return kExitOk;
}

int run_report(Session& s) {
  if (s.inv.positional.empty()) throw Error(ErrorKind::ConfigError, "'report' takes one or more run directories");
  std::vector<TableRow> rows;
  json sources = json::array();
  json row_json = json::array();
  for (const auto& dir : s.inv.positional) {
    const auto path = dir / "report.json";
    if (!fs::exists(path)) throw Error(ErrorKind::MissingMemberRun, "no report.json in " + dir.string());
    json r;
    try {
      r = json::parse(text::read_file(path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    rows.push_back(table_row(r));
    sources.push_back(path.string());
    row_json.push_back({{"model", rows.back().model},
                        {"transfer", rows.back().transfer},
                        {"accuracy", rows.back().accuracy},
                        {"f1_weighted", rows.back().f1},
                        {"sd_f1_weighted", rows.back().sd},
                        {"notes", r.value("notes", json::array())}});
  }
  std::string title;
  for (const auto& o : s.inv.overrides)
    if (o.starts_with("title=")) title = o.substr(6);
  const auto table = render_table(rows, title);
  const json summary = {{"rows", row_json}, {"sources", sources}};
  const auto hash = config_hash(summary);
  const auto run_dir = make_run_dir(s.inv.out, hash);
  text::write_file_atomic(run_dir / "report.json", summary.dump(2) + "\n");
  text::write_file_atomic(run_dir / "table.txt", table);
  write_manifest(run_dir, s.inv, hash, summary, {}, {run_dir / "report.json", run_dir / "table.txt"}, true);
  s.out << table;
  g_last_run_dir = run_dir;
  return kExitOk;
}

}  // namespace

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw Error(ErrorKind::ConfigError, "override '" + std::string(assignment) + "' is not key=value");
  const std::string path(assignment.substr(0, eq));
  const auto keys = text::split(path, '.');
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &config;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (keys[i].empty()) throw Error(ErrorKind::ConfigError, "empty key in override '" + std::string(assignment) + "'");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[std::string(keys[i])];
  }
  if (!node->is_object()) *node = json::object();
  (*node)[std::string(keys.back())] = std::move(value);
}

std::vector<int> parse_seed_list(std::string_view s) {
  std::vector<int> seeds;
  const std::string list(s);
  for (const auto& part : text::split(list, ',')) {
    const auto t = text::trim(part);
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size())
      throw Error(ErrorKind::ConfigError, "bad seed list '" + std::string(s) + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw Error(ErrorKind::ConfigError, "empty seed list");
  return seeds;
}

const fs::path& last_run_dir() { return g_last_run_dir; }

int dispatch(const CommandInvocation& inv, std::ostream& out, std::ostream& err) {
  try {
    if (std::find(std::begin(kVerbs), std::end(kVerbs), inv.verb) == std::end(kVerbs))
      throw Error(ErrorKind::ConfigError, "unknown verb '" + inv.verb + "'");
    Session s(inv, out);
    if (inv.verb == "ingest") return run_ingest(s);
    if (inv.verb == "gridsearch") return run_gridsearch(s);
    if (inv.verb == "evaluate") return run_evaluate(s);
    if (inv.verb == "report") return run_report(s);
    return run_pipeline(s);
  } catch (const Error& e) {
    err << "depkit " << inv.verb << ": " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const json::exception& e) {
    err << "depkit " << inv.verb << ": ConfigError: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "depkit " << inv.verb << ": Io: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "depkit " << inv.verb << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace depkit::cli
