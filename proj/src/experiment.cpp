#include "depkit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>

#include "depkit/error.hpp"
#include "depkit/text.hpp"

namespace depkit {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// search space and grid search

SearchSpace SearchSpace::paper_default() {
  return {{std::begin(kPaperBatchSizes), std::end(kPaperBatchSizes)},
          {std::begin(kPaperLearningRates), std::end(kPaperLearningRates)},
          {std::begin(kPaperEpochCounts), std::end(kPaperEpochCounts)}};
}

json to_json(const SearchSpace& s) {
  return {{"batch_sizes", s.batch_sizes}, {"learning_rates", s.learning_rates}, {"epoch_counts", s.epoch_counts}};
}

SearchSpace search_space_from_json(const json& j) {
  try {
    SearchSpace s = SearchSpace::paper_default();
    if (j.contains("batch_sizes")) s.batch_sizes = j.at("batch_sizes").get<std::vector<int>>();
    if (j.contains("learning_rates")) s.learning_rates = j.at("learning_rates").get<std::vector<double>>();
    if (j.contains("epoch_counts")) s.epoch_counts = j.at("epoch_counts").get<std::vector<int>>();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("search_space: ") + e.what());
  }
}

bool grid_tie_break(const HyperParams& a, const HyperParams& b) {
  if (a.num_epochs != b.num_epochs) return a.num_epochs < b.num_epochs;
  if (a.batch_size != b.batch_size) return a.batch_size > b.batch_size;
  return a.learning_rate < b.learning_rate;
}

GridSearchResult grid_search(const EncoderRef& encoder, const SearchSpace& space, const LabeledDataset& train,
                             const LabeledDataset& validation, const HyperParams& base, const FineTuneOptions& options,
                             const std::function<void(const GridCell&)>& on_cell) {
  if (space.size() == 0) throw Error(ErrorKind::EmptySpace, "search space has an empty axis");
  if (!(train.schema() == validation.schema()))
    throw Error(ErrorKind::SchemaMismatch, "train and validation splits use different schemas");
  GridSearchResult result;
  if (space.size() == 1) {
    result.best = base;
    result.best.batch_size = space.batch_sizes.front();
    result.best.learning_rate = space.learning_rates.front();
    result.best.num_epochs = space.epoch_counts.front();
    result.best.validate(options.paper_faithful);
    return result;
  }
  const auto truth = validation.labels();
  const auto posts = validation.posts();
  bool have_best = false;
  double best_f1 = 0.0;
  for (int bs : space.batch_sizes) {
    for (double lr : space.learning_rates) {
      for (int ne : space.epoch_counts) {
        HyperParams hp = base;
        hp.batch_size = bs;
        hp.learning_rate = lr;
        hp.num_epochs = ne;
        auto model = fine_tune(encoder, train, hp, options);
        auto scores = score_labels(truth, hard_labels(predict_proba(model, posts)), train.schema().size());
        GridCell cell{hp, scores.f1_w, scores.accuracy};
        result.cells.push_back(cell);
        if (on_cell) on_cell(cell);
        if (!have_best || cell.f1_w > best_f1 || (cell.f1_w == best_f1 && grid_tie_break(hp, result.best))) {
          have_best = true;
          best_f1 = cell.f1_w;
          result.best = hp;
        }
      }
    }
  }
  return result;
}

std::optional<HyperParams> pinned_hyperparams(std::string_view model_id, std::string_view dataset) {
  struct Row {
    std::string_view model, dataset;
    int bs, ne;
    double lr;
  };
  static constexpr Row kRows[] = {
      {"bert", "reddit", 32, 15, 5e-5},    {"roberta", "reddit", 8, 15, 1e-5},
      {"mentalbert", "reddit", 32, 15, 1e-4}, {"bertweet", "reddit", 16, 15, 5e-5},
      {"bert", "twitter", 32, 15, 5e-5},   {"roberta", "twitter", 32, 15, 5e-5},
      {"mentalbert", "twitter", 32, 10, 5e-5}, {"bertweet", "twitter", 16, 5, 5e-5},
  };
  std::string ds = text::to_lower(dataset);
  if (ds.ends_with("-merged")) ds.resize(ds.size() - 7);
  for (const auto& r : kRows) {
    if (r.model == model_id && r.dataset == ds) {
      HyperParams hp;
      hp.batch_size = r.bs;
      hp.num_epochs = r.ne;
      hp.learning_rate = r.lr;
      return hp;
    }
  }
  return std::nullopt;
}

std::pair<LabeledDataset, LabeledDataset> transfer_prepare(const LabeledDataset& source, const LabeledDataset& target,
                                                           const LabelMapping& mapping) {
  if (source.schema() == target.schema() && mapping.is_identity() && mapping.source() == source.schema())
    return {source, target};
  if (mapping.source() == source.schema() && mapping.target() == target.schema())
    return {merge_labels(source, mapping), target};
  if (mapping.source() == target.schema() && mapping.target() == source.schema())
    return {source, merge_labels(target, mapping)};
  throw Error(ErrorKind::SchemaMismatch, "mapping " + mapping.source().name() + " -> " + mapping.target().name() +
                                             " does not align '" + source.name() + "' (" + source.schema().name() +
                                             ") with '" + target.name() + "' (" + target.schema().name() + ")");
}

// ---------------------------------------------------------------------------
// specification

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::ConfigError, m); };
  if (target_dataset.empty()) fail("target dataset missing");
  if (!datasets.contains(target_dataset)) throw Error(ErrorKind::DatasetNotFound, "dataset '" + target_dataset + "' not declared");
  if (transfer_source) {
    if (*transfer_source == target_dataset) fail("transfer source equals the target dataset");
    if (!datasets.contains(*transfer_source))
      throw Error(ErrorKind::DatasetNotFound, "dataset '" + *transfer_source + "' not declared");
    if (std::holds_alternative<BaselineSpec>(model)) fail("baselines do not support transfer");
  }
  if (seeds.empty()) fail("at least one seed is required");
  if (hyperparams) hyperparams->validate(paper_faithful);
  if (const auto* e = std::get_if<EnsembleModelSpec>(&model)) {
    if (has_general_slot(e->combo) && !e->general && e->general_candidates.empty())
      throw Error(ErrorKind::MissingGeneralChoice, "no general model or candidates given");
  }
}

namespace {

fs::path resolve_path(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

bool is_builtin_schema(const std::string& s) { return s == "reddit" || s == "twitter" || s == "depression-3level"; }

}  // namespace

ExperimentSpec experiment_from_json(const json& j, const fs::path& base_dir) {
  ExperimentSpec spec;
  try {
    spec.name = j.value("name", std::string("experiment"));
    for (const auto& [name, d] : j.at("datasets").items()) {
      DatasetEntry e;
      e.schema = d.at("schema").get<std::string>();
      if (!is_builtin_schema(e.schema)) e.schema = resolve_path(base_dir, e.schema).string();
      e.train = resolve_path(base_dir, d.at("train").get<std::string>());
      e.validation = resolve_path(base_dir, d.at("validation").get<std::string>());
      e.test = resolve_path(base_dir, d.at("test").get<std::string>());
      spec.datasets.emplace(name, std::move(e));
    }
    spec.target_dataset = j.contains("target") ? j.at("target").get<std::string>() : j.at("target_dataset").get<std::string>();
    const auto& m = j.at("model");
    const auto type = m.at("type").get<std::string>();
    if (type == "baseline") {
      spec.model = BaselineSpec{parse_baseline_kind(m.at("kind").get<std::string>())};
    } else if (type == "encoder") {
      spec.model = EncoderSpec{m.at("encoder").get<std::string>()};
    } else if (type == "ensemble") {
      EnsembleModelSpec e;
      e.combo = parse_combo(m.at("combo").get<std::string>());
      e.fusion = parse_fusion(m.value("fusion", std::string("averaging")));
      if (m.contains("general") && !m.at("general").is_null()) e.general = m.at("general").get<std::string>();
      if (m.contains("general_candidates")) e.general_candidates = m.at("general_candidates").get<std::vector<std::string>>();
      const auto prior = m.value("prior", std::string("train"));
      if (prior == "train") e.prior = PriorMode::Train;
      else if (prior == "uniform") e.prior = PriorMode::Uniform;
      else throw Error(ErrorKind::ConfigError, "prior must be 'train' or 'uniform'");
      spec.model = e;
    } else {
      throw Error(ErrorKind::ConfigError, "model.type must be baseline, encoder or ensemble");
    }
    if (j.contains("transfer_source") && !j.at("transfer_source").is_null())
      spec.transfer_source = j.at("transfer_source").get<std::string>();
    if (j.contains("label_mapping") && !j.at("label_mapping").is_null()) {
      auto lm = j.at("label_mapping").get<std::string>();
      spec.label_mapping = lm == "twitter-to-3level" ? lm : resolve_path(base_dir, lm).string();
    }
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<int>>();
    if (j.contains("hyperparams")) {
      const auto& hp = j.at("hyperparams");
      if (hp.is_string()) {
        if (hp.get<std::string>() != "search") throw Error(ErrorKind::ConfigError, "hyperparams must be an object or \"search\"");
      } else {
        spec.hyperparams = hyperparams_from_json(hp);
      }
    } else {
      spec.hyperparams = HyperParams{};
    }
    if (j.contains("search_space")) spec.search_space = search_space_from_json(j.at("search_space"));
    spec.paper_faithful = j.value("paper_faithful", false);
    spec.toy = j.value("toy", false);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  if (spec.paper_faithful) spec.search_space = SearchSpace::paper_default();
  spec.validate();
  return spec;
}

json to_json(const ExperimentSpec& spec) {
  json datasets = json::object();
  for (const auto& [name, d] : spec.datasets)
    datasets[name] = {{"schema", d.schema}, {"train", d.train.string()}, {"validation", d.validation.string()}, {"test", d.test.string()}};
  json model;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BaselineSpec>) {
          model = {{"type", "baseline"}, {"kind", to_string(m.kind)}};
        } else if constexpr (std::is_same_v<T, EncoderSpec>) {
          model = {{"type", "encoder"}, {"encoder", m.encoder}};
        } else {
          model = {{"type", "ensemble"},
                   {"combo", to_string(m.combo)},
                   {"fusion", to_string(m.fusion)},
                   {"general", m.general ? json(*m.general) : json(nullptr)},
                   {"general_candidates", m.general_candidates},
                   {"prior", m.prior == PriorMode::Train ? "train" : "uniform"}};
        }
      },
      spec.model);
  return {{"name", spec.name},
          {"datasets", datasets},
          {"target", spec.target_dataset},
          {"model", model},
          {"transfer_source", spec.transfer_source ? json(*spec.transfer_source) : json(nullptr)},
          {"label_mapping", spec.label_mapping ? json(*spec.label_mapping) : json(nullptr)},
          {"seeds", spec.seeds},
          {"hyperparams", spec.hyperparams ? to_json(*spec.hyperparams) : json("search")},
          {"search_space", to_json(spec.search_space)},
          {"paper_faithful", spec.paper_faithful},
          {"toy", spec.toy}};
}

std::string model_label(const ExperimentSpec& spec) {
  return std::visit(
      [&](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BaselineSpec>) {
          return std::string(to_string(m.kind));
        } else if constexpr (std::is_same_v<T, EncoderSpec>) {
          return resolve_encoder(m.encoder, spec.toy).registry_name;
        } else {
          return std::string(m.fusion == Fusion::Averaging ? "AE-" : "BE-") + std::string(to_string(m.combo));
        }
      },
      spec.model);
}

// ---------------------------------------------------------------------------
// catalog and cache

DatasetCatalog::DatasetCatalog(std::map<std::string, DatasetEntry> entries) : entries_(std::move(entries)) {}

const DatasetEntry& DatasetCatalog::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorKind::DatasetNotFound, "dataset '" + name + "' not declared");
  return it->second;
}

LabelSchema DatasetCatalog::schema(const std::string& name) { return resolve_schema(entry(name).schema); }

LabeledDataset DatasetCatalog::load(const std::string& name, Split split) {
  auto key = std::make_pair(name, static_cast<int>(split));
  if (auto it = loaded_.find(key); it != loaded_.end()) return it->second;
  const auto& e = entry(name);
  const fs::path& path = split == Split::Train ? e.train : split == Split::Validation ? e.validation : e.test;
  auto ds = load_dataset(path, schema(name), split, name);
  loaded_.emplace(key, ds);
  return ds;
}

std::string DatasetCatalog::fingerprint(const std::string& name) {
  if (auto it = fingerprints_.find(name); it != fingerprints_.end()) return it->second;
  const auto& e = entry(name);
  std::uint64_t h = text::fnv1a(name);
  const auto levels = schema(name).levels();
  for (const auto& l : levels) h = text::fnv1a(l + "\x1f", h);
  for (const auto* p : {&e.train, &e.validation, &e.test}) {
    if (!fs::exists(*p)) throw Error(ErrorKind::DatasetNotFound, p->string());
    h = text::fnv1a(text::read_file(*p), h);
  }
  auto fp = text::hex64(h);
  fingerprints_.emplace(name, fp);
  return fp;
}

fs::path default_cache_root(const fs::path& fallback) {
  if (const char* env = std::getenv("DEPKIT_CACHE"); env && *env) return fs::path(env);
  return fallback;
}

namespace {

void say(const RunContext& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

fs::path entry_dir(const RunContext& ctx, const std::string& key) { return ctx.cache_root / "runs" / key; }

// Builds an entry in a private temporary directory, then renames it into
// place. A concurrent writer that published first wins.
fs::path publish(const RunContext& ctx, const std::string& key, const std::function<void(const fs::path&)>& fill) {
  const fs::path final_dir = entry_dir(ctx, key);
  fs::create_directories(ctx.cache_root / "tmp");
  fs::create_directories(final_dir.parent_path());
  std::random_device rd;
  const fs::path tmp = ctx.cache_root / "tmp" / (key + "-" + text::hex64((std::uint64_t{rd()} << 32) ^ rd()));
  fs::create_directories(tmp);
  try {
    fill(tmp);
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }
  std::error_code ec;
  fs::rename(tmp, final_dir, ec);
  if (ec) {
    fs::remove_all(tmp);
    if (!fs::exists(final_dir / "manifest.json")) throw Error(ErrorKind::Io, "cannot publish cache entry " + final_dir.string());
  }
  return final_dir;
}

std::string mapping_fingerprint(const LabelMapping& m) {
  std::string s = m.source().name() + "->" + m.target().name() + ":";
  for (int t : m.map()) s += std::to_string(t) + ",";
  return text::hex64(text::fnv1a(s));
}

LabelMapping resolve_mapping(const std::string& name_or_path, const LabelSchema& a, const LabelSchema& b) {
  if (name_or_path == "twitter-to-3level") return builtin_mapping(name_or_path);
  const bool a_larger = a.size() >= b.size();
  return load_mapping(fs::path(name_or_path), a_larger ? a : b, a_larger ? b : a);
}

struct AlignedData {
  LabeledDataset target_train, target_validation, target_test;
  std::optional<LabeledDataset> source_train, source_validation;
  std::optional<std::string> mapping_fp;
};

AlignedData align_datasets(const ExperimentSpec& spec, DatasetCatalog& catalog) {
  auto tt = catalog.load(spec.target_dataset, Split::Train);
  auto tv = catalog.load(spec.target_dataset, Split::Validation);
  auto te = catalog.load(spec.target_dataset, Split::Test);
  if (!spec.transfer_source) return {tt, tv, te, std::nullopt, std::nullopt, std::nullopt};

  auto st = catalog.load(*spec.transfer_source, Split::Train);
  auto sv = catalog.load(*spec.transfer_source, Split::Validation);
  std::optional<LabelMapping> mapping;
  if (spec.label_mapping) {
    mapping = resolve_mapping(*spec.label_mapping, st.schema(), tt.schema());
  } else if (st.schema() == tt.schema()) {
    mapping = LabelMapping::identity(st.schema());
  } else {
    throw Error(ErrorKind::SchemaMismatch, "'" + st.name() + "' (" + std::to_string(st.schema().size()) + " levels) and '" +
                                               tt.name() + "' (" + std::to_string(tt.schema().size()) +
                                               " levels) need a label_mapping before transfer");
  }
  auto [st2, tt2] = transfer_prepare(st, tt, *mapping);
  auto [sv2, tv2] = transfer_prepare(sv, tv, *mapping);
  auto te2 = transfer_prepare(st, te, *mapping).second;
  return {tt2, tv2, te2, st2, sv2, mapping_fingerprint(*mapping)};
}

// Hyperparameters for one training stage of `model_id` on `dataset`.
HyperParams stage_hp(const PreparedExperiment& p, std::string_view model_id, const std::string& dataset, int seed) {
  const auto& spec = p.spec;
  HyperParams hp;
  if (spec.paper_faithful) {
    auto pinned = pinned_hyperparams(model_id, dataset);
    if (!pinned)
      throw Error(ErrorKind::ConfigError, "no pinned hyperparameters for model '" + std::string(model_id) + "' on '" + dataset + "'");
    hp = *pinned;
    if (spec.hyperparams) hp.max_tokens = spec.hyperparams->max_tokens;
  } else if (spec.hyperparams) {
    hp = *spec.hyperparams;
  } else if (p.chosen_hp) {
    hp = *p.chosen_hp;
  } else {
    throw Error(ErrorKind::ConfigError, "hyperparameter search is only available for single-encoder experiments");
  }
  hp.seed = seed;
  return hp;
}

struct EncoderPlan {
  EncoderRef ref;
  std::optional<HyperParams> source_hp;
  HyperParams target_hp;
  std::string key;
  json key_doc;
};

EncoderPlan plan_encoder(const PreparedExperiment& p, const RunContext& ctx, const std::string& encoder_name, int seed) {
  EncoderPlan plan;
  plan.ref = resolve_encoder(encoder_name, p.spec.toy);
  auto& catalog = const_cast<DatasetCatalog&>(p.catalog);
  json stages = json::array();
  if (p.source_train) {
    plan.source_hp = stage_hp(p, plan.ref.model_id, *p.spec.transfer_source, seed);
    stages.push_back({{"dataset", p.source_train->name()},
                      {"fingerprint", catalog.fingerprint(*p.spec.transfer_source)},
                      {"hp", to_json(*plan.source_hp)}});
  }
  plan.target_hp = stage_hp(p, plan.ref.model_id, p.spec.target_dataset, seed);
  stages.push_back({{"dataset", p.target_train.name()},
                    {"fingerprint", catalog.fingerprint(p.spec.target_dataset)},
                    {"hp", to_json(plan.target_hp)}});
  plan.key_doc = {{"format", 1},
                  {"kind", "encoder"},
                  {"encoder", plan.ref.registry_name},
                  {"seed", seed},
                  {"mapping", p.mapping_fingerprint ? json(*p.mapping_fingerprint) : json(nullptr)},
                  {"stages", stages}};
  if (ctx.fine_tune.net) {
    const auto& n = *ctx.fine_tune.net;
    plan.key_doc["net"] = {n.d_model, n.heads, n.ff, n.layers};
  }
  plan.key = "enc-" + text::hex64(text::fnv1a(plan.key_doc.dump()));
  return plan;
}

double mean_validation_f1(const PreparedExperiment& p, const RunContext& ctx, const std::string& candidate) {
  std::vector<double> f1s;
  const auto truth = p.target_validation.labels();
  for (int seed : p.spec.seeds) {
    auto plan = plan_encoder(p, ctx, candidate, seed);
    const auto path = entry_dir(ctx, plan.key) / "validation_proba.tsv";
    if (!fs::exists(path))
      throw Error(ErrorKind::MissingMemberRun, "general-model candidate '" + candidate + "' (" + plan.ref.registry_name +
                                                   ", seed " + std::to_string(seed) + ") has no cached run; fine-tune it first");
    auto pm = read_probability_matrix(path);
    f1s.push_back(score_labels(truth, hard_labels(pm), p.target_validation.schema().size()).f1_w);
  }
  return mean_of(f1s);
}

void check_alignment(const ProbabilityMatrix& pm, const LabeledDataset& ds) {
  if (pm.classes() != ds.schema().size())
    throw Error(ErrorKind::ShapeMismatch, "matrix has " + std::to_string(pm.classes()) + " classes, '" + ds.name() + "' has " +
                                              std::to_string(ds.schema().size()));
  if (pm.rows() != ds.size()) throw Error(ErrorKind::ShapeMismatch, "matrix rows differ from '" + ds.name() + "' size");
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (pm.post_ids()[i] != ds.items()[i].post.id)
      throw Error(ErrorKind::IdOrderMismatch, "row " + std::to_string(i) + " is '" + pm.post_ids()[i] + "', expected '" +
                                                  ds.items()[i].post.id + "'");
}

json scores_brief(const ScoreSet& s) { return {{"accuracy", s.accuracy}, {"f1_weighted", s.f1_w}}; }

SingleRunResult run_encoder(const PreparedExperiment& p, RunContext& ctx, const std::string& encoder_name, int seed) {
  auto plan = plan_encoder(p, ctx, encoder_name, seed);
  const auto dir = entry_dir(ctx, plan.key);
  SingleRunResult r;
  r.seed = seed;
  const int classes = p.target_test.schema().size();
  if (fs::exists(dir / "manifest.json")) {
    say(ctx, "cache hit " + plan.ref.registry_name + " seed " + std::to_string(seed));
    auto manifest = json::parse(text::read_file(dir / "manifest.json"));
    r.test_matrix = read_probability_matrix(dir / "test_proba.tsv");
    check_alignment(r.test_matrix, p.target_test);
    r.scores = score_labels(p.target_test.labels(), hard_labels(r.test_matrix), classes);
    r.lineage = manifest.at("lineage").get<std::vector<std::string>>();
    r.cache_entry = dir;
    r.cached = true;
    return r;
  }

  FineTuneOptions opt = ctx.fine_tune;
  opt.paper_faithful = p.spec.paper_faithful;
  std::optional<ClassifierModel> stage1;
  if (p.source_train) {
    say(ctx, "fine-tune " + plan.ref.registry_name + " on " + p.source_train->name() + " (seed " + std::to_string(seed) + ")");
    stage1 = fine_tune(plan.ref, concat(*p.source_train, *p.source_validation, Split::Train), *plan.source_hp, opt);
  }
  auto train_on = [&](const LabeledDataset& ds) {
    return stage1 ? continue_fine_tune(*stage1, ds, plan.target_hp, opt) : fine_tune(plan.ref, ds, plan.target_hp, opt);
  };
  say(ctx, "fine-tune " + plan.ref.registry_name + " on " + p.target_train.name() + " (seed " + std::to_string(seed) + ")");
  auto val_model = train_on(p.target_train);
  auto val_pm = predict_proba(val_model, p.target_validation.posts());
  auto final_model = train_on(concat(p.target_train, p.target_validation, Split::Train));
  r.test_matrix = predict_proba(final_model, p.target_test.posts());
  r.scores = score_labels(p.target_test.labels(), hard_labels(r.test_matrix), classes);
  r.lineage = final_model.lineage;
  const auto val_scores = score_labels(p.target_validation.labels(), hard_labels(val_pm), classes);

  r.cache_entry = publish(ctx, plan.key, [&](const fs::path& tmp) {
    write_probability_matrix(tmp / "test_proba.tsv", r.test_matrix);
    write_probability_matrix(tmp / "validation_proba.tsv", val_pm);
    save_checkpoint(tmp / "checkpoint", final_model);
    json stages = json::array();
    for (const auto& hp : final_model.stages) stages.push_back(to_json(hp));
    json manifest = {{"key", plan.key_doc},
                     {"encoder", plan.ref.registry_name},
                     {"seed", seed},
                     {"lineage", final_model.lineage},
                     {"hyperparams", stages},
                     {"schema", p.target_test.schema().levels()},
                     {"test", scores_brief(r.scores)},
                     {"validation", scores_brief(val_scores)},
                     {"validation_model", "trained on the target train split only"}};
    text::write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");
  });
  return r;
}

SingleRunResult run_baseline(const PreparedExperiment& p, RunContext& ctx, BaselineKind kind, int seed) {
  BaselineConfig config;
  config.docvec.seed = static_cast<std::uint64_t>(seed);
  json key_doc = {{"format", 1},
                  {"kind", "baseline"},
                  {"baseline", to_string(kind)},
                  {"seed", seed},
                  {"dataset", p.target_train.name()},
                  {"fingerprint", const_cast<DatasetCatalog&>(p.catalog).fingerprint(p.spec.target_dataset)},
                  {"config", to_json(config)}};
  const std::string key = "base-" + text::hex64(text::fnv1a(key_doc.dump()));
  const auto dir = entry_dir(ctx, key);
  const int classes = p.target_test.schema().size();
  SingleRunResult r;
  r.seed = seed;
  r.lineage = {p.target_train.name()};
  if (fs::exists(dir / "manifest.json")) {
    r.test_matrix = read_probability_matrix(dir / "test_proba.tsv");
    check_alignment(r.test_matrix, p.target_test);
    r.cached = true;
  } else {
    say(ctx, "fit " + std::string(to_string(kind)) + " on " + p.target_train.name() + " (seed " + std::to_string(seed) + ")");
    auto model = fit_baseline(kind, p.target_train, config);
    r.test_matrix = predict_baseline_proba(model, p.target_test.posts());
    publish(ctx, key, [&](const fs::path& tmp) {
      write_probability_matrix(tmp / "test_proba.tsv", r.test_matrix);
      save_baseline(tmp / "model", model);
      json manifest = {{"key", key_doc}, {"seed", seed}, {"lineage", r.lineage}};
      if (kind == BaselineKind::Majority) manifest["majority_label"] = model.majority_label();
      text::write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");
    });
  }
  r.cache_entry = dir;
  r.scores = score_labels(p.target_test.labels(), hard_labels(r.test_matrix), classes);
  return r;
}

SingleRunResult run_ensemble(const PreparedExperiment& p, RunContext& ctx, const EnsembleModelSpec& e, int seed) {
  std::vector<ProbabilityMatrix> members;
  SingleRunResult r;
  r.seed = seed;
  for (const auto& m : p.members) {
    auto plan = plan_encoder(p, ctx, m, seed);
    const auto path = entry_dir(ctx, plan.key) / "test_proba.tsv";
    if (!fs::exists(path))
      throw Error(ErrorKind::MissingMemberRun, "ensemble member '" + m + "' (" + plan.ref.registry_name + ", seed " +
                                                   std::to_string(seed) + ") has no cached run; fine-tune it first");
    members.push_back(read_probability_matrix(path));
    check_alignment(members.back(), p.target_test);
  }
  const int classes = p.target_test.schema().size();
  ClassPrior prior = e.prior == PriorMode::Uniform ? ClassPrior::uniform(classes) : ClassPrior::from_dataset(p.target_train);
  r.test_matrix = fuse(e.fusion, members, prior);
  r.scores = score_labels(p.target_test.labels(), hard_labels(r.test_matrix), classes);
  r.cached = true;
  return r;
}

}  // namespace

PreparedExperiment prepare_experiment(const ExperimentSpec& spec, RunContext& ctx) {
  spec.validate();
  DatasetCatalog catalog(spec.datasets);
  auto aligned = align_datasets(spec, catalog);
  PreparedExperiment p{spec,
                       std::move(catalog),
                       std::move(aligned.target_train),
                       std::move(aligned.target_validation),
                       std::move(aligned.target_test),
                       std::move(aligned.source_train),
                       std::move(aligned.source_validation),
                       aligned.mapping_fp,
                       std::nullopt,
                       std::nullopt,
                       {},
                       {},
                       {}};
  if (p.source_train && !(p.source_train->schema() == p.target_train.schema()))
    throw Error(ErrorKind::SchemaMismatch, "transfer stages would train on different schemas");

  if (const auto* enc = std::get_if<EncoderSpec>(&spec.model)) {
    auto ref = resolve_encoder(enc->encoder, spec.toy);
    if (spec.hyperparams && !spec.paper_faithful) {
      p.chosen_hp = *spec.hyperparams;
    } else if (!spec.paper_faithful) {
      HyperParams base;
      base.seed = spec.seeds.front();
      say(ctx, "grid search over " + std::to_string(spec.search_space.size()) + " cells for " + ref.registry_name);
      FineTuneOptions opt = ctx.fine_tune;
      auto result = grid_search(ref, spec.search_space, p.target_train, p.target_validation, base, opt, ctx.on_grid_cell);
      p.chosen_hp = result.best;
      p.grid_log = std::move(result.cells);
    } else {
      p.chosen_hp = stage_hp(p, ref.model_id, spec.target_dataset, spec.seeds.front());
    }
  } else if (const auto* e = std::get_if<EnsembleModelSpec>(&spec.model)) {
    if (!spec.hyperparams && !spec.paper_faithful)
      throw Error(ErrorKind::ConfigError, "ensembles reuse member hyperparameters: give hyperparams or use paper-faithful mode");
    if (spec.hyperparams && !spec.paper_faithful) p.chosen_hp = *spec.hyperparams;
    if (has_general_slot(e->combo) && !e->general) {
      std::optional<std::string> best;
      double best_f1 = -1.0;
      for (const auto& c : e->general_candidates) {
        const double f1 = mean_validation_f1(p, ctx, c);
        p.general_scores[c] = f1;
        if (f1 > best_f1) {
          best_f1 = f1;
          best = c;
        }
      }
      p.general_choice = best;
    } else if (has_general_slot(e->combo)) {
      p.general_choice = e->general;
    }
    p.members = resolve_members(e->combo, p.general_choice);
    EnsembleSpec{e->combo, e->fusion, p.members}.validate();
  }
  return p;
}

SingleRunResult run_single(const PreparedExperiment& prepared, int seed, RunContext& ctx) {
  return std::visit(
      [&](const auto& m) -> SingleRunResult {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BaselineSpec>) return run_baseline(prepared, ctx, m.kind, seed);
        else if constexpr (std::is_same_v<T, EncoderSpec>) return run_encoder(prepared, ctx, m.encoder, seed);
        else return run_ensemble(prepared, ctx, m, seed);
      },
      prepared.spec.model);
}

SingleRunResult run_single(const ExperimentSpec& spec, int seed, RunContext& ctx) {
  return run_single(prepare_experiment(spec, ctx), seed, ctx);
}

namespace {

std::vector<std::string> report_notes(const ExperimentSpec& spec) {
  std::vector<std::string> notes;
  notes.emplace_back("SD is the population standard deviation (divide by n) over seeds");
  if (const auto* b = std::get_if<BaselineSpec>(&spec.model); b && b->kind == BaselineKind::Majority)
    notes.emplace_back(kMajorityNote);
  if (spec.transfer_source)
    notes.push_back("transfer from '" + *spec.transfer_source + "': both stages train on the aligned schema; each stage uses " +
                    (spec.paper_faithful ? "its dataset's pinned hyperparameters" : "the experiment hyperparameters") +
                    " without a fresh search after the first stage");
  if (!std::holds_alternative<BaselineSpec>(spec.model))
    notes.emplace_back("final encoder models train on train + validation; validation scores come from train-only models");
  return notes;
}

void write_run_dir(const fs::path& run_dir, EvalReport& report, const std::vector<SingleRunResult>& runs) {
  fs::create_directories(run_dir);
  report.artifacts.clear();
  for (const auto& r : runs) {
    const auto dir = run_dir / ("seed-" + std::to_string(r.seed));
    fs::create_directories(dir);
    write_probability_matrix(dir / "test_proba.tsv", r.test_matrix);
    report.artifacts.push_back(dir / "test_proba.tsv");
  }
  text::write_file_atomic(run_dir / "report.json", to_json(report).dump(2) + "\n");
  text::write_file_atomic(run_dir / "table.txt", render_table({table_row(to_json(report))}, report.spec.name));
}

}  // namespace

EvalReport run_experiment(const ExperimentSpec& spec, RunContext& ctx, const std::optional<fs::path>& run_dir) {
  return run_experiment(prepare_experiment(spec, ctx), ctx, run_dir);
}

EvalReport run_experiment(const PreparedExperiment& prepared, RunContext& ctx, const std::optional<fs::path>& run_dir) {
  const auto& spec = prepared.spec;
  std::vector<SingleRunResult> runs;
  std::vector<ScoreSet> scores;
  for (int seed : spec.seeds) {
    runs.push_back(run_single(prepared, seed, ctx));
    scores.push_back(runs.back().scores);
  }
  EvalReport report;
  report.spec = spec;
  report.model_label = model_label(spec);
  report.chosen_hp = prepared.chosen_hp;
  report.general_choice = prepared.general_choice;
  report.general_scores = prepared.general_scores;
  report.members = prepared.members;
  report.split = std::string(to_string(prepared.target_test.split()));
  report.schema = prepared.target_test.schema();
  report.aggregate = aggregate_runs(scores);
  for (const auto& r : runs) {
    report.lineages.push_back(r.lineage);
    report.artifacts.push_back(r.cache_entry / "test_proba.tsv");
    report.cached.push_back(r.cached);
  }
  report.notes = report_notes(spec);
  if (run_dir) write_run_dir(*run_dir, report, runs);
  return report;
}

EvalReport evaluate_matrices(const ExperimentSpec& spec, const std::vector<std::pair<int, ProbabilityMatrix>>& matrices) {
  if (matrices.empty()) throw Error(ErrorKind::MissingMemberRun, "no per-seed matrices to evaluate");
  DatasetCatalog catalog(spec.datasets);
  auto aligned = align_datasets(spec, catalog);
  const auto& test = aligned.target_test;
  EvalReport report;
  report.spec = spec;
  report.model_label = model_label(spec);
  report.split = std::string(to_string(test.split()));
  report.schema = test.schema();
  std::vector<ScoreSet> scores;
  for (const auto& [seed, pm] : matrices) {
    check_alignment(pm, test);
    scores.push_back(score_labels(test.labels(), hard_labels(pm), test.schema().size()));
  }
  report.aggregate = aggregate_runs(scores);
  report.notes = report_notes(spec);
  return report;
}

json to_json(const EvalReport& r) {
  json general_scores = json::object();
  for (const auto& [k, v] : r.general_scores) general_scores[k] = v;
  json artifacts = json::array();
  for (const auto& a : r.artifacts) artifacts.push_back(a.string());
  json seeds = json::array();
  for (std::size_t i = 0; i < r.aggregate.per_run.size() && i < r.spec.seeds.size(); ++i) seeds.push_back(r.spec.seeds[i]);
  json out = {{"experiment", to_json(r.spec)},
              {"model_label", r.model_label},
              {"transfer", r.spec.transfer_source.has_value()},
              {"target_dataset", r.spec.target_dataset},
              {"split", r.split},
              {"schema", {{"name", r.schema.name()}, {"levels", r.schema.levels()}}},
              {"seeds", seeds},
              {"chosen_hp", r.chosen_hp ? to_json(*r.chosen_hp) : json(nullptr)},
              {"general_choice", r.general_choice ? json(*r.general_choice) : json(nullptr)},
              {"general_validation_f1", general_scores},
              {"members", r.members},
              {"scores", to_json(r.aggregate)},
              {"lineage", r.lineages},
              {"artifacts", artifacts},
              {"cached", r.cached},
              {"notes", r.notes},
              {"format", {{"accuracy_decimals", 3}, {"f1_decimals", 3}, {"sd_decimals", 4}, {"sd", "population"}}}};
  return out;
}

TableRow table_row(const json& report) {
  try {
    TableRow row;
    row.model = report.at("model_label").get<std::string>();
    row.transfer = report.value("transfer", false);
    const auto& s = report.at("scores");
    row.accuracy = s.at("mean").at("accuracy").get<double>();
    row.f1 = s.at("mean").at("f1_weighted").get<double>();
    row.sd = s.at("sd").at("f1_weighted").get<double>();
    return row;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("not a report: ") + e.what());
  }
}

std::string render_table(const std::vector<TableRow>& rows, const std::string& title) {
  std::size_t width = 5;
  auto label = [](const TableRow& r) { return r.model + (r.transfer ? " [transfer]" : ""); };
  for (const auto& r : rows) width = std::max(width, label(r).size());
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out << pad("Model") << " | Acc   | F1    | SD\n";
  out << std::string(width, '-') << "-+-------+-------+-------\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, " | %.3f | %.3f | %.4f", r.accuracy, r.f1, r.sd);
    out << pad(label(r)) << buf << '\n';
  }
  out << "SD: population standard deviation of weighted F1 across seeds; [transfer] rows were first fine-tuned on the other dataset.\n";
  return out.str();
}

}  // namespace depkit
