#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "depkit/baselines.hpp"
#include "depkit/corpus.hpp"
#include "depkit/encoder.hpp"
#include "depkit/ensemble.hpp"
#include "depkit/metrics.hpp"
#include "depkit/probability.hpp"

namespace depkit {

struct SearchSpace {
  std::vector<int> batch_sizes;
  std::vector<double> learning_rates;
  std::vector<int> epoch_counts;

  // {8, 16, 32} x {1e-3, 1e-4, 5e-5, 1e-5} x {5, 10, 15}.
  static SearchSpace paper_default();
  std::size_t size() const { return batch_sizes.size() * learning_rates.size() * epoch_counts.size(); }
};

nlohmann::json to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const nlohmann::json& j);

struct GridCell {
  HyperParams hp;
  double f1_w = 0.0;
  double accuracy = 0.0;
};

struct GridSearchResult {
  HyperParams best;
  std::vector<GridCell> cells;  // in evaluation order: batch, then LR, then epochs
};

// Fine-tunes on `train` for every cell and scores weighted F1 on
// `validation`. Ties go to fewer epochs, then larger batch, then smaller LR.
// `base` supplies seed and max_tokens.
GridSearchResult grid_search(const EncoderRef& encoder, const SearchSpace& space, const LabeledDataset& train,
                             const LabeledDataset& validation, const HyperParams& base,
                             const FineTuneOptions& options = {},
                             const std::function<void(const GridCell&)>& on_cell = {});

// True when `a` should be preferred over `b` at equal score.
bool grid_tie_break(const HyperParams& a, const HyperParams& b);

// Tuned values per (model id, dataset), used when paper-faithful mode pins
// hyperparameters instead of searching.
std::optional<HyperParams> pinned_hyperparams(std::string_view model_id, std::string_view dataset);

// Aligns two datasets onto one schema. The side whose schema equals
// mapping.source() is relabeled; the other passes through unchanged.
std::pair<LabeledDataset, LabeledDataset> transfer_prepare(const LabeledDataset& source, const LabeledDataset& target,
                                                           const LabelMapping& mapping);

// --- experiment specification -------------------------------------------

struct BaselineSpec {
  BaselineKind kind = BaselineKind::Majority;
};

struct EncoderSpec {
  std::string encoder;
};

enum class PriorMode { Train, Uniform };

struct EnsembleModelSpec {
  Combo combo = Combo::GMT;
  Fusion fusion = Fusion::Averaging;
  // Fixed G binding; when absent the best validation F1 among the
  // candidates wins (earlier candidate on ties).
  std::optional<std::string> general;
  std::vector<std::string> general_candidates = {"roberta", "bert"};
  PriorMode prior = PriorMode::Train;
};

using ModelSpec = std::variant<BaselineSpec, EncoderSpec, EnsembleModelSpec>;

struct DatasetEntry {
  std::string schema;  // built-in name or schema file
  std::filesystem::path train, validation, test;
};

struct ExperimentSpec {
  std::string name;
  std::map<std::string, DatasetEntry> datasets;
  std::string target_dataset;
  ModelSpec model;
  std::optional<std::string> transfer_source;
  std::optional<std::string> label_mapping;  // built-in name or mapping file
  std::vector<int> seeds = {1, 2, 3};
  std::optional<HyperParams> hyperparams;  // nullopt means "search"
  SearchSpace search_space = SearchSpace::paper_default();
  bool paper_faithful = false;
  bool toy = false;

  void validate() const;
};

// Relative dataset paths resolve against `base_dir`.
ExperimentSpec experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentSpec& spec);
std::string model_label(const ExperimentSpec& spec);

// --- execution ------------------------------------------------------------

class DatasetCatalog {
 public:
  explicit DatasetCatalog(std::map<std::string, DatasetEntry> entries);

  LabeledDataset load(const std::string& name, Split split);
  LabelSchema schema(const std::string& name);
  // Hash over the three split files and the schema levels.
  std::string fingerprint(const std::string& name);
  const std::map<std::string, DatasetEntry>& entries() const { return entries_; }

 private:
  const DatasetEntry& entry(const std::string& name) const;
  std::map<std::string, DatasetEntry> entries_;
  std::map<std::pair<std::string, int>, LabeledDataset> loaded_;
  std::map<std::string, std::string> fingerprints_;
};

struct RunContext {
  std::filesystem::path cache_root;
  std::function<void(const std::string&)> log;
  // Filled with every grid cell evaluated while preparing.
  std::function<void(const GridCell&)> on_grid_cell;
  FineTuneOptions fine_tune;
};

// Resolves DEPKIT_CACHE, falling back to `fallback`.
std::filesystem::path default_cache_root(const std::filesystem::path& fallback = ".depkit-cache");

// Datasets aligned for the experiment and per-model hyperparameters.
struct PreparedExperiment {
  ExperimentSpec spec;
  DatasetCatalog catalog;
  LabeledDataset target_train, target_validation, target_test;
  std::optional<LabeledDataset> source_train, source_validation;
  std::optional<std::string> mapping_fingerprint;
  std::optional<HyperParams> chosen_hp;
  std::optional<std::string> general_choice;
  std::map<std::string, double> general_scores;
  std::vector<std::string> members;
  std::vector<GridCell> grid_log;
};

PreparedExperiment prepare_experiment(const ExperimentSpec& spec, RunContext& ctx);

struct SingleRunResult {
  int seed = 0;
  ScoreSet scores;
  ProbabilityMatrix test_matrix;
  std::vector<std::string> lineage;
  std::filesystem::path cache_entry;
  bool cached = false;
};

SingleRunResult run_single(const PreparedExperiment& prepared, int seed, RunContext& ctx);
SingleRunResult run_single(const ExperimentSpec& spec, int seed, RunContext& ctx);

struct EvalReport {
  ExperimentSpec spec;
  std::string model_label;
  std::optional<HyperParams> chosen_hp;
  std::optional<std::string> general_choice;
  std::map<std::string, double> general_scores;
  std::vector<std::string> members;
  std::string split = "test";
  LabelSchema schema;
  RunAggregate aggregate;
  std::vector<std::vector<std::string>> lineages;
  std::vector<std::filesystem::path> artifacts;
  std::vector<bool> cached;
  std::vector<std::string> notes;
};

// Runs every seed, aggregates, and when `run_dir` is set copies each seed's
// matrix to <run_dir>/seed-<s>/test_proba.tsv and writes report.json and
// table.txt there.
EvalReport run_experiment(const ExperimentSpec& spec, RunContext& ctx,
                          const std::optional<std::filesystem::path>& run_dir = std::nullopt);
EvalReport run_experiment(const PreparedExperiment& prepared, RunContext& ctx,
                          const std::optional<std::filesystem::path>& run_dir = std::nullopt);

nlohmann::json to_json(const EvalReport& r);

struct TableRow {
  std::string model;
  bool transfer = false;
  double accuracy = 0.0;
  double f1 = 0.0;
  double sd = 0.0;
};
TableRow table_row(const nlohmann::json& report);
// Model | Acc | F1 | SD with 3/3/4 decimals; transfer rows are marked.
std::string render_table(const std::vector<TableRow>& rows, const std::string& title = {});

// Scores persisted per-seed matrices against the target test split; the core
// of the `evaluate` command.
EvalReport evaluate_matrices(const ExperimentSpec& spec, const std::vector<std::pair<int, ProbabilityMatrix>>& matrices);

}  // namespace depkit
