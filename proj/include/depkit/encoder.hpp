#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "depkit/corpus.hpp"
#include "depkit/probability.hpp"
#include "depkit/transformer.hpp"

namespace depkit {

enum class EncoderFamily { General, Mental, Tweet, Toy };
std::string_view to_string(EncoderFamily f);

struct EncoderRef {
  std::string registry_name;
  EncoderFamily family = EncoderFamily::Toy;
  // Short model identifier used by ensembles and the hyperparameter table:
  // bert, roberta, mentalbert, bertweet (or "toy" for the plain toy encoder).
  std::string model_id;

  bool is_toy() const { return family == EncoderFamily::Toy; }
  friend bool operator==(const EncoderRef&, const EncoderRef&) = default;
};

// Accepts short ids ("roberta"), hub names ("roberta-base") and toy names
// ("toy", "toy/roberta"). With toy_mode set, pretrained names resolve to the
// toy stand-in carrying the same model id.
EncoderRef resolve_encoder(std::string_view name, bool toy_mode = false);

struct HyperParams {
  int batch_size = 16;
  double learning_rate = 1e-3;
  int num_epochs = 15;
  int seed = 1;
  int max_tokens = 512;

  // Throws InvalidHyperParams. Paper-faithful mode restricts batch size,
  // learning rate and epochs to the published search sets.
  void validate(bool paper_faithful = false) const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

inline constexpr int kPaperBatchSizes[] = {8, 16, 32};
inline constexpr double kPaperLearningRates[] = {1e-3, 1e-4, 5e-5, 1e-5};
inline constexpr int kPaperEpochCounts[] = {5, 10, 15};

nlohmann::json to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j, HyperParams defaults = {});

// Word-level vocabulary with [PAD]=0, [UNK]=1, [CLS]=2, [SEP]=3.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Tokenizer();
  explicit Tokenizer(std::vector<std::string> tokens);

  // Tokens ordered by descending frequency, ties by byte order.
  static Tokenizer build(std::span<const Post> posts, std::size_t max_size = 30000);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int id_of(const std::string& token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// [CLS] content... [SEP], keeping the prefix so the whole sequence fits in
// max_tokens. Throws EmptyText for blank input.
std::vector<int> tokenize_truncate(std::string_view text, const Tokenizer& tokenizer, int max_tokens);

struct EpochLoss {
  int epoch = 0;
  double mean_loss = 0.0;
};

struct ClassifierModel {
  EncoderRef encoder;
  LabelSchema schema;
  Tokenizer tokenizer;
  nn::EncoderNet net;
  std::vector<EpochLoss> training_log;
  std::vector<std::string> lineage;
  std::vector<HyperParams> stages;
};

// Architecture of the toy encoder.
nn::NetConfig toy_net_config(int vocab_size, int classes, int max_tokens);

struct FineTuneOptions {
  bool paper_faithful = false;
  // Overrides toy_net_config when set (vocab size and classes are filled in).
  std::optional<nn::NetConfig> net;
};

ClassifierModel fine_tune(const EncoderRef& encoder, const LabeledDataset& train, const HyperParams& hp,
                          const FineTuneOptions& options = {});

// Continues from the incoming weights on a second dataset; the dataset must
// already share the model's label count (merge_labels first).
ClassifierModel continue_fine_tune(const ClassifierModel& model, const LabeledDataset& train, const HyperParams& hp,
                                   const FineTuneOptions& options = {});

ProbabilityMatrix predict_proba(const ClassifierModel& model, std::span<const Post> posts);

// Directory with weights.bin, vocab.txt and manifest.json.
void save_checkpoint(const std::filesystem::path& dir, const ClassifierModel& model);
ClassifierModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace depkit
