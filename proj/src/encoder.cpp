#include "depkit/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "depkit/error.hpp"
#include "depkit/text.hpp"

namespace depkit {

std::string_view to_string(EncoderFamily f) {
  switch (f) {
    case EncoderFamily::General: return "general";
    case EncoderFamily::Mental: return "mental";
    case EncoderFamily::Tweet: return "tweet";
    case EncoderFamily::Toy: return "toy";
  }
  return "?";
}

namespace {

struct RegistryEntry {
  std::string_view model_id;
  std::string_view hub_name;
  EncoderFamily family;
};

constexpr RegistryEntry kRegistry[] = {
    {"bert", "bert-base-cased", EncoderFamily::General},
    {"roberta", "roberta-base", EncoderFamily::General},
    {"mentalbert", "mental/mental-bert-base-uncased", EncoderFamily::Mental},
    {"bertweet", "vinai/bertweet-base", EncoderFamily::Tweet},
};

const RegistryEntry* find_entry(std::string_view name) {
  for (const auto& e : kRegistry)
    if (e.model_id == name || e.hub_name == name) return &e;
  return nullptr;
}

}  // namespace

EncoderRef resolve_encoder(std::string_view name, bool toy_mode) {
  if (name == "toy") return {"toy", EncoderFamily::Toy, "toy"};
  if (name.starts_with("toy/")) {
    auto id = name.substr(4);
    const auto* e = find_entry(id);
    if (id.empty() || (!e && id.find('/') != std::string_view::npos))
      throw Error(ErrorKind::EncoderUnavailable, "unknown toy encoder '" + std::string(name) + "'");
    std::string model_id = e ? std::string(e->model_id) : std::string(id);
    return {"toy/" + model_id, EncoderFamily::Toy, model_id};
  }
  const auto* e = find_entry(name);
  if (!e) throw Error(ErrorKind::EncoderUnavailable, "no encoder registered as '" + std::string(name) + "'");
  if (toy_mode) return {"toy/" + std::string(e->model_id), EncoderFamily::Toy, std::string(e->model_id)};
  return {std::string(e->hub_name), e->family, std::string(e->model_id)};
}

void HyperParams::validate(bool paper_faithful) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidHyperParams, msg); };
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (num_epochs < 1) fail("num_epochs must be at least 1");
  if (max_tokens < 8) fail("max_tokens must be at least 8");
  if (!paper_faithful) return;
  if (std::find(std::begin(kPaperBatchSizes), std::end(kPaperBatchSizes), batch_size) == std::end(kPaperBatchSizes))
    fail("batch_size " + std::to_string(batch_size) + " outside {8, 16, 32}");
  bool lr_ok = std::any_of(std::begin(kPaperLearningRates), std::end(kPaperLearningRates),
                           [&](double v) { return std::abs(v - learning_rate) <= 1e-12 * v; });
  if (!lr_ok) fail("learning_rate outside {1e-3, 1e-4, 5e-5, 1e-5}");
  if (std::find(std::begin(kPaperEpochCounts), std::end(kPaperEpochCounts), num_epochs) == std::end(kPaperEpochCounts))
    fail("num_epochs " + std::to_string(num_epochs) + " outside {5, 10, 15}");
}

nlohmann::json to_json(const HyperParams& hp) {
  return {{"batch_size", hp.batch_size},
          {"learning_rate", hp.learning_rate},
          {"num_epochs", hp.num_epochs},
          {"seed", hp.seed},
          {"max_tokens", hp.max_tokens}};
}

HyperParams hyperparams_from_json(const nlohmann::json& j, HyperParams hp) {
  try {
    if (j.contains("batch_size")) hp.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) hp.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("num_epochs")) hp.num_epochs = j.at("num_epochs").get<int>();
    if (j.contains("seed")) hp.seed = j.at("seed").get<int>();
    if (j.contains("max_tokens")) hp.max_tokens = j.at("max_tokens").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("hyperparams: ") + e.what());
  }
  return hp;
}

Tokenizer::Tokenizer() : Tokenizer(std::vector<std::string>{}) {}

Tokenizer::Tokenizer(std::vector<std::string> tokens) {
  tokens_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (auto& t : tokens)
    if (t != "[PAD]" && t != "[UNK]" && t != "[CLS]" && t != "[SEP]") tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw Error(ErrorKind::CorruptCheckpoint, "duplicate vocabulary entry '" + tokens_[i] + "'");
}

Tokenizer Tokenizer::build(std::span<const Post> posts, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : posts)
    for (auto& t : text::word_piece_tokens(p.text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [tok, n] : ranked) {
    if (tokens.size() + 4 >= max_size) break;
    tokens.push_back(tok);
  }
  return Tokenizer(std::move(tokens));
}

int Tokenizer::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> tokenize_truncate(std::string_view text, const Tokenizer& tokenizer, int max_tokens) {
  if (max_tokens < 8) throw Error(ErrorKind::InvalidHyperParams, "max_tokens must be at least 8");
  if (text::trim(text).empty()) throw Error(ErrorKind::EmptyText, "cannot tokenize blank text");
  auto pieces = text::word_piece_tokens(text);
  const std::size_t room = static_cast<std::size_t>(max_tokens) - 2;
  if (pieces.size() > room) pieces.resize(room);
  std::vector<int> ids;
  ids.reserve(pieces.size() + 2);
  ids.push_back(Tokenizer::kCls);
  for (const auto& p : pieces) ids.push_back(tokenizer.id_of(p));
  ids.push_back(Tokenizer::kSep);
  return ids;
}

nn::NetConfig toy_net_config(int vocab_size, int classes, int max_tokens) {
  nn::NetConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.classes = classes;
  cfg.max_positions = max_tokens;
  cfg.d_model = 32;
  cfg.heads = 2;
  cfg.ff = 64;
  cfg.layers = 2;
  return cfg;
}

namespace {

void require_trainable(const EncoderRef& encoder) {
  if (!encoder.is_toy())
    throw Error(ErrorKind::EncoderUnavailable,
                "pretrained checkpoint '" + encoder.registry_name + "' is not bundled; use its toy stand-in (--toy)");
}

// Runs hp.num_epochs passes of shuffled mini-batches over `train`, updating
// model.net in place.
void train_epochs(ClassifierModel& model, const LabeledDataset& train, const HyperParams& hp, std::uint64_t shuffle_seed) {
  const auto n = train.size();
  std::vector<std::vector<int>> seqs;
  std::vector<int> labels = train.labels();
  seqs.reserve(n);
  for (const auto& item : train.items())
    seqs.push_back(tokenize_truncate(item.post.text, model.tokenizer, std::min(hp.max_tokens, model.net.config().max_positions)));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(shuffle_seed);

  const auto bs = static_cast<std::size_t>(hp.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  const double total_steps = static_cast<double>(steps_per_epoch * static_cast<std::size_t>(hp.num_epochs));
  nn::Adam adam(model.net.parameter_count());
  std::vector<double> grad(model.net.parameter_count());
  std::vector<std::vector<int>> batch_seqs;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= hp.num_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      batch_seqs.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_seqs.push_back(seqs[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const double loss = nn::parallel::batch_gradient(model.net, {batch_seqs, batch_labels}, grad);
      if (!std::isfinite(loss))
        throw Error(ErrorKind::DivergedLoss, "non-finite loss in epoch " + std::to_string(epoch) + " on '" + train.name() + "'");
      // Linear decay to zero, no warmup.
      const double lr = hp.learning_rate * (1.0 - static_cast<double>(adam.steps()) / total_steps);
      adam.step(model.net.params(), grad, lr);
      loss_sum += loss * static_cast<double>(end - start);
    }
    model.training_log.push_back({static_cast<int>(model.training_log.size()) + 1, loss_sum / static_cast<double>(n)});
  }
}

std::uint64_t stage_seed(const EncoderRef& enc, int seed, std::size_t stage, std::uint64_t salt) {
  std::uint64_t h = text::fnv1a(enc.registry_name);
  h = text::fnv1a(std::to_string(seed) + "/" + std::to_string(stage) + "/" + std::to_string(salt), h);
  return h;
}

}  // namespace

ClassifierModel fine_tune(const EncoderRef& encoder, const LabeledDataset& train, const HyperParams& hp,
                          const FineTuneOptions& options) {
  hp.validate(options.paper_faithful);
  require_trainable(encoder);
  if (train.schema().size() < 2) throw Error(ErrorKind::InvalidSchema, "need at least 2 levels");
  auto posts = train.posts();
  Tokenizer tokenizer = Tokenizer::build(posts);
  nn::NetConfig cfg = options.net.value_or(toy_net_config(0, 0, hp.max_tokens));
  cfg.vocab_size = tokenizer.size();
  cfg.classes = train.schema().size();
  cfg.max_positions = hp.max_tokens;

  ClassifierModel model{encoder, train.schema(), std::move(tokenizer), nn::EncoderNet(cfg), {}, {}, {}};
  model.net.initialize(stage_seed(encoder, hp.seed, 0, 0x1a17));
  train_epochs(model, train, hp, stage_seed(encoder, hp.seed, 0, 0x5eed));
  model.lineage.push_back(train.name());
  model.stages.push_back(hp);
  return model;
}

ClassifierModel continue_fine_tune(const ClassifierModel& model, const LabeledDataset& train, const HyperParams& hp,
                                   const FineTuneOptions& options) {
  hp.validate(options.paper_faithful);
  require_trainable(model.encoder);
  if (train.schema().size() != model.net.config().classes)
    throw Error(ErrorKind::SchemaMismatch, "dataset '" + train.name() + "' has " + std::to_string(train.schema().size()) +
                                               " levels but the classifier head has " +
                                               std::to_string(model.net.config().classes) + "; merge labels first");
  ClassifierModel next = model;
  next.training_log.clear();
  train_epochs(next, train, hp, stage_seed(model.encoder, hp.seed, model.lineage.size(), 0x5eed));
  next.lineage.push_back(train.name());
  next.stages.push_back(hp);
  return next;
}

ProbabilityMatrix predict_proba(const ClassifierModel& model, std::span<const Post> posts) {
  if (posts.empty()) throw Error(ErrorKind::EmptyInput, "no posts to score");
  const auto classes = static_cast<std::size_t>(model.net.config().classes);
  const int max_tokens = model.net.config().max_positions;
  std::vector<std::vector<int>> seqs;
  seqs.reserve(posts.size());
  for (const auto& p : posts) seqs.push_back(tokenize_truncate(p.text, model.tokenizer, max_tokens));
  std::vector<double> values(posts.size() * classes);
  const auto n = static_cast<std::int64_t>(posts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    model.net.predict(seqs[k], std::span<double>(values).subspan(k * classes, classes));
  }
  std::vector<std::string> ids;
  ids.reserve(posts.size());
  for (const auto& p : posts) ids.push_back(p.id);
  return {std::move(ids), static_cast<int>(classes), std::move(values)};
}

namespace {

constexpr char kWeightsMagic[4] = {'D', 'P', 'K', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

nlohmann::json net_to_json(const nn::NetConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"max_positions", c.max_positions}, {"d_model", c.d_model},
          {"heads", c.heads},           {"ff", c.ff},                       {"layers", c.layers},
          {"classes", c.classes}};
}

nn::NetConfig net_from_json(const nlohmann::json& j) {
  nn::NetConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff = j.at("ff").get<int>();
  c.layers = j.at("layers").get<int>();
  c.classes = j.at("classes").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ClassifierModel& model) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream out(std::ios::binary);
    out.write(kWeightsMagic, 4);
    const std::uint32_t version = kWeightsVersion;
    const std::uint64_t count = model.net.parameter_count();
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    auto p = model.net.params();
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size_bytes()));
    text::write_file_atomic(dir / "weights.bin", out.str());
  }
  {
    std::ostringstream out;
    for (std::size_t i = 4; i < model.tokenizer.tokens().size(); ++i) out << text::escape_field(model.tokenizer.tokens()[i]) << '\n';
    text::write_file_atomic(dir / "vocab.txt", out.str());
  }
  nlohmann::json stages = nlohmann::json::array();
  std::vector<int> seeds;
  for (const auto& hp : model.stages) {
    stages.push_back(to_json(hp));
    seeds.push_back(hp.seed);
  }
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : model.training_log) log.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
  nlohmann::json manifest = {
      {"format", "depkit-encoder-checkpoint"},
      {"version", kWeightsVersion},
      {"encoder", {{"registry_name", model.encoder.registry_name},
                   {"family", to_string(model.encoder.family)},
                   {"model_id", model.encoder.model_id}}},
      {"schema", {{"name", model.schema.name()}, {"levels", model.schema.levels()}}},
      {"net", net_to_json(model.net.config())},
      {"hyperparams", stages},
      {"seeds", seeds},
      {"lineage", model.lineage},
      {"training_log", log},
      {"optimizer", "adam, linear decay to zero, no warmup"},
  };
  text::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

ClassifierModel load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json"))
    throw Error(ErrorKind::CorruptCheckpoint, "no manifest in " + dir.string());
  try {
    auto manifest = nlohmann::json::parse(text::read_file(dir / "manifest.json"));
    const auto& enc = manifest.at("encoder");
    EncoderRef encoder = resolve_encoder(enc.at("registry_name").get<std::string>());
    LabelSchema schema(manifest.at("schema").at("name").get<std::string>(),
                       manifest.at("schema").at("levels").get<std::vector<std::string>>());
    std::vector<std::string> vocab;
    std::istringstream vin(text::read_file(dir / "vocab.txt"));
    std::string line;
    while (std::getline(vin, line)) vocab.push_back(text::unescape_field(line));
    Tokenizer tokenizer(std::move(vocab));
    nn::NetConfig cfg = net_from_json(manifest.at("net"));
    if (cfg.vocab_size != tokenizer.size()) throw Error(ErrorKind::CorruptCheckpoint, "vocabulary size disagrees with manifest");
    ClassifierModel model{encoder, schema, std::move(tokenizer), nn::EncoderNet(cfg), {}, {}, {}};

    const std::string blob = text::read_file(dir / "weights.bin");
    const std::size_t header = 4 + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (blob.size() < header || std::memcmp(blob.data(), kWeightsMagic, 4) != 0)
      throw Error(ErrorKind::CorruptCheckpoint, "bad weights header in " + dir.string());
    std::uint32_t version = 0;
    std::uint64_t count = 0;
    std::memcpy(&version, blob.data() + 4, sizeof version);
    std::memcpy(&count, blob.data() + 4 + sizeof version, sizeof count);
    if (version != kWeightsVersion || count != model.net.parameter_count() || blob.size() != header + count * sizeof(double))
      throw Error(ErrorKind::CorruptCheckpoint, "weights blob does not match the network in " + dir.string());
    std::memcpy(model.net.params().data(), blob.data() + header, count * sizeof(double));

    model.lineage = manifest.at("lineage").get<std::vector<std::string>>();
    for (const auto& hp : manifest.at("hyperparams")) model.stages.push_back(hyperparams_from_json(hp));
    for (const auto& e : manifest.at("training_log"))
      model.training_log.push_back({e.at("epoch").get<int>(), e.at("mean_loss").get<double>()});
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, dir.string() + ": " + e.what());
  }
}

}  // namespace depkit
