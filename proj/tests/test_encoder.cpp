#include <doctest.h>

#include "depkit/encoder.hpp"
#include "depkit/ensemble.hpp"
#include "depkit/error.hpp"
#include "depkit/metrics.hpp"
#include "depkit/synthetic.hpp"
#include "support/oracles.hpp"

using namespace depkit;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

HyperParams quick() {
  HyperParams hp;
  hp.batch_size = 8;
  hp.learning_rate = 1e-3;
  hp.num_epochs = 10;
  hp.max_tokens = 64;
  return hp;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("registry") {
    CHECK(resolve_encoder("roberta").registry_name == "roberta-base");
    CHECK(resolve_encoder("mental/mental-bert-base-uncased").model_id == "mentalbert");
    CHECK(resolve_encoder("vinai/bertweet-base", true).registry_name == "toy/bertweet");
    CHECK(resolve_encoder("toy").family == EncoderFamily::Toy);
    CHECK(kind_of([] { resolve_encoder("gpt"); }) == ErrorKind::EncoderUnavailable);
    auto corpus = synthetic::keyword_corpus({});
    CHECK(kind_of([&] { fine_tune(resolve_encoder("bert"), corpus.train, quick()); }) == ErrorKind::EncoderUnavailable);
  }

  TEST_CASE("hyperparameter validation") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate(true));
    hp.batch_size = 12;
    CHECK_NOTHROW(hp.validate(false));
    CHECK(kind_of([&] { hp.validate(true); }) == ErrorKind::InvalidHyperParams);
    hp = {};
    hp.learning_rate = -1;
    CHECK(kind_of([&] { hp.validate(false); }) == ErrorKind::InvalidHyperParams);
    hp = {};
    hp.num_epochs = 0;
    CHECK(kind_of([&] { hp.validate(false); }) == ErrorKind::InvalidHyperParams);
    HyperParams round = hyperparams_from_json(to_json(quick()));
    CHECK(round == quick());
  }

  TEST_CASE("truncation keeps the prefix and frames it") {
    std::string text;
    for (int i = 0; i < 600; ++i) text += "w" + std::to_string(i % 50) + " ";
    std::vector<Post> posts{{"a", text}};
    auto tok = Tokenizer::build(posts);
    auto ids = tokenize_truncate(text, tok, 512);
    CHECK(ids.size() == 512);
    CHECK(ids.front() == Tokenizer::kCls);
    CHECK(ids.back() == Tokenizer::kSep);
    CHECK(ids[1] == tok.id_of("w0"));
    CHECK(ids[510] == tok.id_of("w" + std::to_string(509 % 50)));
    auto short_ids = tokenize_truncate("w1 w2 zzz", tok, 512);
    CHECK(short_ids == std::vector<int>{Tokenizer::kCls, tok.id_of("w1"), tok.id_of("w2"), Tokenizer::kUnk, Tokenizer::kSep});
    CHECK(kind_of([&] { tokenize_truncate("   ", tok, 512); }) == ErrorKind::EmptyText);
  }

  TEST_CASE("toy fine-tuning learns the keyword corpus deterministically") {
    auto corpus = synthetic::keyword_corpus({});
    auto enc = resolve_encoder("toy/roberta");
    auto model = fine_tune(enc, corpus.train, quick());
    REQUIRE(model.training_log.size() == 10);
    CHECK(model.training_log.back().mean_loss < model.training_log.front().mean_loss);
    auto pm = predict_proba(model, corpus.test.posts());
    auto s = score_labels(corpus.test.labels(), hard_labels(pm), 3);
    CHECK(s.accuracy >= 0.95);
    CHECK(model.lineage == std::vector<std::string>{"toy"});
    auto again = fine_tune(enc, corpus.train, quick());
    CHECK(predict_proba(again, corpus.test.posts()) == pm);
  }

  TEST_CASE("continued fine-tuning appends lineage and checks the head width") {
    synthetic::CorpusOptions src_opt;
    src_opt.name = "source";
    src_opt.classes = 4;
    src_opt.seed = 21;
    auto source = synthetic::keyword_corpus(src_opt);
    auto target = synthetic::keyword_corpus({});
    auto enc = resolve_encoder("toy");
    auto stage1 = fine_tune(enc, source.train, quick());
    CHECK(kind_of([&] { continue_fine_tune(stage1, target.train, quick()); }) == ErrorKind::SchemaMismatch);

    auto merged = merge_labels(source.train, LabelMapping(source.train.schema(), target.train.schema(), {0, 1, 1, 2}));
    auto s1 = fine_tune(enc, merged, quick());
    auto s2 = continue_fine_tune(s1, target.train, quick());
    CHECK(s2.lineage == std::vector<std::string>{"source-merged", "toy"});
    CHECK(s2.stages.size() == 2);
  }

  TEST_CASE("checkpoint round trip") {
    auto corpus = synthetic::keyword_corpus({});
    auto hp = quick();
    hp.num_epochs = 2;
    auto model = fine_tune(resolve_encoder("toy"), corpus.train, hp);
    oracle::TempDir tmp;
    save_checkpoint(tmp / "ck", model);
    auto back = load_checkpoint(tmp / "ck");
    CHECK(back.lineage == model.lineage);
    CHECK(back.stages == model.stages);
    CHECK(predict_proba(back, corpus.test.posts()) == predict_proba(model, corpus.test.posts()));
    CHECK(kind_of([&] { load_checkpoint(tmp / "nothing"); }) == ErrorKind::CorruptCheckpoint);
  }
}
