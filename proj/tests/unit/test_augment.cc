#include <map>
#include <sstream>

#include "cbert/augment/augment.h"
#include "cbert/augment/synonyms.h"
#include "cbert/common/errors.h"
#include "cbert/textcodec/tokenizer.h"
#include "doctest.h"
#include "support/synthetic_corpus.h"

using namespace cbert;
using namespace cbert::aug;

namespace {

struct Fixture {
  text::TsvCorpus corpus;
  text::Vocabulary vocab;
  text::Dataset data;
  Encoder encoder;
};

Fixture make_fixture(std::size_t per_label) {
  auto sentences = testing::make_sentiment_corpus(per_label, 9);
  std::vector<std::string> texts;
  for (auto& s : sentences) texts.push_back(s.text);
  Fixture f;
  f.corpus = testing::to_tsv_corpus(sentences);
  f.vocab = text::build_vocab_from_texts(texts, 1, 1000);
  f.data = text::make_dataset(f.corpus, f.vocab, 16, {0.0, 1});
  model::EncoderConfig c;
  c.layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.ffn = 16;
  c.max_len = 16;
  c.vocab_size = f.vocab.size();
  Rng rng(3);
  f.encoder = model::init_encoder(c, rng);
  return f;
}

AugmentationPolicy greedy_policy(std::size_t k) {
  AugmentationPolicy p;
  p.k = k;
  p.sampler = Sampler::greedy;
  return p;
}

std::size_t differences(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i] ? 1 : 0;
  return n;
}

SynonymTable parse_table(const std::string& body) {
  std::istringstream in(body);
  return SynonymTable::parse(in, "mem");
}

}  // namespace

TEST_CASE("sample_candidate") {
  std::vector<double> probs{0.3, 0.2, 0.1, 0.1, 0.05, 0.2, 0.05};
  Rng rng(1);
  AugmentationPolicy greedy = greedy_policy(1);
  CHECK(sample_candidate(probs, 4, greedy, rng) == 5);
  greedy.exclude_original = false;
  CHECK(sample_candidate(probs, 5, greedy, rng) == 5);

  AugmentationPolicy top2;
  top2.top_k = 2;
  std::map<int, int> seen;
  for (int i = 0; i < 2000; ++i) ++seen[sample_candidate(probs, 5, top2, rng)];
  CHECK(seen.size() == 2);
  CHECK(seen.contains(4));
  CHECK(seen.contains(6));
  CHECK(std::abs(seen[4] - 1000) < 120);

  // Low temperature approaches greedy.
  AugmentationPolicy cold;
  cold.temperature = 0.01;
  for (int i = 0; i < 100; ++i) CHECK(sample_candidate(probs, 6, cold, rng) == 5);

  // Only the original is left: it is returned and reported.
  std::vector<double> tiny{0.5, 0.1, 0.1, 0.1, 0.2};
  bool fell_back = false;
  CHECK(sample_candidate(tiny, 4, greedy_policy(1), rng, &fell_back) == 4);
  CHECK(fell_back);
}

TEST_CASE("conditional fill rewrites exactly k positions and keeps the label") {
  Fixture f = make_fixture(10);
  for (std::size_t k = 1; k <= 2; ++k) {
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      Rng rng(100 + i);
      auto out = augment_sentence(f.encoder, f.data.examples[i], greedy_policy(k), rng);
      REQUIRE(out.has_value());
      CHECK(out->positions.size() == k);
      CHECK(out->example.label == f.data.examples[i].label);
      CHECK(out->example.tokens.size() == f.data.examples[i].tokens.size());
      CHECK(differences(out->example.tokens, f.data.examples[i].tokens) == k);
      for (int id : out->example.tokens) CHECK((id == text::kClsId || !text::is_special_id(id)));
    }
  }
  text::LabeledExample short_one{{text::kClsId, f.vocab.id("movie")}, 1};
  Rng rng(5);
  CHECK_FALSE(augment_sentence(f.encoder, short_one, greedy_policy(2), rng).has_value());
}

TEST_CASE("conditional and unconditional fills share mask positions") {
  Fixture f = make_fixture(10);
  Rng other_rng(11);
  Encoder other = model::init_encoder(f.encoder.config, other_rng);
  AugmentationPolicy policy;
  policy.k = 2;
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    Rng a(i), b(i);
    auto cond = augment_sentence(f.encoder, f.data.examples[i], policy, a);
    auto plain = bert_augment(other, f.data.examples[i], policy, b);
    REQUIRE(cond.has_value());
    REQUIRE(plain.has_value());
    CHECK(cond->positions == plain->positions);
    CHECK(plain->example.label == f.data.examples[i].label);
  }
}

TEST_CASE("synonym table parsing") {
  SynonymTable t = parse_table("# format: cbert-synonyms/1\nGood\tgreat, fine,good\nfilm\tmovie\n");
  REQUIRE(t.find("good") != nullptr);
  CHECK(*t.find("good") == std::vector<std::string>{"great", "fine"});
  CHECK(t.find("bad") == nullptr);
  CHECK(parse_table(t.serialize()).groups() == t.groups());
  CHECK_THROWS_AS(parse_table("good\tgood\n"), ParseError);
  CHECK_THROWS_AS(parse_table("good great\n"), ParseError);
  CHECK_THROWS_AS(parse_table("good\t\n"), ParseError);
  CHECK_THROWS_AS(SynonymTable::load("/nonexistent/syn.txt"), IoError);
}

TEST_CASE("synonym_augment") {
  text::Vocabulary vocab = text::build_vocab({{"good", "great", "fine", "film"}}, 1, 100);
  auto single = bind_synonyms(SynonymTable::from_map({{"good", {"great"}}}), vocab);
  text::LabeledExample ex{text::encode("good film", vocab, 8), 1};
  Rng rng(1);
  auto out = synonym_augment(ex, single, 1, rng);
  REQUIRE(out.has_value());
  CHECK(text::decode(out->example.tokens, vocab) == "great film");
  CHECK(out->example.label == 1);

  text::LabeledExample uncovered{text::encode("film film", vocab, 8), 0};
  CHECK_FALSE(synonym_augment(uncovered, single, 1, rng).has_value());

  auto two = bind_synonyms(SynonymTable::from_map({{"good", {"great", "fine", "stellar"}}}), vocab);
  CHECK(two.dropped == 1);
  std::map<std::string, int> picks;
  for (int i = 0; i < 1000; ++i) {
    auto r = synonym_augment(ex, two, 1, rng);
    ++picks[vocab.token(r->example.tokens[1])];
    CHECK(r->example.tokens[2] == vocab.id("film"));
  }
  CHECK(picks.size() == 2);
  CHECK(std::abs(picks["great"] - 500) <= 60);
  CHECK(std::abs(picks["fine"] - 500) <= 60);

  // k larger than the covered words rewrites all of them.
  text::LabeledExample both{text::encode("good good film", vocab, 8), 1};
  CHECK(synonym_augment(both, single, 5, rng)->positions.size() == 2);
}

TEST_CASE("augment_dataset counting, order and determinism") {
  Fixture f = make_fixture(50);
  AugmentationPolicy policy;
  policy.multiplier = 2;
  policy.seed = 21;
  AugmentResult a = augment_dataset(f.encoder, f.data, policy);
  AugmentResult b = augment_dataset(f.encoder, f.data, policy);
  CHECK(a.skipped == 0);
  CHECK(a.attempted == 200);
  CHECK(a.dataset.size() == 300);
  CHECK(a.dataset == b.dataset);
  for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(a.dataset.examples[i] == f.data.examples[i]);
  for (std::size_t g = 0; g < a.generated.size(); ++g) {
    const auto& gen = a.generated[g];
    const auto& ex = a.dataset.examples[100 + g];
    CHECK(ex.tokens.size() == f.data.examples[gen.source].tokens.size());
    CHECK(ex.label == f.data.examples[gen.source].label);
    CHECK(gen.pass == (g < 100 ? 1u : 2u));
  }

  // Each sentence's stream is independent of the others.
  Rng direct = derive_rng(21, "augment-pass-2", 37);
  auto alone = augment_sentence(f.encoder, f.data.examples[37], policy, direct);
  CHECK(alone->example == a.dataset.examples[100 + 100 + 37]);

  AugmentationPolicy other = policy;
  other.seed = 22;
  CHECK_FALSE(augment_dataset(f.encoder, f.data, other).dataset == a.dataset);
}

TEST_CASE("only the training split is augmented and skips are tallied") {
  Fixture f = make_fixture(10);
  f.data.splits[0] = text::Split::test;
  f.data.splits[1] = text::Split::val;
  AugmentationPolicy policy = greedy_policy(1);
  AugmentResult r = augment_dataset(f.encoder, f.data, policy);
  CHECK(r.attempted == 18);
  CHECK(r.dataset.count(text::Split::train) == 18 + 18);

  AugmentationPolicy too_many = greedy_policy(9);
  AugmentResult none = augment_dataset(f.encoder, f.data, too_many);
  CHECK(none.skipped == 18);
  CHECK(none.dataset == f.data);
}

TEST_CASE("augmented TSV keeps originals verbatim and reloads") {
  Fixture f = make_fixture(5);
  f.corpus.records[0].text = "the movie was good zzyzx";
  f.data = text::make_dataset(f.corpus, f.vocab, 16, {0.0, 1});
  AugmentationPolicy policy;
  policy.seed = 4;
  AugmentResult r = augment_dataset(f.encoder, f.data, policy);
  const std::string tsv = render_augmented_tsv(f.corpus, f.vocab, 16, r, "cbert");
  CHECK(tsv.rfind("# format: cbert-tsv/1\n", 0) == 0);
  CHECK(tsv.find("[UNK]") == std::string::npos);
  CHECK(tsv.find("[MASK]") == std::string::npos);

  std::istringstream in(tsv);
  text::TsvCorpus back = text::parse_tsv(in, "aug");
  REQUIRE(back.records.size() == r.dataset.size());
  for (std::size_t i = 0; i < f.corpus.records.size(); ++i) {
    CHECK(back.records[i].text == f.corpus.records[i].text);
    CHECK_FALSE(back.records[i].generated);
  }
  const auto& gen = r.generated[0];
  REQUIRE(gen.source == 0);
  const auto& first = back.records[f.corpus.records.size()];
  CHECK(first.generated);
  CHECK(first.provenance.find("augmenter=cbert;source=0;pass=1;positions=") != std::string::npos);
  if (gen.positions[0] != 5) CHECK(text::tokenize(first.text).back() == "zzyzx");
  text::Dataset reloaded = text::make_dataset(back, f.vocab, 16);
  CHECK(reloaded.examples == r.dataset.examples);
}
