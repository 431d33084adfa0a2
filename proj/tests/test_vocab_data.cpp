#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tkgt/dataset.hpp"
#include "tkgt/tokenizer.hpp"
#include "tkgt/vocab.hpp"

using namespace tkgt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tkgt_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    auto p = (path / name).string();
    std::ofstream out(p);
    out << content;
    return p;
  }
};

}  // namespace

TEST_CASE("subword vocab keeps characters and the dominant piece") {
  Vocabulary v;
  build_subword_vocab({"aaab aaab"}, 10, v);
  CHECK(v.subword("a") >= 0);
  CHECK(v.subword("b") >= 0);
  CHECK(v.subword("##a") >= 0);
  CHECK(v.subword("##b") >= 0);
  CHECK(v.subword("aaab") >= 0);
  CHECK(v.n_subwords() == 10);
}

TEST_CASE("subword vocab rejects an empty corpus") {
  Vocabulary v;
  CHECK_THROWS_AS(build_subword_vocab({}, 100, v), std::runtime_error);
  Vocabulary w;
  CHECK_THROWS_AS(build_subword_vocab({"", "   "}, 100, w), std::runtime_error);
}

TEST_CASE("subword vocab rejects max_size below the character inventory") {
  Vocabulary v;
  CHECK_THROWS_AS(build_subword_vocab({"abcdefgh ijkl"}, 8, v), std::runtime_error);
}

TEST_CASE("unk is always present") {
  Vocabulary v;
  build_subword_vocab({"xy xy"}, 64, v);
  CHECK(v.subword("[UNK]") == kUnk);
  CHECK(v.subwords[kUnk] == "[UNK]");
}

TEST_CASE("tokenize of empty text is empty") {
  Vocabulary v;
  build_subword_vocab({"ab ab"}, 64, v);
  CHECK(tokenize("", v).empty());
  CHECK(tokenize("   ", v).empty());
}

TEST_CASE("characters outside the inventory become unk one by one") {
  Vocabulary v;
  build_subword_vocab({"ab ab"}, 64, v);
  auto ids = tokenize("xyz qq", v);
  REQUIRE(ids.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(ids[i] == kUnk);
}

TEST_CASE("greedy longest match takes the whole-word piece") {
  Vocabulary v;
  build_subword_vocab({"aaab aaab"}, 10, v);
  auto ids = tokenize("aaab", v);
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == v.subword("aaab"));
}

TEST_CASE("tokenization lowercases and uses continuation pieces") {
  Vocabulary v;
  build_subword_vocab({"inter inter acting acting"}, 80, v);
  auto ids = tokenize("InterActing", v);
  REQUIRE(!ids.empty());
  CHECK(ids[0] == v.subword("inter"));
  // the remainder is matched with ## pieces, never the word-start form
  for (std::size_t i = 1; i < ids.size(); ++i) {
    CHECK(v.subwords[ids[i]].rfind("##", 0) == 0);
  }
}

TEST_CASE("tokenization is deterministic") {
  Vocabulary v;
  build_subword_vocab({"the quick brown fox jumps over the lazy dog"}, 120, v);
  auto a = tokenize("The quick brown foxes jump!", v);
  for (int i = 0; i < 10; ++i) CHECK(tokenize("The quick brown foxes jump!", v) == a);
}

TEST_CASE("quadruple loading assigns ids in first-appearance order") {
  TempDir tmp;
  auto path = tmp.file("quads.txt",
                       "alice\tknows\tbob\t2\n"
                       "bob\tknows\tcarol\t0\n"
                       "carol\tvisits\talice\t1\n");
  Vocabulary v;
  auto quads = load_quadruples(path, v);
  REQUIRE(quads.size() == 3);
  CHECK(v.n_entities() == 3);
  CHECK(v.n_predicates() == 2);
  CHECK(v.n_timestamps() == 3);
  CHECK(v.entities[0] == "alice");
  CHECK(v.entities[1] == "bob");
  CHECK(v.entities[2] == "carol");
  CHECK(v.predicates[0] == "knows");
  CHECK(v.predicates[1] == "visits");
  // timestamps indexed chronologically: raw 0,1,2 -> dense 0,1,2
  CHECK(quads[0] == Quadruple{0, 0, 1, 2});
  CHECK(quads[1] == Quadruple{1, 0, 2, 0});
  CHECK(quads[2] == Quadruple{2, 1, 0, 1});
}

TEST_CASE("empty quadruple file loads as an empty dataset") {
  TempDir tmp;
  auto path = tmp.file("empty.txt", "");
  Vocabulary v;
  auto quads = load_quadruples(path, v);
  CHECK(quads.empty());
  CHECK(v.n_entities() == 0);
  CHECK(v.n_predicates() == 0);
  CHECK(v.n_timestamps() == 0);
}

TEST_CASE("malformed quadruple lines report the line number") {
  TempDir tmp;
  auto path = tmp.file("bad.txt", "a\tb\tc\t0\nnot enough fields\n");
  Vocabulary v;
  CHECK_THROWS_WITH_AS(load_quadruples(path, v), doctest::Contains(":2:"), std::runtime_error);

  auto path2 = tmp.file("badtime.txt", "a\tb\tc\tsometime\n");
  Vocabulary w;
  CHECK_THROWS_WITH_AS(load_quadruples(path2, w), doctest::Contains("timestamp"),
                       std::runtime_error);
}

TEST_CASE("iso dates index chronologically") {
  TempDir tmp;
  auto path = tmp.file("dates.txt",
                       "a\tp\tb\t2020-05-01\n"
                       "b\tp\tc\t2019-12-31\n"
                       "c\tp\ta\t2020-01-15\n");
  Vocabulary v;
  auto quads = load_quadruples(path, v);
  CHECK(quads[0].time == 2);
  CHECK(quads[1].time == 0);
  CHECK(quads[2].time == 1);
  CHECK_THROWS_AS(parse_time_key("2020-13-01"), std::runtime_error);
  CHECK_THROWS_AS(parse_time_key("not-a-date"), std::runtime_error);
}

TEST_CASE("load-save-load round-trips id for id") {
  TempDir tmp;
  auto path = tmp.file("quads.txt",
                       "alice\tknows\tbob\t2020-01-02\n"
                       "bob\tknows\tcarol\t2020-01-01\n"
                       "carol\tvisits\talice\t2020-03-05\n"
                       "alice\tvisits\tbob\t2020-01-02\n");
  Vocabulary v1;
  auto q1 = load_quadruples(path, v1);
  auto saved = (tmp.path / "resaved.txt").string();
  save_quadruples(saved, q1, v1);
  Vocabulary v2;
  auto q2 = load_quadruples(saved, v2);
  CHECK(q1 == q2);
  CHECK(v1.entities == v2.entities);
  CHECK(v1.predicates == v2.predicates);
  CHECK(v1.time_keys == v2.time_keys);
}

TEST_CASE("dataset splits share one timestamp index") {
  TempDir tmp;
  auto train = tmp.file("train.txt", "a\tp\tb\t10\nb\tp\tc\t30\n");
  auto valid = tmp.file("valid.txt", "a\tp\tc\t20\n");
  auto test = tmp.file("test.txt", "c\tp\ta\t5\n");
  Vocabulary v;
  auto split = load_dataset(train, valid, test, v);
  CHECK(v.n_timestamps() == 4);
  CHECK(split.train[0].time == 1);  // raw 10
  CHECK(split.train[1].time == 3);  // raw 30
  CHECK(split.valid[0].time == 2);  // raw 20
  CHECK(split.test[0].time == 0);   // raw 5
}

TEST_CASE("reciprocal augmentation doubles predicates and quadruples") {
  TempDir tmp;
  auto path = tmp.file("quads.txt", "a\tp\tb\t0\nb\tq\tc\t1\n");
  Vocabulary v;
  auto quads = load_quadruples(path, v);
  auto original = quads;
  add_reciprocals(quads, v);
  CHECK(v.n_predicates() == 4);
  CHECK(quads.size() == 4);
  for (std::size_t i = 0; i < original.size(); ++i) CHECK(quads[i] == original[i]);
  CHECK(quads[2] == Quadruple{original[0].obj, 2, original[0].subj, original[0].time});
  CHECK(quads[3] == Quadruple{original[1].obj, 3, original[1].subj, original[1].time});
  CHECK_THROWS_AS(add_reciprocals(quads, v), std::runtime_error);
}

TEST_CASE("reciprocal augmentation of 237 predicates yields 474") {
  Vocabulary v;
  std::vector<Quadruple> quads;
  for (int i = 0; i < 237; ++i) {
    v.add_entity("e" + std::to_string(i));
    v.add_predicate("p" + std::to_string(i));
  }
  v.index_timestamps({"0"});
  add_reciprocals(quads, v);
  CHECK(v.n_predicates() == 474);
}

TEST_CASE("distant pairing needs both mentions in one sentence") {
  TempDir tmp;
  auto qpath = tmp.file("q.txt",
                        "Google\tconsult\tUnited States\t2018-01-06\n"
                        "Google\tconsult\tFrance\t2018-01-06\n");
  Vocabulary v;
  auto quads = load_quadruples(qpath, v);
  std::unordered_map<int, std::string> surface;
  for (std::size_t i = 0; i < v.n_entities(); ++i)
    surface[static_cast<int>(i)] = v.entities[i];
  build_subword_vocab({"google consulted the united states on friday"}, 200, v);

  std::vector<Document> docs = {
      {"2018-01-06",
       "Google consulted the United States on Friday. France stayed out of it."}};
  PairStats stats;
  auto samples = pair_distant(quads, docs, surface, v, 32, &stats);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].quad == quads[0]);
  CHECK(stats.quads_matched == 1);
  CHECK(!samples[0].tokens.empty());
}

TEST_CASE("distant pairing yields one sample per qualifying sentence") {
  TempDir tmp;
  auto qpath = tmp.file("q.txt", "alpha\tgreets\tbeta\t1\n");
  Vocabulary v;
  auto quads = load_quadruples(qpath, v);
  std::unordered_map<int, std::string> surface = {{0, "alpha"}, {1, "beta"}};
  build_subword_vocab({"alpha beta greets again"}, 128, v);
  std::vector<Document> docs = {
      {"1", "alpha greets beta. beta waves back at alpha! nothing here."}};
  auto samples = pair_distant(quads, docs, surface, v, 32, nullptr);
  CHECK(samples.size() == 2);
  for (const auto& s : samples) CHECK(s.quad == quads[0]);
}

TEST_CASE("distant pairing skips quadruples without surface forms") {
  TempDir tmp;
  auto qpath = tmp.file("q.txt", "alpha\tgreets\tbeta\t1\n");
  Vocabulary v;
  auto quads = load_quadruples(qpath, v);
  std::unordered_map<int, std::string> surface = {{0, "alpha"}};  // beta missing
  build_subword_vocab({"alpha beta"}, 64, v);
  std::vector<Document> docs = {{"1", "alpha greets beta."}};
  PairStats stats;
  auto samples = pair_distant(quads, docs, surface, v, 32, &stats);
  CHECK(samples.empty());
  CHECK(stats.quads_skipped_no_surface == 1);
}

TEST_CASE("mention matching is whole-word and case-insensitive") {
  TempDir tmp;
  auto qpath = tmp.file("q.txt", "art\tmeets\tbob\t1\n");
  Vocabulary v;
  auto quads = load_quadruples(qpath, v);
  std::unordered_map<int, std::string> surface = {{0, "art"}, {1, "bob"}};
  build_subword_vocab({"art bob starts party"}, 64, v);
  // "startArt" and "parts" must not count as mentions of "art"
  std::vector<Document> docs = {{"1", "Bob visits the artsy party."}, {"1", "ART met BOB."}};
  auto samples = pair_distant(quads, docs, surface, v, 32, nullptr);
  CHECK(samples.size() == 1);
}

TEST_CASE("wiki-style sample concatenates the three descriptions") {
  Vocabulary v;
  build_subword_vocab({"a rel b longer description text"}, 128, v);
  v.add_entity("A");
  v.add_entity("B");
  v.add_predicate("rel");
  v.index_timestamps({"0"});
  Quadruple q{0, 0, 1, 0};
  auto s = build_wiki_description_sample(q, "A", "rel", "B", v, 16);
  CHECK(s.tokens == tokenize("a rel b", v));

  auto t = build_wiki_description_sample(q, "longer description", "rel", "text b a", v, 4);
  CHECK(t.tokens.size() == 4);
  auto full = tokenize("longer description rel text b a", v);
  for (int i = 0; i < 4; ++i) CHECK(t.tokens[i] == full[i]);

  CHECK_THROWS_AS(build_wiki_description_sample(q, "", "rel", "B", v, 16), std::runtime_error);
  CHECK_THROWS_AS(build_wiki_description_sample(q, "A", "rel", "  ", v, 16), std::runtime_error);
}

TEST_CASE("a discretized wiki-style time span indexes densely") {
  Vocabulary v;
  std::vector<std::string> raw;
  for (int i = 0; i < 82; ++i) raw.push_back(std::to_string(i * 37));
  v.index_timestamps(raw);
  CHECK(v.n_timestamps() == 82);
  for (int i = 0; i < 82; ++i) CHECK(v.time_index(i * 37) == i);
}

TEST_CASE("vocabulary file round-trips through three sections") {
  TempDir tmp;
  Vocabulary v;
  build_subword_vocab({"hello world hello"}, 64, v);
  v.add_entity("Hello Corp");
  v.add_entity("World Inc");
  v.add_predicate("greets");
  auto path = (tmp.path / "vocab.txt").string();
  v.save(path);
  auto w = Vocabulary::load(path);
  CHECK(w.subwords == v.subwords);
  CHECK(w.entities == v.entities);
  CHECK(w.predicates == v.predicates);
  CHECK(w.subword("hello") == v.subword("hello"));
  CHECK(w.max_subword_cp_len == v.max_subword_cp_len);
}

TEST_CASE("aligned jsonl round-trips and resolves against the vocabulary") {
  TempDir tmp;
  auto qpath = tmp.file("q.txt", "alice\tknows\tbob\t3\n");
  Vocabulary v;
  auto quads = load_quadruples(qpath, v);
  build_subword_vocab({"alice knows bob well"}, 64, v);

  std::vector<RawAligned> records = {
      {{"alice", "knows", "bob", "3"}, "alice knows bob well"}};
  auto path = (tmp.path / "aligned.jsonl").string();
  write_aligned_jsonl(path, records);
  auto back = read_aligned_jsonl(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].text == records[0].text);

  auto resolved = resolve_aligned(back, v, 32);
  REQUIRE(resolved.size() == 1);
  CHECK(resolved[0].quad == quads[0]);
  CHECK(resolved[0].tokens == tokenize("alice knows bob well", v));

  std::vector<RawAligned> bad = {{{"nobody", "knows", "bob", "3"}, "text"}};
  CHECK_THROWS_WITH_AS(resolve_aligned(bad, v, 32), doctest::Contains("unknown entity"),
                       std::runtime_error);
}

TEST_CASE("utf8 fallback tokenizes unseen scripts character by character") {
  Vocabulary v;
  build_subword_vocab({"中国 美国 中国"}, 64, v);
  auto ids = tokenize("中国", v);
  REQUIRE(ids.size() >= 1);
  for (int id : ids) CHECK(id != kUnk);
  auto mixed = tokenize("中 x 国", v);
  CHECK(mixed.size() == 3);
}
