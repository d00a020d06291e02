#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "doctest.h"
#include "neurodecode/errors.hpp"
#include "neurodecode/eval.hpp"

using namespace nd;
namespace fs = std::filesystem;

namespace {

// Reference edit distance: plain recursion with memoization, kept separate
// from the iterative implementation under test.
std::size_t ref_edit(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i,
                                                                std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::size_t best = std::min(go(i + 1, j), go(i, j + 1)) + 1;
    best = std::min(best, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1));
    memo[key] = best;
    return best;
  };
  return go(0, 0);
}

std::vector<std::string> random_words(Rng& rng, std::size_t max_len) {
  std::vector<std::string> out;
  auto n = rng.below(max_len + 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string w;
    auto len = 1 + rng.below(5);
    for (std::uint64_t k = 0; k < len; ++k)
      w.push_back(static_cast<char>('a' + rng.below(4)));
    out.push_back(w);
  }
  return out;
}

std::string join(const std::vector<std::string>& ws) {
  std::string s;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (i) s.push_back(' ');
    s += ws[i];
  }
  return s;
}

SensorLayout grid_layout(int n, std::uint64_t seed = 7) {
  Rng rng(seed, 0);
  SensorLayout l;
  for (int i = 0; i < n; ++i) l.positions.push_back({rng.uniform(), rng.uniform()});
  return l;
}

WindowDataset random_dataset(int n, int c, int f, int t, std::uint64_t seed) {
  Rng rng(seed, 0);
  WindowDataset ds;
  ds.feature_rate_hz = 100.0;
  ds.subjects = {"S01"};
  for (int i = 0; i < n; ++i) {
    WindowPair w;
    w.subject_id = "S01";
    w.eeg = Tensor::randn({c, t}, rng);
    w.audio = Tensor::randn({f, t}, rng);
    w.words = {"tok" + std::to_string(i), "tok" + std::to_string(i + 1)};
    w.window_index = i;
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace

TEST_CASE("word normalization lowercases and strips punctuation") {
  CHECK(normalize_word("Hello,") == "hello");
  CHECK(normalize_word("don't") == "dont");
  CHECK(normalize_word("...") == "");
  CHECK(levenshtein_norm({"Hello,"}, {"hello"}) == 0.0);
  CHECK(wer_general({"World!"}, {"world"}) == 0.0);
}

TEST_CASE("kitten versus sitting scores three edits per target word") {
  CHECK(levenshtein_norm({"kitten"}, {"sitting"}) == 3.0);
  CHECK(levenshtein_norm({"abc"}, {"abc"}) == 0.0);
  CHECK(levenshtein_norm({}, {}) == 0.0);
  CHECK(levenshtein_norm({"ab"}, {}) == 2.0);  // empty target divides by 1
  CHECK(levenshtein_norm({"aa", "bb"}, {"aa", "bb"}) == 0.0);
}

TEST_CASE("edit distance agrees with the recursive reference on random pairs") {
  Rng rng(17, 0);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_words(rng, 4);
    auto b = random_words(rng, 4);
    double want = static_cast<double>(ref_edit(join(a), join(b))) /
                  static_cast<double>(std::max<std::size_t>(b.size(), 1));
    CHECK(levenshtein_norm(a, b) == want);
  }
}

TEST_CASE("positional word error rate counts mismatches and length gaps") {
  CHECK(wer_general({"a", "b", "c"}, {"a", "b", "c"}) == 0.0);
  CHECK(wer_general({"a", "x", "c"}, {"a", "b", "c"}) == doctest::Approx(1.0 / 3.0));
  CHECK(wer_general({"a"}, {"a", "b", "c"}) == doctest::Approx(2.0 / 3.0));
  CHECK(wer_general({"a", "b", "c", "d"}, {"a", "b"}) == doctest::Approx(1.0));
  CHECK(wer_general({"x"}, {}) == 1.0);
  CHECK(wer_general({}, {}) == 0.0);

  Rng rng(18, 0);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_words(rng, 5);
    auto b = random_words(rng, 5);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
      if (i >= a.size() || i >= b.size() || a[i] != b[i]) ++errors;
    }
    double want = static_cast<double>(errors) /
                  static_cast<double>(std::max<std::size_t>(b.size(), 1));
    CHECK(wer_general(a, b) == want);
  }
}

TEST_CASE("vocabulary error rate is the share of unknown predictions") {
  std::vector<std::string> vocab = {"alpha", "beta"};
  CHECK(wer_vocab({"alpha", "beta"}, vocab) == 0.0);
  CHECK(wer_vocab({"alpha", "gamma"}, vocab) == 0.5);
  CHECK(wer_vocab({"Gamma", "delta"}, vocab) == 1.0);
  CHECK(wer_vocab({"ALPHA"}, vocab) == 0.0);
  CHECK(wer_vocab({}, vocab) == 0.0);
}

TEST_CASE("retrieval ranks by normalized inner product with stable ties") {
  std::vector<std::vector<double>> q = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  std::vector<std::vector<double>> c = {{2.0, 0.0}, {0.0, 5.0}, {0.5, 0.5}};
  auto r = retrieve(q, c);
  CHECK(r.top1 == 1.0);
  CHECK(r.ranks == std::vector<std::size_t>{0, 0, 0});

  // scaling candidates cannot change the ranking
  std::vector<std::vector<double>> c2 = {{200.0, 0.0}, {0.0, 0.05}, {3.0, 3.0}};
  auto r2 = retrieve(q, c2);
  CHECK(r2.best == r.best);

  // duplicate candidates tie; the lower index wins
  std::vector<std::vector<double>> dup = {{1.0, 0.0}, {1.0, 0.0}};
  std::vector<std::vector<double>> qd = {{1.0, 0.0}, {1.0, 0.0}};
  auto rd = retrieve(qd, dup);
  CHECK(rd.best == std::vector<std::size_t>{0, 0});
  CHECK(rd.ranks == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(retrieve(q, qd), ConfigError);
}

TEST_CASE("top-5 accuracy counts ranks below five") {
  // candidate j matches query j; query 0 is closest to candidates 5..9
  std::vector<std::vector<double>> q, c;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> v(10, 0.0);
    v[static_cast<std::size_t>(i)] = 1.0;
    c.push_back(v);
    q.push_back(v);
  }
  for (int j = 5; j < 10; ++j) q[0][static_cast<std::size_t>(j)] = 2.0;
  auto r = retrieve(q, c);
  CHECK(r.ranks[0] == 5);
  CHECK(r.top1 == doctest::Approx(0.9));
  CHECK(r.top5 == doctest::Approx(0.9));
}

TEST_CASE("worker count honors the environment cap") {
  unsetenv("NEURODECODE_THREADS");
  int base = worker_count();
  CHECK(base >= 1);
  setenv("NEURODECODE_THREADS", "1", 1);
  CHECK(worker_count() == 1);
  setenv("NEURODECODE_THREADS", "oops", 1);
  CHECK_THROWS_AS(worker_count(), ConfigError);
  setenv("NEURODECODE_THREADS", "0", 1);
  CHECK_THROWS_AS(worker_count(), ConfigError);
  unsetenv("NEURODECODE_THREADS");
}

TEST_CASE("dataset hashes are stable and content sensitive") {
  WindowDataset a = random_dataset(4, 3, 3, 8, 21);
  WindowDataset b = random_dataset(4, 3, 3, 8, 21);
  CHECK(dataset_hash(a) == dataset_hash(b));
  b.windows[2].audio.at(0) += 1e-9;
  CHECK(dataset_hash(a) != dataset_hash(b));
  WindowDataset c = random_dataset(4, 3, 3, 8, 22);
  CHECK(dataset_hash(a) != dataset_hash(c));
}

TEST_CASE("evaluation is thread-count invariant and writes per-window rows") {
  ModelConfig cfg;
  cfg.c_in = 3;
  cfg.d1 = 6;
  cfg.d2 = 8;
  cfg.n_blocks = 2;
  cfg.k_harmonics = 3;
  cfg.spatial_dropout_p = 0.0;
  cfg.rnn_hidden = 4;
  cfg.f_out = 3;
  Model m(cfg, {"S01"}, grid_layout(3), 71);
  WindowDataset ds = random_dataset(8, 3, 3, 10, 23);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.windows.size(); ++i) idx.push_back(i);

  setenv("NEURODECODE_THREADS", "1", 1);
  EvalSummary one = evaluate(m, ds, idx);
  setenv("NEURODECODE_THREADS", "4", 1);
  EvalSummary four = evaluate(m, ds, idx);
  unsetenv("NEURODECODE_THREADS");
  CHECK(one.top1 == four.top1);
  CHECK(one.levenshtein == four.levenshtein);
  REQUIRE(one.per_window.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(one.per_window[i].predicted == four.per_window[i].predicted);
    CHECK(one.per_window[i].rank == four.per_window[i].rank);
  }
  // every predicted word list comes from the dataset, so none leave the vocabulary
  CHECK(one.wer_vocab == 0.0);

  fs::path csv = fs::temp_directory_path() / "nd_eval_per_window.csv";
  write_per_window_csv(one, csv.string());
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "window,predicted,rank,levenshtein,wer");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8);
  fs::remove(csv);
}
