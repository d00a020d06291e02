#include "neurodecode/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "neurodecode/errors.hpp"

namespace nd {

std::string normalize_word(const std::string& w) {
  std::string out;
  for (unsigned char c : w)
    if (!std::ispunct(c)) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

namespace {

std::string join_normalized(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += normalize_word(words[i]);
  }
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double levenshtein_norm(const std::vector<std::string>& pred,
                        const std::vector<std::string>& target) {
  std::size_t d = edit_distance(join_normalized(pred), join_normalized(target));
  return static_cast<double>(d) / static_cast<double>(std::max<std::size_t>(target.size(), 1));
}

double wer_general(const std::vector<std::string>& pred,
                   const std::vector<std::string>& target) {
  std::size_t longer = std::max(pred.size(), target.size());
  std::size_t shorter = std::min(pred.size(), target.size());
  std::size_t errors = longer - shorter;
  for (std::size_t i = 0; i < shorter; ++i)
    if (normalize_word(pred[i]) != normalize_word(target[i])) ++errors;
  return static_cast<double>(errors) / static_cast<double>(std::max<std::size_t>(target.size(), 1));
}

double wer_vocab(const std::vector<std::string>& pred,
                 const std::vector<std::string>& vocab) {
  if (pred.empty()) return 0.0;
  std::set<std::string> known;
  for (const auto& w : vocab) known.insert(normalize_word(w));
  std::size_t unknown = 0;
  for (const auto& w : pred)
    if (!known.count(normalize_word(w))) ++unknown;
  return static_cast<double>(unknown) / static_cast<double>(pred.size());
}

RetrievalResult retrieve(const std::vector<std::vector<double>>& queries,
                         const std::vector<std::vector<double>>& candidates) {
  if (queries.size() != candidates.size())
    throw ConfigError("retrieve: query and candidate counts differ");
  const std::size_t n = queries.size();
  auto normalized = [](const std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(std::max(norm, 1e-24));
    std::vector<double> out(v);
    for (auto& x : out) x /= norm;
    return out;
  };
  std::vector<std::vector<double>> qs, cs;
  for (const auto& v : queries) qs.push_back(normalized(v));
  for (const auto& v : candidates) {
    if (v.size() != queries[0].size()) throw ConfigError("retrieve: mixed clip sizes");
    cs.push_back(normalized(v));
  }

  RetrievalResult res;
  res.best.resize(n);
  res.ranks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> scores(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < qs[i].size(); ++k) scores[j] += qs[i][k] * cs[j][k];
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (scores[j] > scores[best]) best = j;
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++rank;
    }
    res.best[i] = best;
    res.ranks[i] = rank;
    if (rank == 0) res.top1 += 1.0;
    if (rank < 5) res.top5 += 1.0;
  }
  if (n > 0) {
    res.top1 /= static_cast<double>(n);
    res.top5 /= static_cast<double>(n);
  }
  return res;
}

int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("NEURODECODE_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v <= 0)
      throw ConfigError("NEURODECODE_THREADS must be a positive integer");
    hw = std::min<long>(hw, v);
  }
  return hw;
}

std::uint64_t dataset_hash(const WindowDataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  auto mix_str = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(ds.windows.size());
  for (const auto& w : ds.windows) {
    mix_str(w.subject_id);
    mix(static_cast<std::uint64_t>(w.window_index));
    for (const auto& word : w.words) mix_str(word);
    mix(fnv1a64_doubles(w.eeg.data()));
    mix(fnv1a64_doubles(w.audio.data()));
  }
  return h;
}

EvalSummary evaluate(Model& model, const WindowDataset& ds,
                     const std::vector<std::size_t>& indices) {
  EvalSummary s;
  s.n_windows = indices.size();
  if (indices.empty()) return s;

  std::vector<std::vector<double>> queries(indices.size()), candidates(indices.size());
  const int workers = std::min<int>(worker_count(), static_cast<int>(indices.size()));
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < indices.size(); i = next.fetch_add(1)) {
        const WindowPair& win = ds.windows.at(indices[i]);
        Rng drng(0, 0);
        queries[i] = model.forward(win.eeg, win.subject_id, false, drng).data();
        candidates[i] = win.audio.data();
      }
    });
  for (auto& t : pool) t.join();

  RetrievalResult ret = retrieve(queries, candidates);
  s.top1 = ret.top1;
  s.top5 = ret.top5;

  std::vector<std::string> vocab;
  for (const auto& w : ds.windows)
    for (const auto& word : w.words) vocab.push_back(word);

  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& target = ds.windows.at(indices[i]).words;
    const auto& pred = ds.windows.at(indices[ret.best[i]]).words;
    PerWindowResult pw;
    pw.window = indices[i];
    pw.predicted = indices[ret.best[i]];
    pw.rank = ret.ranks[i];
    pw.levenshtein = levenshtein_norm(pred, target);
    pw.wer = wer_general(pred, target);
    s.levenshtein += pw.levenshtein;
    s.wer += pw.wer;
    s.wer_vocab += wer_vocab(pred, vocab);
    s.per_window.push_back(pw);
  }
  s.levenshtein /= static_cast<double>(indices.size());
  s.wer /= static_cast<double>(indices.size());
  s.wer_vocab /= static_cast<double>(indices.size());
  return s;
}

void write_per_window_csv(const EvalSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "window,predicted,rank,levenshtein,wer\n";
  for (const auto& pw : s.per_window)
    out << pw.window << ',' << pw.predicted << ',' << pw.rank << ','
        << pw.levenshtein << ',' << pw.wer << '\n';
}

}  // namespace nd
