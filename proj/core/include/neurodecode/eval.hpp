#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurodecode/model.hpp"
#include "neurodecode/preprocess.hpp"

namespace nd {

// Lowercased with punctuation removed; comparisons use this form.
std::string normalize_word(const std::string& w);

// Character-level edit distance between the space-joined normalized word
// lists, divided by the number of target words (at least 1).
double levenshtein_norm(const std::vector<std::string>& pred,
                        const std::vector<std::string>& target);

// Positional word mismatches (length difference counts as errors), divided
// by max(len(target), 1).
double wer_general(const std::vector<std::string>& pred,
                   const std::vector<std::string>& target);

// Fraction of predicted words outside the vocabulary.
double wer_vocab(const std::vector<std::string>& pred,
                 const std::vector<std::string>& vocab);

struct RetrievalResult {
  std::vector<std::size_t> best;   // candidate index per query, ties to lower index
  std::vector<std::size_t> ranks;  // 0 == correct candidate ranked first
  double top1 = 0.0;
  double top5 = 0.0;
};

// Scores query i against candidate j by inner product of the L2-normalized
// flattened clips; the matching candidate shares the query's index.
RetrievalResult retrieve(const std::vector<std::vector<double>>& queries,
                         const std::vector<std::vector<double>>& candidates);

// Worker cap: min(hardware threads, NEURODECODE_THREADS when set).
int worker_count();

// Order-independent content hash over window tensors, subjects and words.
std::uint64_t dataset_hash(const WindowDataset& ds);

struct PerWindowResult {
  std::size_t window = 0;
  std::size_t predicted = 0;
  std::size_t rank = 0;
  double levenshtein = 0.0;
  double wer = 0.0;
};

struct EvalSummary {
  std::size_t n_windows = 0;
  double top1 = 0.0;
  double top5 = 0.0;
  double levenshtein = 0.0;  // mean over windows
  double wer = 0.0;          // mean over windows
  double wer_vocab = 0.0;    // mean over windows
  std::vector<PerWindowResult> per_window;
};

// Runs the model on the given windows (parallel across workers) and scores
// retrieval plus word metrics against the in-split candidate pool.
EvalSummary evaluate(Model& model, const WindowDataset& ds,
                     const std::vector<std::size_t>& indices);

// One CSV row per window: window,predicted,rank,levenshtein,wer.
void write_per_window_csv(const EvalSummary& s, const std::string& path);

}  // namespace nd
