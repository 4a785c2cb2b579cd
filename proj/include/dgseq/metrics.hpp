#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace dgseq {

using TokenSeq = std::vector<int>;

/// Corpus-level BLEU-n on a 0-100 scale: geometric mean of clipped m-gram
/// precisions (m = 1..n) times the brevity penalty exp(1 - r/c) when c < r.
/// No smoothing; any zero precision gives 0.
double bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references, int n);

/// Corpus-level ROUGE-1 recall on a 0-100 scale.
double rouge1(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references);

/// Position-wise exact matches over each pair's common prefix length,
/// averaged over pairs. A pair where either side is empty scores 1 when both
/// are empty and 0 otherwise.
double token_accuracy(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single run
};

MetricSummary summarize(std::span<const double> values);

/// Per-run scores for BLEU-1..4 and ROUGE-1, summarised as mean +/- SD.
struct EvalReport {
  static constexpr const char* kColumns[] = {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE"};

  std::vector<std::map<std::string, double>> runs;

  void add_run(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references);
  [[nodiscard]] std::size_t run_count() const { return runs.size(); }
  [[nodiscard]] MetricSummary summary(const std::string& metric) const;
  /// Aligned text table with one "mean +/- sd" cell per metric.
  [[nodiscard]] std::string table(const std::string& row_label) const;
};

}  // namespace dgseq
