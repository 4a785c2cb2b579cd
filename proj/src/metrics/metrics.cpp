#include "dgseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dgseq/errors.hpp"

namespace dgseq {

namespace {

void check_corpus(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
  if (references.empty()) throw DomainError("metrics: empty corpus");
  if (candidates.size() != references.size()) {
    throw DomainError("metrics: " + std::to_string(candidates.size()) + " candidates vs " +
                      std::to_string(references.size()) + " references");
  }
}

std::map<std::vector<int>, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t m) {
  std::map<std::vector<int>, std::size_t> counts;
  if (seq.size() < m) return counts;
  for (std::size_t i = 0; i + m <= seq.size(); ++i) ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + m)];
  return counts;
}

std::size_t clipped_matches(const TokenSeq& cand, const TokenSeq& ref, std::size_t m) {
  const auto c = ngram_counts(cand, m);
  const auto r = ngram_counts(ref, m);
  std::size_t hits = 0;
  for (const auto& [gram, count] : c) {
    if (auto it = r.find(gram); it != r.end()) hits += std::min(count, it->second);
  }
  return hits;
}

}  // namespace

double bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references, int n) {
  if (n < 1 || n > 4) throw ConfigError("bleu: n must be in 1..4, got " + std::to_string(n));
  check_corpus(candidates, references);
  double log_precision = 0.0;
  for (int m = 1; m <= n; ++m) {
    std::size_t hits = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      hits += clipped_matches(candidates[i], references[i], static_cast<std::size_t>(m));
      if (candidates[i].size() >= static_cast<std::size_t>(m)) total += candidates[i].size() - m + 1;
    }
    if (hits == 0 || total == 0) return 0.0;
    log_precision += std::log(static_cast<double>(hits) / static_cast<double>(total));
  }
  std::size_t c = 0;
  std::size_t r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += candidates[i].size();
    r += references[i].size();
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return 100.0 * bp * std::exp(log_precision / n);
}

double rouge1(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
  check_corpus(candidates, references);
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    hits += clipped_matches(candidates[i], references[i], 1);
    total += references[i].size();
  }
  if (total == 0) throw DomainError("rouge1: references contain no tokens");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

double token_accuracy(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
  check_corpus(candidates, references);
  double acc = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& r = references[i];
    const std::size_t len = std::min(c.size(), r.size());
    if (len == 0) {
      acc += c.empty() && r.empty() ? 1.0 : 0.0;
      continue;
    }
    std::size_t same = 0;
    for (std::size_t k = 0; k < len; ++k) same += c[k] == r[k];
    acc += static_cast<double>(same) / static_cast<double>(len);
  }
  return acc / static_cast<double>(candidates.size());
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

void EvalReport::add_run(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
  std::map<std::string, double> run;
  for (int n = 1; n <= 4; ++n) run[kColumns[n - 1]] = bleu(candidates, references, n);
  run["ROUGE"] = rouge1(candidates, references);
  runs.push_back(std::move(run));
}

MetricSummary EvalReport::summary(const std::string& metric) const {
  std::vector<double> values;
  for (const auto& r : runs) values.push_back(r.at(metric));
  return summarize(values);
}

std::string EvalReport::table(const std::string& row_label) const {
  std::ostringstream os;
  const std::size_t label_width = std::max<std::size_t>(row_label.size(), 5);
  char cell[64];
  os << std::string(label_width, ' ').replace(0, 5, "Model");
  for (const char* col : kColumns) {
    std::snprintf(cell, sizeof cell, " | %-14s", col);
    os << cell;
  }
  os << '\n' << std::string(label_width + 5 * 17, '-') << '\n';
  os << row_label << std::string(label_width - row_label.size(), ' ');
  for (const char* col : kColumns) {
    const auto s = summary(col);
    std::snprintf(cell, sizeof cell, " | %6.2f +/- %-4.2f", s.mean, s.sd);
    os << cell;
  }
  os << '\n';
  return os.str();
}

}  // namespace dgseq
