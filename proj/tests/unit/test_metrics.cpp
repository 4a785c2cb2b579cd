#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "dgseq/errors.hpp"
#include "dgseq/metrics.hpp"

using namespace dgseq;

namespace {

using Corpus = std::vector<TokenSeq>;

constexpr int Dx = 0, Chemo = 1, Radiation = 4, Surgery = 5;

// Independent counting oracle: grams enumerated by brute force into a
// multiset keyed on the gram itself, no shared code with the library.
std::map<TokenSeq, int> grams(const TokenSeq& s, int m) {
  std::map<TokenSeq, int> out;
  for (int i = 0; i + m <= static_cast<int>(s.size()); ++i) out[TokenSeq(s.begin() + i, s.begin() + i + m)]++;
  return out;
}

double oracle_bleu(const Corpus& cands, const Corpus& refs, int n) {
  double c_len = 0;
  double r_len = 0;
  std::vector<double> matched(n, 0.0);
  std::vector<double> total(n, 0.0);
  for (std::size_t k = 0; k < cands.size(); ++k) {
    c_len += cands[k].size();
    r_len += refs[k].size();
    for (int m = 1; m <= n; ++m) {
      const auto cg = grams(cands[k], m);
      const auto rg = grams(refs[k], m);
      for (const auto& [g, count] : cg) {
        total[m - 1] += count;
        auto it = rg.find(g);
        if (it != rg.end()) matched[m - 1] += std::min(count, it->second);
      }
    }
  }
  double product = 1.0;
  for (int m = 0; m < n; ++m) {
    if (matched[m] == 0.0) return 0.0;
    product *= matched[m] / total[m];
  }
  const double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  return 100.0 * bp * std::pow(product, 1.0 / n);
}

double oracle_rouge1(const Corpus& cands, const Corpus& refs) {
  double matched = 0;
  double total = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    for (int tok = 0; tok < 16; ++tok) {
      const auto c = std::count(cands[k].begin(), cands[k].end(), tok);
      const auto r = std::count(refs[k].begin(), refs[k].end(), tok);
      matched += static_cast<double>(std::min(c, r));
      total += static_cast<double>(r);
    }
  }
  return 100.0 * matched / total;
}

TokenSeq random_seq(std::mt19937_64& rng, int min_len) {
  std::uniform_int_distribution<int> len(min_len, 6);
  std::uniform_int_distribution<int> tok(0, 5);
  TokenSeq s(static_cast<std::size_t>(len(rng)));
  for (auto& t : s) t = tok(rng);
  return s;
}

}  // namespace

TEST_CASE("bleu and rouge hand examples") {
  CHECK(std::abs(bleu(Corpus{{Dx, Chemo}}, Corpus{{Dx, Surgery}}, 1) - 50.0) < 1e-9);
  CHECK(std::abs(bleu(Corpus{{Dx}}, Corpus{{Dx, Surgery}}, 1) - 36.787944117144235) < 1e-9);
  CHECK(std::abs(rouge1(Corpus{{Dx, Chemo}}, Corpus{{Dx, Surgery, Radiation}}) - 100.0 / 3.0) < 1e-9);
}

TEST_CASE("perfect and disjoint corpora") {
  const Corpus refs{{0, 1, 2, 3}, {4, 5, 0, 1, 2}, {3, 3, 2, 1}};
  for (int n = 1; n <= 4; ++n) CHECK(bleu(refs, refs, n) == 100.0);
  CHECK(rouge1(refs, refs) == 100.0);
  CHECK(token_accuracy(refs, refs) == 1.0);
  const Corpus other{{5, 5}, {3}, {0}};
  CHECK(rouge1(other, Corpus{{0, 1}, {2}, {4}}) == 0.0);
  CHECK(bleu(other, Corpus{{0, 1}, {2}, {4}}, 1) == 0.0);
}

TEST_CASE("metrics match the counting oracle on random pairs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    Corpus cands;
    Corpus refs;
    const int pairs = 1 + trial % 5;
    for (int k = 0; k < pairs; ++k) {
      cands.push_back(random_seq(rng, 0));
      refs.push_back(random_seq(rng, 1));
    }
    for (int n = 1; n <= 4; ++n) {
      const double expected = oracle_bleu(cands, refs, n);
      CHECK(std::abs(bleu(cands, refs, n) - expected) <= 1e-12 * std::max(1.0, expected));
    }
    CHECK(std::abs(rouge1(cands, refs) - oracle_rouge1(cands, refs)) <= 1e-12);
  }
}

TEST_CASE("scores are invariant to corpus order and stay in range") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Corpus cands;
    Corpus refs;
    for (int k = 0; k < 6; ++k) {
      cands.push_back(random_seq(rng, 1));
      refs.push_back(random_seq(rng, 1));
    }
    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
    std::shuffle(order.begin(), order.end(), rng);
    Corpus pc;
    Corpus pr;
    for (auto i : order) {
      pc.push_back(cands[i]);
      pr.push_back(refs[i]);
    }
    for (int n = 1; n <= 4; ++n) {
      const double b = bleu(cands, refs, n);
      CHECK(b >= 0.0);
      CHECK(b <= 100.0);
      CHECK(std::abs(bleu(pc, pr, n) - b) < 1e-12);
    }
    CHECK(std::abs(rouge1(pc, pr) - rouge1(cands, refs)) < 1e-12);
  }
}

TEST_CASE("bleu of a corpus without any n-gram of some order is zero") {
  const Corpus single{{Dx}};
  CHECK(bleu(single, single, 1) == 100.0);
  CHECK(bleu(single, single, 2) == 0.0);
  CHECK(bleu(Corpus{{Dx}, {Dx, Chemo}}, Corpus{{Dx}, {Dx, Chemo}}, 2) == 100.0);
}

TEST_CASE("bleu reaches 100 only for exact matches") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    Corpus refs;
    for (int k = 0; k < 3; ++k) refs.push_back(random_seq(rng, 1));
    Corpus cands = refs;
    auto& victim = cands[trial % 3];
    if (trial % 2 == 0) {
      victim[0] = (victim[0] + 1) % 6;
    } else {
      victim.push_back(victim.back());
    }
    for (int n = 1; n <= 4; ++n) CHECK(bleu(cands, refs, n) < 100.0);
  }
}

TEST_CASE("token accuracy") {
  CHECK(token_accuracy(Corpus{{Dx, Surgery}}, Corpus{{Dx, Radiation}}) == 0.5);
  CHECK(token_accuracy(Corpus{{1, 2}}, Corpus{{3, 4}}) == 0.0);
  CHECK(token_accuracy(Corpus{{1, 2, 3}, {}}, Corpus{{1, 9}, {}}) == doctest::Approx(0.75));
  CHECK(token_accuracy(Corpus{{}}, Corpus{{1}}) == 0.0);
}

TEST_CASE("metric errors") {
  const Corpus one{{1}};
  CHECK_THROWS_AS(bleu(one, one, 0), ConfigError);
  CHECK_THROWS_AS(bleu(one, one, 5), ConfigError);
  CHECK_THROWS_AS(bleu(Corpus{}, Corpus{}, 1), DomainError);
  CHECK_THROWS_AS(bleu(one, Corpus{{1}, {2}}, 1), DomainError);
  CHECK_THROWS_AS(rouge1(Corpus{{1}}, Corpus{{}}), DomainError);
}

TEST_CASE("report summaries") {
  const std::vector<double> single{42.0};
  CHECK(summarize(single).mean == 42.0);
  CHECK(summarize(single).sd == 0.0);
  const std::vector<double> three{1.0, 2.0, 6.0};
  CHECK(summarize(three).mean == 3.0);
  CHECK(summarize(three).sd == doctest::Approx(std::sqrt(7.0)));

  EvalReport report;
  const Corpus refs{{0, 1, 2}};
  report.add_run(refs, refs);
  report.add_run(Corpus{{0, 1, 3}}, refs);
  CHECK(report.run_count() == 2);
  CHECK(report.summary("BLEU-1").mean == doctest::Approx((100.0 + 200.0 / 3.0) / 2.0));
  CHECK(report.summary("ROUGE").sd >= 0.0);
  const auto text = report.table("dynamic");
  CHECK(text.find("BLEU-4") != std::string::npos);
  CHECK(text.find("dynamic") != std::string::npos);
  CHECK(text.find("+/-") != std::string::npos);
}
