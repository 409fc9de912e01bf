// Test-only oracle: naive reference implementations kept deliberately
// independent of the library code paths. Counting loops over utterance x
// phrase with its own containment test; formulas are transcribed directly
// with no shared helpers.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dact/corpus.hpp"
#include "dact/counts.hpp"
#include "dact/metrics.hpp"
#include "dact/util.hpp"

namespace oracle {

struct Table {
  std::vector<std::string> acts;                       // sorted
  std::map<std::string, std::size_t> act_count;        // #(d)
  std::map<std::pair<std::string, std::string>, std::size_t> joint;  // (phrase,act) -> #(p&d)
  std::size_t total = 0;                               // U

  std::size_t joint_of(const std::string& phrase, const std::string& act) const {
    auto it = joint.find({phrase, act});
    return it == joint.end() ? 0 : it->second;
  }
  std::size_t phrase_total(const std::string& phrase) const {
    std::size_t n = 0;
    for (const auto& a : acts) n += joint_of(phrase, a);
    return n;
  }
};

inline bool naive_contains(const std::vector<std::string>& utt,
                           const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > utt.size()) return false;
  for (std::size_t start = 0; start + phrase.size() <= utt.size(); ++start) {
    bool ok = true;
    for (std::size_t k = 0; k < phrase.size(); ++k)
      if (utt[start + k] != phrase[k]) {
        ok = false;
        break;
      }
    if (ok) return true;
  }
  return false;
}

inline Table brute_table(const dact::Corpus& corpus, const std::vector<dact::Phrase>& phrases) {
  Table t;
  std::set<std::string> acts;
  corpus.for_each_utterance([&](const dact::Utterance& u) { acts.insert(u.gold_act); });
  t.acts.assign(acts.begin(), acts.end());
  corpus.for_each_utterance([&](const dact::Utterance& u) {
    ++t.total;
    ++t.act_count[u.gold_act];
    for (const auto& p : phrases)
      if (naive_contains(u.tokens, p.tokens)) ++t.joint[{p.text(), u.gold_act}];
  });
  return t;
}

inline double xlx(double v) { return v > 0.0 ? v * std::log2(v) : 0.0; }

inline double cooc(const Table& t, const std::string& p) {
  double best = 0.0;
  for (const auto& d : t.acts) best = std::max(best, static_cast<double>(t.joint_of(p, d)));
  return best;
}

inline double cp(const Table& t, const std::string& p) {
  double best = 0.0;
  for (const auto& d : t.acts)
    best = std::max(best, static_cast<double>(t.joint_of(p, d)) /
                              static_cast<double>(t.act_count.at(d)));
  return best;
}

inline double ent(const Table& t, const std::string& p) {
  double np = static_cast<double>(t.phrase_total(p));
  double sum = 0.0;
  for (const auto& d : t.acts) sum -= xlx(static_cast<double>(t.joint_of(p, d)) / np);
  return sum;
}

inline double s(const Table& t, const std::string& p) {
  double np = static_cast<double>(t.phrase_total(p));
  double U = static_cast<double>(t.total);
  double sum = 0.0;
  for (const auto& d : t.acts) {
    double pdp = static_cast<double>(t.joint_of(p, d)) / np;
    double pd = static_cast<double>(t.act_count.at(d)) / U;
    if (pdp > 0.0) sum += pdp * (std::log2(pdp) - std::log2(pd));
  }
  return sum;
}

inline double mi(const Table& t, const std::string& p) {
  double U = static_cast<double>(t.total);
  return (static_cast<double>(t.phrase_total(p)) / U) * s(t, p);
}

inline double ttest(const Table& t, const std::string& p) {
  double D = static_cast<double>(t.acts.size());
  double U = static_cast<double>(t.total);
  double np = static_cast<double>(t.phrase_total(p));
  double npbar = U - np;
  if (npbar == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& d : t.acts) {
    double a = D * static_cast<double>(t.joint_of(p, d)) - np;
    double b = D * static_cast<double>(t.act_count.at(d)) - U;
    double denom = a * a + b * b;
    if (denom == 0.0) continue;  // the implementation skips these terms too
    sum += (D * D - D) / denom;
  }
  return npbar * std::sqrt(sum);
}

// The formula as printed (P(p)-weighted joint terms), not textbook
// information gain.
inline double ig(const Table& t, const std::string& p) {
  double U = static_cast<double>(t.total);
  double Pp = static_cast<double>(t.phrase_total(p)) / U;
  double Ppbar = 1.0 - Pp;
  double sum = 0.0;
  for (const auto& d : t.acts) {
    double Pdp = static_cast<double>(t.joint_of(p, d)) / U;
    double Pdpbar =
        static_cast<double>(t.act_count.at(d) - t.joint_of(p, d)) / U;
    double Pd = static_cast<double>(t.act_count.at(d)) / U;
    sum += Pp * xlx(Pdp) + Ppbar * xlx(Pdpbar) - xlx(Pd);
  }
  return sum;
}

/// Textbook information gain H(D) - P(p)H(D|p) - P(pbar)H(D|pbar), for
/// comparison against the printed formula only.
inline double ig_textbook(const Table& t, const std::string& p) {
  double U = static_cast<double>(t.total);
  double np = static_cast<double>(t.phrase_total(p));
  double npbar = U - np;
  double hd = 0.0, hdp = 0.0, hdpbar = 0.0;
  for (const auto& d : t.acts) {
    hd -= xlx(static_cast<double>(t.act_count.at(d)) / U);
    if (np > 0.0) hdp -= xlx(static_cast<double>(t.joint_of(p, d)) / np);
    if (npbar > 0.0)
      hdpbar -= xlx(static_cast<double>(t.act_count.at(d) - t.joint_of(p, d)) / npbar);
  }
  return hd - (np / U) * hdp - (npbar / U) * hdpbar;
}

/// Deviation via the definition: for each candidate act, count utterances
/// where the rule "p IFF d*" fails, one penalty point each.
inline double deviation(const dact::Corpus& corpus, const dact::Phrase& p) {
  std::set<std::string> acts;
  corpus.for_each_utterance([&](const dact::Utterance& u) { acts.insert(u.gold_act); });
  double best = std::numeric_limits<double>::infinity();
  for (const auto& dstar : acts) {
    double penalty = 0.0;
    corpus.for_each_utterance([&](const dact::Utterance& u) {
      bool has = naive_contains(u.tokens, p.tokens);
      bool is_d = u.gold_act == dstar;
      if (has != is_d) penalty += 1.0;  // unsound (has, not d*) or incomplete (d*, no p)
    });
    best = std::min(best, penalty);
  }
  return best;
}

inline double dcp(const Table& t, const std::string& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& dstar : t.acts) {
    double incomplete =
        static_cast<double>(t.act_count.at(dstar) - t.joint_of(p, dstar)) /
        static_cast<double>(t.act_count.at(dstar));
    double unsound = 0.0;
    for (const auto& d : t.acts)
      if (d != dstar)
        unsound += static_cast<double>(t.joint_of(p, d)) /
                   static_cast<double>(t.act_count.at(d));
    best = std::min(best, incomplete + unsound);
  }
  return best;
}

inline double score(const Table& t, const dact::Corpus& corpus, const dact::Phrase& p,
                    dact::MetricId m) {
  switch (m) {
    case dact::MetricId::COOC: return cooc(t, p.text());
    case dact::MetricId::CP: return cp(t, p.text());
    case dact::MetricId::ENT: return ent(t, p.text());
    case dact::MetricId::S: return s(t, p.text());
    case dact::MetricId::MI: return mi(t, p.text());
    case dact::MetricId::TTEST: return ttest(t, p.text());
    case dact::MetricId::IG: return ig(t, p.text());
    case dact::MetricId::D: return deviation(corpus, p);
    case dact::MetricId::DCP: return dcp(t, p.text());
  }
  return 0.0;
}

/// Small random corpora for property tests: <= max_utts utterances,
/// <= n_acts acts, vocab <= vocab_size tokens, seed-controlled.
inline dact::Corpus random_corpus(std::uint64_t seed, std::size_t max_utts = 50,
                                  std::size_t n_acts = 5, std::size_t vocab_size = 20) {
  dact::Rng rng(seed);
  dact::Corpus corpus;
  std::size_t n = 4 + rng.below(max_utts - 3);
  std::size_t acts = 2 + rng.below(n_acts - 1);
  std::size_t utts_left = n;
  std::size_t dialogue_no = 0;
  while (utts_left > 0) {
    dact::Dialogue d;
    d.id = "d" + std::to_string(dialogue_no++);
    std::size_t len = std::min<std::size_t>(utts_left, 1 + rng.below(8));
    for (std::size_t t = 0; t < len; ++t) {
      dact::Utterance u;
      u.dialogue_id = d.id;
      u.turn_index = static_cast<std::uint32_t>(t);
      u.speaker = rng.below(2) == 0 ? "A" : "B";
      u.gold_act = "act" + std::to_string(rng.below(acts));
      std::size_t n_tokens = 1 + rng.below(6);
      for (std::size_t k = 0; k < n_tokens; ++k)
        u.tokens.push_back("t" + std::to_string(rng.below(vocab_size)));
      d.utterances.push_back(std::move(u));
    }
    utts_left -= len;
    corpus.dialogues.push_back(std::move(d));
  }
  corpus.rebuild_inventory();
  return corpus;
}

}  // namespace oracle
