#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dact/corpus.hpp"
#include "dact/util.hpp"

namespace dact {

/// A contiguous token sequence. Phrase identity is the exact token
/// sequence post-clustering; tokens never contain whitespace, so the
/// space-joined text is a faithful key.
struct Phrase {
  std::vector<std::string> tokens;

  Phrase() = default;
  explicit Phrase(std::vector<std::string> t) : tokens(std::move(t)) {}

  /// Builds from space-separated text ("see you").
  static Phrase from_text(std::string_view text) {
    Phrase p{split_ws(text)};
    if (p.tokens.empty()) throw DataError("empty phrase");
    return p;
  }

  std::string text() const { return join(tokens, " "); }
  std::size_t size() const { return tokens.size(); }

  bool operator==(const Phrase& other) const { return tokens == other.tokens; }
  bool operator<(const Phrase& other) const { return tokens < other.tokens; }
};

/// True iff phrase.tokens occurs as a contiguous run in utterance tokens.
inline bool contains(std::span<const std::string> utterance_tokens, const Phrase& phrase) {
  if (phrase.tokens.empty() || phrase.tokens.size() > utterance_tokens.size()) return false;
  auto it = std::search(utterance_tokens.begin(), utterance_tokens.end(),
                        phrase.tokens.begin(), phrase.tokens.end());
  return it != utterance_tokens.end();
}

inline bool contains(const Utterance& u, const Phrase& phrase) {
  return contains(std::span<const std::string>(u.tokens), phrase);
}

/// Every contiguous n-gram of length 1..max_len in the corpus, deduplicated
/// and returned in canonical (token sequence) order.
inline std::vector<Phrase> extract_phrases(const Corpus& corpus, std::size_t max_len = 3) {
  if (max_len < 1) throw DataError("max phrase length must be >= 1");
  std::unordered_set<std::string> seen;
  std::vector<Phrase> out;
  corpus.for_each_utterance([&](const Utterance& u) {
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
      std::string key;
      for (std::size_t len = 1; len <= max_len && i + len <= u.tokens.size(); ++len) {
        if (len > 1) key += ' ';
        key += u.tokens[i + len - 1];
        if (seen.insert(key).second) {
          Phrase p;
          p.tokens.assign(u.tokens.begin() + i, u.tokens.begin() + i + len);
          out.push_back(std::move(p));
        }
      }
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

/// Utterance-level cooccurrence counts: #(p&d) is the number of utterances
/// labeled d that contain p at least once. Immutable once built; derived
/// probabilities are computed on demand from the exact integer counts.
class PhraseTable {
 public:
  struct PhraseStats {
    std::span<const std::uint32_t> joint;  // #(p&d) per act, inventory order
    std::uint64_t total = 0;               // #(p)
  };

  /// Counts `phrases` over `corpus`. Phrases that never occur are dropped.
  static PhraseTable build(const Corpus& corpus, std::span<const Phrase> phrases) {
    if (corpus.utterance_count() == 0) throw DataError("cannot build table from empty corpus");
    if (phrases.empty()) throw DataError("cannot build table from empty phrase set");

    PhraseTable t;
    t.acts_ = corpus.act_inventory;
    t.act_count_.assign(t.acts_.size(), 0);

    std::unordered_map<std::string, std::uint32_t> want;  // phrase text -> staging row
    want.reserve(phrases.size() * 2);
    std::size_t max_len = 0;
    for (const auto& p : phrases) {
      if (p.tokens.empty()) throw DataError("empty phrase in input set");
      max_len = std::max(max_len, p.size());
      want.emplace(p.text(), static_cast<std::uint32_t>(want.size()));
    }
    const std::size_t n_acts = t.acts_.size();
    std::vector<std::uint32_t> joint(want.size() * n_acts, 0);

    std::unordered_set<std::string> in_utterance;  // distinct n-grams of one utterance
    corpus.for_each_utterance([&](const Utterance& u) {
      ++t.total_utterances_;
      std::size_t act = t.act_index(u.gold_act);
      ++t.act_count_[act];
      in_utterance.clear();
      for (std::size_t i = 0; i < u.tokens.size(); ++i) {
        std::string key;
        for (std::size_t len = 1; len <= max_len && i + len <= u.tokens.size(); ++len) {
          if (len > 1) key += ' ';
          key += u.tokens[i + len - 1];
          auto it = want.find(key);
          if (it != want.end() && in_utterance.insert(key).second)
            ++joint[it->second * n_acts + act];
        }
      }
    });

    // Compact: keep only phrases that occurred, in canonical order.
    std::vector<std::pair<std::string, std::uint32_t>> present;
    for (const auto& [text, row] : want) {
      std::uint64_t total = 0;
      for (std::size_t a = 0; a < n_acts; ++a) total += joint[row * n_acts + a];
      if (total > 0) present.emplace_back(text, row);
    }
    std::sort(present.begin(), present.end());
    t.joint_.reserve(present.size() * n_acts);
    t.phrase_total_.reserve(present.size());
    for (const auto& [text, row] : present) {
      t.index_.emplace(text, static_cast<std::uint32_t>(t.phrase_total_.size()));
      std::uint64_t total = 0;
      for (std::size_t a = 0; a < n_acts; ++a) {
        t.joint_.push_back(joint[row * n_acts + a]);
        total += joint[row * n_acts + a];
      }
      t.phrase_total_.push_back(total);
    }
    return t;
  }

  std::uint64_t utterance_count() const { return total_utterances_; }  // U
  const std::vector<std::string>& acts() const { return acts_; }
  std::size_t act_count_of(std::size_t act_idx) const { return act_count_[act_idx]; }

  std::size_t act_index(std::string_view act) const {
    auto it = std::lower_bound(acts_.begin(), acts_.end(), act);
    if (it == acts_.end() || *it != act) throw DataError("unknown act '" + std::string(act) + "'");
    return static_cast<std::size_t>(it - acts_.begin());
  }

  bool has_phrase(const Phrase& p) const { return index_.count(p.text()) > 0; }

  /// Joint counts and total for a phrase; throws if the phrase was never
  /// counted (scores are never silently zero).
  PhraseStats stats(const Phrase& p) const {
    auto it = index_.find(p.text());
    if (it == index_.end()) throw DataError("phrase '" + p.text() + "' not in table");
    return {std::span<const std::uint32_t>(joint_.data() + it->second * acts_.size(),
                                           acts_.size()),
            phrase_total_[it->second]};
  }

  std::size_t phrase_count() const { return phrase_total_.size(); }

  /// All counted phrases in canonical order.
  std::vector<Phrase> phrases() const {
    std::vector<std::pair<std::uint32_t, std::string>> rows;
    rows.reserve(index_.size());
    for (const auto& [text, row] : index_) rows.emplace_back(row, text);
    std::sort(rows.begin(), rows.end());
    std::vector<Phrase> out;
    out.reserve(rows.size());
    for (auto& [row, text] : rows) out.push_back(Phrase::from_text(text));
    return out;
  }

  /// Debug/oracle dump: TSV of phrase, act, count for every nonzero cell.
  void dump(std::ostream& out) const {
    for (const auto& p : phrases()) {
      auto s = stats(p);
      for (std::size_t a = 0; a < acts_.size(); ++a)
        if (s.joint[a] > 0) out << p.text() << '\t' << acts_[a] << '\t' << s.joint[a] << '\n';
    }
  }

 private:
  std::uint64_t total_utterances_ = 0;
  std::vector<std::string> acts_;
  std::vector<std::uint64_t> act_count_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::uint32_t> joint_;        // row-major [phrase][act]
  std::vector<std::uint64_t> phrase_total_;
};

/// Spec name for PhraseTable::build.
inline PhraseTable build_table(const Corpus& corpus, std::span<const Phrase> phrases) {
  return PhraseTable::build(corpus, phrases);
}

}  // namespace dact
