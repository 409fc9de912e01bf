#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dact/metrics.hpp"

namespace dact {

enum class FilterMode { BASIC, MODIFIED };

inline std::string_view filter_mode_name(FilterMode m) {
  return m == FilterMode::BASIC ? "basic" : "modified";
}

/// All contiguous token runs strictly shorter than the phrase.
inline std::vector<Phrase> proper_subphrases(const Phrase& phrase) {
  std::vector<Phrase> out;
  const std::size_t n = phrase.size();
  for (std::size_t len = 1; len < n; ++len)
    for (std::size_t i = 0; i + len <= n; ++i) {
      Phrase sub;
      sub.tokens.assign(phrase.tokens.begin() + i, phrase.tokens.begin() + i + len);
      out.push_back(std::move(sub));
    }
  return out;
}

struct FilterAudit {
  Phrase removed;
  Phrase blocker;  // best-ranked offending subphrase
  std::uint32_t removed_rank = 0;
  std::uint32_t blocker_rank = 0;
  std::string removed_act;
  std::string blocker_act;
};

/// Removes a phrase when a proper contiguous subphrase appears anywhere
/// higher in the input ranking; MODIFIED additionally requires the two to
/// be selected for the same dialogue act. Comparison is against the full
/// input list, not just survivors. Survivor order is preserved and ranks
/// are reassigned 1..M.
inline std::vector<RankedPhrase> lexical_filter(std::span<const RankedPhrase> ranked,
                                                FilterMode mode,
                                                std::vector<FilterAudit>* audit = nullptr) {
  struct Pos {
    std::uint32_t rank;
    const RankedPhrase* entry;
  };
  std::unordered_map<std::string, Pos> by_text;
  by_text.reserve(ranked.size() * 2);
  for (const auto& r : ranked) {
    if (mode == FilterMode::MODIFIED && r.selected_act.empty())
      throw DataError("modified filter requires selected_act on every entry (phrase '" +
                      r.phrase.text() + "')");
    by_text.emplace(r.phrase.text(), Pos{r.rank, &r});
  }

  std::vector<RankedPhrase> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) {
    const RankedPhrase* blocker = nullptr;
    for (const auto& sub : proper_subphrases(r.phrase)) {
      auto it = by_text.find(sub.text());
      if (it == by_text.end()) continue;
      if (it->second.rank >= r.rank) continue;
      if (mode == FilterMode::MODIFIED && it->second.entry->selected_act != r.selected_act)
        continue;
      if (!blocker || it->second.rank < blocker->rank) blocker = it->second.entry;
    }
    if (blocker) {
      if (audit)
        audit->push_back(FilterAudit{r.phrase, blocker->phrase, r.rank, blocker->rank,
                                     r.selected_act, blocker->selected_act});
    } else {
      out.push_back(r);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<std::uint32_t>(i + 1);
  return out;
}

/// Optional frequency-threshold pruning (no default thresholds). Keeps
/// entries with min_freq <= #(p) <= max_freq, reassigning ranks.
inline std::vector<RankedPhrase> frequency_prune(std::span<const RankedPhrase> ranked,
                                                 std::optional<std::uint64_t> min_freq,
                                                 std::optional<std::uint64_t> max_freq) {
  std::vector<RankedPhrase> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) {
    if (min_freq && r.freq < *min_freq) continue;
    if (max_freq && r.freq > *max_freq) continue;
    out.push_back(r);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<std::uint32_t>(i + 1);
  return out;
}

inline void write_filter_audit(std::ostream& out, std::span<const FilterAudit> audit) {
  for (const auto& a : audit)
    out << a.removed.text() << '\t' << a.blocker.text() << '\t' << a.removed_rank << '\t'
        << a.blocker_rank << '\t' << a.removed_act << '\t' << a.blocker_act << '\n';
}

}  // namespace dact
