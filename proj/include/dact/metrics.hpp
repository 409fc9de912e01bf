#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dact/counts.hpp"
#include "dact/util.hpp"

namespace dact {

enum class MetricId { COOC, CP, ENT, S, MI, TTEST, IG, D, DCP };

inline constexpr std::array<MetricId, 9> kAllMetrics = {
    MetricId::COOC, MetricId::CP,  MetricId::ENT, MetricId::TTEST, MetricId::MI,
    MetricId::S,    MetricId::IG,  MetricId::D,   MetricId::DCP};

inline std::string_view metric_name(MetricId m) {
  switch (m) {
    case MetricId::COOC: return "cooc";
    case MetricId::CP: return "cp";
    case MetricId::ENT: return "ent";
    case MetricId::S: return "s";
    case MetricId::MI: return "mi";
    case MetricId::TTEST: return "ttest";
    case MetricId::IG: return "ig";
    case MetricId::D: return "d";
    case MetricId::DCP: return "dcp";
  }
  return "?";
}

inline std::optional<MetricId> metric_from_name(std::string_view name) {
  for (MetricId m : kAllMetrics)
    if (metric_name(m) == name) return m;
  return std::nullopt;
}

/// Sort direction: COOC, CP, S, MI, TTEST, IG rank larger scores first;
/// ENT, D, DCP are penalty-style and rank smaller scores first.
inline bool larger_is_better(MetricId m) {
  switch (m) {
    case MetricId::ENT:
    case MetricId::D:
    case MetricId::DCP:
      return false;
    default:
      return true;
  }
}

struct ScoreDiag {
  bool ttest_term_skipped = false;  // a per-act denominator was exactly 0
};

namespace detail {

inline double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

/// Per-act scoring terms shared by score_phrase and selected_act. For the
/// extremizing metrics (COOC, CP, D, DCP) the term is the expression being
/// extremized; for the summing metrics it is the per-act summand.
struct TermContext {
  const PhraseTable& table;
  PhraseTable::PhraseStats stats;
  double U, P_p, P_pbar;
  std::uint64_t n_pbar;
  std::size_t n_acts;

  TermContext(const PhraseTable& t, const Phrase& p)
      : table(t),
        stats(t.stats(p)),
        U(static_cast<double>(t.utterance_count())),
        P_p(static_cast<double>(stats.total) / static_cast<double>(t.utterance_count())),
        P_pbar(0),
        n_pbar(t.utterance_count() - stats.total),
        n_acts(t.acts().size()) {
    P_pbar = static_cast<double>(n_pbar) / U;
  }

  double joint(std::size_t a) const { return static_cast<double>(stats.joint[a]); }
  double act_total(std::size_t a) const { return static_cast<double>(table.act_count_of(a)); }
  double p_given_d(std::size_t a) const { return joint(a) / act_total(a); }
  double d_given_p(std::size_t a) const {
    return joint(a) / static_cast<double>(stats.total);
  }
  double p_d(std::size_t a) const { return act_total(a) / U; }
  double p_dp(std::size_t a) const { return joint(a) / U; }
  double p_dpbar(std::size_t a) const { return (act_total(a) - joint(a)) / U; }

  double term(MetricId m, std::size_t a, ScoreDiag* diag) const {
    switch (m) {
      case MetricId::COOC:
        return joint(a);
      case MetricId::CP:
        return p_given_d(a);
      case MetricId::ENT:
        return -xlog2x(d_given_p(a));
      case MetricId::S: {
        double pdp = d_given_p(a);
        return pdp > 0.0 ? pdp * (std::log2(pdp) - std::log2(p_d(a))) : 0.0;
      }
      case MetricId::MI:
        return P_p * term(MetricId::S, a, diag);
      case MetricId::TTEST: {
        double nd = static_cast<double>(n_acts);
        double a1 = nd * joint(a) - static_cast<double>(stats.total);
        double a2 = nd * act_total(a) - U;
        double denom = a1 * a1 + a2 * a2;
        if (denom == 0.0) {
          if (diag) diag->ttest_term_skipped = true;
          return 0.0;
        }
        return (nd * nd - nd) / denom;
      }
      case MetricId::IG:
        return P_p * xlog2x(p_dp(a)) + P_pbar * xlog2x(p_dpbar(a)) - xlog2x(p_d(a));
      case MetricId::D:
        // deviation penalty with a as the candidate d*
        return (act_total(a) - joint(a)) + (static_cast<double>(stats.total) - joint(a));
      case MetricId::DCP: {
        double incomplete = (act_total(a) - joint(a)) / act_total(a);  // P(pbar|d*)
        double unsound = 0.0;
        for (std::size_t d = 0; d < n_acts; ++d)
          if (d != a) unsound += p_given_d(d);
        return incomplete + unsound;
      }
    }
    return 0.0;
  }
};

}  // namespace detail

/// Scores one phrase under one metric. All logs are base 2 with the
/// 0*log2(0) = 0 convention; a phrase in every utterance has TTEST 0.
inline double score_phrase(const PhraseTable& table, const Phrase& phrase, MetricId metric,
                           ScoreDiag* diag = nullptr) {
  detail::TermContext ctx(table, phrase);
  const std::size_t n = ctx.n_acts;
  switch (metric) {
    case MetricId::COOC:
    case MetricId::CP: {
      double best = -1.0;
      for (std::size_t a = 0; a < n; ++a) best = std::max(best, ctx.term(metric, a, diag));
      return best;
    }
    case MetricId::D:
    case MetricId::DCP: {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < n; ++a) best = std::min(best, ctx.term(metric, a, diag));
      return best;
    }
    case MetricId::TTEST: {
      if (ctx.n_pbar == 0) return 0.0;
      double sum = 0.0;
      for (std::size_t a = 0; a < n; ++a) sum += ctx.term(metric, a, diag);
      return static_cast<double>(ctx.n_pbar) * std::sqrt(sum);
    }
    case MetricId::MI: {
      // P(p) * S(p), multiplied once so the identity with S holds exactly
      double sum = 0.0;
      for (std::size_t a = 0; a < n; ++a) sum += ctx.term(MetricId::S, a, diag);
      return ctx.P_p * sum;
    }
    default: {  // ENT, S, IG: plain sums over acts
      double sum = 0.0;
      for (std::size_t a = 0; a < n; ++a) sum += ctx.term(metric, a, diag);
      return sum;
    }
  }
}

/// The dialogue act a phrase is selected for: the extremizing act for
/// COOC/CP/D/DCP, otherwise the act contributing most to the sum (for
/// TTEST, the per-act term inside the square root). Ties go to the act
/// earliest in the inventory.
inline std::string selected_act(const PhraseTable& table, const Phrase& phrase, MetricId metric) {
  detail::TermContext ctx(table, phrase);
  const bool minimize = (metric == MetricId::D || metric == MetricId::DCP);
  std::size_t best_act = 0;
  double best = ctx.term(metric, 0, nullptr);
  for (std::size_t a = 1; a < ctx.n_acts; ++a) {
    double t = ctx.term(metric, a, nullptr);
    if (minimize ? t < best : t > best) {
      best = t;
      best_act = a;
    }
  }
  return table.acts()[best_act];
}

struct RankedPhrase {
  Phrase phrase;
  double score = 0.0;
  std::string selected_act;  // d*
  std::uint32_t rank = 0;    // 1-based
  std::uint64_t freq = 0;    // #(p)
};

/// Scores and totally orders a phrase set. Primary key is the score in the
/// metric's better-first direction; ties break by larger frequency, then
/// fewer tokens, then phrase text. The order is a pure function of the set,
/// independent of input order and thread count.
inline std::vector<RankedPhrase> rank_phrases(const PhraseTable& table,
                                              std::span<const Phrase> phrases, MetricId metric,
                                              unsigned threads = 1) {
  std::vector<RankedPhrase> out(phrases.size());
  parallel_chunks(phrases.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      RankedPhrase& r = out[i];
      r.phrase = phrases[i];
      r.score = score_phrase(table, phrases[i], metric);
      r.selected_act = selected_act(table, phrases[i], metric);
      r.freq = table.stats(phrases[i]).total;
    }
  });
  const bool desc = larger_is_better(metric);
  std::sort(out.begin(), out.end(), [desc](const RankedPhrase& a, const RankedPhrase& b) {
    if (a.score != b.score) return desc ? a.score > b.score : a.score < b.score;
    if (a.freq != b.freq) return a.freq > b.freq;
    if (a.phrase.size() != b.phrase.size()) return a.phrase.size() < b.phrase.size();
    return a.phrase.tokens < b.phrase.tokens;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<std::uint32_t>(i + 1);
  return out;
}

/// Keeps the top ceil(N * percent / 100) entries.
inline std::vector<RankedPhrase> cutoff(std::span<const RankedPhrase> ranked, double percent) {
  if (ranked.empty()) throw DataError("cutoff on empty ranked list");
  if (!(percent > 0.0 && percent <= 100.0)) throw DataError("cutoff percent must be in (0,100]");
  auto keep = static_cast<std::size_t>(
      std::ceil(static_cast<double>(ranked.size()) * percent / 100.0));
  keep = std::min(keep, ranked.size());
  return std::vector<RankedPhrase>(ranked.begin(), ranked.begin() + keep);
}

/// Number of entries a percent cutoff keeps out of `total`.
inline std::size_t cutoff_count(std::size_t total, double percent) {
  auto keep =
      static_cast<std::size_t>(std::ceil(static_cast<double>(total) * percent / 100.0));
  return std::min(keep, total);
}

// --- ranked list TSV -------------------------------------------------------
// Columns: rank, metric, score, selected_act, freq, phrase. Scores use the
// shortest decimal that round-trips.

inline void write_ranked_tsv(std::ostream& out, std::span<const RankedPhrase> ranked,
                             std::string_view metric_label) {
  for (const auto& r : ranked)
    out << r.rank << '\t' << metric_label << '\t' << format_double(r.score) << '\t'
        << r.selected_act << '\t' << r.freq << '\t' << r.phrase.text() << '\n';
}

struct RankedFile {
  std::string metric;  // label column as read; empty file -> empty label
  std::vector<RankedPhrase> entries;
};

inline RankedFile read_ranked_tsv(std::istream& in) {
  RankedFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 6)
      throw ParseError(lineno, "expected 6 tab-separated fields, got " +
                                   std::to_string(fields.size()));
    RankedPhrase r;
    r.rank = static_cast<std::uint32_t>(parse_u64(fields[0], lineno));
    if (file.entries.empty())
      file.metric = fields[1];
    else if (fields[1] != file.metric)
      throw ParseError(lineno, "mixed metric labels in ranked list");
    r.score = parse_double(fields[2], lineno);
    r.selected_act = fields[3];
    r.freq = parse_u64(fields[4], lineno);
    r.phrase = Phrase::from_text(fields[5]);
    if (r.rank != file.entries.size() + 1)
      throw ParseError(lineno, "ranks must run 1..N in order");
    file.entries.push_back(std::move(r));
  }
  return file;
}

}  // namespace dact
