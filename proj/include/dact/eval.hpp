#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dact/corpus.hpp"
#include "dact/counts.hpp"
#include "dact/filter.hpp"
#include "dact/metrics.hpp"
#include "dact/tbl.hpp"
#include "dact/util.hpp"

namespace dact {

/// Gold tags in flattened corpus order.
inline std::vector<std::string> gold_tags(const Corpus& corpus) {
  std::vector<std::string> out;
  out.reserve(corpus.utterance_count());
  corpus.for_each_utterance([&](const Utterance& u) { out.push_back(u.gold_act); });
  return out;
}

/// Fraction of utterances where predicted equals gold.
inline double accuracy(std::span<const std::string> predicted,
                       std::span<const std::string> gold) {
  if (predicted.size() != gold.size())
    throw DataError("predicted and gold tag counts differ (" +
                    std::to_string(predicted.size()) + " vs " + std::to_string(gold.size()) +
                    ")");
  if (predicted.empty()) throw DataError("cannot compute accuracy of zero utterances");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == gold[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

/// Accuracy per dialogue, in corpus order (the sampling unit for
/// significance tests).
inline std::vector<double> per_dialogue_accuracy(const Corpus& corpus,
                                                 std::span<const std::string> predicted) {
  if (predicted.size() != corpus.utterance_count())
    throw DataError("predicted tag count does not match corpus");
  std::vector<double> out;
  out.reserve(corpus.dialogues.size());
  std::size_t pos = 0;
  for (const auto& d : corpus.dialogues) {
    std::size_t correct = 0;
    for (const auto& u : d.utterances)
      if (predicted[pos++] == u.gold_act) ++correct;
    out.push_back(static_cast<double>(correct) / static_cast<double>(d.utterances.size()));
  }
  return out;
}

struct SignificanceReport {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  bool significant_at_05 = false;
};

/// Two-sided Welch t test with the Welch-Satterthwaite degrees of freedom.
inline SignificanceReport welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw DataError("t test requires at least 2 observations per sample");
  auto mean_var = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair<double, double>{mean, ss / static_cast<double>(x.size() - 1)};
  };
  auto [mean_a, var_a] = mean_var(a);
  auto [mean_b, var_b] = mean_var(b);
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  double se2 = var_a / na + var_b / nb;
  if (se2 <= 0.0)
    throw DataError("degenerate variance: both samples are constant, t test undefined");

  SignificanceReport r;
  r.t_statistic = (mean_a - mean_b) / std::sqrt(se2);
  r.degrees_of_freedom = se2 * se2 /
                         ((var_a / na) * (var_a / na) / (na - 1.0) +
                          (var_b / nb) * (var_b / nb) / (nb - 1.0));
  boost::math::students_t dist(r.degrees_of_freedom);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic)));
  r.significant_at_05 = r.p_value < 0.05;
  return r;
}

// --- synthetic corpora ------------------------------------------------------

struct SynthConfig {
  std::uint32_t n_dialogues = 20;
  std::uint32_t n_acts = 4;          // >= 2
  double cue_strength = 1.0;         // fraction of utterances carrying their act's cue
  std::uint32_t noise_vocab = 20;    // shared noise vocabulary size
  std::uint64_t seed = 0;
  std::uint32_t min_utterances = 8;  // per dialogue
  std::uint32_t max_utterances = 14;
};

/// The planted cue bigram for act k.
inline Phrase synthetic_cue(std::uint32_t act_index) {
  std::string k = std::to_string(act_index);
  return Phrase{{"cue" + k + "a", "cue" + k + "b"}};
}

inline std::string synthetic_act_label(std::uint32_t act_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "act%02u", act_index);
  return buf;
}

/// Deterministic planted-cue corpus: each act has a unique cue bigram
/// emitted in a cue_strength fraction of its utterances, padded with tokens
/// from a shared noise vocabulary; acts follow a fixed first-order chain and
/// two speakers alternate with occasional repeats.
inline Corpus gen_synthetic(const SynthConfig& cfg) {
  if (cfg.n_acts < 2) throw DataError("synthetic corpus needs at least 2 acts");
  if (cfg.n_dialogues < 1) throw DataError("synthetic corpus needs at least 1 dialogue");
  if (!(cfg.cue_strength >= 0.0 && cfg.cue_strength <= 1.0))
    throw DataError("cue strength must be in [0,1]");
  if (cfg.min_utterances < 1 || cfg.max_utterances < cfg.min_utterances)
    throw DataError("bad utterances-per-dialogue range");

  Rng rng(cfg.seed);
  Corpus corpus;
  int id_width = static_cast<int>(std::to_string(cfg.n_dialogues - 1).size());

  for (std::uint32_t di = 0; di < cfg.n_dialogues; ++di) {
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "d%0*u", id_width, di);
    Dialogue dialogue;
    dialogue.id = idbuf;

    std::uint32_t n_utts =
        cfg.min_utterances +
        static_cast<std::uint32_t>(rng.below(cfg.max_utterances - cfg.min_utterances + 1));
    std::uint32_t act = static_cast<std::uint32_t>(rng.below(cfg.n_acts));
    std::string speaker = rng.below(2) == 0 ? "A" : "B";

    for (std::uint32_t t = 0; t < n_utts; ++t) {
      if (t > 0) {
        double r = rng.real();
        if (r < 0.5)
          act = (act + 1) % cfg.n_acts;
        else if (r >= 0.65)
          act = static_cast<std::uint32_t>(rng.below(cfg.n_acts));
        // else: stay on the same act
        if (rng.real() >= 0.15) speaker = (speaker == "A") ? "B" : "A";
      }

      std::vector<std::string> tokens;
      std::uint32_t n_noise =
          cfg.noise_vocab > 0 ? 3 + static_cast<std::uint32_t>(rng.below(6)) : 0;
      for (std::uint32_t i = 0; i < n_noise; ++i)
        tokens.push_back("w" + std::to_string(rng.below(cfg.noise_vocab)));
      if (rng.real() < cfg.cue_strength) {
        Phrase cue = synthetic_cue(act);
        std::size_t pos = static_cast<std::size_t>(rng.below(tokens.size() + 1));
        tokens.insert(tokens.begin() + pos, cue.tokens.begin(), cue.tokens.end());
      }
      if (tokens.empty()) tokens.push_back("uh");

      Utterance u;
      u.dialogue_id = dialogue.id;
      u.turn_index = t;
      u.speaker = speaker;
      u.gold_act = synthetic_act_label(act);
      u.tokens = std::move(tokens);
      dialogue.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(dialogue));
  }
  corpus.rebuild_inventory();
  return corpus;
}

// --- experiment grid --------------------------------------------------------

struct Method {
  enum class Kind { Lit, All, Metric };
  Kind kind = Kind::All;
  MetricId metric = MetricId::COOC;  // meaningful only for Kind::Metric

  static Method lit() { return {Kind::Lit, MetricId::COOC}; }
  static Method all() { return {Kind::All, MetricId::COOC}; }
  static Method of(MetricId m) { return {Kind::Metric, m}; }

  std::string_view name() const {
    switch (kind) {
      case Kind::Lit: return "lit";
      case Kind::All: return "all";
      case Kind::Metric: return metric_name(metric);
    }
    return "?";
  }

  /// Canonical report order: lit, all, then the metrics in table order.
  int order() const {
    if (kind == Kind::Lit) return 0;
    if (kind == Kind::All) return 1;
    for (std::size_t i = 0; i < kAllMetrics.size(); ++i)
      if (kAllMetrics[i] == metric) return static_cast<int>(i) + 2;
    return 99;
  }

  bool operator==(const Method& o) const {
    return kind == o.kind && (kind != Kind::Metric || metric == o.metric);
  }
};

inline std::optional<Method> method_from_name(std::string_view name) {
  if (name == "lit") return Method::lit();
  if (name == "all") return Method::all();
  if (auto m = metric_from_name(name)) return Method::of(*m);
  return std::nullopt;
}

enum class SweepFilter { None, Basic, Modified };

inline std::string_view sweep_filter_name(SweepFilter f) {
  switch (f) {
    case SweepFilter::None: return "none";
    case SweepFilter::Basic: return "basic";
    case SweepFilter::Modified: return "modified";
  }
  return "?";
}

inline std::optional<SweepFilter> sweep_filter_from_name(std::string_view name) {
  if (name == "none") return SweepFilter::None;
  if (name == "basic") return SweepFilter::Basic;
  if (name == "modified") return SweepFilter::Modified;
  return std::nullopt;
}

struct ExperimentResult {
  Method method;
  SweepFilter filter = SweepFilter::None;
  double cutoff_percent = 100.0;
  std::uint64_t phrase_count = 0;
  double heldout_accuracy = 0.0;
  std::vector<double> per_dialogue_accuracy;
};

struct SweepConfig {
  std::vector<Method> methods;
  std::vector<double> cutoffs = {100.0};          // percents, for metric methods
  std::vector<SweepFilter> filters = {SweepFilter::None};
  TblConfig tbl;
  std::size_t max_phrase_len = 3;
  std::vector<Phrase> lit_phrases;                // required when methods include lit
  unsigned threads = 1;
};

/// Runs the (method x filter x cutoff) grid: rank on train, optionally
/// filter, cut to ceil(|ALL| * percent / 100) phrases (capping at the
/// filtered size), train the tagger, tag heldout. The ALL and LIT baselines
/// each produce a single unranked row. Rows come back in canonical order
/// regardless of how the grid was listed.
inline std::vector<ExperimentResult> run_sweep(const Corpus& train_corpus,
                                               const Corpus& heldout, const SweepConfig& cfg) {
  if (train_corpus.utterance_count() == 0 || heldout.utterance_count() == 0)
    throw DataError("sweep needs non-empty train and heldout corpora");
  for (double c : cfg.cutoffs)
    if (!(c > 0.0 && c <= 100.0)) throw DataError("cutoff percent must be in (0,100]");

  std::vector<Phrase> all_phrases = extract_phrases(train_corpus, cfg.max_phrase_len);
  PhraseTable table = build_table(train_corpus, all_phrases);
  auto gold = gold_tags(heldout);

  TblConfig tbl = cfg.tbl;
  tbl.threads = cfg.threads;

  auto evaluate = [&](std::span<const Phrase> phrase_set) {
    TaggerModel model = train(train_corpus, phrase_set, tbl);
    auto predicted = apply_rules(model, heldout);
    return std::pair<double, std::vector<double>>{
        accuracy(predicted, gold), per_dialogue_accuracy(heldout, predicted)};
  };

  std::vector<ExperimentResult> results;
  for (const Method& method : cfg.methods) {
    if (method.kind == Method::Kind::All) {
      auto [acc, per_dlg] = evaluate(all_phrases);
      results.push_back(ExperimentResult{method, SweepFilter::None, 100.0, all_phrases.size(),
                                         acc, std::move(per_dlg)});
      continue;
    }
    if (method.kind == Method::Kind::Lit) {
      if (cfg.lit_phrases.empty())
        throw DataError("lit baseline requested without a phrase list");
      auto [acc, per_dlg] = evaluate(cfg.lit_phrases);
      results.push_back(ExperimentResult{method, SweepFilter::None, 100.0,
                                         cfg.lit_phrases.size(), acc, std::move(per_dlg)});
      continue;
    }

    auto ranked = rank_phrases(table, all_phrases, method.metric, cfg.threads);
    for (SweepFilter filter : cfg.filters) {
      std::vector<RankedPhrase> candidate_list;
      if (filter == SweepFilter::None)
        candidate_list = ranked;
      else
        candidate_list = lexical_filter(
            ranked, filter == SweepFilter::Basic ? FilterMode::BASIC : FilterMode::MODIFIED);

      for (double percent : cfg.cutoffs) {
        // Percent is taken of the full unfiltered list; a shorter filtered
        // list just ends the curve early.
        std::size_t want = cutoff_count(all_phrases.size(), percent);
        std::size_t take = std::min(want, candidate_list.size());
        std::vector<Phrase> phrase_set;
        phrase_set.reserve(take);
        for (std::size_t i = 0; i < take; ++i)
          phrase_set.push_back(candidate_list[i].phrase);
        auto [acc, per_dlg] = evaluate(phrase_set);
        results.push_back(ExperimentResult{method, filter, percent, take, acc,
                                           std::move(per_dlg)});
      }
    }
  }

  std::sort(results.begin(), results.end(), [](const ExperimentResult& a,
                                               const ExperimentResult& b) {
    if (a.method.order() != b.method.order()) return a.method.order() < b.method.order();
    if (a.filter != b.filter) return static_cast<int>(a.filter) < static_cast<int>(b.filter);
    return a.cutoff_percent < b.cutoff_percent;
  });
  return results;
}

// --- report CSV -------------------------------------------------------------

inline void emit_report(std::ostream& out, std::span<const ExperimentResult> results) {
  out << "method,filter,cutoff_percent,phrase_count,accuracy\n";
  for (const auto& r : results)
    out << r.method.name() << ',' << sweep_filter_name(r.filter) << ','
        << format_double(r.cutoff_percent) << ',' << r.phrase_count << ','
        << format_double(r.heldout_accuracy) << '\n';
}

/// Welch t test of every grid row against the ALL baseline row, written as
/// CSV. Rows whose per-dialogue accuracies are constant on both sides have
/// no defined statistic and are marked undefined.
inline void emit_significance(std::ostream& out, std::span<const ExperimentResult> results) {
  const ExperimentResult* base = nullptr;
  for (const auto& r : results)
    if (r.method.kind == Method::Kind::All) {
      base = &r;
      break;
    }
  if (!base) throw DataError("significance output requires the all baseline in the grid");
  out << "method,filter,cutoff_percent,vs,t,df,p,significant_at_05\n";
  for (const auto& r : results) {
    if (&r == base) continue;
    out << r.method.name() << ',' << sweep_filter_name(r.filter) << ','
        << format_double(r.cutoff_percent) << ",all,";
    try {
      auto rep = welch_t_test(r.per_dialogue_accuracy, base->per_dialogue_accuracy);
      out << format_double(rep.t_statistic) << ',' << format_double(rep.degrees_of_freedom)
          << ',' << format_double(rep.p_value) << ','
          << (rep.significant_at_05 ? "yes" : "no") << '\n';
    } catch (const DataError&) {
      out << "nan,nan,nan,undefined\n";
    }
  }
}

inline std::vector<ExperimentResult> parse_report(std::istream& in) {
  std::vector<ExperimentResult> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "method,filter,cutoff_percent,phrase_count,accuracy")
        throw ParseError(lineno, "unexpected report header");
      header_seen = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 5) throw ParseError(lineno, "expected 5 comma-separated fields");
    ExperimentResult r;
    auto method = method_from_name(fields[0]);
    if (!method) throw ParseError(lineno, "unknown method '" + fields[0] + "'");
    r.method = *method;
    auto filter = sweep_filter_from_name(fields[1]);
    if (!filter) throw ParseError(lineno, "unknown filter '" + fields[1] + "'");
    r.filter = *filter;
    r.cutoff_percent = parse_double(fields[2], lineno);
    r.phrase_count = parse_u64(fields[3], lineno);
    r.heldout_accuracy = parse_double(fields[4], lineno);
    out.push_back(std::move(r));
  }
  if (!header_seen) throw DataError("report file missing header");
  return out;
}

/// LIT phrase list: one phrase per line, tokens space-separated.
inline std::vector<Phrase> parse_phrase_list(std::istream& in) {
  std::vector<Phrase> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    out.push_back(Phrase{std::move(tokens)});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace dact
