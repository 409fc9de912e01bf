#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dact/counts.hpp"
#include "dact/util.hpp"

namespace dact {

// Rule condition classes. A template is a bitmask combination; the default
// inventory is each class alone plus the pairwise combinations.
inline constexpr std::uint8_t kCondPhrase = 1;
inline constexpr std::uint8_t kCondPrev = 2;
inline constexpr std::uint8_t kCondCos = 4;

inline std::vector<std::uint8_t> default_templates() {
  return {kCondPhrase, kCondPrev, kCondCos, kCondPhrase | kCondPrev,
          kCondPhrase | kCondCos, kCondPrev | kCondCos};
}

struct TblConfig {
  std::uint32_t threshold = 2;  // stop when the best net gain drops below this
  bool frozen_prev = false;     // read prev tags from the sweep-start snapshot
  unsigned threads = 1;
  std::vector<std::uint8_t> templates = default_templates();
};

/// Per-utterance features: phrases present, the preliminary tag of the
/// preceding utterance ("BOD" at turn 0), and the change-of-speaker bit.
struct FeatureView {
  std::vector<Phrase> phrase_hits;  // sorted
  std::string prev_tag;
  bool change_of_speaker = false;
};

struct TransformationRule {
  std::string from_tag;
  std::optional<Phrase> cond_phrase;
  std::optional<std::string> cond_prev;  // act label or "BOD"
  std::optional<bool> cond_cos;
  std::string to_tag;
};

struct TraceStep {
  std::int64_t net_gain = 0;
  double train_accuracy_after = 0.0;
};

struct TaggerModel {
  std::string default_tag;
  std::vector<std::string> acts;  // training inventory, sorted
  std::vector<TransformationRule> rules;
  std::vector<Phrase> phrase_set;
  std::uint64_t phrase_set_hash = 0;
  bool frozen_prev = false;
  std::vector<TraceStep> training_trace;  // parallel to rules
};

inline std::uint64_t phrase_set_hash(std::span<const Phrase> phrases) {
  std::vector<std::string> texts;
  texts.reserve(phrases.size());
  for (const auto& p : phrases) texts.push_back(p.text());
  std::sort(texts.begin(), texts.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : texts) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

/// Assigns default_tag to every utterance (flattened corpus order).
inline std::vector<std::string> initial_tag(const Corpus& corpus, const std::string& default_tag) {
  if (!std::binary_search(corpus.act_inventory.begin(), corpus.act_inventory.end(), default_tag))
    throw DataError("default tag '" + default_tag + "' not in act inventory");
  return std::vector<std::string>(corpus.utterance_count(), default_tag);
}

namespace detail {

// Flattened, integer-coded view of a corpus against a fixed phrase list.
struct TblData {
  std::vector<std::string> acts;           // sorted model inventory
  std::vector<Phrase> phrases;             // canonical sorted order
  std::vector<std::int32_t> gold;          // -1 for acts outside the inventory
  std::vector<std::uint8_t> cos;
  std::vector<std::uint32_t> dlg;          // dialogue index per utterance
  std::vector<std::vector<std::uint32_t>> hits;  // sorted phrase ids per utterance
  std::vector<std::vector<std::uint32_t>> occ;   // phrase id -> utterance positions

  std::size_t size() const { return gold.size(); }
  bool at_dialogue_start(std::size_t u) const { return u == 0 || dlg[u] != dlg[u - 1]; }

  std::int32_t act_id(std::string_view act) const {
    auto it = std::lower_bound(acts.begin(), acts.end(), act);
    if (it == acts.end() || *it != act) return -1;
    return static_cast<std::int32_t>(it - acts.begin());
  }
};

inline TblData make_tbl_data(const Corpus& corpus, std::span<const Phrase> phrase_set,
                             std::vector<std::string> acts, bool build_occ) {
  TblData d;
  d.acts = std::move(acts);
  d.phrases.assign(phrase_set.begin(), phrase_set.end());
  std::sort(d.phrases.begin(), d.phrases.end());
  d.phrases.erase(std::unique(d.phrases.begin(), d.phrases.end()), d.phrases.end());

  std::unordered_map<std::string, std::uint32_t> index;
  index.reserve(d.phrases.size() * 2);
  std::size_t max_len = 0;
  for (std::size_t i = 0; i < d.phrases.size(); ++i) {
    index.emplace(d.phrases[i].text(), static_cast<std::uint32_t>(i));
    max_len = std::max(max_len, d.phrases[i].size());
  }
  if (build_occ) d.occ.resize(d.phrases.size());

  std::uint32_t dlg_idx = 0;
  for (const auto& dialogue : corpus.dialogues) {
    const std::string* prev_speaker = nullptr;
    for (const auto& u : dialogue.utterances) {
      std::size_t pos = d.gold.size();
      d.gold.push_back(d.act_id(u.gold_act));
      d.cos.push_back(prev_speaker == nullptr || *prev_speaker != u.speaker ? 1 : 0);
      d.dlg.push_back(dlg_idx);
      prev_speaker = &u.speaker;

      std::vector<std::uint32_t> h;
      for (std::size_t i = 0; i < u.tokens.size(); ++i) {
        std::string key;
        for (std::size_t len = 1; len <= max_len && i + len <= u.tokens.size(); ++len) {
          if (len > 1) key += ' ';
          key += u.tokens[i + len - 1];
          auto it = index.find(key);
          if (it != index.end()) h.push_back(it->second);
        }
      }
      std::sort(h.begin(), h.end());
      h.erase(std::unique(h.begin(), h.end()), h.end());
      if (build_occ)
        for (std::uint32_t pid : h) d.occ[pid].push_back(static_cast<std::uint32_t>(pos));
      d.hits.push_back(std::move(h));
    }
    ++dlg_idx;
  }
  return d;
}

inline constexpr std::int32_t kNoPhrase = -1;
inline constexpr std::int32_t kNoPrev = -1;
inline constexpr std::int32_t kPrevBod = -2;
inline constexpr std::int8_t kNoCos = -1;

struct Cand {
  std::int32_t from = 0;
  std::int32_t to = 0;
  std::int32_t pid = kNoPhrase;
  std::int32_t prev = kNoPrev;  // kPrevBod for BOD, else act id
  std::int8_t cos = kNoCos;

  int cond_count() const {
    return (pid != kNoPhrase ? 1 : 0) + (prev != kNoPrev ? 1 : 0) + (cos != kNoCos ? 1 : 0);
  }
};

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ' ': out += "\\s"; break;
      case '"': out += "\\q"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s, std::size_t line) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw ParseError(line, "dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 's': out += ' '; break;
      case 'q': out += '"'; break;
      case 't': out += '\t'; break;
      default: throw ParseError(line, "unknown escape \\" + std::string(1, s[i]));
    }
  }
  return out;
}

inline std::string serialize_rule(const TransformationRule& r) {
  std::string out = "from=" + escape_field(r.from_tag);
  if (r.cond_phrase) {
    out += " phrase=\"";
    bool first = true;
    for (const auto& t : r.cond_phrase->tokens) {
      if (!first) out += ' ';
      out += escape_field(t);
      first = false;
    }
    out += '"';
  }
  if (r.cond_prev) out += " prev=" + escape_field(*r.cond_prev);
  if (r.cond_cos) out += std::string(" cos=") + (*r.cond_cos ? "t" : "f");
  out += " to=" + escape_field(r.to_tag);
  return out;
}

inline TransformationRule decode_cand(const Cand& c, const TblData& d) {
  TransformationRule r;
  r.from_tag = d.acts[static_cast<std::size_t>(c.from)];
  r.to_tag = d.acts[static_cast<std::size_t>(c.to)];
  if (c.pid != kNoPhrase) r.cond_phrase = d.phrases[static_cast<std::size_t>(c.pid)];
  if (c.prev == kPrevBod)
    r.cond_prev = std::string(kBeginOfDialogue);
  else if (c.prev != kNoPrev)
    r.cond_prev = d.acts[static_cast<std::size_t>(c.prev)];
  if (c.cos != kNoCos) r.cond_cos = (c.cos != 0);
  return r;
}

/// Net tagging gain of applying `c` once to `tags`, under the same sweep
/// semantics apply() uses. Does not mutate.
inline std::int64_t score_candidate(const Cand& c, const TblData& d,
                                    const std::vector<std::int32_t>& tags, bool frozen_prev) {
  auto delta = [&](std::size_t u) -> std::int64_t {
    if (d.gold[u] == c.to) return 1;
    if (d.gold[u] == c.from) return -1;
    return 0;
  };

  if (c.pid != kNoPhrase) {
    // Only utterances containing the phrase can fire; in-sweep prev
    // rewrites can only come from the immediately preceding occurrence.
    std::int64_t gain = 0;
    std::size_t last_pos = std::numeric_limits<std::size_t>::max();
    bool last_fired = false;
    for (std::uint32_t pos : d.occ[static_cast<std::size_t>(c.pid)]) {
      std::size_t u = pos;
      bool fire = tags[u] == c.from;
      if (fire && c.cos != kNoCos) fire = d.cos[u] == static_cast<std::uint8_t>(c.cos);
      if (fire && c.prev != kNoPrev) {
        std::int32_t prev_tag;
        if (d.at_dialogue_start(u))
          prev_tag = kPrevBod;
        else if (!frozen_prev && last_fired && last_pos == u - 1)
          prev_tag = c.to;
        else
          prev_tag = tags[u - 1];
        fire = prev_tag == c.prev;
      }
      if (fire) gain += delta(u);
      last_pos = u;
      last_fired = fire;
    }
    return gain;
  }

  std::int64_t gain = 0;
  bool prev_fired = false;
  for (std::size_t u = 0; u < d.size(); ++u) {
    bool fire = tags[u] == c.from;
    if (fire && c.cos != kNoCos) fire = d.cos[u] == static_cast<std::uint8_t>(c.cos);
    if (fire && c.prev != kNoPrev) {
      std::int32_t prev_tag;
      if (d.at_dialogue_start(u))
        prev_tag = kPrevBod;
      else if (!frozen_prev && prev_fired)
        prev_tag = c.to;
      else
        prev_tag = tags[u - 1];
      fire = prev_tag == c.prev;
    }
    if (fire) gain += delta(u);
    prev_fired = fire;
  }
  return gain;
}

/// Applies `c` in one left-to-right sweep, mutating tags. Returns the
/// realized net gain (matches score_candidate by construction).
inline std::int64_t apply_candidate(const Cand& c, const TblData& d,
                                    std::vector<std::int32_t>& tags, bool frozen_prev) {
  std::vector<std::int32_t> snapshot;
  if (frozen_prev) snapshot = tags;
  const std::vector<std::int32_t>& prev_src = frozen_prev ? snapshot : tags;

  std::int64_t gain = 0;
  for (std::size_t u = 0; u < d.size(); ++u) {
    if (tags[u] != c.from) continue;
    if (c.cos != kNoCos && d.cos[u] != static_cast<std::uint8_t>(c.cos)) continue;
    if (c.prev != kNoPrev) {
      std::int32_t prev_tag = d.at_dialogue_start(u) ? kPrevBod : prev_src[u - 1];
      if (prev_tag != c.prev) continue;
    }
    if (c.pid != kNoPhrase &&
        !std::binary_search(d.hits[u].begin(), d.hits[u].end(),
                            static_cast<std::uint32_t>(c.pid)))
      continue;
    tags[u] = c.to;
    if (d.gold[u] == c.to)
      ++gain;
    else if (d.gold[u] == c.from)
      --gain;
  }
  return gain;
}

}  // namespace detail

/// Feature views for every utterance under the given preliminary tags
/// (flattened corpus order).
inline std::vector<FeatureView> featurize(const Corpus& corpus, std::span<const Phrase> phrase_set,
                                          std::span<const std::string> tags) {
  if (tags.size() != corpus.utterance_count())
    throw DataError("tag assignment size does not match corpus");
  detail::TblData d = detail::make_tbl_data(corpus, phrase_set, corpus.act_inventory, false);
  std::vector<FeatureView> out(d.size());
  for (std::size_t u = 0; u < d.size(); ++u) {
    FeatureView& v = out[u];
    v.change_of_speaker = d.cos[u] != 0;
    v.prev_tag = d.at_dialogue_start(u) ? std::string(kBeginOfDialogue) : tags[u - 1];
    v.phrase_hits.reserve(d.hits[u].size());
    for (std::uint32_t pid : d.hits[u]) v.phrase_hits.push_back(d.phrases[pid]);
  }
  return out;
}

/// True iff the utterance's current tag equals from_tag and every present
/// condition holds.
inline bool rule_matches(const TransformationRule& rule, const FeatureView& view,
                         std::string_view current_tag) {
  if (current_tag != rule.from_tag) return false;
  if (rule.cond_phrase &&
      !std::binary_search(view.phrase_hits.begin(), view.phrase_hits.end(), *rule.cond_phrase))
    return false;
  if (rule.cond_prev && view.prev_tag != *rule.cond_prev) return false;
  if (rule.cond_cos && view.change_of_speaker != *rule.cond_cos) return false;
  return true;
}

/// Tags a corpus: default tag everywhere, then each rule swept in learned
/// order (dialogue by dialogue, ascending turn; earlier turns in a sweep
/// already reflect this rule's rewrites unless the model was trained with
/// frozen prev tags).
inline std::vector<std::string> apply_rules(const TaggerModel& model, const Corpus& corpus) {
  std::vector<Phrase> rule_phrases;
  for (const auto& r : model.rules)
    if (r.cond_phrase) rule_phrases.push_back(*r.cond_phrase);
  detail::TblData d = detail::make_tbl_data(corpus, rule_phrases, model.acts, false);

  std::int32_t default_id = d.act_id(model.default_tag);
  if (default_id < 0) throw DataError("default tag '" + model.default_tag + "' not in model acts");
  std::vector<std::int32_t> tags(d.size(), default_id);

  std::unordered_map<std::string, std::uint32_t> pid_of;
  for (std::size_t i = 0; i < d.phrases.size(); ++i)
    pid_of.emplace(d.phrases[i].text(), static_cast<std::uint32_t>(i));

  for (const auto& rule : model.rules) {
    detail::Cand c;
    c.from = d.act_id(rule.from_tag);
    c.to = d.act_id(rule.to_tag);
    if (c.from < 0 || c.to < 0)
      throw DataError("rule act not in model inventory: " + detail::serialize_rule(rule));
    if (rule.cond_phrase) c.pid = static_cast<std::int32_t>(pid_of.at(rule.cond_phrase->text()));
    if (rule.cond_prev) {
      if (*rule.cond_prev == kBeginOfDialogue)
        c.prev = detail::kPrevBod;
      else {
        c.prev = d.act_id(*rule.cond_prev);
        if (c.prev < 0)
          throw DataError("rule prev act not in model inventory: " + detail::serialize_rule(rule));
      }
    }
    if (rule.cond_cos) c.cos = *rule.cond_cos ? 1 : 0;
    detail::apply_candidate(c, d, tags, model.frozen_prev);
  }

  std::vector<std::string> out;
  out.reserve(tags.size());
  for (std::int32_t t : tags) out.push_back(model.acts[static_cast<std::size_t>(t)]);
  return out;
}

/// Greedy transformation-based training. Starts from the majority tag,
/// repeatedly scores candidate rules instantiated at mistagged utterances,
/// and appends the best rule until its net gain falls below the threshold.
/// Deterministic for fixed inputs at any thread count.
inline TaggerModel train(const Corpus& corpus, std::span<const Phrase> phrase_set,
                         const TblConfig& config = {}) {
  if (corpus.utterance_count() == 0) throw DataError("cannot train on empty corpus");
  if (config.threshold < 1) throw DataError("threshold must be >= 1");

  detail::TblData d = detail::make_tbl_data(corpus, phrase_set, corpus.act_inventory, true);
  const std::size_t n = d.size();
  const std::size_t n_acts = d.acts.size();

  // Majority tag; ties to the act earliest in the inventory.
  std::vector<std::size_t> act_freq(n_acts, 0);
  for (std::int32_t g : d.gold) ++act_freq[static_cast<std::size_t>(g)];
  std::int32_t default_id =
      static_cast<std::int32_t>(std::max_element(act_freq.begin(), act_freq.end()) -
                                act_freq.begin());

  std::vector<std::int32_t> tags(n, default_id);
  std::int64_t correct = static_cast<std::int64_t>(act_freq[static_cast<std::size_t>(default_id)]);

  TaggerModel model;
  model.default_tag = d.acts[static_cast<std::size_t>(default_id)];
  model.acts = d.acts;
  model.phrase_set.assign(d.phrases.begin(), d.phrases.end());
  model.phrase_set_hash = phrase_set_hash(model.phrase_set);
  model.frozen_prev = config.frozen_prev;

  struct CandEntry {
    detail::Cand cand;
    std::uint32_t spawn = 0;
  };

  while (true) {
    // Instantiate candidates from the feature values of mistagged sites.
    std::unordered_map<std::string, CandEntry> cand_map;
    for (std::size_t u = 0; u < n; ++u) {
      if (tags[u] == d.gold[u]) continue;
      std::int32_t prev_val =
          d.at_dialogue_start(u) ? detail::kPrevBod : tags[u - 1];
      auto add = [&](detail::Cand c) {
        auto res = cand_map.emplace(detail::serialize_rule(detail::decode_cand(c, d)),
                                    CandEntry{c, 0});
        ++res.first->second.spawn;
      };
      for (std::uint8_t mask : config.templates) {
        detail::Cand base;
        base.from = tags[u];
        base.to = d.gold[u];
        if (mask & kCondPrev) base.prev = prev_val;
        if (mask & kCondCos) base.cos = static_cast<std::int8_t>(d.cos[u]);
        if (mask & kCondPhrase) {
          for (std::uint32_t pid : d.hits[u]) {
            detail::Cand c = base;
            c.pid = static_cast<std::int32_t>(pid);
            add(c);
          }
        } else if (mask != 0) {
          add(base);
        }
      }
    }
    if (cand_map.empty()) break;

    // A rule's corrections all happen at sites that spawned it, except for
    // prev-condition chains onto the rule's own target tag, so anything
    // below the threshold spawn count (and not such a chain) cannot win.
    std::vector<std::pair<std::string, detail::Cand>> cands;
    cands.reserve(cand_map.size());
    for (auto& [key, entry] : cand_map) {
      if (entry.spawn < config.threshold && entry.cand.prev != entry.cand.to) continue;
      cands.emplace_back(key, entry.cand);
    }
    if (cands.empty()) break;
    std::sort(cands.begin(), cands.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<std::int64_t> gains(cands.size());
    parallel_chunks(cands.size(), config.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        gains[i] = detail::score_candidate(cands[i].second, d, tags, config.frozen_prev);
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (gains[i] > gains[best] ||
          (gains[i] == gains[best] &&
           cands[i].second.cond_count() < cands[best].second.cond_count()))
        best = i;
      // keys are sorted ascending, so equal gain+conds keeps the earlier key
    }
    if (gains[best] < static_cast<std::int64_t>(config.threshold)) break;

    std::int64_t realized =
        detail::apply_candidate(cands[best].second, d, tags, config.frozen_prev);
    if (realized != gains[best])
      throw std::logic_error("rule scoring and application disagree on net gain");

    correct += realized;
    model.rules.push_back(detail::decode_cand(cands[best].second, d));
    model.training_trace.push_back(
        TraceStep{realized, static_cast<double>(correct) / static_cast<double>(n)});
  }
  return model;
}

// --- model file ------------------------------------------------------------
// Line-oriented: key=value header (default, acts, prev_mode, phrase_hash),
// then one rule per line:
//   from=<act> [phrase="<tokens>"] [prev=<act|BOD>] [cos=<t|f>] to=<act> gain=<n>

inline void save_model(std::ostream& out, const TaggerModel& model) {
  out << "default=" << model.default_tag << '\n';
  out << "acts=" << join(model.acts, "\t") << '\n';
  out << "prev_mode=" << (model.frozen_prev ? "frozen" : "sweep") << '\n';
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(model.phrase_set_hash));
  out << "phrase_hash=" << hex << '\n';
  for (std::size_t i = 0; i < model.rules.size(); ++i) {
    out << detail::serialize_rule(model.rules[i]);
    if (i < model.training_trace.size()) out << " gain=" << model.training_trace[i].net_gain;
    out << '\n';
  }
}

inline TaggerModel load_model(std::istream& in) {
  TaggerModel model;
  bool have_default = false, have_acts = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    if (line.rfind("from=", 0) == 0) {
      if (!have_default || !have_acts)
        throw ParseError(lineno, "rule before default/acts header");
      TransformationRule rule;
      std::int64_t gain = 0;
      bool have_to = false;
      // Raw quotes only ever appear as the phrase value delimiters (tokens
      // escape theirs), so quoted values can be re-joined from pieces.
      std::vector<std::string> raw = split(line, ' ');
      std::vector<std::string> pieces;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string piece = raw[i];
        if (piece.rfind("phrase=\"", 0) == 0) {
          while ((piece.size() <= 8 || piece.back() != '"') && i + 1 < raw.size())
            piece += " " + raw[++i];
        }
        pieces.push_back(std::move(piece));
      }
      for (const auto& piece : pieces) {
        auto eq = piece.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "bad rule field '" + piece + "'");
        std::string key = piece.substr(0, eq);
        std::string value = piece.substr(eq + 1);
        if (key == "from") {
          rule.from_tag = detail::unescape_field(value, lineno);
        } else if (key == "phrase") {
          if (value.size() < 2 || value.front() != '"' || value.back() != '"')
            throw ParseError(lineno, "phrase value must be quoted");
          std::string body = value.substr(1, value.size() - 2);
          Phrase p;
          for (const auto& tok : split_ws(body))
            p.tokens.push_back(detail::unescape_field(tok, lineno));
          if (p.tokens.empty()) throw ParseError(lineno, "empty phrase condition");
          rule.cond_phrase = std::move(p);
        } else if (key == "prev") {
          rule.cond_prev = detail::unescape_field(value, lineno);
        } else if (key == "cos") {
          if (value != "t" && value != "f") throw ParseError(lineno, "cos must be t or f");
          rule.cond_cos = (value == "t");
        } else if (key == "to") {
          rule.to_tag = detail::unescape_field(value, lineno);
          have_to = true;
        } else if (key == "gain") {
          gain = static_cast<std::int64_t>(parse_u64(value, lineno));
        } else {
          throw ParseError(lineno, "unknown rule field '" + key + "'");
        }
      }
      if (!have_to) throw ParseError(lineno, "rule missing to=");
      if (!rule.cond_phrase && !rule.cond_prev && !rule.cond_cos)
        throw ParseError(lineno, "rule has no conditions");
      if (rule.to_tag == rule.from_tag) throw ParseError(lineno, "rule maps a tag to itself");
      auto known = [&](const std::string& act) {
        return std::binary_search(model.acts.begin(), model.acts.end(), act);
      };
      if (!known(rule.from_tag))
        throw ParseError(lineno, "rule act '" + rule.from_tag + "' not in inventory");
      if (!known(rule.to_tag))
        throw ParseError(lineno, "rule act '" + rule.to_tag + "' not in inventory");
      if (rule.cond_prev && *rule.cond_prev != kBeginOfDialogue && !known(*rule.cond_prev))
        throw ParseError(lineno, "rule prev act '" + *rule.cond_prev + "' not in inventory");
      model.rules.push_back(std::move(rule));
      model.training_trace.push_back(
          TraceStep{gain, std::numeric_limits<double>::quiet_NaN()});
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "bad header line");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "default") {
      model.default_tag = value;
      have_default = true;
    } else if (key == "acts") {
      model.acts = split(value, '\t');
      std::sort(model.acts.begin(), model.acts.end());
      have_acts = true;
    } else if (key == "prev_mode") {
      if (value != "sweep" && value != "frozen")
        throw ParseError(lineno, "prev_mode must be sweep or frozen");
      model.frozen_prev = (value == "frozen");
    } else if (key == "phrase_hash") {
      model.phrase_set_hash = std::stoull(value, nullptr, 16);
    } else {
      throw ParseError(lineno, "unknown header key '" + key + "'");
    }
  }
  if (!have_default || !have_acts) throw DataError("model file missing default/acts header");
  if (!std::binary_search(model.acts.begin(), model.acts.end(), model.default_tag))
    throw DataError("model default tag not in inventory");

  std::vector<Phrase> phrases;
  for (const auto& r : model.rules)
    if (r.cond_phrase) phrases.push_back(*r.cond_phrase);
  std::sort(phrases.begin(), phrases.end());
  phrases.erase(std::unique(phrases.begin(), phrases.end()), phrases.end());
  model.phrase_set = std::move(phrases);
  return model;
}

}  // namespace dact
