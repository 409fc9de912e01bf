#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dact/util.hpp"

namespace dact {

/// Reserved preceding-tag sentinel for the first utterance of a dialogue.
/// Corpora may not use it as an act label.
inline constexpr std::string_view kBeginOfDialogue = "BOD";

struct Utterance {
  std::string dialogue_id;
  std::uint32_t turn_index = 0;
  std::string speaker;
  std::string gold_act;
  std::vector<std::string> tokens;  // lowercase, post-clustering
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;  // turn order
};

struct Corpus {
  std::vector<Dialogue> dialogues;        // input order
  std::vector<std::string> act_inventory; // sorted distinct gold acts

  std::size_t utterance_count() const {
    std::size_t n = 0;
    for (const auto& d : dialogues) n += d.utterances.size();
    return n;
  }

  template <typename Fn>
  void for_each_utterance(Fn&& fn) const {
    for (const auto& d : dialogues)
      for (const auto& u : d.utterances) fn(u);
  }

  void rebuild_inventory() {
    std::set<std::string> acts;
    for_each_utterance([&](const Utterance& u) { acts.insert(u.gold_act); });
    act_inventory.assign(acts.begin(), acts.end());
  }
};

namespace detail {
inline bool strip_char(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?':
    case ';': case ':': case '"': case '(': case ')':
      return true;
    default:
      return false;
  }
}
}  // namespace detail

/// Lowercase, split on whitespace, strip leading/trailing punctuation
/// (. , ! ? ; : " ( )) from each token. Internal characters (apostrophes,
/// colons in times like "3:00") are preserved. May return an empty sequence.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) continue;
    std::size_t lo = start, hi = i;
    while (lo < hi && detail::strip_char(text[lo])) ++lo;
    while (hi > lo && detail::strip_char(text[hi - 1])) --hi;
    if (lo == hi) continue;
    std::string tok(text.substr(lo, hi - lo));
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(tok));
  }
  return out;
}

/// Maps interchangeable surface tokens to cluster labels such as
/// "$weekday$". Besides explicit surface sets, two rule-based matchers are
/// always active: numerals -> "$number$", ordinals -> "$ordinal-number$".
class ClusterLexicon {
 public:
  static constexpr std::string_view kNumberLabel = "$number$";
  static constexpr std::string_view kOrdinalLabel = "$ordinal-number$";

  /// Token made only of digits, or digits around one internal ':' or '.'
  /// ("3:00", "2.5").
  static bool is_numeral(std::string_view t) {
    if (t.empty()) return false;
    int seps = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      char c = t[i];
      if (c >= '0' && c <= '9') continue;
      if ((c == ':' || c == '.') && i > 0 && i + 1 < t.size() && ++seps == 1) continue;
      return false;
    }
    return true;
  }

  /// Digits followed by st/nd/rd/th, or a spelled-out day ordinal
  /// ("first" .. "thirty-first").
  static bool is_ordinal(std::string_view t) {
    if (t.size() >= 3) {
      std::string_view suffix = t.substr(t.size() - 2);
      if (suffix == "st" || suffix == "nd" || suffix == "rd" || suffix == "th") {
        bool all_digits = true;
        for (char c : t.substr(0, t.size() - 2))
          if (c < '0' || c > '9') { all_digits = false; break; }
        if (all_digits) return true;
      }
    }
    static const std::unordered_set<std::string_view> words = {
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh",
        "eighth", "ninth", "tenth", "eleventh", "twelfth", "thirteenth",
        "fourteenth", "fifteenth", "sixteenth", "seventeenth", "eighteenth",
        "nineteenth", "twentieth", "twenty-first", "twenty-second",
        "twenty-third", "twenty-fourth", "twenty-fifth", "twenty-sixth",
        "twenty-seventh", "twenty-eighth", "twenty-ninth", "thirtieth",
        "thirty-first"};
    return words.count(t) > 0;
  }

  /// Adds one surface form under a cluster label. Labels must be
  /// $-delimited; a surface may belong to at most one cluster and may not
  /// itself look like a label (that would break idempotence).
  void add(const std::string& label, const std::string& surface, std::size_t line = 0) {
    if (label.size() < 3 || label.front() != '$' || label.back() != '$')
      throw ParseError(line, "cluster label must be $-delimited: '" + label + "'");
    if (surface.empty()) throw ParseError(line, "empty surface token");
    if (surface.size() >= 2 && surface.front() == '$' && surface.back() == '$')
      throw ParseError(line, "surface token may not be $-delimited: '" + surface + "'");
    auto [it, inserted] = surface_to_label_.emplace(surface, label);
    if (!inserted && it->second != label)
      throw ParseError(line, "surface '" + surface + "' assigned to two clusters");
  }

  /// TSV: cluster_label <TAB> surface_token, one pair per line, '#' comments.
  static ClusterLexicon parse(std::istream& in) {
    ClusterLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto fields = split(line, '\t');
      if (fields.size() != 2)
        throw ParseError(lineno, "expected 2 tab-separated fields, got " +
                                     std::to_string(fields.size()));
      lex.add(fields[0], fields[1], lineno);
    }
    return lex;
  }

  std::optional<std::string_view> cluster_of(std::string_view token) const {
    auto it = surface_to_label_.find(std::string(token));
    if (it != surface_to_label_.end()) return std::string_view(it->second);
    if (is_ordinal(token)) return kOrdinalLabel;
    if (is_numeral(token)) return kNumberLabel;
    return std::nullopt;
  }

  std::size_t surface_count() const { return surface_to_label_.size(); }

 private:
  std::unordered_map<std::string, std::string> surface_to_label_;
};

/// Replaces clustered tokens with their labels; everything else passes
/// through. Length-preserving and idempotent.
inline std::vector<std::string> apply_clusters(std::vector<std::string> tokens,
                                               const ClusterLexicon& lexicon) {
  for (auto& t : tokens)
    if (auto label = lexicon.cluster_of(t)) t.assign(*label);
  return tokens;
}

/// Parses the 5-column corpus TSV (dialogue_id, turn_index, speaker, act,
/// text). Lines starting with '#' and blank lines are skipped. Tokenizes
/// each utterance and applies `lexicon` when given. Dialogues keep first-
/// appearance order; turn indices must arrive as 0,1,2,... per dialogue.
inline Corpus parse_corpus(std::istream& in, const ClusterLexicon* lexicon = nullptr) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> dialogue_index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 5)
      throw ParseError(lineno, "expected 5 tab-separated fields, got " +
                                   std::to_string(fields.size()));
    Utterance u;
    u.dialogue_id = fields[0];
    u.turn_index = static_cast<std::uint32_t>(parse_u64(fields[1], lineno));
    u.speaker = fields[2];
    u.gold_act = fields[3];
    if (u.dialogue_id.empty() || u.speaker.empty() || u.gold_act.empty())
      throw ParseError(lineno, "empty dialogue_id, speaker, or act field");
    if (u.gold_act == kBeginOfDialogue)
      throw ParseError(lineno, "act label 'BOD' is reserved");
    u.tokens = tokenize(fields[4]);
    if (lexicon) u.tokens = apply_clusters(std::move(u.tokens), *lexicon);
    if (u.tokens.empty())
      throw ParseError(lineno, "utterance has no tokens after tokenization");

    auto [it, inserted] = dialogue_index.emplace(u.dialogue_id, corpus.dialogues.size());
    if (inserted) corpus.dialogues.push_back(Dialogue{u.dialogue_id, {}});
    Dialogue& d = corpus.dialogues[it->second];
    std::uint32_t expected = static_cast<std::uint32_t>(d.utterances.size());
    if (u.turn_index < expected)
      throw ParseError(lineno, "duplicate turn " + std::to_string(u.turn_index) +
                                   " in dialogue '" + u.dialogue_id + "'");
    if (u.turn_index > expected)
      throw ParseError(lineno, "non-contiguous turn_index " + std::to_string(u.turn_index) +
                                   " in dialogue '" + u.dialogue_id + "' (expected " +
                                   std::to_string(expected) + ")");
    d.utterances.push_back(std::move(u));
  }
  corpus.rebuild_inventory();
  return corpus;
}

/// Writes the corpus back as TSV with tokens space-joined in the text
/// column. Re-parsing the output yields an identical corpus.
inline void write_corpus_tsv(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances)
      out << u.dialogue_id << '\t' << u.turn_index << '\t' << u.speaker << '\t'
          << u.gold_act << '\t' << join(u.tokens, " ") << '\n';
}

/// Splits at dialogue granularity. Dialogue order within each half follows
/// the input corpus; the heldout pick is a seeded shuffle, so the split is
/// reproducible.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double heldout_fraction,
                                              std::uint64_t seed) {
  std::size_t n = corpus.dialogues.size();
  if (n < 2) throw DataError("split requires at least 2 dialogues");
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
    throw DataError("heldout fraction must be in (0,1)");
  std::size_t n_held = static_cast<std::size_t>(heldout_fraction * static_cast<double>(n) + 0.5);
  if (n_held == 0 || n_held == n)
    throw DataError("heldout fraction " + format_double(heldout_fraction) +
                    " leaves an empty side for " + std::to_string(n) + " dialogues");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> held(n, false);
  for (std::size_t i = 0; i < n_held; ++i) held[order[i]] = true;

  Corpus train, heldout;
  for (std::size_t i = 0; i < n; ++i)
    (held[i] ? heldout : train).dialogues.push_back(corpus.dialogues[i]);
  train.rebuild_inventory();
  heldout.rebuild_inventory();
  return {std::move(train), std::move(heldout)};
}

}  // namespace dact
