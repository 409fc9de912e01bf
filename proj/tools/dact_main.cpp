// dact: rank dialogue act cue phrases, filter them, and train/evaluate a
// transformation-based dialogue act tagger.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dact/corpus.hpp"
#include "dact/counts.hpp"
#include "dact/eval.hpp"
#include "dact/filter.hpp"
#include "dact/metrics.hpp"
#include "dact/tbl.hpp"

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dact::DataError("cannot open input file '" + path + "'");
  return in;
}

// Writes to a file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_.open(path);
      if (!file_) throw dact::DataError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::optional<dact::ClusterLexicon> load_clusters(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto in = open_input(path);
  return dact::ClusterLexicon::parse(in);
}

dact::Corpus load_corpus(const std::string& path, const std::string& clusters_path) {
  auto lexicon = load_clusters(clusters_path);
  auto in = open_input(path);
  return dact::parse_corpus(in, lexicon ? &*lexicon : nullptr);
}

std::vector<std::string> metric_names_list() {
  std::vector<std::string> names;
  for (dact::MetricId m : dact::kAllMetrics) names.emplace_back(dact::metric_name(m));
  return names;
}

struct RankOpts {
  std::string corpus, metric, clusters, out = "-", dump_table;
  std::size_t max_len = 3;
  unsigned threads = 1;
};

void run_rank(const RankOpts& o) {
  dact::Corpus corpus = load_corpus(o.corpus, o.clusters);
  auto phrases = dact::extract_phrases(corpus, o.max_len);
  auto table = dact::build_table(corpus, phrases);
  if (!o.dump_table.empty()) {
    Output dump(o.dump_table);
    table.dump(dump.stream());
  }
  auto metric = dact::metric_from_name(o.metric);
  auto ranked = dact::rank_phrases(table, phrases, *metric, o.threads);
  Output out(o.out);
  dact::write_ranked_tsv(out.stream(), ranked, o.metric);
}

struct FilterOpts {
  std::string in, mode, out = "-", audit;
  std::optional<std::uint64_t> min_freq, max_freq;
};

void run_filter(const FilterOpts& o) {
  auto in = open_input(o.in);
  dact::RankedFile file = dact::read_ranked_tsv(in);
  std::vector<dact::RankedPhrase> list = std::move(file.entries);
  if (o.min_freq || o.max_freq) list = dact::frequency_prune(list, o.min_freq, o.max_freq);
  std::vector<dact::FilterAudit> audit;
  dact::FilterMode mode =
      o.mode == "basic" ? dact::FilterMode::BASIC : dact::FilterMode::MODIFIED;
  list = dact::lexical_filter(list, mode, o.audit.empty() ? nullptr : &audit);
  if (!o.audit.empty()) {
    Output out(o.audit);
    dact::write_filter_audit(out.stream(), audit);
  }
  Output out(o.out);
  dact::write_ranked_tsv(out.stream(), list, file.metric);
}

struct TrainOpts {
  std::string corpus, phrases, clusters, out = "-", prev_mode = "sweep";
  double cutoff = 100.0;
  std::size_t cutoff_base = 0;  // 0: use the input list size
  std::uint32_t threshold = 2;
  unsigned threads = 1;
};

void run_train(const TrainOpts& o) {
  dact::Corpus corpus = load_corpus(o.corpus, o.clusters);
  auto in = open_input(o.phrases);
  dact::RankedFile file = dact::read_ranked_tsv(in);
  std::size_t base = o.cutoff_base ? o.cutoff_base : file.entries.size();
  std::size_t take = std::min(dact::cutoff_count(base, o.cutoff), file.entries.size());
  std::vector<dact::Phrase> phrase_set;
  phrase_set.reserve(take);
  for (std::size_t i = 0; i < take; ++i) phrase_set.push_back(file.entries[i].phrase);

  dact::TblConfig cfg;
  cfg.threshold = o.threshold;
  cfg.frozen_prev = (o.prev_mode == "frozen");
  cfg.threads = o.threads;
  dact::TaggerModel model = dact::train(corpus, phrase_set, cfg);
  Output out(o.out);
  dact::save_model(out.stream(), model);
}

struct TagOpts {
  std::string model, corpus, clusters, out = "-";
};

void run_tag(const TagOpts& o) {
  auto model_in = open_input(o.model);
  dact::TaggerModel model = dact::load_model(model_in);
  dact::Corpus corpus = load_corpus(o.corpus, o.clusters);
  auto predicted = dact::apply_rules(model, corpus);
  std::size_t pos = 0;
  for (auto& d : corpus.dialogues)
    for (auto& u : d.utterances) u.gold_act = predicted[pos++];
  Output out(o.out);
  dact::write_corpus_tsv(out.stream(), corpus);
}

struct EvalOpts {
  std::string tagged, gold;
};

void run_eval(const EvalOpts& o) {
  auto tagged_in = open_input(o.tagged);
  dact::Corpus tagged = dact::parse_corpus(tagged_in);
  auto gold_in = open_input(o.gold);
  dact::Corpus gold = dact::parse_corpus(gold_in);
  if (tagged.dialogues.size() != gold.dialogues.size())
    throw dact::DataError("tagged and gold corpora have different dialogue counts");
  for (std::size_t i = 0; i < gold.dialogues.size(); ++i) {
    if (tagged.dialogues[i].id != gold.dialogues[i].id ||
        tagged.dialogues[i].utterances.size() != gold.dialogues[i].utterances.size())
      throw dact::DataError("tagged and gold corpora are not aligned (dialogue '" +
                            gold.dialogues[i].id + "')");
  }
  double acc = dact::accuracy(dact::gold_tags(tagged), dact::gold_tags(gold));
  std::cout << dact::format_double(acc) << '\n';
}

struct SweepOpts {
  std::string train, heldout, corpus, clusters, lit, out = "-", prev_mode = "sweep";
  std::string significance;
  std::string metrics = "all", baselines, cutoffs = "100", filters = "none";
  double heldout_fraction = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t threshold = 2;
  std::size_t max_len = 3;
  unsigned threads = 1;
};

void run_sweep_cmd(const SweepOpts& o) {
  dact::SweepConfig cfg;
  for (const auto& name : dact::split(o.metrics, ',')) {
    if (name.empty()) continue;
    if (name == "all") {
      for (dact::MetricId m : dact::kAllMetrics) cfg.methods.push_back(dact::Method::of(m));
    } else if (auto m = dact::metric_from_name(name)) {
      cfg.methods.push_back(dact::Method::of(*m));
    } else {
      throw CLI::ValidationError("--metrics", "unknown metric '" + name + "'");
    }
  }
  if (!o.baselines.empty())
    for (const auto& name : dact::split(o.baselines, ',')) {
      if (name == "all")
        cfg.methods.push_back(dact::Method::all());
      else if (name == "lit")
        cfg.methods.push_back(dact::Method::lit());
      else
        throw CLI::ValidationError("--baselines", "unknown baseline '" + name + "'");
    }
  cfg.cutoffs.clear();
  for (const auto& c : dact::split(o.cutoffs, ','))
    if (!c.empty()) cfg.cutoffs.push_back(dact::parse_double(c));
  cfg.filters.clear();
  for (const auto& f : dact::split(o.filters, ',')) {
    if (f.empty()) continue;
    if (auto mode = dact::sweep_filter_from_name(f))
      cfg.filters.push_back(*mode);
    else
      throw CLI::ValidationError("--filters", "unknown filter '" + f + "'");
  }
  cfg.tbl.threshold = o.threshold;
  cfg.tbl.frozen_prev = (o.prev_mode == "frozen");
  cfg.max_phrase_len = o.max_len;
  cfg.threads = o.threads;
  if (!o.lit.empty()) {
    auto in = open_input(o.lit);
    cfg.lit_phrases = dact::parse_phrase_list(in);
  }

  dact::Corpus train_corpus, heldout_corpus;
  if (!o.corpus.empty()) {
    dact::Corpus whole = load_corpus(o.corpus, o.clusters);
    auto parts = dact::split_corpus(whole, o.heldout_fraction, o.seed);
    train_corpus = std::move(parts.first);
    heldout_corpus = std::move(parts.second);
  } else {
    train_corpus = load_corpus(o.train, o.clusters);
    heldout_corpus = load_corpus(o.heldout, o.clusters);
  }

  auto results = dact::run_sweep(train_corpus, heldout_corpus, cfg);
  if (!o.significance.empty()) {
    Output sig(o.significance);
    dact::emit_significance(sig.stream(), results);
  }
  Output out(o.out);
  dact::emit_report(out.stream(), results);
}

struct SynthOpts {
  std::uint32_t dialogues = 20, acts = 4, noise_vocab = 20;
  std::uint32_t min_utts = 8, max_utts = 14;
  double cue_strength = 1.0;
  std::uint64_t seed = 0;
  std::string out = "-";
};

void run_synth(const SynthOpts& o) {
  dact::SynthConfig cfg;
  cfg.n_dialogues = o.dialogues;
  cfg.n_acts = o.acts;
  cfg.cue_strength = o.cue_strength;
  cfg.noise_vocab = o.noise_vocab;
  cfg.seed = o.seed;
  cfg.min_utterances = o.min_utts;
  cfg.max_utterances = o.max_utts;
  Output out(o.out);
  dact::write_corpus_tsv(out.stream(), dact::gen_synthetic(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogue act cue phrase selection and tagging"};
  app.require_subcommand(1);

  RankOpts rank_opts;
  auto* rank = app.add_subcommand("rank", "rank corpus phrases by a selection metric");
  rank->add_option("--corpus", rank_opts.corpus, "training corpus TSV")->required();
  rank->add_option("--metric", rank_opts.metric, "selection metric")
      ->required()
      ->check(CLI::IsMember(metric_names_list()));
  rank->add_option("--clusters", rank_opts.clusters, "cluster lexicon TSV");
  rank->add_option("--max-len", rank_opts.max_len, "max phrase length")->check(CLI::PositiveNumber);
  rank->add_option("--out", rank_opts.out, "ranked list output (- for stdout)");
  rank->add_option("--dump-table", rank_opts.dump_table, "write phrase/act/count TSV");
  rank->add_option("--threads", rank_opts.threads, "worker threads")->check(CLI::PositiveNumber);
  rank->callback([&] { run_rank(rank_opts); });

  FilterOpts filter_opts;
  auto* filter = app.add_subcommand("filter", "remove redundant phrases from a ranked list");
  filter->add_option("--in", filter_opts.in, "ranked list TSV")->required();
  filter->add_option("--mode", filter_opts.mode, "filter mode")
      ->required()
      ->check(CLI::IsMember({"basic", "modified"}));
  filter->add_option("--out", filter_opts.out, "filtered list output");
  filter->add_option("--audit", filter_opts.audit, "write removed/blocker audit TSV");
  filter->add_option("--min-freq", filter_opts.min_freq, "drop phrases with #(p) below this");
  filter->add_option("--max-freq", filter_opts.max_freq, "drop phrases with #(p) above this");
  filter->callback([&] { run_filter(filter_opts); });

  TrainOpts train_opts;
  auto* train = app.add_subcommand("train", "train the transformation-based tagger");
  train->add_option("--corpus", train_opts.corpus, "training corpus TSV")->required();
  train->add_option("--phrases", train_opts.phrases, "ranked list TSV")->required();
  train->add_option("--cutoff", train_opts.cutoff, "keep top percent of phrases")
      ->check(CLI::Range(1e-9, 100.0));
  train->add_option("--cutoff-base", train_opts.cutoff_base,
                    "list size the percent refers to (default: input size)");
  train->add_option("--threshold", train_opts.threshold, "min net gain per rule")
      ->check(CLI::PositiveNumber);
  train->add_option("--prev-mode", train_opts.prev_mode, "prev-tag sweep semantics")
      ->check(CLI::IsMember({"sweep", "frozen"}));
  train->add_option("--clusters", train_opts.clusters, "cluster lexicon TSV");
  train->add_option("--out", train_opts.out, "model output");
  train->add_option("--threads", train_opts.threads, "worker threads")->check(CLI::PositiveNumber);
  train->callback([&] { run_train(train_opts); });

  TagOpts tag_opts;
  auto* tag = app.add_subcommand("tag", "tag a corpus with a trained model");
  tag->add_option("--model", tag_opts.model, "model file")->required();
  tag->add_option("--corpus", tag_opts.corpus, "corpus TSV to tag")->required();
  tag->add_option("--clusters", tag_opts.clusters, "cluster lexicon TSV");
  tag->add_option("--out", tag_opts.out, "tagged corpus output");
  tag->callback([&] { run_tag(tag_opts); });

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand("eval", "accuracy of tagged output against gold");
  eval->add_option("--tagged", eval_opts.tagged, "tagged corpus TSV")->required();
  eval->add_option("--gold", eval_opts.gold, "gold corpus TSV")->required();
  eval->callback([&] { run_eval(eval_opts); });

  SweepOpts sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "run the full method/filter/cutoff grid");
  sweep->add_option("--train", sweep_opts.train, "training corpus TSV");
  sweep->add_option("--heldout", sweep_opts.heldout, "heldout corpus TSV");
  sweep->add_option("--corpus", sweep_opts.corpus,
                    "single corpus to split (with --heldout-fraction and --seed)");
  sweep->add_option("--heldout-fraction", sweep_opts.heldout_fraction,
                    "dialogue fraction held out when splitting");
  sweep->add_option("--seed", sweep_opts.seed, "split seed");
  sweep->add_option("--metrics", sweep_opts.metrics,
                    "comma list of metrics; 'all' = every metric");
  sweep->add_option("--baselines", sweep_opts.baselines, "comma list from {all,lit}");
  sweep->add_option("--cutoffs", sweep_opts.cutoffs, "comma list of percents");
  sweep->add_option("--filters,--filter", sweep_opts.filters,
                    "comma list from {none,basic,modified}");
  sweep->add_option("--lit", sweep_opts.lit, "literature phrase list (for the lit baseline)");
  sweep->add_option("--significance", sweep_opts.significance,
                    "write Welch t tests of each row against the all baseline");
  sweep->add_option("--threshold", sweep_opts.threshold, "tagger rule gain threshold")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--prev-mode", sweep_opts.prev_mode, "prev-tag sweep semantics")
      ->check(CLI::IsMember({"sweep", "frozen"}));
  sweep->add_option("--clusters", sweep_opts.clusters, "cluster lexicon TSV");
  sweep->add_option("--max-len", sweep_opts.max_len, "max phrase length")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_opts.out, "report CSV output");
  sweep->add_option("--threads", sweep_opts.threads, "worker threads")->check(CLI::PositiveNumber);
  sweep->callback([&] {
    bool split_mode = !sweep_opts.corpus.empty();
    if (split_mode == (!sweep_opts.train.empty() || !sweep_opts.heldout.empty()))
      throw CLI::ValidationError(
          "sweep", "give either --train and --heldout, or --corpus with --heldout-fraction");
    if (!split_mode && (sweep_opts.train.empty() || sweep_opts.heldout.empty()))
      throw CLI::ValidationError("sweep", "--train and --heldout are both required");
    if (split_mode && !(sweep_opts.heldout_fraction > 0.0))
      throw CLI::ValidationError("sweep", "--corpus requires --heldout-fraction");
    run_sweep_cmd(sweep_opts);
  });

  SynthOpts synth_opts;
  auto* synth = app.add_subcommand("synth", "generate a synthetic planted-cue corpus");
  synth->add_option("--dialogues", synth_opts.dialogues, "number of dialogues")
      ->check(CLI::PositiveNumber);
  synth->add_option("--acts", synth_opts.acts, "number of dialogue acts")
      ->check(CLI::Range(2u, 1000u));
  synth->add_option("--cue-strength", synth_opts.cue_strength, "cue emission probability")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--noise-vocab", synth_opts.noise_vocab, "noise vocabulary size");
  synth->add_option("--seed", synth_opts.seed, "generator seed");
  synth->add_option("--min-utts", synth_opts.min_utts, "min utterances per dialogue")
      ->check(CLI::PositiveNumber);
  synth->add_option("--max-utts", synth_opts.max_utts, "max utterances per dialogue")
      ->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_opts.out, "corpus TSV output");
  synth->callback([&] { run_synth(synth_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const dact::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
