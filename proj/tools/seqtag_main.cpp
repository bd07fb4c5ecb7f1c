// Command-line front end: synthesize and corrupt corpora, train the four
// objectives, decode, K-best listings, and evaluation reports.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqtag/corpus.hpp"
#include "seqtag/encoder.hpp"
#include "seqtag/eval.hpp"
#include "seqtag/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;    // usage / validation error
constexpr int kExitRuntime = 3;  // runtime / numeric failure

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

seqtag::PipelineConfig load_config(const std::string& explicit_path) {
  std::string path = explicit_path;
  if (path.empty()) {
    if (const char* env = std::getenv("SEQTAG_CONFIG")) path = env;
  }
  seqtag::PipelineConfig config;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    try {
      config = seqtag::parse_pipeline_config(in);
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config file: ") + e.what());
    }
  }
  return config;
}

// Tolerates token-only lines (treated as unannotated) so plain token files
// can be decoded.
seqtag::PartialDataset read_tokens_or_tagged(const std::string& path,
                                             const seqtag::LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path);
  seqtag::PartialDataset ds;
  ds.labels = labels;
  seqtag::DatasetItem current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.sentence.tokens.empty()) {
      ds.items.push_back(std::move(current));
      current = seqtag::DatasetItem{};
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_tokens(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (fields[0] == "-DOCSTART-") continue;
    current.sentence.tokens.push_back(fields[0]);
    if (fields.size() == 1 || fields.back() == "-") {
      current.tags.push_back(seqtag::kUnannotated);
    } else {
      int idx = labels.parse_label(fields.back());
      if (idx < 0) {
        throw ValidationError("line " + std::to_string(lineno) +
                              ": label '" + fields.back() +
                              "' unknown to the model's label set");
      }
      current.tags.push_back(idx);
    }
  }
  flush();
  if (ds.items.empty()) throw ValidationError("no sentences in " + path);
  return ds;
}

std::vector<std::vector<int>> gold_of(const seqtag::PartialDataset& ds) {
  std::vector<std::vector<int>> out;
  for (const auto& item : ds.items) out.push_back(item.tags);
  return out;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::size_t sentences = 500;
  std::size_t min_len = 6;
  std::size_t max_len = 14;
  double entity_prob = 0.22;
  std::uint64_t seed = 0;
  std::string filler_file;
  std::vector<std::string> type_specs;  // NAME=path
};

int run_synth(const SynthArgs& args) {
  seqtag::SynthConfig config;
  config.num_sentences = args.sentences;
  config.min_length = args.min_len;
  config.max_length = args.max_len;
  config.entity_prob = args.entity_prob;
  config.seed = args.seed;
  config.filler = read_lines(args.filler_file);
  for (const auto& spec : args.type_specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("--type expects NAME=lexicon-file, got '" + spec + "'");
    }
    std::vector<std::vector<std::string>> entries;
    for (const auto& line : read_lines(spec.substr(eq + 1))) {
      entries.push_back(split_tokens(line));
    }
    config.lexicons.emplace_back(seqtag::EntityType{spec.substr(0, eq)},
                                 std::move(entries));
  }
  seqtag::PartialDataset ds = seqtag::generate_synthetic(config);
  seqtag::write_conll_file(ds, args.out);
  std::cerr << "wrote " << ds.items.size() << " sentences ("
            << ds.annotated_entity_count() << " entities) to " << args.out << "\n";
  return kExitOk;
}

// ---- corrupt ----

struct CorruptArgs {
  std::string in, out, scheme = "random";
  double rho = 0.2;
  std::uint64_t seed = 0;
};

int run_corrupt(const CorruptArgs& args) {
  seqtag::PartialDataset gold = seqtag::read_conll_file(args.in);
  if (!gold.fully_annotated()) {
    throw ValidationError("corrupt requires a fully annotated input corpus");
  }
  seqtag::CorruptionConfig config;
  config.rho = args.rho;
  config.seed = args.seed;
  if (args.scheme == "random") {
    config.scheme = seqtag::CorruptionScheme::RandomBased;
  } else if (args.scheme == "entity") {
    config.scheme = seqtag::CorruptionScheme::EntityBased;
  } else {
    throw ValidationError("--scheme must be 'random' or 'entity'");
  }
  seqtag::PartialDataset corrupted = seqtag::corrupt(gold, config);
  if (corrupted.warning) {
    std::cerr << "warning: corpus has no entity mentions; output unchanged\n";
  }
  seqtag::write_conll_file(corrupted, args.out);
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string objective = "adak";
  std::string train_file, dev_file, model_out, report_out, config_file;
  seqtag::PipelineConfig config;  // filled after parse
};

seqtag::Report base_report(const seqtag::PipelineConfig& config,
                           const std::string& objective) {
  seqtag::Report report;
  report.meta = "objective=" + objective;
  report.config = config.effective_config();
  return report;
}

int run_train(const TrainArgs& args) {
  seqtag::PartialDataset train_ds = seqtag::read_conll_file(args.train_file);
  std::optional<seqtag::PartialDataset> dev_ds;
  if (!args.dev_file.empty()) {
    std::ifstream in(args.dev_file);
    if (!in) throw ValidationError("cannot open corpus file: " + args.dev_file);
    dev_ds = seqtag::read_conll(in, train_ds.labels);
    if (!dev_ds->fully_annotated()) {
      throw ValidationError("dev corpus must be fully annotated");
    }
  }
  const bool needs_dev = args.objective == "weighted" || args.objective == "adak";
  if (needs_dev && !dev_ds) {
    throw ValidationError("--dev is required for objective '" + args.objective + "'");
  }

  seqtag::PipelineConfig config = args.config;
  seqtag::Report report = base_report(config, args.objective);
  seqtag::ModelParams model;

  if (args.objective == "crf_ofill" || args.objective == "fuzzy") {
    const seqtag::LabelSet& labels = train_ds.labels;
    const std::size_t L = labels.size();
    std::vector<seqtag::TrainingInstance> instances;
    for (const auto& item : train_ds.items) {
      seqtag::TrainingInstance inst;
      inst.features = seqtag::extract_features(item.sentence, config.features);
      inst.mask = seqtag::annotation_mask(item.tags, L);
      std::vector<int> ofill(item.tags.size(), seqtag::LabelSet::outside());
      for (std::size_t t = 0; t < item.tags.size(); ++t) {
        if (item.tags[t] != seqtag::kUnannotated) ofill[t] = item.tags[t];
      }
      inst.gold = std::move(ofill);
      instances.push_back(std::move(inst));
    }
    seqtag::LossConfig loss;
    loss.kind = args.objective == "fuzzy" ? seqtag::LossKind::Fuzzy
                                          : seqtag::LossKind::NLL;
    seqtag::TrainConfig tc = config.train;
    tc.seed = config.seed;
    seqtag::ModelParams init = seqtag::ModelParams::init(
        labels, config.features, config.seed, config.init_scale);
    model = seqtag::train(instances, loss, tc, std::move(init)).params;
  } else if (args.objective == "weighted" || args.objective == "adak") {
    if (args.objective == "weighted") {
      config.use_kbest_term = false;
      config.use_candidate_mask = false;
      config.use_selection = false;
    }
    seqtag::PipelineResult result = seqtag::run_pipeline(train_ds, *dev_ds, config);
    model = std::move(result.model);
    report.history = std::move(result.history);
  } else {
    throw ValidationError("unknown objective '" + args.objective + "'");
  }

  if (dev_ds) {
    std::vector<std::vector<int>> pred;
    for (const auto& item : dev_ds->items) {
      pred.push_back(seqtag::predict(model, item.sentence).labels);
    }
    report.metrics = seqtag::entity_prf(train_ds.labels, gold_of(*dev_ds), pred);
  }

  seqtag::save_model_file(model, args.model_out);
  if (!args.report_out.empty()) seqtag::write_report_file(report, args.report_out);
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string model_file, test_file, report_out;
  std::size_t topk = 0;
};

int run_eval(const EvalArgs& args) {
  seqtag::ModelParams model = seqtag::load_model_file(args.model_file);
  std::ifstream in(args.test_file);
  if (!in) throw ValidationError("cannot open corpus file: " + args.test_file);
  seqtag::PartialDataset test_ds;
  try {
    test_ds = seqtag::read_conll(in, model.label_set);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("test corpus: ") + e.what());
  }
  if (!test_ds.fully_annotated()) {
    throw ValidationError("eval requires a fully annotated test corpus");
  }

  std::vector<std::vector<int>> pred;
  for (const auto& item : test_ds.items) {
    pred.push_back(seqtag::predict(model, item.sentence).labels);
  }
  seqtag::Report report;
  report.meta = "eval " + args.test_file;
  report.metrics = seqtag::entity_prf(model.label_set, gold_of(test_ds), pred);
  if (args.topk > 0) {
    std::vector<std::vector<seqtag::ScoredPath>> kbest;
    for (const auto& item : test_ds.items) {
      seqtag::PartialTags open(item.tags.size(), seqtag::kUnannotated);
      kbest.push_back(seqtag::build_kbest_candidates(model, item.sentence, open,
                                                     args.topk));
    }
    report.coverage = seqtag::coverage_at_k(gold_of(test_ds), kbest, 0.7);
    report.has_coverage = true;
  }
  if (!args.report_out.empty()) {
    seqtag::write_report_file(report, args.report_out);
  } else {
    seqtag::write_report(report, std::cout);
  }
  std::cerr << "P=" << report.metrics.precision << " R=" << report.metrics.recall
            << " F1=" << report.metrics.f1 << "\n";
  return kExitOk;
}

// ---- decode / kbest ----

struct DecodeArgs {
  std::string model_file, in_file, out_file;
  std::size_t k = 1;
};

int run_decode(const DecodeArgs& args) {
  seqtag::ModelParams model = seqtag::load_model_file(args.model_file);
  seqtag::PartialDataset input = read_tokens_or_tagged(args.in_file, model.label_set);

  seqtag::PartialDataset output;
  output.labels = model.label_set;
  for (const auto& item : input.items) {
    seqtag::AllowedMask mask =
        seqtag::annotation_mask(item.tags, model.label_set.size());
    seqtag::ScoredPath path = seqtag::predict(model, item.sentence, &mask);
    seqtag::DatasetItem out_item;
    out_item.sentence = item.sentence;
    out_item.tags = path.labels;
    output.items.push_back(std::move(out_item));
  }
  seqtag::write_conll_file(output, args.out_file);
  return kExitOk;
}

int run_kbest(const DecodeArgs& args) {
  seqtag::ModelParams model = seqtag::load_model_file(args.model_file);
  seqtag::PartialDataset input = read_tokens_or_tagged(args.in_file, model.label_set);

  std::ofstream out(args.out_file);
  if (!out) throw ValidationError("cannot write output file: " + args.out_file);
  for (const auto& item : input.items) {
    auto paths =
        seqtag::build_kbest_candidates(model, item.sentence, item.tags, args.k);
    for (std::size_t r = 0; r < paths.size(); ++r) {
      out << r + 1 << '\t' << paths[r].score << '\t';
      for (std::size_t t = 0; t < paths[r].labels.size(); ++t) {
        if (t > 0) out << ' ';
        out << model.label_set.label_string(paths[r].labels[t]);
      }
      out << '\n';
    }
    out << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequence labeling with incompletely annotated corpora"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic gold corpus");
  cmd_synth->add_option("--out", synth.out)->required();
  cmd_synth->add_option("--sentences", synth.sentences);
  cmd_synth->add_option("--min-len", synth.min_len);
  cmd_synth->add_option("--max-len", synth.max_len);
  cmd_synth->add_option("--entity-prob", synth.entity_prob);
  cmd_synth->add_option("--seed", synth.seed);
  cmd_synth->add_option("--filler", synth.filler_file, "filler vocabulary file")->required();
  cmd_synth->add_option("--type", synth.type_specs, "NAME=lexicon-file (repeatable)")
      ->required();

  CorruptArgs corrupt;
  auto* cmd_corrupt = app.add_subcommand("corrupt", "remove annotations from a gold corpus");
  cmd_corrupt->add_option("--in", corrupt.in)->required();
  cmd_corrupt->add_option("--out", corrupt.out)->required();
  cmd_corrupt->add_option("--scheme", corrupt.scheme, "random|entity");
  cmd_corrupt->add_option("--rho", corrupt.rho)->required();
  cmd_corrupt->add_option("--seed", corrupt.seed);

  TrainArgs train;
  std::string config_file;
  auto* cmd_train = app.add_subcommand("train", "train a model");
  cmd_train->add_option("--objective", train.objective, "crf_ofill|fuzzy|weighted|adak");
  cmd_train->add_option("--train", train.train_file)->required();
  cmd_train->add_option("--dev", train.dev_file);
  cmd_train->add_option("--model-out", train.model_out)->required();
  cmd_train->add_option("--report", train.report_out);
  cmd_train->add_option("--config", config_file);
  // flag overrides applied on top of the config file
  std::vector<std::pair<std::string, std::string>> overrides;
  auto add_override = [&](const std::string& flag, const std::string& key) {
    cmd_train->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); });
  };
  add_override("--epochs", "epochs");
  add_override("--batch-size", "batch_size");
  add_override("--lr", "learning_rate");
  add_override("--l2", "l2");
  add_override("--seed", "seed");
  add_override("--k-folds", "k_folds");
  add_override("--iterations", "iterations");
  add_override("--top-k", "top_k");
  add_override("--freq-threshold", "freq_threshold");
  add_override("--tau", "selection_tau");
  add_override("--gamma", "gamma");
  add_override("--t-start", "t_start");
  add_override("--t-end", "t_end");
  add_override("--hash-dim", "hash_dim");
  add_override("--q-init", "q_init");
  add_override("--q-mode", "q_mode");
  add_override("--kbest-refresh", "kbest_refresh");
  add_override("--jobs", "jobs");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "score a model against gold annotations");
  cmd_eval->add_option("--model", eval.model_file)->required();
  cmd_eval->add_option("--test", eval.test_file)->required();
  cmd_eval->add_option("--report", eval.report_out);
  cmd_eval->add_option("--topk", eval.topk, "also report gold-path coverage at K");

  DecodeArgs decode;
  auto* cmd_decode = app.add_subcommand("decode", "tag a corpus with a trained model");
  cmd_decode->add_option("--model", decode.model_file)->required();
  cmd_decode->add_option("--in", decode.in_file)->required();
  cmd_decode->add_option("--out", decode.out_file)->required();

  DecodeArgs kbest;
  auto* cmd_kbest = app.add_subcommand("kbest", "list the top-K paths per sentence");
  cmd_kbest->add_option("--model", kbest.model_file)->required();
  cmd_kbest->add_option("--in", kbest.in_file)->required();
  cmd_kbest->add_option("--out", kbest.out_file)->required();
  cmd_kbest->add_option("--k", kbest.k);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_corrupt->parsed()) return run_corrupt(corrupt);
    if (cmd_train->parsed()) {
      train.config = load_config(config_file);
      for (const auto& [key, value] : overrides) {
        seqtag::apply_config_line(train.config, key, value);
      }
      train.config.validate();
      return run_train(train);
    }
    if (cmd_eval->parsed()) return run_eval(eval);
    if (cmd_decode->parsed()) return run_decode(decode);
    if (cmd_kbest->parsed()) return run_kbest(kbest);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
