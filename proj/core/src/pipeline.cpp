#include "seqtag/pipeline.hpp"

#include <algorithm>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "seqtag/rng.hpp"

namespace seqtag {

void PipelineConfig::validate() const {
  if (k_folds < 2) throw std::invalid_argument("pipeline: k_folds must be >= 2");
  if (iterations < 1) throw std::invalid_argument("pipeline: iterations must be >= 1");
  if (top_k < 1) throw std::invalid_argument("pipeline: top_k must be >= 1");
  if (freq_threshold < 1) throw std::invalid_argument("pipeline: freq_threshold must be >= 1");
  if (selection_tau < 0.0 || selection_tau > 1.0) {
    throw std::invalid_argument("pipeline: selection_tau must be in [0,1]");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("pipeline: gamma must be > 0");
  if (!(temperature.t_start >= temperature.t_end && temperature.t_end > 0.0)) {
    throw std::invalid_argument("pipeline: need t_start >= t_end > 0");
  }
  if (jobs < 1) throw std::invalid_argument("pipeline: jobs must be >= 1");
  train.validate();
  features.validate();
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::effective_config() const {
  auto fmt = [](double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
  };
  return {
      {"k_folds", std::to_string(k_folds)},
      {"iterations", std::to_string(iterations)},
      {"top_k", std::to_string(top_k)},
      {"freq_threshold", std::to_string(freq_threshold)},
      {"selection_tau", fmt(selection_tau)},
      {"t_start", fmt(temperature.t_start)},
      {"t_end", fmt(temperature.t_end)},
      {"gamma", fmt(gamma)},
      {"epochs", std::to_string(train.epochs)},
      {"batch_size", std::to_string(train.batch_size)},
      {"learning_rate", fmt(train.learning_rate)},
      {"l2", fmt(train.l2)},
      {"seed", std::to_string(seed)},
      {"hash_dim", std::to_string(features.hash_dim)},
      {"q_init", q_init == QInit::HardO ? "hard_o" : "uniform"},
      {"q_mode", q_mode == QMode::Hard ? "hard"
                 : q_mode == QMode::Soft ? "soft" : "interpolated"},
      {"kbest_refresh",
       kbest_refresh == KBestRefresh::PerEpoch ? "per_epoch" : "per_step"},
      {"length_normalize_score", length_normalize_score ? "true" : "false"},
      {"use_kbest_term", use_kbest_term ? "true" : "false"},
      {"use_candidate_mask", use_candidate_mask ? "true" : "false"},
      {"use_selection", use_selection ? "true" : "false"},
  };
}

void apply_config_line(PipelineConfig& config, const std::string& key,
                       const std::string& value) {
  auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  auto as_double = [&] { return std::stod(value); };
  auto as_bool = [&] {
    if (value == "true") return true;
    if (value == "false") return false;
    throw std::invalid_argument("config: expected true/false for " + key);
  };
  if (key == "k_folds") config.k_folds = as_size();
  else if (key == "iterations") config.iterations = as_size();
  else if (key == "top_k") config.top_k = as_size();
  else if (key == "freq_threshold") config.freq_threshold = as_size();
  else if (key == "selection_tau") config.selection_tau = as_double();
  else if (key == "t_start") config.temperature.t_start = as_double();
  else if (key == "t_end") config.temperature.t_end = as_double();
  else if (key == "gamma") config.gamma = as_double();
  else if (key == "epochs") config.train.epochs = as_size();
  else if (key == "batch_size") config.train.batch_size = as_size();
  else if (key == "learning_rate") config.train.learning_rate = as_double();
  else if (key == "l2") config.train.l2 = as_double();
  else if (key == "seed") config.seed = std::stoull(value);
  else if (key == "hash_dim") config.features.hash_dim = std::stoull(value);
  else if (key == "jobs") config.jobs = as_size();
  else if (key == "init_scale") config.init_scale = as_double();
  else if (key == "q_init") {
    if (value == "hard_o") config.q_init = QInit::HardO;
    else if (value == "uniform") config.q_init = QInit::Uniform;
    else throw std::invalid_argument("config: q_init must be hard_o or uniform");
  } else if (key == "q_mode") {
    if (value == "hard") config.q_mode = QMode::Hard;
    else if (value == "soft") config.q_mode = QMode::Soft;
    else if (value == "interpolated") config.q_mode = QMode::Interpolated;
    else throw std::invalid_argument("config: bad q_mode '" + value + "'");
  } else if (key == "kbest_refresh") {
    if (value == "per_epoch") config.kbest_refresh = KBestRefresh::PerEpoch;
    else if (value == "per_step") config.kbest_refresh = KBestRefresh::PerStep;
    else throw std::invalid_argument("config: bad kbest_refresh '" + value + "'");
  } else if (key == "length_normalize_score") {
    config.length_normalize_score = as_bool();
  } else if (key == "accumulate_dictionary") {
    config.accumulate_dictionary = as_bool();
  } else if (key == "use_kbest_term") {
    config.use_kbest_term = as_bool();
  } else if (key == "use_candidate_mask") {
    config.use_candidate_mask = as_bool();
  } else if (key == "use_selection") {
    config.use_selection = as_bool();
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

PipelineConfig parse_pipeline_config(std::istream& in) {
  PipelineConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string key, value, extra;
    std::istringstream ss(line);
    if (!(ss >> key)) continue;
    ss >> value;
    if (value == "=") ss >> value;
    if (value.empty()) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": missing value for '" + key + "'");
    }
    auto eq = key.find('=');
    if (eq != std::string::npos) {
      // key=value without spaces
      value = key.substr(eq + 1);
      key.erase(eq);
    }
    apply_config_line(config, key, value);
  }
  return config;
}

void EntityDictionary::add(const std::vector<std::string>& surface, int type,
                           std::size_t count) {
  auto [it, inserted] = entries_.emplace(surface, std::make_pair(type, count));
  if (!inserted) {
    if (it->second.first == type) {
      it->second.second += count;
    } else if (count > it->second.second ||
               (count == it->second.second && type < it->second.first)) {
      it->second = {type, count};
    }
  }
  max_len_ = std::max(max_len_, surface.size());
}

std::optional<int> EntityDictionary::lookup(
    const std::vector<std::string>& surface) const {
  auto it = entries_.find(surface);
  if (it == entries_.end()) return std::nullopt;
  return it->second.first;
}

std::vector<std::size_t> split_folds(std::size_t num_items, std::size_t k,
                                     std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("split_folds: k must be >= 2");
  if (k > num_items) throw std::invalid_argument("split_folds: k exceeds dataset size");
  std::vector<std::size_t> order(num_items);
  for (std::size_t i = 0; i < num_items; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> fold_of(num_items, 0);
  std::size_t base = num_items / k, extra = num_items % k, pos = 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t size = base + (j < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[order[pos++]] = j;
  }
  return fold_of;
}

AllowedMask annotation_mask(const PartialTags& tags, std::size_t L) {
  AllowedMask mask(tags.size(), L, true);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t] != kUnannotated) mask.restrict_to(t, tags[t]);
  }
  return mask;
}

std::vector<ScoredPath> build_kbest_candidates(const ModelParams& model,
                                               const Sentence& sentence,
                                               const PartialTags& tags,
                                               std::size_t k) {
  Lattice lat = apply_structural_constraints(
      score_sentence(model, sentence), structural_transitions(model.label_set));
  std::vector<ScoredPath> paths =
      kbest_viterbi(lat, annotation_mask(tags, lat.L), k);
  std::erase_if(paths, [](const ScoredPath& p) { return p.score == kNegInf; });
  return paths;
}

EntityDictionary build_entity_dictionary(const PartialDataset& data,
                                         const std::vector<std::vector<int>>& predicted,
                                         std::size_t freq_threshold) {
  if (predicted.size() != data.items.size()) {
    throw std::invalid_argument("build_entity_dictionary: prediction count mismatch");
  }
  std::map<std::pair<std::vector<std::string>, int>, std::size_t> counts;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& tokens = data.items[i].sentence.tokens;
    for (const Span& s : spans_from_tags(data.labels, predicted[i])) {
      std::vector<std::string> surface(tokens.begin() + static_cast<std::ptrdiff_t>(s.start),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(s.end));
      ++counts[{std::move(surface), s.type}];
    }
  }
  EntityDictionary dict;
  for (const auto& [key, count] : counts) {
    if (count >= freq_threshold) dict.add(key.first, key.second, count);
  }
  return dict;
}

std::vector<int> self_built_candidate(const LabelSet& labels,
                                      const Sentence& sentence,
                                      const EntityDictionary& dictionary) {
  const std::size_t n = sentence.size();
  std::vector<int> tags(n, LabelSet::outside());
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t max_len = std::min(dictionary.max_surface_length(), n - pos);
    bool matched = false;
    for (std::size_t len = max_len; len >= 1 && !matched; --len) {
      std::vector<std::string> window(
          sentence.tokens.begin() + static_cast<std::ptrdiff_t>(pos),
          sentence.tokens.begin() + static_cast<std::ptrdiff_t>(pos + len));
      if (auto type = dictionary.lookup(window)) {
        for (std::size_t i = 0; i < len; ++i) {
          tags[pos + i] = i == 0 ? labels.begin_of(*type) : labels.inside_of(*type);
        }
        pos += len;
        matched = true;
      }
    }
    if (!matched) ++pos;
  }
  return tags;
}

AllowedMask build_candidate_mask(const LabelSet& labels, const PartialTags& tags,
                                 const std::vector<ScoredPath>& kbest,
                                 const std::vector<int>& self_built) {
  const std::size_t n = tags.size(), L = labels.size();
  if (self_built.size() != n) {
    throw std::invalid_argument("build_candidate_mask: length mismatch");
  }
  for (const auto& path : kbest) {
    if (path.labels.size() != n) {
      throw std::invalid_argument("build_candidate_mask: candidate length mismatch");
    }
  }
  AllowedMask mask(n, L, false);
  for (std::size_t t = 0; t < n; ++t) {
    if (tags[t] != kUnannotated) {
      mask.set(t, tags[t], true);
      continue;
    }
    mask.set(t, LabelSet::outside(), true);
    mask.set(t, self_built[t], true);
    for (const auto& path : kbest) mask.set(t, path.labels[t], true);
  }
  return mask;
}

Selection select_samples(const std::vector<double>& scores, double tau) {
  Selection sel;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= tau) sel.indices.push_back(i);
  }
  if (sel.indices.empty()) {
    sel.fallback = true;
    sel.indices.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) sel.indices[i] = i;
  }
  return sel;
}

namespace {

std::vector<int> o_completed(const PartialTags& tags) {
  std::vector<int> out(tags.size(), LabelSet::outside());
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t] != kUnannotated) out[t] = tags[t];
  }
  return out;
}

QFactorized estimate_q(const ModelParams& model, const TokenFeatures& features,
                       const AllowedMask& mask, QMode mode, double temperature) {
  Lattice lat = score_sentence(model, features);
  switch (mode) {
    case QMode::Hard: return estimate_q_hard(lat, mask);
    case QMode::Soft: return estimate_q_soft(lat, mask);
    case QMode::Interpolated: return estimate_q_interpolated(lat, mask, temperature);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

PipelineResult run_pipeline(const PartialDataset& train_data,
                            const PartialDataset& dev_data,
                            const PipelineConfig& config) {
  config.validate();
  if (train_data.items.empty()) {
    throw std::invalid_argument("run_pipeline: training data is empty");
  }
  if (!dev_data.fully_annotated()) {
    throw std::invalid_argument("run_pipeline: dev data must be fully annotated");
  }
  if (!(train_data.labels == dev_data.labels)) {
    throw std::invalid_argument("run_pipeline: train/dev label sets differ");
  }

  const LabelSet& labels = train_data.labels;
  const std::size_t L = labels.size();
  const std::size_t num_items = train_data.items.size();

  TemperatureSchedule schedule = config.temperature;
  schedule.iterations = config.iterations;

  LossConfig loss_config;
  loss_config.kind = config.use_kbest_term ? LossKind::Combined : LossKind::Weighted;
  loss_config.k = config.top_k;
  loss_config.gamma = config.gamma;
  loss_config.kbest_refresh = config.kbest_refresh;

  // precomputed per-sentence state
  std::vector<TokenFeatures> features(num_items);
  std::vector<AllowedMask> annot_masks(num_items);
  for (std::size_t i = 0; i < num_items; ++i) {
    features[i] = extract_features(train_data.items[i].sentence, config.features);
    annot_masks[i] = annotation_mask(train_data.items[i].tags, L);
  }
  std::vector<AllowedMask> masks = annot_masks;
  std::vector<QFactorized> q(num_items);
  for (std::size_t i = 0; i < num_items; ++i) {
    q[i] = config.q_init == QInit::HardO
               ? q_from_path(o_completed(train_data.items[i].tags), L)
               : q_uniform(annot_masks[i]);
  }

  std::vector<std::size_t> fold_of =
      split_folds(num_items, config.k_folds, Rng::derive(config.seed, 1));
  std::vector<char> selected(num_items, 1);

  std::vector<std::vector<int>> dev_gold;
  for (const auto& item : dev_data.items) dev_gold.push_back(item.tags);

  PipelineResult result;
  bool have_model = false;
  double best_f1 = -1.0;

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const double temperature = temperature_at(iter, schedule);

    // (a) fold models on the selected samples of the complement fold
    std::vector<ModelParams> fold_models(config.k_folds);
    auto train_fold = [&](std::size_t j) {
      std::vector<TrainingInstance> instances;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < num_items; ++i) {
        if (fold_of[i] != j && selected[i]) idx.push_back(i);
      }
      if (idx.empty()) {
        for (std::size_t i = 0; i < num_items; ++i) {
          if (fold_of[i] != j) idx.push_back(i);
        }
      }
      for (std::size_t i : idx) {
        instances.push_back(TrainingInstance{features[i], masks[i], q[i],
                                             o_completed(train_data.items[i].tags)});
      }
      TrainConfig tc = config.train;
      tc.seed = Rng::derive(config.seed, 1000 + iter * config.k_folds + j);
      ModelParams init = ModelParams::init(labels, config.features, tc.seed + 1,
                                           config.init_scale);
      fold_models[j] = train(instances, loss_config, tc, std::move(init)).params;
    };
    if (config.jobs > 1) {
      std::vector<std::thread> threads;
      for (std::size_t j = 0; j < config.k_folds; ++j) {
        threads.emplace_back(train_fold, j);
      }
      for (auto& t : threads) t.join();
    } else {
      for (std::size_t j = 0; j < config.k_folds; ++j) train_fold(j);
    }

    // (b) decode held-out folds: predictions and probability scores
    std::vector<std::vector<int>> held_pred(num_items);
    std::vector<double> scores(num_items, 0.0);
    for (std::size_t i = 0; i < num_items; ++i) {
      SentenceScore sc = probability_score(
          fold_models[fold_of[i]], train_data.items[i].sentence, annot_masks[i],
          config.length_normalize_score);
      held_pred[i] = sc.path.labels;
      scores[i] = sc.s;
    }

    // (c) entity dictionary from the union of fold predictions
    EntityDictionary dict =
        build_entity_dictionary(train_data, held_pred, config.freq_threshold);
    if (config.accumulate_dictionary) {
      for (const auto& [surface, entry] : result.dictionary.entries()) {
        dict.add(surface, entry.first, entry.second);
      }
    }
    result.dictionary = std::move(dict);

    // (d) rebuild candidate masks and estimate q on them
    for (std::size_t i = 0; i < num_items; ++i) {
      if (config.use_candidate_mask) {
        std::vector<ScoredPath> kb;
        if (have_model) {
          kb = build_kbest_candidates(result.model, train_data.items[i].sentence,
                                      train_data.items[i].tags, config.top_k);
        }
        std::vector<int> self_built =
            self_built_candidate(labels, train_data.items[i].sentence,
                                 result.dictionary);
        masks[i] = build_candidate_mask(labels, train_data.items[i].tags, kb,
                                        self_built);
      }
      q[i] = estimate_q(fold_models[fold_of[i]], features[i], masks[i],
                        config.q_mode, temperature);
    }

    // (e) full-data model
    std::vector<TrainingInstance> full_instances;
    for (std::size_t i = 0; i < num_items; ++i) {
      full_instances.push_back(TrainingInstance{features[i], masks[i], q[i],
                                                o_completed(train_data.items[i].tags)});
    }
    TrainConfig tc = config.train;
    tc.seed = Rng::derive(config.seed, 5000 + iter);
    ModelParams init = ModelParams::init(labels, config.features, tc.seed + 1,
                                         config.init_scale);
    TrainResult full = train(full_instances, loss_config, tc, std::move(init));

    // (f) dev-F1 gate
    std::vector<std::vector<int>> dev_pred;
    for (const auto& item : dev_data.items) {
      dev_pred.push_back(predict(full.params, item.sentence).labels);
    }
    PRF prf = entity_prf(labels, dev_gold, dev_pred);

    IterationRecord record;
    record.dev_precision = prf.precision;
    record.dev_recall = prf.recall;
    record.dev_f1 = prf.f1;
    record.mean_loss = full.epoch_mean_loss.empty() ? 0.0 : full.epoch_mean_loss.back();
    record.temperature = temperature;
    {
      const std::size_t num_batches =
          (full_instances.size() + config.train.batch_size - 1) / config.train.batch_size;
      const std::size_t total = std::max<std::size_t>(1, config.train.epochs * num_batches);
      record.lambda_final =
          config.use_kbest_term && total > 0
              ? lambda_at(total > 0 ? total - 1 : 0, total, config.gamma)
              : 0.0;
    }
    record.accepted = prf.f1 > best_f1;
    if (record.accepted) {
      best_f1 = prf.f1;
      result.model = std::move(full.params);
      have_model = true;
    }
    result.history.push_back(record);

    // iterative sample selection feeds the next iteration's fold training
    if (config.use_selection) {
      Selection sel = select_samples(scores, config.selection_tau);
      result.selection_warning = result.selection_warning || sel.fallback;
      std::fill(selected.begin(), selected.end(), 0);
      for (std::size_t i : sel.indices) selected[i] = 1;
    }
  }

  if (!have_model) {
    throw std::runtime_error("run_pipeline: no iteration was accepted");
  }
  return result;
}

}  // namespace seqtag
