#include "seqtag/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "seqtag/rng.hpp"

namespace seqtag {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'T', 'A', 'G', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

const std::vector<std::string> kKnownTemplates = {"word", "shape", "prefix",
                                                  "suffix", "flags"};

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string lowercased(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Case/digit/punct pattern with runs collapsed, e.g. "McD-12" -> "Xx-d".
std::string word_shape(const std::string& s) {
  std::string out;
  char prev = 0;
  for (unsigned char c : s) {
    char cls;
    if (std::isupper(c)) cls = 'X';
    else if (std::islower(c)) cls = 'x';
    else if (std::isdigit(c)) cls = 'd';
    else cls = static_cast<char>(c);
    if (cls != prev) out.push_back(cls);
    prev = cls;
  }
  return out;
}

}  // namespace

void FeatureConfig::validate() const {
  if (templates.empty()) {
    throw std::invalid_argument("FeatureConfig: templates must be non-empty");
  }
  for (const auto& t : templates) {
    if (std::find(kKnownTemplates.begin(), kKnownTemplates.end(), t) ==
        kKnownTemplates.end()) {
      throw std::invalid_argument("FeatureConfig: unknown template '" + t + "'");
    }
  }
  if (hash_dim < (1ull << 10) || (hash_dim & (hash_dim - 1)) != 0) {
    throw std::invalid_argument("FeatureConfig: hash_dim must be a power of two >= 2^10");
  }
}

TokenFeatures extract_features(const Sentence& sentence,
                               const FeatureConfig& config) {
  config.validate();
  const std::size_t n = sentence.size();
  TokenFeatures feats(n);

  auto token_at = [&](std::ptrdiff_t i) -> std::string {
    if (i < 0) return "<s>";
    if (static_cast<std::size_t>(i) >= n) return "</s>";
    return sentence.tokens[i];
  };

  for (std::size_t t = 0; t < n; ++t) {
    auto& out = feats[t];
    for (int off = -2; off <= 2; ++off) {
      std::string tok = token_at(static_cast<std::ptrdiff_t>(t) + off);
      std::string tag = std::to_string(off) + "|";
      auto add = [&](const std::string& tmpl, const std::string& value) {
        std::uint64_t h = fnv1a(tmpl + "|" + tag + value, config.hash_seed);
        out.push_back(static_cast<std::uint32_t>(h & (config.hash_dim - 1)));
      };
      for (const auto& tmpl : config.templates) {
        if (tmpl == "word") {
          add("word", lowercased(tok));
        } else if (tmpl == "shape") {
          add("shape", word_shape(tok));
        } else if (tmpl == "prefix") {
          for (std::size_t len = 1; len <= 3 && len <= tok.size(); ++len) {
            add("pre" + std::to_string(len), tok.substr(0, len));
          }
        } else if (tmpl == "suffix") {
          for (std::size_t len = 1; len <= 3 && len <= tok.size(); ++len) {
            add("suf" + std::to_string(len), tok.substr(tok.size() - len));
          }
        } else if (tmpl == "flags") {
          bool cap = !tok.empty() && std::isupper(static_cast<unsigned char>(tok[0]));
          bool dig = !tok.empty() &&
                     std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
                       return std::isdigit(c);
                     });
          add("flags", std::string(cap ? "C" : "c") + (dig ? "D" : "d"));
        }
      }
    }
  }
  return feats;
}

ModelParams ModelParams::init(const LabelSet& labels, const FeatureConfig& config,
                              std::uint64_t seed, double scale) {
  config.validate();
  const std::size_t L = labels.size();
  ModelParams p;
  p.label_set = labels;
  p.feature_config = config;
  p.emit_weights.assign(config.hash_dim * L, 0.0);
  p.trans.assign(L * L, 0.0);
  p.start.assign(L, 0.0);
  p.stop.assign(L, 0.0);
  if (scale != 0.0) {
    Rng rng(seed);
    auto draw = [&] { return scale * (2.0 * rng.unit() - 1.0); };
    for (double& v : p.emit_weights) v = draw();
    for (double& v : p.trans) v = draw();
    for (double& v : p.start) v = draw();
    for (double& v : p.stop) v = draw();
  }
  return p;
}

Lattice score_sentence(const ModelParams& params, const TokenFeatures& features) {
  const std::size_t n = features.size(), L = params.num_labels();
  Lattice lat(n, L);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::uint32_t f : features[t]) {
      const double* row = &params.emit_weights[static_cast<std::size_t>(f) * L];
      for (std::size_t l = 0; l < L; ++l) lat.emit_at(t, l) += row[l];
    }
  }
  lat.trans = params.trans;
  lat.start = params.start;
  lat.stop = params.stop;
  return lat;
}

Lattice score_sentence(const ModelParams& params, const Sentence& sentence) {
  return score_sentence(params, extract_features(sentence, params.feature_config));
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be >= 0");
}

namespace {

struct Updater {
  Optimizer optimizer;
  double lr;
  std::vector<double> acc;  // AdaGrad accumulators, lazily sized

  void ensure(std::size_t size) {
    if (optimizer == Optimizer::AdaGradStyle && acc.size() != size) {
      acc.assign(size, 0.0);
    }
  }

  void apply(std::vector<double>& w, std::size_t index, double g) {
    if (optimizer == Optimizer::AdaGradStyle) {
      acc[index] += g * g;
      w[index] -= lr * g / (std::sqrt(acc[index]) + 1e-8);
    } else {
      w[index] -= lr * g;
    }
  }
};

}  // namespace

TrainResult train(const std::vector<TrainingInstance>& data,
                  const LossConfig& loss_config, const TrainConfig& train_config,
                  ModelParams initial) {
  train_config.validate();
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");

  const std::size_t L = initial.num_labels();
  for (const auto& inst : data) {
    if (loss_config.kind == LossKind::NLL && !inst.gold) {
      throw std::invalid_argument("train: NLL requires gold tags");
    }
    if ((loss_config.kind == LossKind::Weighted ||
         loss_config.kind == LossKind::Combined) && !inst.q) {
      throw std::invalid_argument("train: weighted objectives require q");
    }
  }

  TrainResult result;
  result.params = std::move(initial);
  ModelParams& p = result.params;

  const std::size_t num_batches =
      (data.size() + train_config.batch_size - 1) / train_config.batch_size;
  const std::size_t total_steps = std::max<std::size_t>(1, train_config.epochs * num_batches);

  Updater up_emit{train_config.optimizer, train_config.learning_rate, {}};
  Updater up_trans = up_emit, up_start = up_emit, up_stop = up_emit;
  up_emit.ensure(p.emit_weights.size());
  up_trans.ensure(p.trans.size());
  up_start.ensure(p.start.size());
  up_stop.ensure(p.stop.size());

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(train_config.seed);

  std::vector<std::vector<ScoredPath>> kbest_cache(data.size());
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    if (loss_config.kind == LossKind::Combined &&
        loss_config.kbest_refresh == KBestRefresh::PerEpoch) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        Lattice lat = score_sentence(p, data[i].features);
        kbest_cache[i] = kbest_viterbi(lat, data[i].mask, loss_config.k);
      }
    }
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < num_batches; ++b) {
      const std::size_t lo = b * train_config.batch_size;
      const std::size_t hi = std::min(lo + train_config.batch_size, data.size());

      std::unordered_map<std::uint64_t, double> g_emit;
      std::vector<double> g_trans(L * L, 0.0), g_start(L, 0.0), g_stop(L, 0.0);

      for (std::size_t i = lo; i < hi; ++i) {
        const TrainingInstance& inst = data[order[i]];
        Lattice lat = score_sentence(p, inst.features);

        double loss = 0.0;
        LatticeGradient grad;
        switch (loss_config.kind) {
          case LossKind::NLL: {
            LossResult r = nll_loss(lat, *inst.gold);
            loss = r.loss;
            grad = std::move(r.grad);
            break;
          }
          case LossKind::Fuzzy: {
            LossResult r = fuzzy_loss(lat, inst.mask);
            loss = r.loss;
            grad = std::move(r.grad);
            break;
          }
          case LossKind::Weighted: {
            LossResult r = weighted_crf_loss(lat, inst.mask, *inst.q);
            loss = r.loss;
            grad = std::move(r.grad);
            break;
          }
          case LossKind::Combined: {
            double lambda = lambda_at(global_step, total_steps, loss_config.gamma);
            const std::vector<ScoredPath>* fixed =
                loss_config.kbest_refresh == KBestRefresh::PerEpoch
                    ? &kbest_cache[order[i]]
                    : nullptr;
            CombinedLossResult r =
                combined_loss(lat, inst.mask, *inst.q, loss_config.k, lambda, fixed);
            loss = r.breakdown.total;
            grad = std::move(r.grad);
            break;
          }
        }
        loss_sum += loss;

        for (std::size_t t = 0; t < grad.n; ++t) {
          for (std::size_t l = 0; l < L; ++l) {
            double g = grad.d_emit[t * L + l];
            if (g == 0.0) continue;
            for (std::uint32_t f : inst.features[t]) {
              g_emit[static_cast<std::uint64_t>(f) * L + l] += g;
            }
          }
        }
        for (std::size_t i2 = 0; i2 < L * L; ++i2) g_trans[i2] += grad.d_trans[i2];
        for (std::size_t l = 0; l < L; ++l) {
          g_start[l] += grad.d_start[l];
          g_stop[l] += grad.d_stop[l];
        }
      }

      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (const auto& [c, g] : g_emit) {
        up_emit.apply(p.emit_weights, c, g * inv + train_config.l2 * p.emit_weights[c]);
      }
      for (std::size_t c = 0; c < L * L; ++c) {
        up_trans.apply(p.trans, c, g_trans[c] * inv + train_config.l2 * p.trans[c]);
      }
      for (std::size_t c = 0; c < L; ++c) {
        up_start.apply(p.start, c, g_start[c] * inv + train_config.l2 * p.start[c]);
        up_stop.apply(p.stop, c, g_stop[c] * inv + train_config.l2 * p.stop[c]);
      }
      ++global_step;
    }

    double mean = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(mean)) {
      throw std::runtime_error("train: mean loss is not finite at epoch " +
                               std::to_string(epoch));
    }
    result.epoch_mean_loss.push_back(mean);
  }
  return result;
}

ScoredPath predict(const ModelParams& params, const Sentence& sentence,
                   const AllowedMask* mask) {
  Lattice lat = apply_structural_constraints(
      score_sentence(params, sentence), structural_transitions(params.label_set));
  AllowedMask full = AllowedMask::full(lat.n, lat.L);
  return viterbi(lat, mask ? *mask : full);
}

SentenceScore probability_score(const ModelParams& params, const Sentence& sentence,
                                const AllowedMask& mask, bool length_normalize) {
  Lattice lat = apply_structural_constraints(
      score_sentence(params, sentence), structural_transitions(params.label_set));
  SentenceScore out;
  out.path = viterbi(lat, mask);
  double log_z = log_partition(lat, AllowedMask::full(lat.n, lat.L));
  double norm = length_normalize ? static_cast<double>(lat.n) : 1.0;
  out.s = std::exp((out.path.score - log_z) / norm);
  return out;
}

void save_model(const ModelParams& params, std::ostream& out) {
  nlohmann::ordered_json header;
  header["version"] = kFormatVersion;
  std::vector<std::string> types;
  for (const auto& t : params.label_set.types()) types.push_back(t.name);
  header["entity_types"] = types;
  header["templates"] = params.feature_config.templates;
  header["hash_dim"] = params.feature_config.hash_dim;
  header["hash_seed"] = params.feature_config.hash_seed;

  std::string hjson = header.dump();
  out.write(kMagic, sizeof(kMagic));
  std::uint32_t hlen = static_cast<std::uint32_t>(hjson.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hjson.data(), hjson.size());
  auto dump = [&](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  dump(params.emit_weights);
  dump(params.trans);
  dump(params.start);
  dump(params.stop);
  if (!out) throw std::runtime_error("save_model: write failure");
}

ModelParams load_model(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic)) {
    throw std::runtime_error("load_model: bad magic header");
  }
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen == 0 || hlen > (1u << 20)) {
    throw std::runtime_error("load_model: corrupt header");
  }
  std::string hjson(hlen, '\0');
  in.read(hjson.data(), hlen);
  if (!in) throw std::runtime_error("load_model: corrupt header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hjson);
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("load_model: corrupt header");
  }
  if (header.value("version", 0u) != kFormatVersion) {
    throw std::runtime_error("load_model: unsupported format version");
  }

  std::vector<EntityType> types;
  for (const auto& name : header.at("entity_types")) {
    types.push_back(EntityType{name.get<std::string>()});
  }
  ModelParams p;
  p.label_set = LabelSet::build(types);
  p.feature_config.templates = header.at("templates").get<std::vector<std::string>>();
  p.feature_config.hash_dim = header.at("hash_dim").get<std::uint64_t>();
  p.feature_config.hash_seed = header.at("hash_seed").get<std::uint64_t>();
  p.feature_config.validate();

  const std::size_t L = p.label_set.size();
  auto slurp = [&](std::vector<double>& v, std::size_t count) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("load_model: truncated payload");
  };
  slurp(p.emit_weights, p.feature_config.hash_dim * L);
  slurp(p.trans, L * L);
  slurp(p.start, L);
  slurp(p.stop, L);
  return p;
}

void save_model_file(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  save_model(params, out);
}

ModelParams load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace seqtag
