#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "seqtag/corpus.hpp"
#include "seqtag/encoder.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;

namespace {

LabelSet toy_labels() { return LabelSet::build({{"PER"}}); }

Sentence sent(std::initializer_list<const char*> toks) {
  Sentence s;
  for (const char* t : toks) s.tokens.emplace_back(t);
  return s;
}

std::string random_token(Rng& rng) {
  std::string t;
  std::size_t len = 2 + rng.below(8);
  for (std::size_t i = 0; i < len; ++i) {
    t.push_back(static_cast<char>('a' + rng.below(26)));
  }
  return t;
}

}  // namespace

TEST_CASE("feature extraction is deterministic and context sensitive") {
  FeatureConfig config;
  Sentence s = sent({"John", "lives", "in", "Paris", "today"});
  TokenFeatures a = extract_features(s, config);
  TokenFeatures b = extract_features(s, config);
  CHECK(a == b);
  for (const auto& row : a) {
    CHECK(!row.empty());
    for (auto f : row) CHECK(f < config.hash_dim);
  }

  // identical tokens in identical +-2 windows share indices
  Sentence twice = sent({"a", "b", "x", "c", "d", "a", "b", "x", "c", "d"});
  TokenFeatures tf = extract_features(twice, config);
  CHECK(tf[2] == tf[7]);
}

TEST_CASE("feature config validation") {
  FeatureConfig bad;
  bad.hash_dim = 1000;  // not a power of two
  CHECK_THROWS(bad.validate());
  bad.hash_dim = 512;  // below 2^10
  CHECK_THROWS(bad.validate());
  bad.hash_dim = 1 << 12;
  bad.templates = {"word", "bogus"};
  CHECK_THROWS(bad.validate());
  bad.templates = {};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("hash collision rate is small") {
  // 10k distinct tokens as 1-token sentences under the word template: each
  // contributes exactly one variable feature string, plus 4 shared boundary
  // strings, so the union size exposes cross-token hash collisions.
  FeatureConfig config;
  config.templates = {"word"};
  Rng rng(211);
  std::set<std::string> tokens;
  while (tokens.size() < 10000) tokens.insert(random_token(rng));
  std::set<std::uint32_t> all;
  for (const auto& tok : tokens) {
    Sentence s;
    s.tokens.push_back(tok);
    TokenFeatures tf = extract_features(s, config);
    for (auto f : tf[0]) all.insert(f);
  }
  double collisions =
      static_cast<double>(tokens.size()) + 4.0 - static_cast<double>(all.size());
  CHECK(collisions / static_cast<double>(tokens.size()) < 0.05);
}

TEST_CASE("score_sentence structure and linearity") {
  LabelSet ls = toy_labels();
  FeatureConfig config;
  config.hash_dim = 1 << 12;

  ModelParams zero = ModelParams::init(ls, config, 0, 0.0);
  Sentence s = sent({"alpha", "beta"});
  Lattice lat = score_sentence(zero, s);
  for (double v : lat.emit) CHECK(v == 0.0);
  for (double v : lat.trans) CHECK(v == 0.0);

  ModelParams a = ModelParams::init(ls, config, 1, 0.01);
  ModelParams b = ModelParams::init(ls, config, 2, 0.01);
  ModelParams ab = a;
  for (std::size_t i = 0; i < ab.emit_weights.size(); ++i) ab.emit_weights[i] += b.emit_weights[i];
  for (std::size_t i = 0; i < ab.trans.size(); ++i) ab.trans[i] += b.trans[i];
  for (std::size_t i = 0; i < ab.start.size(); ++i) ab.start[i] += b.start[i];
  for (std::size_t i = 0; i < ab.stop.size(); ++i) ab.stop[i] += b.stop[i];
  Lattice la = score_sentence(a, s), lb = score_sentence(b, s), lab = score_sentence(ab, s);
  for (std::size_t i = 0; i < lab.emit.size(); ++i) {
    CHECK(lab.emit[i] == doctest::Approx(la.emit[i] + lb.emit[i]).epsilon(1e-12));
  }
}

TEST_CASE("single feature weight lands on the right emission") {
  LabelSet ls = toy_labels();
  FeatureConfig config;
  config.hash_dim = 1 << 12;
  ModelParams p = ModelParams::init(ls, config, 0, 0.0);
  Sentence s = sent({"zzz"});
  TokenFeatures tf = extract_features(s, config);
  std::uint32_t f = tf[0][0];
  p.emit_weights[static_cast<std::size_t>(f) * ls.size() + 2] = 1.0;
  Lattice lat = score_sentence(p, s);
  CHECK(lat.emit_at(0, 2) == doctest::Approx(1.0));
  CHECK(lat.emit_at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("zero epochs leave parameters unchanged") {
  LabelSet ls = toy_labels();
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  ModelParams init = ModelParams::init(ls, fc, 7, 0.01);

  TrainingInstance inst;
  Sentence s = sent({"a", "b"});
  inst.features = extract_features(s, fc);
  inst.mask = AllowedMask::full(2, ls.size());
  inst.gold = std::vector<int>{0, 1};

  TrainConfig tc;
  tc.epochs = 0;
  LossConfig lc;
  lc.kind = LossKind::NLL;
  TrainResult r = train({inst}, lc, tc, init);
  CHECK(r.params.emit_weights == init.emit_weights);
  CHECK(r.params.trans == init.trans);
  CHECK(r.epoch_mean_loss.empty());
}

TEST_CASE("nll training overfits a single sentence") {
  LabelSet ls = toy_labels();
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;

  TrainingInstance inst;
  Sentence s = sent({"alice", "went", "home"});
  inst.features = extract_features(s, fc);
  inst.mask = AllowedMask::full(3, ls.size());
  inst.gold = std::vector<int>{1, 0, 0};

  TrainConfig tc;
  tc.epochs = 200;
  tc.l2 = 0.0;
  LossConfig lc;
  lc.kind = LossKind::NLL;
  TrainResult r = train({inst}, lc, tc, ModelParams::init(ls, fc, 3, 0.0));
  CHECK(r.epoch_mean_loss.back() < 0.01);
  CHECK(predict(r.params, s).labels == std::vector<int>{1, 0, 0});
}

TEST_CASE("plain sgd nll loss history is non-increasing") {
  LabelSet ls = toy_labels();
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  std::vector<TrainingInstance> data;
  std::vector<Sentence> sents = {sent({"alice", "sleeps"}), sent({"bob", "runs", "fast"})};
  std::vector<std::vector<int>> golds = {{1, 0}, {1, 0, 0}};
  for (std::size_t i = 0; i < sents.size(); ++i) {
    TrainingInstance inst;
    inst.features = extract_features(sents[i], fc);
    inst.mask = AllowedMask::full(golds[i].size(), ls.size());
    inst.gold = golds[i];
    data.push_back(std::move(inst));
  }
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 2;
  tc.learning_rate = 0.05;
  tc.l2 = 0.0;
  tc.optimizer = Optimizer::PlainSGD;
  LossConfig lc;
  lc.kind = LossKind::NLL;
  TrainResult r = train(data, lc, tc, ModelParams::init(ls, fc, 5, 0.0));
  for (std::size_t e = 1; e < r.epoch_mean_loss.size(); ++e) {
    CHECK(r.epoch_mean_loss[e] <= r.epoch_mean_loss[e - 1] + 1e-6);
  }
}

TEST_CASE("training is bit deterministic") {
  LabelSet ls = toy_labels();
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  std::vector<TrainingInstance> data;
  for (int i = 0; i < 6; ++i) {
    TrainingInstance inst;
    Sentence s = sent({"tok", "another", "one"});
    s.tokens[0] += std::to_string(i);
    inst.features = extract_features(s, fc);
    inst.mask = AllowedMask::full(3, ls.size());
    inst.gold = std::vector<int>{i % 2 ? 1 : 0, 0, 0};
    data.push_back(std::move(inst));
  }
  TrainConfig tc;
  tc.epochs = 5;
  tc.seed = 99;
  LossConfig lc;
  lc.kind = LossKind::NLL;
  ModelParams init = ModelParams::init(ls, fc, 99, 0.01);
  TrainResult a = train(data, lc, tc, init);
  TrainResult b = train(data, lc, tc, init);
  CHECK(a.params.emit_weights == b.params.emit_weights);
  CHECK(a.params.trans == b.params.trans);
  CHECK(a.epoch_mean_loss == b.epoch_mean_loss);
}

TEST_CASE("end-to-end chained gradient sanity via tiny perturbation") {
  // perturbing one emission weight changes the loss consistently with the
  // chain rule through the linear model
  LabelSet ls = toy_labels();
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  Sentence s = sent({"alice", "ran"});
  TokenFeatures tf = extract_features(s, fc);
  ModelParams p = ModelParams::init(ls, fc, 17, 0.05);
  std::vector<int> gold = {1, 0};

  auto loss_of = [&](const ModelParams& m) {
    return nll_loss(score_sentence(m, tf), gold).loss;
  };
  auto r = nll_loss(score_sentence(p, tf), gold);
  // analytic emission-weight gradient: fan out token gradient to feature rows
  std::uint32_t f = tf[0][0];
  double analytic = 0.0;
  for (std::size_t t = 0; t < tf.size(); ++t) {
    for (auto fi : tf[t]) {
      if (fi == f) analytic += r.grad.d_emit[t * ls.size() + 1];
    }
  }
  const double h = 1e-5;
  ModelParams up = p, down = p;
  up.emit_weights[static_cast<std::size_t>(f) * ls.size() + 1] += h;
  down.emit_weights[static_cast<std::size_t>(f) * ls.size() + 1] -= h;
  double fd = (loss_of(up) - loss_of(down)) / (2 * h);
  CHECK(std::fabs(fd - analytic) / std::max({std::fabs(fd), std::fabs(analytic), 1e-3}) < 1e-3);
}

TEST_CASE("predict applies structural constraints") {
  LabelSet ls = toy_labels();
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  ModelParams p = ModelParams::init(ls, fc, 0, 0.0);
  // bias every emission toward I-PER, which is illegal sentence-initially and
  // after O
  for (std::size_t f = 0; f < fc.hash_dim; ++f) {
    p.emit_weights[f * ls.size() + 2] = 0.001;
  }
  Sentence s = sent({"x", "y"});
  auto path = predict(p, s);
  CHECK(path.labels[0] != 2);
}

TEST_CASE("probability scores") {
  LabelSet ls = LabelSet::build({{"A"}});
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;

  // one allowed path -> s = 1
  ModelParams p = ModelParams::init(ls, fc, 0, 0.0);
  Sentence s = sent({"tok"});
  AllowedMask forced(1, ls.size(), false);
  forced.set(0, 0, true);
  SentenceScore sc = probability_score(p, s, forced);
  // note: s is relative to the *full* partition, not the mask
  CHECK(sc.s > 0.0);
  CHECK(sc.s <= 1.0);

  Rng rng(223);
  for (int iter = 0; iter < 10; ++iter) {
    ModelParams m = ModelParams::init(ls, fc, 100 + iter, 0.05);
    Sentence rs = sent({"aa", "bb", "cc"});
    rs.tokens[0] += std::to_string(iter);
    AllowedMask full = AllowedMask::full(3, ls.size());
    SentenceScore score = probability_score(m, rs, full, true);
    Lattice lat = apply_structural_constraints(
        score_sentence(m, rs), structural_transitions(ls));
    double log_z = log_partition(lat, full);
    double expect = std::exp((score.path.score - log_z) / 3.0);
    CHECK(score.s == doctest::Approx(expect).epsilon(1e-9));
    CHECK(score.s > 0.0);
    CHECK(score.s <= 1.0 + 1e-12);
  }
}

TEST_CASE("model serialization round trips") {
  LabelSet ls = LabelSet::build({{"PER"}, {"LOC"}});
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  ModelParams p = ModelParams::init(ls, fc, 31, 0.05);

  std::ostringstream out;
  save_model(p, out);
  std::istringstream in(out.str());
  ModelParams q = load_model(in);

  CHECK(q.label_set == p.label_set);
  CHECK(q.emit_weights == p.emit_weights);
  CHECK(q.trans == p.trans);
  CHECK(q.start == p.start);
  CHECK(q.stop == p.stop);

  // byte-identical re-serialization
  std::ostringstream out2;
  save_model(q, out2);
  CHECK(out.str() == out2.str());

  // identical predictions on random sentences
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    Sentence s;
    std::size_t n = 1 + rng.below(8);
    for (std::size_t t = 0; t < n; ++t) s.tokens.push_back(random_token(rng));
    CHECK(predict(p, s).labels == predict(q, s).labels);
  }
}

TEST_CASE("model loading rejects bad input") {
  std::istringstream bad_magic("NOTAMODELxxxxxxxxxxxxxxxxxxx");
  CHECK_THROWS(load_model(bad_magic));

  LabelSet ls = LabelSet::build({{"A"}});
  FeatureConfig fc;
  fc.hash_dim = 1 << 12;
  ModelParams p = ModelParams::init(ls, fc, 0, 0.01);
  std::ostringstream out;
  save_model(p, out);
  std::string bytes = out.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS(load_model(truncated));
}
