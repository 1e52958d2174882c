#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "asu/checkpoint.hpp"
#include "asu/config.hpp"
#include "asu/corpus.hpp"
#include "asu/downstream.hpp"
#include "asu/experiments.hpp"
#include "asu/metrics.hpp"
#include "asu/speechsynth.hpp"
#include "asu/textgen.hpp"
#include "asu/trainer.hpp"
#include "test_support.hpp"

namespace asu {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

// Pinned tolerances and time limits.
constexpr double kMetricTol = 1e-12;
constexpr double kOneHotTol = 1e-9;
constexpr double kSimplexTol = 1e-6;
constexpr double kGradRelTol = 1e-4;
// Relative error denominator floor; below it gradients are compared absolutely.
constexpr double kGradFloor = 1e-3;
constexpr double kMetricSeconds = 10.0;
constexpr double kGradSeconds = 30.0;
constexpr double kPipelineSeconds = 60.0;
constexpr double kTrendSeconds = 300.0;

struct Verdict {
  bool pass = true;
  std::string detail;
  double limit_seconds = std::numeric_limits<double>::infinity();
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_.empty()) first_ = what;
    pass_ = pass_ && ok;
  }
  bool pass() const { return pass_; }
  std::string failure() const { return first_; }

 private:
  bool pass_ = true;
  std::string first_;
};

Verdict verdict(const Check& c, std::string detail) {
  if (!c.pass()) detail = "first failure: " + c.failure() + "; " + detail;
  return {c.pass(), std::move(detail)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 ---------------------------------------------------------------------------

struct OracleScores {
  double uar;
  double macro_f1;
};

// Per-sample counting with no confusion matrix.
OracleScores brute_force(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& label, std::size_t k) {
  double recall_sum = 0.0;
  double f1_sum = 0.0;
  std::size_t supported = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && label[i] == c) tp += 1;
      if (pred[i] == c && label[i] != c) fp += 1;
      if (pred[i] != c && label[i] == c) fn += 1;
    }
    if (tp + fn > 0) {
      recall_sum += tp / (tp + fn);
      ++supported;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    f1_sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return {recall_sum / static_cast<double>(supported), f1_sum / static_cast<double>(k)};
}

Verdict metric_oracle() {
  Check c;
  Engine rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + uniform_index(rng, 5);
    const std::size_t n = 1 + uniform_index(rng, 50);
    std::vector<std::size_t> pred(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = uniform_index(rng, k);
      label[i] = uniform_index(rng, k);
    }
    const auto m = compute_metrics(pred, label, k);
    const auto o = brute_force(pred, label, k);
    const double err = std::max(std::abs(m.uar - o.uar), std::abs(m.macro_f1 - o.macro_f1));
    worst = std::max(worst, err);
    c.expect(err <= kMetricTol, fmt::format("trial {}", trial));
  }
  auto v = verdict(c, fmt::format("1000 instances, max |diff| {:.3g}", worst));
  v.limit_seconds = kMetricSeconds;
  return v;
}

// 2 ---------------------------------------------------------------------------

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

HiddenStack constant_stack(const std::vector<double>& values, Eigen::Index frames, Eigen::Index dim) {
  HiddenStack s;
  for (double x : values) s.states.push_back(Matrix::Constant(frames, dim, x));
  s.frame_mask.assign(static_cast<std::size_t>(frames), 1);
  return s;
}

Verdict weighted_averaging() {
  Check c;
  Engine rng(2);
  HiddenStack random;
  for (int l = 0; l < 4; ++l) {
    Matrix m(6, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    random.states.push_back(m);
  }
  random.frame_mask.assign(6, 1);

  const Matrix uniform = weighted_layer_average(random, LayerWeights(4));
  const Matrix mean = (random.states[0] + random.states[1] + random.states[2] + random.states[3]) / 4.0;
  c.expect((uniform - mean).cwiseAbs().maxCoeff() <= 1e-12, "uniform weights give the layer mean");

  const Matrix one_hot = weighted_layer_average(random, LayerWeights(vec({0.0, 0.0, 50.0, 0.0})));
  const double dev = (one_hot - random.states[2]).cwiseAbs().maxCoeff();
  c.expect(dev <= kOneHotTol, fmt::format("near-one-hot deviation {:.3g}", dev));

  const Matrix mixed = weighted_layer_average(constant_stack({1.0, 3.0}, 4, 3), LayerWeights(vec({0.0, std::log(3.0)})));
  const double mix_dev = (mixed.array() - 2.5).abs().maxCoeff();
  c.expect(mix_dev <= 1e-12, "softmax(0, ln 3) mixes 1s and 3s into 2.5");

  // Simplex after 100 optimizer steps on a toy run.
  const auto data = testing::toy_dataset(3, 4, 5);
  AsuModel model(std::make_shared<StubEncoder>(testing::tiny_encoder_config(4, 8, 3)), testing::tiny_head(3),
                 std::nullopt, 4);
  Adam adam(model.trainable_state(), 0.05);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = make_batch(data.audio, idx, data.labels);
  double worst_sum = 0.0;
  double min_weight = 1.0;
  for (int step = 0; step < 100; ++step) {
    model.zero_grad();
    model.accumulate_batch(batch, nullptr);
    adam.step();
    const Vector w = model.layer_weights().normalized();
    worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
    min_weight = std::min(min_weight, w.minCoeff());
  }
  c.expect(worst_sum <= kSimplexTol, fmt::format("simplex sum off by {:.3g}", worst_sum));
  c.expect(min_weight > 0.0, "layer weights stay positive");
  const Vector final_w = model.layer_weights().normalized();
  c.expect((final_w.array() - 0.25).abs().maxCoeff() > 0.0, "layer weights moved");
  return verdict(c, fmt::format("one-hot dev {:.3g}, mix dev {:.3g}, 100 steps: |sum-1| {:.3g}, min w {:.4f}", dev,
                                mix_dev, worst_sum, min_weight));
}

// 3 ---------------------------------------------------------------------------

double pipeline_loss(const HiddenStack& stack, const LayerWeights& w, const ClassifierHead& head, std::size_t label) {
  return softmax_cross_entropy(head.forward(weighted_layer_average(stack, w), stack.frame_mask), label, nullptr);
}

Verdict gradient_check() {
  Check c;
  Engine rng(31);
  HiddenStack stack;
  for (int l = 0; l < 3; ++l) {
    Matrix m(5, 8);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    stack.states.push_back(m);
  }
  stack.frame_mask.assign(5, 1);
  Vector raw(3);
  for (Eigen::Index i = 0; i < 3; ++i) raw(i) = 0.5 * standard_normal(rng);
  LayerWeights w(raw);
  HeadConfig hc = testing::tiny_head(4, 6);
  hc.input_dim = 8;
  ClassifierHead head(hc, 9);
  const std::size_t label = 1;

  HeadTrace trace;
  Vector grad_logits;
  softmax_cross_entropy(head.forward(weighted_layer_average(stack, w), stack.frame_mask, &trace), label, &grad_logits);
  w.raw().zero_grad();
  for (Parameter* p : head.parameters()) p->zero_grad();
  weighted_layer_average_backward(stack, w, head.backward(trace, grad_logits));

  std::vector<Parameter*> params = head.parameters();
  params.push_back(&w.raw());
  const double h = 1e-6;
  double worst = 0.0;
  std::size_t checked = 0;
  for (Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      const double up = pipeline_loss(stack, w, head, label);
      p->value.data()[i] = saved - h;
      const double down = pipeline_loss(stack, w, head, label);
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(p->grad.data()[i] - numeric) / std::max(kGradFloor, std::abs(numeric));
      worst = std::max(worst, rel);
      c.expect(rel < kGradRelTol, fmt::format("{}[{}]", p->name, i));
      ++checked;
    }
  }
  auto v = verdict(c, fmt::format("{} parameters, max relative error {:.3g}", checked, worst));
  v.limit_seconds = kGradSeconds;
  return v;
}

// 4 ---------------------------------------------------------------------------

Verdict frozen_backbone_lora() {
  Check c;
  auto enc = std::make_shared<StubEncoder>(testing::tiny_encoder_config(4, 8, 11));
  const auto digest = enc->parameter_digest();
  LoraConfig lora;
  lora.rank = 4;
  lora.alpha = 8.0;

  const auto probe = testing::toy_dataset(2, 3, 40);
  const auto adapted = apply_lora(enc, lora, 5);
  bool identical = true;
  for (const auto& clip : probe.audio) {
    const auto base = enc->encode(clip, clip.size());
    const auto with = adapted.encode(clip, clip.size());
    identical = identical && base.frame_mask == with.frame_mask && base.states.size() == with.states.size();
    for (std::size_t l = 0; identical && l < base.states.size(); ++l) identical = base.states[l] == with.states[l];
  }
  c.expect(identical, "adapter at initialization reproduces the base encoder exactly");

  AsuModel model(enc, testing::tiny_head(2), lora, 6);
  const auto data = testing::toy_dataset(2, 6, 41);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = make_batch(data.audio, idx, data.labels);
  const auto before = model.snapshot();
  Adam adam(model.trainable_state(), 0.01);
  bool lora_changed = false;
  bool head_changed = false;
  for (int step = 0; step < 50; ++step) {
    model.zero_grad();
    model.accumulate_batch(batch, nullptr);
    adam.step();
    if (step == 0) {
      const auto after = model.snapshot();
      for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i].value == after[i].value) continue;
        lora_changed = lora_changed || before[i].name.starts_with("lora.");
        head_changed = head_changed || before[i].name.starts_with("head.");
      }
    }
  }
  c.expect(lora_changed, "a LoRA tensor changed after step 1");
  c.expect(head_changed, "a head tensor changed after step 1");
  c.expect(enc->parameter_digest() == digest, "base digest unchanged after 50 steps");
  bool base_leak = false;
  for (const auto& t : model.snapshot()) {
    base_leak = base_leak || !(t.name.starts_with("lora.") || t.name.starts_with("head.") ||
                               t.name.starts_with("layer_weights."));
  }
  c.expect(!base_leak, "trainable state holds no backbone tensor");
  return verdict(c, fmt::format("digest {}..., {} LoRA pairs", digest.substr(0, 12), model.adapter()->pairs().size()));
}

// 5 ---------------------------------------------------------------------------

TaskSpec toy_task(std::size_t classes) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < classes; ++i) labels.push_back(fmt::format("class {}", i));
  return TaskSpec(TaskKind::emotion, labels, 1);
}

TrainConfig toy_train(int epochs, std::uint64_t seed, Regime regime) {
  auto cfg = TrainConfig::defaults(TaskKind::emotion, regime);
  cfg.learning_rate = 0.01;
  cfg.batch_size = 8;
  cfg.max_epochs = epochs;
  cfg.seed = seed;
  cfg.regime = regime;
  return cfg;
}

Verdict init_transfer() {
  Check c;
  TempDir dir;
  const auto task = toy_task(4);
  auto enc = std::make_shared<StubEncoder>(testing::tiny_encoder_config(4, 8, 12));
  AsuModel trained(enc, testing::tiny_head(4), std::nullopt, 1);
  const auto synthetic = testing::toy_dataset(4, 8, 50, 0.1, 30.0, 40.0);
  const auto val = testing::toy_dataset(4, 2, 51, 0.1, 30.0, 40.0);
  const auto result = train(trained, task, synthetic, val, toy_train(3, 1, Regime::synthetic_zero_shot));
  save_checkpoint(dir / "synthetic.json", result.checkpoint);

  AsuModel fresh(std::make_shared<StubEncoder>(testing::tiny_encoder_config(4, 8, 12)), testing::tiny_head(4),
                 std::nullopt, 777);
  init_from_checkpoint(fresh, load_checkpoint(dir / "synthetic.json"), task);
  const auto probe = testing::toy_dataset(4, 4, 52);
  std::size_t identical = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Vector a = trained.logits(probe.audio[i], probe.audio[i].size());
    const Vector b = fresh.logits(probe.audio[i], probe.audio[i].size());
    identical += std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0 ? 1 : 0;
  }
  c.expect(probe.size() == 16, "16-utterance probe");
  c.expect(identical == probe.size(), fmt::format("{} of {} logits bit-identical", identical, probe.size()));
  return verdict(c, fmt::format("{} of {} probe logits bit-identical", identical, probe.size()));
}

// 6 ---------------------------------------------------------------------------

Verdict fold_partition() {
  Check c;
  Engine rng(66);
  std::size_t plans = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + uniform_index(rng, 6);
    std::vector<std::string> sessions;
    for (std::size_t s = 0; s < n; ++s) sessions.push_back(fmt::format("S{}_{}", uniform_index(rng, 1000), s));
    shuffle(std::span<std::string>(sessions), rng);
    const auto plan = make_session_folds(sessions);
    const std::set<std::string> all(sessions.begin(), sessions.end());
    std::map<std::string, int> tested;
    c.expect(plan.n_folds() == n, "one fold per session");
    for (const auto& f : plan.folds) {
      std::set<std::string> seen;
      std::size_t total = 0;
      for (const auto* part : {&f.test, &f.val, &f.train}) {
        for (const auto& s : *part) seen.insert(s);
        total += part->size();
      }
      c.expect(total == seen.size(), "test, val and train are disjoint");
      c.expect(seen == all, "fold covers every session");
      c.expect(f.val.size() == 1, "single validation session");
      c.expect(f.test.size() == 1, "single test session");
      for (const auto& s : f.test) ++tested[s];
    }
    bool once = tested.size() == n;
    for (const auto& [s, k] : tested) once = once && k == 1;
    c.expect(once, "every session tested exactly once");
    ++plans;
  }

  TempDir dir;
  testing::build_iemocap_fixture(dir / "iemocap", testing::iemocap_layout(2, {"neu", "hap", "sad", "ang"}));
  testing::build_msp_fixture(dir / "msp", 2, {"N", "H", "S", "A"});
  const auto iemocap = make_folds(ingest(DatasetKind::iemocap, dir / "iemocap").manifest, DatasetKind::iemocap);
  const auto msp = make_folds(ingest(DatasetKind::msp_improv, dir / "msp").manifest, DatasetKind::msp_improv);
  c.expect(iemocap.n_folds() == 5, "IEMOCAP fixture yields 5 folds");
  c.expect(msp.n_folds() == 6, "MSP-Improv fixture yields 6 folds");
  return verdict(c, fmt::format("{} random plans; IEMOCAP {} folds, MSP-Improv {} folds", plans, iemocap.n_folds(),
                                msp.n_folds()));
}

// 7 ---------------------------------------------------------------------------

Manifest random_manifest(Engine& rng, std::size_t index) {
  const std::vector<std::string> pool{"neutral", "happy", "sad", "angry"};
  const std::size_t n_labels = 1 + uniform_index(rng, 4);
  std::vector<UtteranceRecord> records;
  for (std::size_t l = 0; l < n_labels; ++l) {
    const std::size_t n = 1 + uniform_index(rng, 40);
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = fmt::format("m{}_{}_{}", index, l, i);
      records.push_back({id, id + ".wav", pool[l], "spk", fmt::format("sess{}", uniform_index(rng, 5)), 1.0,
                         Origin::real});
    }
  }
  shuffle(std::span<UtteranceRecord>(records), rng);
  return Manifest(TaskKind::emotion, std::move(records));
}

Verdict subsampling() {
  Check c;
  TempDir dir;
  Engine rng(77);
  const std::vector<double> grid{0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  for (std::size_t t = 0; t < 200; ++t) {
    const auto m = random_manifest(rng, t);
    const std::uint64_t seed = uniform_index(rng, 1000000);
    std::map<std::string, std::size_t> per_label;
    for (const auto& r : m.records()) ++per_label[r.label];

    write_manifest(dir / "a.jsonl", subsample(m, 0.3, seed));
    write_manifest(dir / "b.jsonl", subsample(m, 0.3, seed));
    c.expect(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"), fmt::format("manifest {} byte-identical", t));

    std::set<std::string> previous;
    for (double ratio : grid) {
      const auto sub = subsample(m, ratio, seed);
      std::set<std::string> ids;
      std::map<std::string, std::size_t> counts;
      for (const auto& r : sub.records()) {
        ids.insert(r.utt_id);
        ++counts[r.label];
      }
      c.expect(std::includes(ids.begin(), ids.end(), previous.begin(), previous.end()),
               fmt::format("manifest {} nesting at ratio {}", t, ratio));
      for (const auto& [label, n] : per_label) {
        // Exact rational ceiling: ratios on the grid are k/100.
        const auto hundredths = static_cast<std::size_t>(std::llround(ratio * 100));
        const std::size_t expected = (hundredths * n + 99) / 100;
        c.expect(counts[label] == expected, fmt::format("manifest {} label {} ratio {}", t, label, ratio));
      }
      previous = std::move(ids);
    }
  }
  return verdict(c, "200 manifests, 8 ratios each");
}

// 8 ---------------------------------------------------------------------------

Verdict synthetic_pipeline() {
  Check c;
  TempDir dir;
  const auto task = TaskSpec::default_emotion(25);
  PhrasebookLlmBackend llm;
  GenerationConfig gen;
  gen.seed = 8;
  const auto texts = generate_texts(task, plan_generation(task), llm, gen);
  c.expect(texts.size() == 100, fmt::format("{} texts", texts.size()));

  std::map<std::string, std::set<std::string>> per_label;
  for (const auto& t : texts) c.expect(per_label[t.label].insert(t.text).second, "no duplicate text within a label");
  c.expect(per_label.size() == 4, "four labels");
  for (const auto& [label, set] : per_label) c.expect(set.size() == 25, label + " has 25 texts");

  Engine rng(9);
  std::vector<SpeakerEmbedding> speakers;
  for (int s = 0; s < 10; ++s) {
    std::vector<double> v(kXVectorDim);
    for (auto& x : v) x = standard_normal(rng);
    speakers.push_back({fmt::format("spk{}", s), std::move(v)});
  }
  StubTtsBackend tts;
  SynthesisOptions opts;
  opts.out_dir = dir / "synthetic";
  opts.seed = 8;
  const auto result = synthesize_corpus(texts, SpeakerPool(std::move(speakers)), tts, opts);

  const auto manifest = read_manifest(dir / "synthetic" / "manifest.jsonl");
  c.expect(manifest.size() == 100, "manifest lists 100 utterances");
  std::size_t wavs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "synthetic")) wavs += e.path().extension() == ".wav";
  c.expect(wavs == 100, fmt::format("{} WAV files on disk", wavs));
  std::map<std::string, std::size_t> labels;
  for (const auto& r : manifest.records()) {
    const auto info = read_wav_info(manifest.resolve_audio(r));
    c.expect(info.sample_rate == 16000 && info.channels == 1, r.utt_id + " is 16 kHz mono");
    c.expect(r.origin == Origin::synthetic && r.duration > 0.0 && !r.speaker_id.empty(), r.utt_id + " complete");
    ++labels[r.label];
  }
  for (const auto& [label, n] : labels) c.expect(n == 25, label + " has 25 utterances");
  auto v = verdict(c, fmt::format("{} texts, {} WAV files, {} manifest records", texts.size(), wavs, manifest.size()));
  v.limit_seconds = kPipelineSeconds;
  return v;
}

// 9 ---------------------------------------------------------------------------

// Real and synthetic toy corpora: class c is a tone near 300 + 250 c Hz. The
// synthetic side is noisier and pitch-shifted. The encoder is wide enough
// (D=32) for synthetic pretraining to learn the classes at all.
struct TrendSetup {
  std::size_t classes = 4;
  std::size_t real_per_class = 40;
  double real_noise = 0.2;
  double real_jitter = 40.0;
  std::size_t synthetic_per_class = 60;
  double synthetic_noise = 0.3;
  double synthetic_jitter = 60.0;
  double synthetic_shift = 30.0;
  double ratio = 0.1;
  int epochs = 30;
};

Dataset take(const Dataset& d, const Manifest& subset) {
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < d.size(); ++i) where[d.ids[i]] = i;
  Dataset out;
  for (const auto& r : subset.records()) {
    const auto i = where.at(r.utt_id);
    out.audio.push_back(d.audio[i]);
    out.labels.push_back(d.labels[i]);
    out.ids.push_back(d.ids[i]);
  }
  return out;
}

Manifest index_manifest(const Dataset& d, const TaskSpec& task) {
  std::vector<UtteranceRecord> records;
  for (std::size_t i = 0; i < d.size(); ++i) {
    records.push_back({d.ids[i], d.ids[i] + ".wav", task.labels()[d.labels[i]], "spk", "real", 1.0, Origin::real});
  }
  return Manifest(TaskKind::emotion, std::move(records));
}

Verdict trend_check() {
  Check c;
  const TrendSetup s;
  const auto task = toy_task(s.classes);
  auto enc = std::make_shared<StubEncoder>(testing::tiny_encoder_config(4, 32, 21));
  const auto real_train = testing::toy_dataset(s.classes, s.real_per_class, 901, s.real_noise, s.real_jitter);
  const auto real_val = testing::toy_dataset(s.classes, 5, 902, s.real_noise, s.real_jitter);
  const auto real_test = testing::toy_dataset(s.classes, 30, 903, s.real_noise, s.real_jitter);
  const auto index = index_manifest(real_train, task);

  TempDir dir;
  std::vector<double> random_init, synthetic_init;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto synthetic = testing::toy_dataset(s.classes, s.synthetic_per_class, 1000 + seed, s.synthetic_noise,
                                                s.synthetic_jitter, s.synthetic_shift);
    const auto synthetic_val = testing::toy_dataset(s.classes, 4, 2000 + seed, s.synthetic_noise, s.synthetic_jitter,
                                                    s.synthetic_shift);
    AsuModel pretrain(enc, testing::tiny_head(s.classes), std::nullopt, derive_seed(seed, "init"));
    const auto pre = train(pretrain, task, synthetic, synthetic_val, toy_train(s.epochs, seed, Regime::synthetic_zero_shot));

    const auto low = take(real_train, subsample(index, s.ratio, derive_seed(seed, "subsample")));
    AsuModel scratch(enc, testing::tiny_head(s.classes), std::nullopt, derive_seed(seed, "init"));
    train(scratch, task, low, real_val, toy_train(s.epochs, seed, Regime::low_resource));
    random_init.push_back(evaluate(scratch, real_test, s.classes).accuracy);

    const auto ckpt = dir / fmt::format("synthetic-{}.json", seed);
    save_checkpoint(ckpt, pre.checkpoint);
    auto warm_cfg = toy_train(s.epochs, seed, Regime::synthetic_init_low_resource);
    warm_cfg.init_checkpoint = ckpt;
    AsuModel warm(enc, testing::tiny_head(s.classes), std::nullopt, derive_seed(seed, "init"));
    init_from_checkpoint(warm, load_checkpoint(ckpt), task);
    train(warm, task, low, real_val, warm_cfg);
    synthetic_init.push_back(evaluate(warm, real_test, s.classes).accuracy);
  }
  const auto a = summarize(random_init);
  const auto b = summarize(synthetic_init);
  c.expect(b.mean >= a.mean, "synthetic-init mean accuracy is at least random-init");
  auto v = verdict(c, fmt::format("ratio {}, 10 seeds: synthetic-init {:.4f} ± {:.4f} vs random-init {:.4f} ± {:.4f}",
                                  s.ratio, b.mean, b.std, a.mean, a.std));
  v.limit_seconds = kTrendSeconds;
  return v;
}

// 10 --------------------------------------------------------------------------

Verdict matrix_integrity() {
  Check c;
  TempDir dir;
  testing::MatrixSpec spec;
  spec.regimes = {"low_resource", "synthetic_init_low_resource"};
  spec.folds = {0, 1};
  spec.ratios = {0.5, 1.0};
  spec.seeds = {1, 2};
  spec.max_epochs = 2;

  std::set<std::string> want;
  for (const char* regime : {"low_resource", "synthetic_init_low_resource"}) {
    for (int fold : {0, 1}) {
      for (const char* ratio : {"0.5", "1"}) {
        for (int seed : {1, 2}) want.insert(fmt::format("{}|fold={}|ratio={}|seed={}", regime, fold, ratio, seed));
      }
    }
  }

  const auto straight_cfg = load_config(testing::build_matrix_fixture(dir / "straight", spec));
  std::set<std::string> expected;
  for (const auto& k : expected_cells(straight_cfg.experiment, 5)) expected.insert(k.str());
  c.expect(expected == want, "expected cell keys are the 16 hand-enumerated keys");

  const auto straight = run_matrix(straight_cfg);
  c.expect(straight.complete() && straight.failures.empty(), "uninterrupted run completes");
  emit_report(load_results(straight_cfg.experiment.output_dir), dir / "straight_report", {TaskKind::emotion, false, true});

  const auto cfg = load_config(testing::build_matrix_fixture(dir / "resumed", spec));
  RunOptions interrupted;
  interrupted.max_cells = 5;
  const auto first = run_matrix(cfg, interrupted);
  c.expect(first.executed == 5 && !first.complete(), "interrupted after 5 cells");
  RunOptions resume;
  resume.resume = true;
  const auto second = run_matrix(cfg, resume);
  c.expect(second.complete() && second.skipped == 5 && second.executed == 11, "resume runs the remaining 11 cells");
  const auto results = load_results(cfg.experiment.output_dir);
  std::set<std::string> got;
  for (const auto& r : results) got.insert(r.key.str());
  c.expect(got == want && results.size() == 16, "recorded cell keys match the expected set");
  emit_report(results, dir / "resumed_report", {TaskKind::emotion, false, true});

  const auto a = testing::read_tree(dir / "straight_report");
  const auto b = testing::read_tree(dir / "resumed_report");
  c.expect(!a.empty() && a == b, "reports are byte-identical");
  return verdict(c, fmt::format("{} cells, {} report files compared", got.size(), a.size()));
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace
}  // namespace asu

int main() {
  using namespace asu;
  const std::vector<Criterion> criteria{
      {1, "metric oracle equivalence", metric_oracle},
      {2, "weighted-averaging correctness", weighted_averaging},
      {3, "gradient check", gradient_check},
      {4, "frozen backbone and LoRA contract", frozen_backbone_lora},
      {5, "init-transfer exactness", init_transfer},
      {6, "fold-plan partition property", fold_partition},
      {7, "subsampling determinism and monotonicity", subsampling},
      {8, "synthetic pipeline smoke test", synthetic_pipeline},
      {9, "toy end-to-end trend check", trend_check},
      {10, "experiment-matrix integrity", matrix_integrity},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = cr.run();
    } catch (const std::exception& e) {
      v = {false, fmt::format("threw: {}", e.what())};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt::format("{:.2f} s", seconds);
    if (std::isfinite(v.limit_seconds)) {
      timing += fmt::format(" of {:.0f} s", v.limit_seconds);
      if (seconds >= v.limit_seconds) {
        v.pass = false;
        v.detail += "; over time limit";
      }
    }
    failed += v.pass ? 0 : 1;
    fmt::print("{} {:2d} {}: {} [{}]\n", v.pass ? "PASS" : "FAIL", cr.id, cr.name, v.detail, timing);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
