// Copyright 2026 The lowres Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lowres/coupler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace lowres {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return splitmix(splitmix(seed) ^ tag); }

template <typename T>
void scale_all(std::span<const ParamRef<T>> refs, T factor) {
  for (const auto& r : refs) {
    for (T& v : r.tensor->data()) v *= factor;
  }
}

template <typename T>
void add_all(std::span<const ParamRef<T>> dst, std::span<const ParamRef<T>> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].tensor += *src[i].tensor;
}

void check_finite_loss(double loss, const char* stage, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string(stage) + ": non-finite loss in epoch " + std::to_string(epoch));
  }
}

}  // namespace

const char* stream_name(Stream s) { return s == Stream::Spatial ? "spatial" : "temporal"; }

Stream parse_stream(const std::string& s) {
  if (s == "spatial") return Stream::Spatial;
  if (s == "temporal") return Stream::Temporal;
  throw std::invalid_argument("unknown stream '" + s + "' (expected spatial or temporal)");
}

TrainConfig TrainConfig::tiny() {
  TrainConfig c;
  c.preset = Preset::Tiny;
  c.batch_size = 16;
  c.hidden_dim = 64;
  return c;
}

ModelConfig TrainConfig::model(std::size_t feature_dim, std::size_t num_classes) const {
  ModelConfig m;
  m.streams = streams;
  m.gru = gru;
  m.fusion = fusion;
  m.feature_dim = feature_dim;
  m.hidden_dim = hidden_dim;
  m.fusion_out_dim = fusion_out_dim;
  m.num_classes = num_classes;
  return m;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(learning_rate, "learning_rate");
  positive(rmsprop_eps, "rmsprop_eps");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw std::invalid_argument("weight_decay must be non-negative");
  }
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) throw std::invalid_argument("rmsprop_decay must be in (0, 1)");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (fusion_epochs < 1) throw std::invalid_argument("fusion_epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (coupled && batch_size < 2) throw std::invalid_argument("coupled training needs batch_size >= 2");
  if (hidden_dim == 0) throw std::invalid_argument("hidden_dim must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool CoupledC3d::paths_share_parameters() const {
  const C3dParams<float>& hi = path(Resolution::High);
  const C3dParams<float>& lo = path(Resolution::Low);
  if (&hi != &lo || &hi != &params_) return false;
  for (std::size_t i = 0; i < hi.weights.size(); ++i) {
    if (hi.weights[i].raw() != lo.weights[i].raw() || hi.biases[i].raw() != lo.biases[i].raw()) return false;
  }
  return true;
}

StageOneResult train_c3d_stage(const UnitDataset& data, Stream stream, const TrainConfig& config,
                               const StageOneHooks& hooks) {
  config.validate();
  if (data.clips.empty() || data.num_classes < 2) {
    throw std::invalid_argument("train_c3d_stage: empty dataset or fewer than 2 classes");
  }

  struct Sample {
    const Tensor<float>* unit;
    int label;
  };
  // Each draw is one (clip, unit) position; coupled draws expand to its HIGH and LOW units.
  std::vector<std::pair<std::size_t, std::size_t>> positions;
  const Tensor<float>* first = nullptr;
  for (std::size_t c = 0; c < data.clips.size(); ++c) {
    const ClipUnits& clip = data.clips[c];
    if (clip.label < 0 || static_cast<std::size_t>(clip.label) >= data.num_classes) {
      throw std::invalid_argument("train_c3d_stage: label out of range for clip " + clip.clip_id);
    }
    if (config.coupled && clip.high.size() != clip.low.size()) {
      throw std::invalid_argument("train_c3d_stage: coupled training needs matching HIGH and LOW units for clip " +
                                  clip.clip_id);
    }
    for (std::size_t u = 0; u < clip.low.size(); ++u) {
      positions.emplace_back(c, u);
      if (!first) first = &clip.low[u];
    }
  }
  if (positions.empty()) throw std::invalid_argument("train_c3d_stage: dataset has no units");

  const std::size_t unit_length = first->dim(1);
  const C3dSpec spec = make_c3d_spec(config.preset, data.num_classes, unit_length);
  const std::uint64_t stream_tag = stream == Stream::Spatial ? 0x5350ULL : 0x5445ULL;
  CoupledC3d model(init_c3d_params<float>(spec, derive_seed(config.seed, stream_tag)));
  RmspropState<float> state;
  const RmspropConfig opt = config.rmsprop();

  const std::size_t per_draw = config.coupled ? 2 : 1;
  const std::size_t draws_per_batch = std::max<std::size_t>(1, config.batch_size / per_draw);
  const std::size_t workers = static_cast<std::size_t>(config.threads);

  StageOneResult result;
  std::mt19937_64 rng(derive_seed(config.seed, stream_tag ^ 0x5348554646ULL));
  std::vector<C3dParams<float>> worker_grads;
  for (std::size_t w = 0; w < workers; ++w) worker_grads.push_back(model.params().zeros_like());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(positions.begin(), positions.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < positions.size(); start += draws_per_batch) {
      const std::size_t stop = std::min(positions.size(), start + draws_per_batch);
      std::vector<Sample> batch;
      for (std::size_t i = start; i < stop; ++i) {
        const ClipUnits& clip = data.clips[positions[i].first];
        const std::size_t u = positions[i].second;
        if (config.coupled) {
          batch.push_back({&clip.high[u], clip.label});
          ++result.high_samples;
        }
        batch.push_back({&clip.low[u], clip.label});
        ++result.low_samples;
      }

      for (auto& g : worker_grads) {
        for (auto& r : g.refs()) r.tensor->fill(0.0f);
      }
      std::vector<double> losses(batch.size());
      std::vector<int> hits(batch.size());
      const std::size_t active = std::min(workers, batch.size());
      parallel_for(active, static_cast<int>(active), [&](std::size_t w) {
        for (std::size_t i = w; i < batch.size(); i += active) {
          const Resolution res = (config.coupled && i % 2 == 0) ? Resolution::High : Resolution::Low;
          const C3dParams<float>& params = model.path(res);
          C3dTrace<float> trace;
          const auto out = c3d_forward(*batch[i].unit, params, &trace);
          const auto xent = softmax_xent(out.logits, batch[i].label);
          losses[i] = xent.loss;
          hits[i] = argmax(out.logits) == batch[i].label ? 1 : 0;
          c3d_backward(params, trace, xent.grad_logits, worker_grads[w]);
        }
      });
      for (std::size_t i = 0; i < batch.size(); ++i) {
        loss_sum += losses[i];
        correct += static_cast<std::size_t>(hits[i]);
      }
      seen += batch.size();

      auto grads = worker_grads[0].refs();
      for (std::size_t w = 1; w < active; ++w) {
        auto other = worker_grads[w].refs();
        add_all<float>(grads, other);
      }
      scale_all<float>(grads, 1.0f / static_cast<float>(batch.size()));
      auto params = model.params().refs();
      rmsprop_step<float>(params, grads, state, opt);

      ++result.steps;
      if (config.coupled) {
        if (!model.paths_share_parameters()) {
          throw std::logic_error("coupling violated: HIGH and LOW paths read different parameters");
        }
        ++result.coupling_checks;
      }
      if (hooks.on_step) hooks.on_step(result.steps, model);
    }

    const EpochStats stats{epoch, loss_sum / static_cast<double>(seen),
                           static_cast<double>(correct) / static_cast<double>(seen)};
    check_finite_loss(stats.loss, "train_c3d_stage", epoch);
    result.log.push_back(stats);
    if (hooks.on_epoch && !hooks.on_epoch(stats)) break;
  }
  result.params = std::move(model.params());
  return result;
}

FeatureSeq<float> clip_features(std::span<const Tensor<float>> units, const C3dParams<float>& params) {
  FeatureSeq<float> seq;
  seq.reserve(units.size());
  for (const auto& unit : units) seq.push_back(c3d_forward(unit, params).feature);
  return seq;
}

std::filesystem::path FeatureCache::entry_path(const std::string& clip_id, std::uint64_t params_hash) const {
  return root_ / hex64(params_hash) / (clip_id + ".feat");
}

std::optional<FeatureSeq<float>> FeatureCache::load(const std::string& clip_id, std::uint64_t params_hash) {
  const auto path = entry_path(clip_id, params_hash);
  if (!std::filesystem::exists(path)) {
    ++misses_;
    return std::nullopt;
  }
  const TensorBundle bundle = load_bundle(path);
  FeatureSeq<float> seq;
  const std::string prefix = "feat." + clip_id + ".";
  for (std::size_t t = 1;; ++t) {
    const NamedTensor* nt = find_tensor(bundle, prefix + std::to_string(t));
    if (!nt) break;
    seq.push_back(nt->tensor);
  }
  if (seq.empty() || seq.size() != bundle.size()) {
    throw IoError(path, "feature cache entry has unexpected tensors");
  }
  ++hits_;
  return seq;
}

void FeatureCache::store(const std::string& clip_id, std::uint64_t params_hash, const FeatureSeq<float>& seq) {
  TensorBundle bundle;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    bundle.push_back({"feat." + clip_id + "." + std::to_string(t + 1), seq[t]});
  }
  save_bundle(entry_path(clip_id, params_hash), bundle);
}

std::map<std::string, FeatureSeq<float>> extract_features(const std::vector<std::string>& clip_ids,
                                                          const UnitLoader& load_units,
                                                          const C3dParams<float>& params, FeatureCache* cache,
                                                          int threads) {
  const std::uint64_t hash = bundle_hash(c3d_to_bundle(params));
  std::vector<FeatureSeq<float>> results(clip_ids.size());
  std::vector<char> pending(clip_ids.size(), 1);
  if (cache) {
    for (std::size_t i = 0; i < clip_ids.size(); ++i) {
      if (auto hit = cache->load(clip_ids[i], hash)) {
        results[i] = std::move(*hit);
        pending[i] = 0;
      }
    }
  }
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    if (pending[i]) todo.push_back(i);
  }
  parallel_for(todo.size(), threads, [&](std::size_t k) {
    const std::size_t i = todo[k];
    const auto units = load_units(clip_ids[i]);
    results[i] = clip_features(units, params);
  });
  if (cache) {
    for (std::size_t i : todo) cache->store(clip_ids[i], hash, results[i]);
  }
  std::map<std::string, FeatureSeq<float>> out;
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    if (!out.emplace(clip_ids[i], std::move(results[i])).second) {
      throw std::invalid_argument("extract_features: duplicate clip id " + clip_ids[i]);
    }
  }
  return out;
}

namespace instrumentation {
namespace {
std::atomic<std::size_t> g_high_reads{0};
}
std::size_t high_resolution_reads() { return g_high_reads.load(); }
void reset_high_resolution_reads() { g_high_reads.store(0); }
}  // namespace instrumentation

void FeatureSet::add(FeatureRecord record) { records_.push_back(std::move(record)); }

const FeatureRecord& FeatureSet::read(std::size_t i) const {
  const FeatureRecord& r = records_.at(i);
  if (r.resolution == Resolution::High) ++instrumentation::g_high_reads;
  return r;
}

FeatureSet build_feature_set(const std::vector<FeatureKey>& keys,
                             const std::map<std::string, FeatureSeq<float>>* spatial,
                             const std::map<std::string, FeatureSeq<float>>* temporal, StreamSet streams) {
  const bool want_s = streams != StreamSet::Temporal;
  const bool want_t = streams != StreamSet::Spatial;
  if ((want_s && !spatial) || (want_t && !temporal)) {
    throw std::invalid_argument("build_feature_set: missing feature map for a required stream");
  }
  auto lookup = [](const std::map<std::string, FeatureSeq<float>>& m, const std::string& id, const char* which) {
    auto it = m.find(id);
    if (it == m.end()) {
      throw std::invalid_argument(std::string("build_feature_set: clip ") + id + " has no " + which + " features");
    }
    return it->second;
  };
  FeatureSet set;
  for (const auto& key : keys) {
    FeatureRecord r{key.clip_id, key.stem, key.label, key.resolution, {}, {}};
    if (want_s) r.spatial = lookup(*spatial, key.clip_id, "spatial");
    if (want_t) r.temporal = lookup(*temporal, key.clip_id, "temporal");
    if (want_s && want_t && r.spatial.size() != r.temporal.size()) {
      throw std::invalid_argument("build_feature_set: stream lengths differ for clip " + key.clip_id);
    }
    set.add(std::move(r));
  }
  return set;
}

namespace {

const FeatureSeq<float>* stream_input(const ModelConfig& config, const FeatureSeq<float>& seq, bool spatial) {
  const bool used = spatial ? config.streams != StreamSet::Temporal : config.streams != StreamSet::Spatial;
  return used ? &seq : nullptr;
}

}  // namespace

int predict(const TwoStreamParams<float>& model, const FeatureRecord& record) {
  const Tensor<float> logits = twostream_forward(model, stream_input(model.config, record.spatial, true),
                                                 stream_input(model.config, record.temporal, false));
  return argmax(logits);
}

StageTwoResult train_twostream_stage(const FeatureSet& train, const TrainConfig& config, std::size_t feature_dim,
                                     const std::vector<std::string>& class_names, const FeatureSet* test,
                                     const StageTwoHooks& hooks) {
  config.validate();
  const std::size_t K = class_names.size();
  if (K < 2) throw std::invalid_argument("train_twostream_stage: need at least 2 classes");

  // Group usable records by stem so coupled batches keep each HIGH/LOW pair together.
  std::map<std::string, std::vector<std::size_t>> by_stem;
  std::vector<std::string> stem_order;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!config.coupled && train.resolution(i) == Resolution::High) continue;
    if (train.label(i) < 0 || static_cast<std::size_t>(train.label(i)) >= K) {
      throw std::invalid_argument("train_twostream_stage: label out of range for clip " + train.clip_id(i));
    }
    auto [it, inserted] = by_stem.try_emplace(train.stem(i));
    if (inserted) stem_order.push_back(train.stem(i));
    it->second.push_back(i);
  }
  if (stem_order.empty()) throw std::invalid_argument("train_twostream_stage: empty training set");
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& s : stem_order) groups.push_back(by_stem[s]);

  const ModelConfig mc = config.model(feature_dim, K);
  mc.validate();
  StageTwoResult result;
  result.params = init_twostream_params<float>(mc, derive_seed(config.seed, 0x4655534eULL));
  TwoStreamParams<float>& model = result.params;
  RmspropState<float> state;
  const RmspropConfig opt = config.rmsprop();
  std::mt19937_64 rng(derive_seed(config.seed, 0x5348554632ULL));
  const std::size_t workers = static_cast<std::size_t>(config.threads);
  std::vector<TwoStreamParams<float>> worker_grads;
  for (std::size_t w = 0; w < workers; ++w) worker_grads.push_back(model.zeros_like());

  for (int epoch = 1; epoch <= config.fusion_epochs; ++epoch) {
    std::shuffle(groups.begin(), groups.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    std::size_t g = 0;
    while (g < groups.size()) {
      std::vector<std::size_t> batch;
      while (g < groups.size() && batch.size() < static_cast<std::size_t>(config.batch_size)) {
        batch.insert(batch.end(), groups[g].begin(), groups[g].end());
        ++g;
      }
      for (auto& wg : worker_grads) {
        for (auto& r : wg.refs()) r.tensor->fill(0.0f);
      }
      std::vector<double> losses(batch.size());
      std::vector<int> hits(batch.size());
      const std::size_t active = std::min(workers, batch.size());
      parallel_for(active, static_cast<int>(active), [&](std::size_t w) {
        for (std::size_t k = w; k < batch.size(); k += active) {
          const FeatureRecord& rec = train.read(batch[k]);
          const auto* s = stream_input(mc, rec.spatial, true);
          const auto* t = stream_input(mc, rec.temporal, false);
          TwoStreamTrace<float> trace;
          const Tensor<float> logits = twostream_forward(model, s, t, &trace);
          const auto xent = softmax_xent(logits, rec.label);
          losses[k] = xent.loss;
          hits[k] = argmax(logits) == rec.label ? 1 : 0;
          twostream_backward(model, s, t, trace, xent.grad_logits, worker_grads[w]);
        }
      });
      for (std::size_t k = 0; k < batch.size(); ++k) {
        loss_sum += losses[k];
        correct += static_cast<std::size_t>(hits[k]);
      }
      seen += batch.size();
      auto grads = worker_grads[0].refs();
      for (std::size_t w = 1; w < active; ++w) {
        auto other = worker_grads[w].refs();
        add_all<float>(grads, other);
      }
      scale_all<float>(grads, 1.0f / static_cast<float>(batch.size()));
      auto params = model.refs();
      rmsprop_step<float>(params, grads, state, opt);
    }
    const EpochStats stats{epoch, loss_sum / static_cast<double>(seen),
                           static_cast<double>(correct) / static_cast<double>(seen)};
    check_finite_loss(stats.loss, "train_twostream_stage", epoch);
    result.report.epochs.push_back(stats);
    if (hooks.on_epoch && !hooks.on_epoch(stats)) break;
  }

  result.report.class_names = class_names;
  if (test) {
    RunReport eval = evaluate(model, *test, class_names);
    result.report.test_accuracy = eval.test_accuracy;
    result.report.confusion = std::move(eval.confusion);
  } else {
    result.report.confusion = ConfusionMatrix(K);
  }
  return result;
}

RunReport evaluate(const TwoStreamParams<float>& model, const FeatureSet& test,
                   const std::vector<std::string>& class_names) {
  std::vector<int> truth;
  std::vector<int> predicted;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.resolution(i) != Resolution::Low) continue;
    const FeatureRecord& rec = test.read(i);
    truth.push_back(rec.label);
    predicted.push_back(predict(model, rec));
  }
  if (truth.empty()) throw std::invalid_argument("evaluate: test set has no LOW-resolution clips");
  return report_from_predictions(truth, predicted, class_names);
}

}  // namespace lowres
