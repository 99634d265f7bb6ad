/* Copyright 2026 The BCDE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include "bcde/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bcde/archive.hpp"
#include "bcde/random.hpp"

namespace bcde {

void adam_step(AdamState& state, const Gradients& grads, ParameterStore& params) {
  const AdamConfig& c = state.config;
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw std::invalid_argument("adam_step: unknown parameter " + name);
    if (g.shape() != params.get(name).value.shape()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const Parameter& p : params) {
    if (!p.trainable) continue;
    const std::size_t n = p.value.numel();
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    m.resize(n, 0.0);
    v.resize(n, 0.0);
    auto it = grads.find(p.name);
    std::vector<double> next(p.value.values().begin(), p.value.values().end());
    for (std::size_t i = 0; i < n; ++i) {
      const double g = it == grads.end() ? 0.0 : it->second[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      next[i] -= c.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.epsilon);
    }
    params.set_value(p.name, Tensor(p.value.shape(), std::move(next)));
  }
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "conditional") return TrainMode::conditional;
  if (name == "pretrain") return TrainMode::pretrain;
  if (name == "hybrid") return TrainMode::hybrid;
  if (name == "hybrid-factored") return TrainMode::hybrid_factored;
  throw std::invalid_argument("unknown training mode: " + std::string(name));
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::conditional: return "conditional";
    case TrainMode::pretrain: return "pretrain";
    case TrainMode::hybrid: return "hybrid";
    case TrainMode::hybrid_factored: return "hybrid-factored";
  }
  return "?";
}

std::string format_log_row(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.3f", r.epoch, r.mode.c_str(), r.train_objective,
                r.val_bound, r.seconds);
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const ParameterStore& params, const AdamState& adam,
                     const CheckpointMeta& meta) {
  TensorArchive a;
  for (const Parameter& p : params) a.add(p.name, p.value);
  for (const auto& [name, m] : adam.m) a.add("adam/m/" + name, Tensor::vector(m));
  for (const auto& [name, v] : adam.v) a.add("adam/v/" + name, Tensor::vector(v));
  a.add("adam/step", Tensor::scalar(static_cast<double>(adam.step)));
  a.add("meta/epoch", Tensor::scalar(static_cast<double>(meta.epoch)));
  a.add("meta/best_val", Tensor::scalar(meta.best_val));
  a.add("meta/best_epoch", Tensor::scalar(static_cast<double>(meta.best_epoch)));
  a.add("meta/since_best", Tensor::scalar(static_cast<double>(meta.since_best)));
  a.add("meta/phase_start", Tensor::scalar(static_cast<double>(meta.phase_start)));
  std::vector<double> phase(meta.phase.begin(), meta.phase.end());
  if (!phase.empty()) a.add("meta/phase", Tensor::vector(std::move(phase)));
  // Write-then-rename so an interrupted save never leaves a torn file.
  const std::string tmp = path + ".tmp";
  write_archive(tmp, kCheckpointMagic, a, false);
  std::filesystem::rename(tmp, path);
}

void load_checkpoint(const std::string& path, ParameterStore& params, AdamState* adam,
                     CheckpointMeta* meta) {
  const TensorArchive a = read_archive(path, kCheckpointMagic, false);
  for (const Parameter& p : params) {
    if (!a.contains(p.name)) throw FormatError(path + ": incompatible checkpoint, missing " + p.name);
    if (a.get(p.name).shape() != p.value.shape()) {
      throw FormatError(path + ": incompatible checkpoint, shape mismatch for " + p.name);
    }
  }
  for (const auto& [name, t] : a.records) {
    if (name.starts_with("adam/") || name.starts_with("meta/")) continue;
    if (!params.contains(name)) throw FormatError(path + ": incompatible checkpoint, unexpected " + name);
    params.set_value(name, t);
  }
  if (adam) {
    adam->m.clear();
    adam->v.clear();
    for (const auto& [name, t] : a.with_prefix("adam/m/")) {
      adam->m[name.substr(7)] = {t.values().begin(), t.values().end()};
    }
    for (const auto& [name, t] : a.with_prefix("adam/v/")) {
      adam->v[name.substr(7)] = {t.values().begin(), t.values().end()};
    }
    adam->step = a.contains("adam/step") ? static_cast<std::uint64_t>(a.get("adam/step").item()) : 0;
  }
  if (meta) {
    auto num = [&](const char* key) { return a.contains(key) ? a.get(key).item() : 0.0; };
    meta->epoch = static_cast<std::size_t>(num("meta/epoch"));
    meta->best_val = num("meta/best_val");
    meta->best_epoch = static_cast<std::size_t>(num("meta/best_epoch"));
    meta->since_best = static_cast<std::size_t>(num("meta/since_best"));
    meta->phase_start = static_cast<std::size_t>(num("meta/phase_start"));
    meta->phase.clear();
    if (a.contains("meta/phase")) {
      for (double c : a.get("meta/phase").values()) meta->phase.push_back(static_cast<char>(c));
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation

double validation_bound(const ModelPair& models, const Matrix& x, const Matrix& y, std::uint64_t seed) {
  if (x.empty()) throw std::invalid_argument("validation set is empty");
  NoiseStream stream(seed);
  const ParamView view(models.params);
  const auto b = iw_bound_batch(models.bcde, view, x.to_tensor(), y.to_tensor(), 1, stream);
  return std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
}

EvalResult evaluate(const ModelPair& models, const Matrix& x, const Matrix& y, std::size_t k,
                    std::uint64_t seed) {
  if (x.empty()) throw std::invalid_argument("test set is empty");
  if (k < 1) throw std::invalid_argument("evaluate: K must be at least 1");
  NoiseStream stream(seed);
  const ParamView view(models.params);
  EvalResult r;
  for (double b : iw_bound_batch(models.bcde, view, x.to_tensor(), y.to_tensor(), k, stream)) {
    r.per_example.push_back(-b);
  }
  r.count = r.per_example.size();
  r.loss = std::accumulate(r.per_example.begin(), r.per_example.end(), 0.0) / static_cast<double>(r.count);
  if (r.count > 1) {
    double ss = 0.0;
    for (double v : r.per_example) ss += (v - r.loss) * (v - r.loss);
    r.std_error = std::sqrt(ss / static_cast<double>(r.count - 1) / static_cast<double>(r.count));
  }
  return r;
}

EvalResult combine_replicates(const std::vector<EvalResult>& runs) {
  if (runs.empty()) throw std::invalid_argument("no replicate evaluations");
  if (runs.size() == 1) return runs.front();
  EvalResult r;
  for (const auto& e : runs) {
    r.loss += e.loss;
    r.count += e.count;
  }
  const double n = static_cast<double>(runs.size());
  r.loss /= n;
  double ss = 0.0;
  for (const auto& e : runs) ss += (e.loss - r.loss) * (e.loss - r.loss);
  r.std_error = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

constexpr std::uint64_t kMarginalTag = 1;
constexpr std::uint64_t kMainTag = 2;
constexpr std::uint64_t kValidationTag = 3;

using StepFn = std::function<ObjectiveEstimate(const ParamView&, const Minibatch&, NoiseStream&)>;

struct Phase {
  std::string name;
  std::uint64_t tag = 0;
  std::size_t n_primary = 0;
  std::size_t n_x_unlabeled = 0;
  std::size_t n_y_unlabeled = 0;
  std::size_t max_epochs = 0;
  StepFn step;
  std::function<double()> validate;
};

std::map<std::string, Tensor> snapshot(const ParameterStore& params) {
  std::map<std::string, Tensor> out;
  for (const Parameter& p : params) out.emplace(p.name, p.value);
  return out;
}

void restore(ParameterStore& params, const std::map<std::string, Tensor>& snap) {
  for (const auto& [name, value] : snap) params.set_value(name, value);
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Matrix m = a;
  m.rows += b.rows;
  m.data.insert(m.data.end(), b.data.begin(), b.data.end());
  return m;
}

double marginal_validation(const ModelPair& models, const Matrix& x, const Matrix& y, std::uint64_t seed) {
  NoiseStream stream(seed);
  const ParamView view(models.params);
  const Tensor xt = x.to_tensor(), yt = y.to_tensor();
  const Tensor jx = elbo_marginal_x(models.bjde, view, xt, stream.normal({x.rows, models.config.latent_dim}));
  const Tensor jy = elbo_marginal_y(models.bjde, view, yt, stream.normal({y.rows, models.config.latent_dim}));
  return (sum(jx).item() + sum(jy).item()) / static_cast<double>(x.rows);
}

/// Copies q'(z|x) onto p(z|x) and p'(y|z) onto p(y|z).
void pretrain_handoff(ModelPair& models) {
  for (const auto& [bcde_name, bjde_name] : models.registry.pairs) {
    if (bcde_name.starts_with("bcde/z_given_x/") || bcde_name.starts_with("bcde/y_given_z/")) {
      models.params.set_value(bcde_name, models.params.get(bjde_name).value);
    }
  }
}

std::vector<EpochRecord> read_log(const std::string& path, std::size_t upto) {
  std::vector<EpochRecord> out;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream row(line);
    EpochRecord r;
    std::string field;
    std::getline(row, field, ',');
    r.epoch = std::stoul(field);
    std::getline(row, r.mode, ',');
    std::getline(row, field, ',');
    r.train_objective = std::stod(field);
    std::getline(row, field, ',');
    r.val_bound = std::stod(field);
    std::getline(row, field, ',');
    r.seconds = std::stod(field);
    if (r.epoch <= upto) out.push_back(r);
  }
  return out;
}

class Runner {
 public:
  Runner(ModelPair& models, const TrainConfig& cfg) : models_(models), cfg_(cfg) {
    adam_.config = cfg.adam;
  }

  /// Runs one phase to early stopping and restores its best parameters.
  void run(const Phase& phase) {
    MinibatchStream stream(phase.n_primary, phase.n_x_unlabeled, phase.n_y_unlabeled, cfg_.batch,
                           derive_seed({cfg_.seed, phase.tag}));
    std::size_t local = 0;
    std::map<std::string, Tensor> best;
    double best_val = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, since_best = 0;
    if (resumed_ && resume_meta_.phase == phase.name) {
      phase_start_ = resume_meta_.phase_start;
      local = resume_meta_.epoch - phase_start_;
      best_epoch = resume_meta_.best_epoch;
      since_best = resume_meta_.since_best;
      if (best_epoch > 0) {
        best_val = resume_meta_.best_val;
        ParameterStore tmp = models_.params;
        load_checkpoint(cfg_.checkpoint_path, tmp, nullptr, nullptr);
        best = snapshot(tmp);
      }
      resumed_ = false;
    }
    if (best.empty()) best = snapshot(models_.params);

    while (local < phase.max_epochs && !(best_epoch > 0 && since_best >= cfg_.patience)) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto batches = stream.epoch(local);
      double objective = 0.0;
      for (std::size_t s = 0; s < batches.size(); ++s) {
        NoiseStream noise(derive_seed({cfg_.seed, phase.tag, local, s}));
        Tape tape;
        const ParamView view(models_.params, &tape);
        const ObjectiveEstimate est = phase.step(view, batches[s], noise);
        const Gradients grads = backward(tape, negate(est.value), models_.params);
        adam_step(adam_, grads, models_.params);
        objective += est.scalar();
      }
      const double val = phase.validate();
      ++local;
      const std::size_t epoch = phase_start_ + local;
      if (val > best_val) {
        best_val = val;
        best_epoch = epoch;
        since_best = 0;
        best = snapshot(models_.params);
      } else {
        ++since_best;
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.mode = phase.name;
      rec.train_objective = objective / static_cast<double>(batches.size());
      rec.val_bound = val;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      append_log(rec);

      const CheckpointMeta meta{epoch, phase.name, phase_start_, best_val, best_epoch, since_best};
      if (!cfg_.checkpoint_path.empty()) {
        if (best_epoch == epoch) save_checkpoint(cfg_.checkpoint_path, models_.params, adam_, meta);
        save_checkpoint(cfg_.checkpoint_path + ".last", models_.params, adam_, meta);
      }
    }
    restore(models_.params, best);
    phase_start_ += local;
    result_.best_epoch = best_epoch;
    result_.best_val = best_val;
    result_.epochs = local;
  }

  /// Loads "<checkpoint>.last" and returns the phase it was written in.
  std::optional<std::string> try_resume() {
    const std::string last = cfg_.checkpoint_path + ".last";
    if (!cfg_.resume || cfg_.checkpoint_path.empty() || !std::filesystem::exists(last)) return std::nullopt;
    load_checkpoint(last, models_.params, &adam_, &resume_meta_);
    resumed_ = true;
    if (!cfg_.log_path.empty() && std::filesystem::exists(cfg_.log_path)) {
      result_.log = read_log(cfg_.log_path, resume_meta_.epoch);
      std::ofstream out(cfg_.log_path, std::ios::trunc);
      out << kLogHeader << "\n";
      for (const auto& r : result_.log) out << format_log_row(r) << "\n";
    }
    return resume_meta_.phase;
  }

  void reset_optimizer() { adam_ = AdamState{cfg_.adam, 0, {}, {}}; }
  void open_log() {
    if (cfg_.log_path.empty() || (resumed_ && std::filesystem::exists(cfg_.log_path))) return;
    std::ofstream out(cfg_.log_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + cfg_.log_path + " for writing");
    out << kLogHeader << "\n";
  }
  TrainResult& result() { return result_; }

 private:
  void append_log(const EpochRecord& rec) {
    result_.log.push_back(rec);
    if (!cfg_.log_path.empty()) {
      std::ofstream out(cfg_.log_path, std::ios::app);
      out << format_log_row(rec) << "\n";
    }
    if (cfg_.on_epoch) cfg_.on_epoch(rec);
  }

  ModelPair& models_;
  const TrainConfig& cfg_;
  AdamState adam_;
  TrainResult result_;
  CheckpointMeta resume_meta_;
  bool resumed_ = false;
  std::size_t phase_start_ = 0;
};

ObjectiveData batch_data(const PreparedData& d, const Minibatch& b, bool labeled, bool unlabeled) {
  ObjectiveData od;
  if (labeled) {
    od.x_labeled = gather_rows(d.x_labeled, b.labeled);
    od.y_labeled = gather_rows(d.y_labeled, b.labeled);
  }
  if (unlabeled && !b.x_unlabeled.empty()) od.x_unlabeled = gather_rows(d.x_unlabeled, b.x_unlabeled);
  if (unlabeled && !b.y_unlabeled.empty()) od.y_unlabeled = gather_rows(d.y_unlabeled, b.y_unlabeled);
  return od;
}

ObjectiveWeights batch_weights(const Minibatch& b) {
  // Each data term enters as a per-example mean over its minibatch, so the
  // tying penalty is weighed against per-example bounds.
  ObjectiveWeights w;
  w.labeled = 1.0 / static_cast<double>(b.labeled.size());
  if (!b.x_unlabeled.empty()) w.x_unlabeled = 1.0 / static_cast<double>(b.x_unlabeled.size());
  if (!b.y_unlabeled.empty()) w.y_unlabeled = 1.0 / static_cast<double>(b.y_unlabeled.size());
  return w;
}

}  // namespace

TrainResult train(ModelPair& models, const PreparedData& data, const TrainConfig& cfg) {
  if (data.x_labeled.empty()) throw std::invalid_argument("train: labeled set is empty");
  if (data.x_val.empty()) throw std::invalid_argument("train: validation set is empty");
  const bool factored = models.config.inference == InferenceMode::factored;
  if ((cfg.mode == TrainMode::hybrid_factored) != factored) {
    throw std::invalid_argument("train: mode " + to_string(cfg.mode) + " does not match " +
                                to_string(models.config.inference) + " inference");
  }
  if (data.x_labeled.cols != models.config.x_dim || data.y_labeled.cols != models.config.y_dim) {
    throw std::invalid_argument("train: data dimensions do not match the model");
  }
  if (cfg.batch == 0) throw std::invalid_argument("train: batch size must be at least 1");
  cfg.hybrid.validate();

  Runner runner(models, cfg);
  const auto resumed_phase = runner.try_resume();
  runner.open_log();
  const std::uint64_t val_seed = derive_seed({cfg.seed, kValidationTag});
  const std::string main_name = to_string(cfg.mode);

  Phase main;
  main.name = main_name;
  main.tag = kMainTag;
  main.n_primary = data.x_labeled.rows;
  main.max_epochs = cfg.max_epochs;
  main.validate = [&] { return validation_bound(models, data.x_val, data.y_val, val_seed); };

  if (cfg.mode == TrainMode::conditional || cfg.mode == TrainMode::pretrain) {
    main.step = [&](const ParamView& view, const Minibatch& b, NoiseStream& noise) {
      return conditional_objective(models, view, batch_data(data, b, true, false), noise,
                                   batch_weights(b));
    };
  } else {
    main.n_x_unlabeled = data.x_unlabeled.rows;
    main.n_y_unlabeled = data.y_unlabeled.rows;
    main.step = [&](const ParamView& view, const Minibatch& b, NoiseStream& noise) {
      return hybrid_objective(models, view, batch_data(data, b, true, true), cfg.hybrid, noise,
                              batch_weights(b));
    };
  }

  if (cfg.mode == TrainMode::pretrain) {
    // Marginal phase: J_x and J_y on every available x and y.
    const Matrix pool_x = vstack(data.x_unlabeled, data.x_labeled);
    const Matrix pool_y = vstack(data.y_unlabeled, data.y_labeled);
    Phase marginal;
    marginal.name = "pretrain-marginal";
    marginal.tag = kMarginalTag;
    marginal.n_primary = pool_x.rows;
    marginal.n_y_unlabeled = pool_y.rows;
    marginal.max_epochs = cfg.pretrain_max_epochs;
    marginal.validate = [&] { return marginal_validation(models, data.x_val, data.y_val, val_seed); };
    marginal.step = [&](const ParamView& view, const Minibatch& b, NoiseStream& noise) {
      ObjectiveData od;
      od.x_unlabeled = gather_rows(pool_x, b.labeled);
      od.y_unlabeled = gather_rows(pool_y, b.y_unlabeled);
      ObjectiveWeights w;
      w.x_unlabeled = 1.0 / static_cast<double>(b.labeled.size());
      w.y_unlabeled = 1.0 / static_cast<double>(b.y_unlabeled.size());
      return joint_objective(models, view, od, noise, w);
    };

    if (!resumed_phase || *resumed_phase == marginal.name) {
      runner.run(marginal);
      pretrain_handoff(models);
      runner.reset_optimizer();
    }
  } else if (resumed_phase && *resumed_phase != main_name) {
    throw std::invalid_argument("train: checkpoint was written by a different mode");
  }

  runner.run(main);
  return runner.result();
}

}  // namespace bcde
