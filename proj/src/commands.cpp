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

#include "bcde/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "bcde/archive.hpp"
#include "bcde/config.hpp"
#include "bcde/data.hpp"
#include "bcde/diagnostics.hpp"
#include "bcde/random.hpp"
#include "bcde/trainer.hpp"

namespace bcde {

namespace fs = std::filesystem;

namespace {

std::ostream& out_of(const CommandOptions& o) { return o.out ? *o.out : std::cout; }
std::ostream& err_of(const CommandOptions& o) { return o.err ? *o.err : std::cerr; }

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

/// Effective-config echo beside an artifact.
void echo_config(const RunConfig& cfg, const std::string& dir) {
  write_text((fs::path(dir) / "config.txt").string(), dump_config(cfg));
}

PreparedData load_cache(const RunConfig& cfg) {
  const std::string path = cfg.cache_path();
  if (!fs::exists(path)) throw DataError("split cache " + path + " not found; run `bcde prepare` first");
  PreparedData d = load_prepared(path);
  if (d.task != cfg.task || d.n_l != cfg.n_l || d.data_seed != cfg.data_seed) {
    throw ConfigError("split cache " + path + " was prepared for task=" + d.task + " n_l=" +
                      std::to_string(d.n_l) + " data_seed=" + std::to_string(d.data_seed) +
                      ", which does not match the config");
  }
  return d;
}

ModelPair models_for(const RunConfig& cfg, const PreparedData& d, std::uint64_t seed) {
  return build_models(cfg.model_config(d.geometry.x_dim(), d.geometry.y_dim(), seed));
}

struct CheckpointRef {
  std::string path;
  std::uint64_t seed;
};

std::vector<CheckpointRef> checkpoints(const RunConfig& cfg, const CommandOptions& o) {
  if (o.checkpoint) {
    // Attribute an explicit checkpoint to the seed whose directory holds it.
    const fs::path given = fs::weakly_canonical(*o.checkpoint);
    for (std::uint64_t s : cfg.seeds) {
      if (given.parent_path() == fs::weakly_canonical(cfg.seed_dir(s))) return {{*o.checkpoint, s}};
    }
    return {{*o.checkpoint, cfg.seeds.front()}};
  }
  std::vector<CheckpointRef> out;
  for (std::uint64_t s : cfg.seeds) out.push_back({cfg.checkpoint_path(s), s});
  return out;
}

std::size_t trained_epochs(const std::string& checkpoint) {
  const std::string last = checkpoint + ".last";
  const TensorArchive a = read_archive(fs::exists(last) ? last : checkpoint, kCheckpointMagic, false);
  return a.contains("meta/epoch") ? static_cast<std::size_t>(a.get("meta/epoch").item()) : 0;
}

std::string metrics_json(const EvalResult& r, std::size_t k, std::size_t epochs, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["test_bound_iw" + std::to_string(k)] = r.loss;
  j["stderr"] = r.std_error;
  j["epochs"] = epochs;
  j["seed"] = seed;
  return j.dump();
}

}  // namespace

int cmd_prepare(const CommandOptions& o) {
  const RunConfig cfg = load_config(o.config_path);
  const PreparedData d = prepare_data(cfg.prepare_options());
  const std::string path = cfg.cache_path();
  ensure_parent(path);
  save_prepared(path, d);
  write_text(path + ".config.txt", dump_config(cfg));
  out_of(o) << d.summary() << "\n";
  return kExitOk;
}

int cmd_train(const CommandOptions& o) {
  const RunConfig cfg = load_config(o.config_path);
  const PreparedData d = load_cache(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    fs::create_directories(cfg.seed_dir(seed));
    echo_config(cfg, cfg.seed_dir(seed));
    ModelPair models = models_for(cfg, d, seed);
    TrainConfig tc = cfg.train_config(seed);
    tc.resume = o.resume;
    std::ostream& err = err_of(o);
    tc.on_epoch = [&](const EpochRecord& r) {
      err << "seed " << seed << " " << format_log_row(r) << "\n";
    };
    const TrainResult res = train(models, d, tc);
    out_of(o) << "seed " << seed << ": best epoch " << res.best_epoch << " val_bound_iw1 " << res.best_val
              << " checkpoint " << tc.checkpoint_path << "\n";
  }
  return kExitOk;
}

int cmd_eval(const CommandOptions& o) {
  const RunConfig cfg = load_config(o.config_path);
  const PreparedData d = load_cache(cfg);
  std::vector<EvalResult> runs;
  std::size_t epochs = 0;
  for (const auto& ref : checkpoints(cfg, o)) {
    ModelPair models = models_for(cfg, d, ref.seed);
    load_checkpoint(ref.path, models.params, nullptr, nullptr);
    const EvalResult r = evaluate(models, d.x_test, d.y_test, cfg.iw_eval, derive_seed({ref.seed, 99}));
    const std::size_t e = trained_epochs(ref.path);
    epochs = std::max(epochs, e);
    write_text(ref.path + ".metrics.json", metrics_json(r, cfg.iw_eval, e, ref.seed) + "\n");
    runs.push_back(r);
  }
  const EvalResult combined = combine_replicates(runs);
  const std::uint64_t seed = o.checkpoint ? checkpoints(cfg, o).front().seed : cfg.seeds.front();
  const std::string line = metrics_json(combined, cfg.iw_eval, epochs, seed);
  if (!o.checkpoint) {
    write_text((fs::path(cfg.out_dir) / "metrics.json").string(), line + "\n");
    echo_config(cfg, cfg.out_dir);
  }
  out_of(o) << line << "\n";
  return kExitOk;
}

int cmd_diag(const CommandOptions& o) {
  const RunConfig cfg = load_config(o.config_path);
  DiagOptions opts;
  opts.seed = cfg.seeds.front();
  const DiagReport report = run_diagnostics(opts);
  out_of(o) << report.format();
  out_of(o) << (report.passed() ? "diagnostics passed" : "diagnostics FAILED") << "\n";
  return report.passed() ? kExitOk : kExitDiagnostic;
}

int cmd_export(const CommandOptions& o) {
  if (o.what != "samples" && o.what != "latents") {
    throw ConfigError("--what must be samples or latents, got " + o.what);
  }
  const RunConfig cfg = load_config(o.config_path);
  const PreparedData d = load_cache(cfg);
  const CheckpointRef ref = checkpoints(cfg, o).front();
  ModelPair models = models_for(cfg, d, ref.seed);
  load_checkpoint(ref.path, models.params, nullptr, nullptr);
  const ParamView view(models.params);
  const std::string stem = (fs::path(ref.path).parent_path() / fs::path(ref.path).stem()).string();

  if (o.what == "latents") {
    const std::string path = stem + "_latents.csv";
    std::ofstream csv(path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + path + " for writing");
    csv << "index,label,shift";
    for (std::size_t j = 1; j <= cfg.latent_dim; ++j) csv << ",mu_" << j;
    csv << "\n";
    csv.precision(9);
    const std::size_t chunk = 1024;
    for (std::size_t first = 0; first < d.x_test.rows; first += chunk) {
      std::vector<std::size_t> idx(std::min(chunk, d.x_test.rows - first));
      std::iota(idx.begin(), idx.end(), first);
      const Tensor mu = bcde_prior(models.bcde, view, gather_rows(d.x_test, idx)).mean;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t i = idx[r];
        csv << i << "," << (i < d.test_labels.size() ? std::to_string(d.test_labels[i]) : "") << ","
            << (i < d.test_shifts.size() ? std::to_string(d.test_shifts[i]) : "");
        for (std::size_t j = 0; j < cfg.latent_dim; ++j) csv << "," << mu.at(r, j);
        csv << "\n";
      }
    }
    out_of(o) << "wrote " << path << "\n";
    return kExitOk;
  }

  // Rows: original, observed region with the hidden part grayed, three
  // sampled completions, and the greedy modal completion.
  std::mt19937_64 rng(derive_seed({ref.seed, 77}));
  std::vector<std::size_t> order(d.x_test.rows);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(cfg.export_count, order.size()));
  NoiseStream noise(derive_seed({ref.seed, 78}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const TaskGeometry& g = d.geometry;
  std::vector<std::vector<double>> tiles;
  for (std::size_t i : order) {
    const std::vector<std::size_t> one = {i};
    const Tensor x = gather_rows(d.x_test, one);
    const auto xv = d.x_test.row(i), yv = d.y_test.row(i);
    tiles.push_back(reassemble(xv, yv, g));
    tiles.push_back(reassemble(xv, std::vector<double>(g.y_dim(), 0.5), g));
    const DiagGaussianParams prior = bcde_prior(models.bcde, view, x);
    for (int s = 0; s < 3; ++s) {
      const Tensor z = sample_reparam(prior, noise.normal({1, cfg.latent_dim}));
      const Tensor mean = models.bcde.p_y_given_z.mean_output(view, z);
      std::vector<double> y(mean.values().begin(), mean.values().end());
      for (double& p : y) {
        p = cfg.decoder == DecoderKind::bernoulli ? (u(rng) < p ? 1.0 : 0.0)
                                                  : p + std::sqrt(cfg.decoder_var) * gauss(rng);
      }
      tiles.push_back(reassemble(xv, y, g));
    }
    const Tensor modal = models.bcde.p_y_given_z.mean_output(view, prior.mean);
    std::vector<double> y(modal.values().begin(), modal.values().end());
    if (cfg.decoder == DecoderKind::bernoulli) {
      for (double& p : y) p = p > 0.5 ? 1.0 : 0.0;
    }
    tiles.push_back(reassemble(xv, y, g));
  }
  const std::string path = stem + "_samples.pgm";
  write_pgm_grid(path, tiles, g.height, g.width, 6);
  out_of(o) << "wrote " << path << " (" << order.size() << " inputs x 6 tiles)\n";
  return kExitOk;
}

int run_command(const std::string& name, const CommandOptions& o) {
  try {
    if (name == "prepare") return cmd_prepare(o);
    if (name == "train") return cmd_train(o);
    if (name == "eval") return cmd_eval(o);
    if (name == "diag") return cmd_diag(o);
    if (name == "export") return cmd_export(o);
    err_of(o) << "error: unknown command " << name << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err_of(o) << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err_of(o) << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    err_of(o) << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err_of(o) << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err_of(o) << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace bcde
