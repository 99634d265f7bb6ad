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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bcde/archive.hpp"
#include "bcde/tensor.hpp"

namespace bcde {

/// Missing inputs or data that cannot satisfy a request.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n images of H x W pixels in [0, 1], row-major and contiguous.
struct ImageSet {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  std::size_t image_size() const { return height * width; }
  std::span<const double> image(std::size_t i) const;
  std::span<double> image(std::size_t i);
};

/// Reads an IDX image file (magic 0x00000803), gzip-compressed or not.
ImageSet load_idx(const std::string& path);
/// Reads an IDX label file (magic 0x00000801).
std::vector<int> load_idx_labels(const std::string& path);

/// factor x factor average pooling; dimensions must divide evenly.
ImageSet downsample(const ImageSet& set, std::size_t factor);
/// Each pixel becomes 1 with probability equal to its gray value.
ImageSet binarize_static(const ImageSet& set, std::uint64_t seed);
/// The first n images.
ImageSet take_first(const ImageSet& set, std::size_t n);

enum class Task { quadrant1, quadrant2, quadrant3, topdown };

Task parse_task(std::string_view name);
std::string to_string(Task task);

/// Observed (x) and predicted (y) pixel masks, row-major H x W.
struct TaskGeometry {
  Task task = Task::quadrant1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<bool> x_mask;
  std::vector<bool> y_mask;

  std::size_t x_dim() const;
  std::size_t y_dim() const;
};

/// quadrant1: x is the bottom-left quadrant. quadrant2: x is the left half.
/// quadrant3: y is the bottom-right quadrant. topdown: x is the top half.
TaskGeometry make_geometry(Task task, std::size_t height, std::size_t width);

enum class LabelStatus { paired, x_only, y_only };

struct SplitSample {
  std::vector<double> x;
  std::vector<double> y;
  LabelStatus status = LabelStatus::paired;
  std::size_t source = 0;  // index of the originating image
};

std::vector<SplitSample> split_task(const ImageSet& set, const TaskGeometry& geom);
/// Inverse of split_task for one image.
std::vector<double> reassemble(std::span<const double> x, std::span<const double> y,
                               const TaskGeometry& geom);

struct SemiSplit {
  std::vector<SplitSample> labeled;
  std::vector<SplitSample> unlabeled_x;
  std::vector<SplitSample> unlabeled_y;
  std::vector<SplitSample> validation;
  std::vector<SplitSample> test;
};

/// Holds out `val_size` validation pairs, samples `n_l` labeled pairs, and
/// decouples the rest (at most `n_u_max` of them) into X_u and Y_u. Y_u is
/// stored in an independently shuffled order. `test` is left empty.
SemiSplit make_semi_split(const std::vector<SplitSample>& samples, std::size_t n_l,
                          std::uint64_t seed, std::size_t val_size,
                          std::optional<std::size_t> n_u_max = std::nullopt);

/// pairwise: the whole image moves (shift-sensitive task).
/// x_only: only the observed top half moves (shift-invariant task).
enum class ShiftMode { pairwise, x_only };

inline constexpr int kDefaultMaxShift = 4;

/// One shift per image, uniform on {-max_shift, ..., max_shift}.
std::vector<int> draw_shifts(std::size_t count, std::uint64_t seed, int max_shift = kDefaultMaxShift);

/// Moves pixels horizontally by shifts[i] columns (positive = right).
/// Vacated columns are zero; pixels pushed past the border are dropped.
ImageSet shift_images(const ImageSet& set, std::span<const int> shifts, ShiftMode mode);

struct ShiftedImages {
  ImageSet images;
  std::vector<int> shifts;
};

/// Draws shifts and applies them. The geometry must be topdown.
ShiftedImages apply_shift(const ImageSet& set, ShiftMode mode, const TaskGeometry& geom,
                          std::uint64_t seed, int max_shift = kDefaultMaxShift);

/// Dense row-major matrix that may have zero rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  bool empty() const { return rows == 0; }
  std::span<const double> row(std::size_t i) const;
  Tensor to_tensor() const;
};

/// Stacks the x (or y) vectors of samples.
Matrix stack_x(const std::vector<SplitSample>& samples);
Matrix stack_y(const std::vector<SplitSample>& samples);
/// Rows `indices` of `m` as a [B, cols] tensor.
Tensor gather_rows(const Matrix& m, std::span<const std::size_t> indices);

struct Minibatch {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> x_unlabeled;  // empty when X_u is empty
  std::vector<std::size_t> y_unlabeled;  // empty when Y_u is empty
};

/// Deterministic minibatch schedule. The labeled set is reshuffled each
/// epoch; unlabeled sets are consumed as endless streams of seeded
/// permutations, advanced by the global step, so epoch e is reproducible
/// without replaying earlier epochs.
class MinibatchStream {
 public:
  MinibatchStream(std::size_t n_labeled, std::size_t n_x_unlabeled, std::size_t n_y_unlabeled,
                  std::size_t batch, std::uint64_t seed);

  std::size_t steps_per_epoch() const;
  std::vector<Minibatch> epoch(std::size_t e) const;

 private:
  std::vector<std::size_t> cyclic_take(std::size_t n, std::uint64_t tag, std::size_t begin,
                                       std::size_t count) const;

  std::size_t n_l_, n_ux_, n_uy_, batch_;
  std::uint64_t seed_;
};

/// Everything training and evaluation need from one prepared task.
struct PreparedData {
  std::string task;  // includes shift-sensitive / shift-invariant
  TaskGeometry geometry;
  std::size_t n_l = 0;
  std::uint64_t data_seed = 0;
  Matrix x_labeled, y_labeled;
  Matrix x_unlabeled, y_unlabeled;
  Matrix x_val, y_val;
  Matrix x_test, y_test;
  std::vector<int> test_labels;  // empty when label files are absent
  std::vector<int> test_shifts;  // empty for unshifted tasks

  std::string summary() const;
};

struct PrepareOptions {
  std::string data_dir;
  /// quadrant1..3, topdown, shift-sensitive or shift-invariant.
  std::string task = "quadrant1";
  std::size_t downsample = 1;
  std::size_t n_l = 50000;
  std::optional<std::size_t> n_u;  // cap on unlabeled pairs; default all
  std::size_t val_size = 10000;
  std::optional<std::size_t> test_size;  // default: the whole test file
  int max_shift = kDefaultMaxShift;
  std::uint64_t seed = 0;
};

/// Geometry task and shift mode for a task name (shift tasks use topdown).
std::pair<Task, std::optional<ShiftMode>> resolve_task(std::string_view name);

/// Load, downsample, binarize, shift, split. Throws DataError for missing
/// files or impossible sizes.
PreparedData prepare_data(const PrepareOptions& opts);

void save_prepared(const std::string& path, const PreparedData& data);
PreparedData load_prepared(const std::string& path);

/// Plain PGM (P2) image of `pixels` in [0, 1].
void write_pgm(const std::string& path, std::span<const double> pixels, std::size_t height,
               std::size_t width);

/// Tiles images (each H x W) into a grid with `columns` tiles per row and a
/// one-pixel mid-gray border.
void write_pgm_grid(const std::string& path, const std::vector<std::vector<double>>& tiles,
                    std::size_t height, std::size_t width, std::size_t columns);

}  // namespace bcde
