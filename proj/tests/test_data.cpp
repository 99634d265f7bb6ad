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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "bcde/data.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace bcde {
namespace {

ImageSet numbered_images(std::size_t n, std::size_t h, std::size_t w) {
  ImageSet s{n, h, w, std::vector<double>(n * h * w)};
  for (std::size_t i = 0; i < s.pixels.size(); ++i) s.pixels[i] = static_cast<double>(i % 251) / 251.0;
  return s;
}

TEST(IdxTest, ReadsRawAndGzipFiles) {
  const std::string dir = synthetic::temp_dir("idx");
  const std::vector<std::uint8_t> px = {0, 51, 102, 255, 0, 0, 0, 255, 1, 2, 3, 4};
  const std::string bytes = synthetic::idx_images(3, 2, 2, px);
  synthetic::write_file(dir + "/raw", bytes);
  synthetic::write_gzip(dir + "/z.gz", bytes);
  for (const std::string name : {"/raw", "/z.gz"}) {
    const ImageSet s = load_idx(dir + name);
    EXPECT_EQ(s.count, 3u);
    EXPECT_EQ(s.height, 2u);
    EXPECT_EQ(s.width, 2u);
    EXPECT_DOUBLE_EQ(s.image(0)[1], 0.2);
    EXPECT_DOUBLE_EQ(s.image(0)[3], 1.0);
  }
  synthetic::write_gzip(dir + "/l.gz", synthetic::idx_labels({7, 2, 9}));
  EXPECT_EQ(load_idx_labels(dir + "/l.gz"), (std::vector<int>{7, 2, 9}));
}

TEST(IdxTest, RejectsWrongMagicAndTruncation) {
  const std::string dir = synthetic::temp_dir("idx_bad");
  synthetic::write_file(dir + "/labels", synthetic::idx_labels({1, 2}));
  EXPECT_THROW(load_idx(dir + "/labels"), FormatError);
  std::string bytes = synthetic::idx_images(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  synthetic::write_file(dir + "/short", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(load_idx(dir + "/short"), FormatError);
  EXPECT_THROW(load_idx(dir + "/absent"), DataError);
}

TEST(IdxTest, MnistTrainingHeader) {
  const std::string path = std::string(BCDE_DATA_DIR) + "/train-images-idx3-ubyte.gz";
  if (!std::filesystem::exists(path)) GTEST_SKIP() << "MNIST not available at " << path;
  const ImageSet s = load_idx(path);
  EXPECT_EQ(s.count, 60000u);
  EXPECT_EQ(s.height, 28u);
  EXPECT_EQ(s.width, 28u);
  const auto [lo, hi] = std::minmax_element(s.pixels.begin(), s.pixels.end());
  EXPECT_EQ(*lo, 0.0);
  EXPECT_EQ(*hi, 1.0);
}

TEST(ImageTest, DownsampleAverages) {
  ImageSet s{1, 2, 4, {0.0, 1.0, 0.2, 0.2, 1.0, 0.0, 0.6, 0.2}};
  const ImageSet d = downsample(s, 2);
  ASSERT_EQ(d.height, 1u);
  ASSERT_EQ(d.width, 2u);
  EXPECT_DOUBLE_EQ(d.pixels[0], 0.5);
  EXPECT_DOUBLE_EQ(d.pixels[1], 0.3);
  EXPECT_THROW(downsample(s, 3), std::invalid_argument);
}

TEST(ImageTest, StaticBinarizationMatchesGrayLevel) {
  ImageSet s{100, 20, 50, std::vector<double>(100 * 20 * 50, 0.3)};
  const ImageSet b = binarize_static(s, 4);
  double mean = 0.0;
  for (double v : b.pixels) {
    ASSERT_TRUE(v == 0.0 || v == 1.0);
    mean += v;
  }
  mean /= static_cast<double>(b.pixels.size());
  EXPECT_NEAR(mean, 0.3, 0.005);
  const ImageSet again = binarize_static(s, 4);
  EXPECT_EQ(b.pixels, again.pixels);
  EXPECT_NE(binarize_static(s, 5).pixels, b.pixels);
}

TEST(GeometryTest, DimensionTable) {
  const std::map<Task, std::pair<std::size_t, std::size_t>> expected = {
      {Task::quadrant1, {196, 588}}, {Task::quadrant2, {392, 392}},
      {Task::quadrant3, {588, 196}}, {Task::topdown, {392, 392}}};
  for (const auto& [task, dims] : expected) {
    const TaskGeometry g = make_geometry(task, 28, 28);
    EXPECT_EQ(g.x_dim(), dims.first) << to_string(task);
    EXPECT_EQ(g.y_dim(), dims.second) << to_string(task);
    for (std::size_t i = 0; i < 28 * 28; ++i) ASSERT_NE(g.x_mask[i], g.y_mask[i]);
  }
  EXPECT_THROW(make_geometry(Task::quadrant1, 27, 28), std::invalid_argument);
}

TEST(GeometryTest, MaskPlacement) {
  const TaskGeometry q1 = make_geometry(Task::quadrant1, 4, 4);
  EXPECT_TRUE(q1.x_mask[3 * 4 + 0]);   // bottom-left
  EXPECT_FALSE(q1.x_mask[0 * 4 + 0]);  // top-left
  const TaskGeometry q3 = make_geometry(Task::quadrant3, 4, 4);
  EXPECT_TRUE(q3.y_mask[3 * 4 + 3]);
  EXPECT_FALSE(q3.y_mask[3 * 4 + 0]);
  const TaskGeometry td = make_geometry(Task::topdown, 4, 4);
  EXPECT_TRUE(td.x_mask[1 * 4 + 2]);
  EXPECT_FALSE(td.x_mask[2 * 4 + 2]);
  const TaskGeometry q2 = make_geometry(Task::quadrant2, 4, 4);
  EXPECT_TRUE(q2.x_mask[3 * 4 + 1]);
  EXPECT_FALSE(q2.x_mask[0 * 4 + 2]);
}

TEST(GeometryTest, ReassemblyIsLossless) {
  const ImageSet s = numbered_images(3, 28, 28);
  for (Task t : {Task::quadrant1, Task::quadrant2, Task::quadrant3, Task::topdown}) {
    const TaskGeometry g = make_geometry(t, 28, 28);
    const auto samples = split_task(s, g);
    ASSERT_EQ(samples.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto img = reassemble(samples[i].x, samples[i].y, g);
      const auto src = s.image(i);
      EXPECT_TRUE(std::equal(img.begin(), img.end(), src.begin())) << to_string(t);
    }
  }
}

TEST(GeometryTest, TaskNamesRoundTrip) {
  for (Task t : {Task::quadrant1, Task::quadrant2, Task::quadrant3, Task::topdown}) {
    EXPECT_EQ(parse_task(to_string(t)), t);
  }
  EXPECT_THROW(parse_task("quadrant4"), std::invalid_argument);
  EXPECT_EQ(resolve_task("shift-sensitive").second, ShiftMode::pairwise);
  EXPECT_EQ(resolve_task("shift-invariant").second, ShiftMode::x_only);
  EXPECT_EQ(resolve_task("shift-invariant").first, Task::topdown);
  EXPECT_FALSE(resolve_task("quadrant2").second.has_value());
}

std::vector<SplitSample> indexed_samples(std::size_t n) {
  std::vector<SplitSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({{double(i)}, {double(i) + 0.5}, LabelStatus::paired, i});
  return out;
}

TEST(SplitTest, PartitionsWithoutOverlap) {
  const SemiSplit s = make_semi_split(indexed_samples(100), 10, 3, 20);
  EXPECT_EQ(s.validation.size(), 20u);
  EXPECT_EQ(s.labeled.size(), 10u);
  EXPECT_EQ(s.unlabeled_x.size(), 70u);
  EXPECT_EQ(s.unlabeled_y.size(), 70u);
  std::set<std::size_t> seen;
  for (const auto* part : {&s.validation, &s.labeled, &s.unlabeled_x}) {
    for (const auto& e : *part) EXPECT_TRUE(seen.insert(e.source).second);
  }
  EXPECT_EQ(seen.size(), 100u);
  for (const auto& e : s.unlabeled_x) {
    EXPECT_TRUE(e.y.empty());
    EXPECT_EQ(e.status, LabelStatus::x_only);
  }
  std::set<std::size_t> ys;
  for (const auto& e : s.unlabeled_y) {
    EXPECT_TRUE(e.x.empty());
    ys.insert(e.source);
  }
  std::set<std::size_t> xs;
  for (const auto& e : s.unlabeled_x) xs.insert(e.source);
  EXPECT_EQ(xs, ys);
}

TEST(SplitTest, UnlabeledYOrderIsDecoupled) {
  const SemiSplit s = make_semi_split(indexed_samples(200), 10, 4, 10);
  std::size_t aligned = 0;
  for (std::size_t i = 0; i < s.unlabeled_x.size(); ++i) aligned += s.unlabeled_x[i].source == s.unlabeled_y[i].source;
  EXPECT_LT(aligned, 10u);
}

TEST(SplitTest, CapsUnlabeledAndRejectsOversizedRequests) {
  const SemiSplit s = make_semi_split(indexed_samples(100), 10, 3, 20, 5);
  EXPECT_EQ(s.unlabeled_x.size(), 5u);
  EXPECT_THROW(make_semi_split(indexed_samples(10), 8, 3, 5), DataError);
  EXPECT_THROW(make_semi_split(indexed_samples(10), 0, 3, 5), std::invalid_argument);
}

TEST(SplitTest, DeterministicInSeed) {
  const SemiSplit a = make_semi_split(indexed_samples(50), 5, 9, 5);
  const SemiSplit b = make_semi_split(indexed_samples(50), 5, 9, 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.labeled[i].source, b.labeled[i].source);
}

TEST(ShiftTest, DrawsAreUniform) {
  const auto shifts = draw_shifts(18000, 6, 4);
  std::vector<double> counts(9, 0.0);
  for (int s : shifts) {
    ASSERT_GE(s, -4);
    ASSERT_LE(s, 4);
    counts[static_cast<std::size_t>(s + 4)] += 1.0;
  }
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  EXPECT_GT(oracle::chi_square_upper_tail(chi2, 8.0), 0.001) << "chi2 " << chi2;
}

TEST(ShiftTest, PairwiseUnshiftReconstructsInFramePixels) {
  const ImageSet s = numbered_images(5, 8, 8);
  const std::vector<int> shifts = {-3, -1, 0, 2, 4};
  const ImageSet moved = shift_images(s, shifts, ShiftMode::pairwise);
  std::vector<int> back(shifts.size());
  std::transform(shifts.begin(), shifts.end(), back.begin(), [](int v) { return -v; });
  const ImageSet restored = shift_images(moved, back, ShiftMode::pairwise);
  for (std::size_t n = 0; n < 5; ++n) {
    for (std::size_t r = 0; r < 8; ++r) {
      for (std::size_t c = 0; c < 8; ++c) {
        const int dest = static_cast<int>(c) + shifts[n];
        const double expected = (dest >= 0 && dest < 8) ? s.image(n)[r * 8 + c] : 0.0;
        EXPECT_EQ(restored.image(n)[r * 8 + c], expected);
      }
    }
  }
}

TEST(ShiftTest, XOnlyLeavesBottomHalfInPlace) {
  const ImageSet s = numbered_images(2, 8, 8);
  const ImageSet moved = shift_images(s, std::vector<int>{2, -2}, ShiftMode::x_only);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 32; i < 64; ++i) EXPECT_EQ(moved.image(n)[i], s.image(n)[i]);
  }
  EXPECT_EQ(moved.image(0)[0], 0.0);
  EXPECT_EQ(moved.image(0)[2], s.image(0)[0]);
}

TEST(ShiftTest, ApplyShiftRequiresTopdown) {
  const ImageSet s = numbered_images(2, 8, 8);
  EXPECT_THROW(apply_shift(s, ShiftMode::pairwise, make_geometry(Task::quadrant1, 8, 8), 1), std::invalid_argument);
  const ShiftedImages out = apply_shift(s, ShiftMode::pairwise, make_geometry(Task::topdown, 8, 8), 1);
  EXPECT_EQ(out.shifts.size(), 2u);
}

TEST(MinibatchTest, LastBatchIsPartial) {
  const MinibatchStream stream(10, 0, 0, 4, 1);
  EXPECT_EQ(stream.steps_per_epoch(), 3u);
  const auto batches = stream.epoch(0);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].labeled.size(), 4u);
  EXPECT_EQ(batches[1].labeled.size(), 4u);
  EXPECT_EQ(batches[2].labeled.size(), 2u);
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.labeled.begin(), b.labeled.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(10);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
  EXPECT_TRUE(batches[0].x_unlabeled.empty());
}

TEST(MinibatchTest, EpochsReshuffleAndAreReproducible) {
  const MinibatchStream a(50, 30, 20, 8, 2), b(50, 30, 20, 8, 2);
  EXPECT_EQ(a.epoch(3)[0].labeled, b.epoch(3)[0].labeled);
  EXPECT_NE(a.epoch(0)[0].labeled, a.epoch(1)[0].labeled);
}

TEST(MinibatchTest, UnlabeledStreamsCoverEveryIndex) {
  const MinibatchStream stream(16, 12, 5, 4, 3);
  std::map<std::size_t, int> seen_x, seen_y;
  for (std::size_t e = 0; e < 3; ++e) {  // 12 steps cover X_u exactly four times
    for (const auto& b : stream.epoch(e)) {
      EXPECT_EQ(b.x_unlabeled.size(), 4u);
      EXPECT_EQ(b.y_unlabeled.size(), 4u);
      for (auto i : b.x_unlabeled) ++seen_x[i];
      for (auto i : b.y_unlabeled) ++seen_y[i];
    }
  }
  EXPECT_EQ(seen_x.size(), 12u);
  for (const auto& [i, count] : seen_x) EXPECT_EQ(count, 4) << i;
  EXPECT_EQ(seen_y.size(), 5u);
}

TEST(MatrixTest, GatherRows) {
  const Matrix m{3, 2, {1, 2, 3, 4, 5, 6}};
  const std::vector<std::size_t> idx = {2, 0};
  const Tensor t = gather_rows(m, idx);
  EXPECT_EQ(t.shape(), (Shape{2, 2}));
  EXPECT_EQ(t[0], 5.0);
  EXPECT_EQ(t[3], 2.0);
  const std::vector<std::size_t> bad = {3};
  EXPECT_THROW(gather_rows(m, bad), std::out_of_range);
}

TEST(PrepareTest, PipelineAndCacheRoundTrip) {
  const std::string dir = synthetic::temp_dir("prepare");
  synthetic::write_mnist_like(dir + "/mnist", 60, 20, 8, 8);
  PrepareOptions o;
  o.data_dir = dir + "/mnist";
  o.task = "quadrant2";
  o.downsample = 2;
  o.n_l = 10;
  o.n_u = 30;
  o.val_size = 15;
  o.test_size = 12;
  o.seed = 4;
  const PreparedData d = prepare_data(o);
  EXPECT_EQ(d.x_labeled.rows, 10u);
  EXPECT_EQ(d.x_labeled.cols, 8u);
  EXPECT_EQ(d.y_unlabeled.rows, 30u);
  EXPECT_EQ(d.x_val.rows, 15u);
  EXPECT_EQ(d.x_test.rows, 12u);
  EXPECT_EQ(d.test_labels.size(), 12u);
  EXPECT_TRUE(d.test_shifts.empty());
  for (double v : d.x_labeled.data) ASSERT_TRUE(v == 0.0 || v == 1.0);

  save_prepared(dir + "/split.bin", d);
  const PreparedData r = load_prepared(dir + "/split.bin");
  EXPECT_EQ(r.task, "quadrant2");
  EXPECT_EQ(r.n_l, 10u);
  EXPECT_EQ(r.data_seed, 4u);
  EXPECT_EQ(r.geometry.x_dim(), 8u);
  EXPECT_EQ(r.x_labeled.data, d.x_labeled.data);
  EXPECT_EQ(r.y_unlabeled.data, d.y_unlabeled.data);
  EXPECT_EQ(r.y_test.data, d.y_test.data);
  EXPECT_EQ(r.test_labels, d.test_labels);

  const PreparedData again = prepare_data(o);
  EXPECT_EQ(again.x_labeled.data, d.x_labeled.data);
}

TEST(PrepareTest, ShiftTaskRecordsShifts) {
  const std::string dir = synthetic::temp_dir("prepare_shift");
  synthetic::write_mnist_like(dir + "/mnist", 40, 10, 8, 8);
  PrepareOptions o;
  o.data_dir = dir + "/mnist";
  o.task = "shift-sensitive";
  o.n_l = 10;
  o.val_size = 10;
  o.max_shift = 2;
  const PreparedData d = prepare_data(o);
  ASSERT_EQ(d.test_shifts.size(), 10u);
  for (int s : d.test_shifts) EXPECT_LE(std::abs(s), 2);
  EXPECT_EQ(d.geometry.task, Task::topdown);
}

TEST(PrepareTest, MissingFilesAreDataErrors) {
  PrepareOptions o;
  o.data_dir = synthetic::temp_dir("prepare_missing");
  EXPECT_THROW(prepare_data(o), DataError);
}

TEST(PgmTest, GridLayout) {
  const std::string dir = synthetic::temp_dir("pgm");
  write_pgm_grid(dir + "/g.pgm", {{0.0, 1.0}, {1.0, 0.0}, {0.5, 0.5}}, 1, 2, 2);
  std::ifstream in(dir + "/g.pgm");
  std::string magic;
  std::size_t w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 2u * 2 + 3);
  EXPECT_EQ(h, 2u * 1 + 3);
  EXPECT_EQ(maxv, 255u);
  std::vector<int> px((w * h));
  for (int& p : px) in >> p;
  EXPECT_EQ(px[0], 128);            // border
  EXPECT_EQ(px[1 * w + 1], 0);      // first tile, first pixel
  EXPECT_EQ(px[1 * w + 2], 255);
  EXPECT_EQ(px[1 * w + 4], 255);    // second tile
  EXPECT_THROW(write_pgm(dir + "/bad.pgm", std::vector<double>{0.0}, 2, 2), ShapeError);
}

}  // namespace
}  // namespace bcde
