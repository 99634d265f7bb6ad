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

#include "bcde/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "bcde/random.hpp"

namespace bcde {

std::span<const double> ImageSet::image(std::size_t i) const {
  return {pixels.data() + i * image_size(), image_size()};
}

std::span<double> ImageSet::image(std::size_t i) {
  return {pixels.data() + i * image_size(), image_size()};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in, const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError(path + ": inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<unsigned char> out;
  unsigned char chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError(path + ": corrupt gzip stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError(path + ": truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes, path);
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

}  // namespace

ImageSet load_idx(const std::string& path) {
  const auto b = read_maybe_gzip(path);
  if (b.size() < 16) throw FormatError(path + ": truncated IDX header");
  const std::uint32_t magic = be32(b, 0);
  if (magic != 0x00000803) {
    std::ostringstream msg;
    msg << path << ": bad IDX magic 0x" << std::hex << magic << " (expected 0x803 for images)";
    throw FormatError(msg.str());
  }
  ImageSet set;
  set.count = be32(b, 4);
  set.height = be32(b, 8);
  set.width = be32(b, 12);
  const std::size_t n = set.count * set.height * set.width;
  if (b.size() - 16 < n) throw FormatError(path + ": truncated IDX payload");
  set.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) set.pixels[i] = b[16 + i] / 255.0;
  return set;
}

std::vector<int> load_idx_labels(const std::string& path) {
  const auto b = read_maybe_gzip(path);
  if (b.size() < 8) throw FormatError(path + ": truncated IDX header");
  if (be32(b, 0) != 0x00000801) throw FormatError(path + ": bad IDX magic (expected 0x801 for labels)");
  const std::size_t n = be32(b, 4);
  if (b.size() - 8 < n) throw FormatError(path + ": truncated IDX payload");
  return {b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(n)};
}

// ---------------------------------------------------------------------------
// Image transforms

ImageSet downsample(const ImageSet& set, std::size_t factor) {
  if (factor == 0 || set.height % factor != 0 || set.width % factor != 0) {
    throw std::invalid_argument("downsample factor must divide the image size");
  }
  if (factor == 1) return set;
  ImageSet out;
  out.count = set.count;
  out.height = set.height / factor;
  out.width = set.width / factor;
  out.pixels.assign(out.count * out.image_size(), 0.0);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t n = 0; n < set.count; ++n) {
    auto src = set.image(n);
    auto dst = out.image(n);
    for (std::size_t r = 0; r < set.height; ++r) {
      for (std::size_t c = 0; c < set.width; ++c) {
        dst[(r / factor) * out.width + c / factor] += src[r * set.width + c] * inv;
      }
    }
  }
  return out;
}

ImageSet binarize_static(const ImageSet& set, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageSet out = set;
  for (double& p : out.pixels) p = u(rng) < p ? 1.0 : 0.0;
  return out;
}

ImageSet take_first(const ImageSet& set, std::size_t n) {
  ImageSet out = set;
  out.count = std::min(n, set.count);
  out.pixels.resize(out.count * out.image_size());
  return out;
}

// ---------------------------------------------------------------------------
// Task geometry

Task parse_task(std::string_view name) {
  if (name == "quadrant1") return Task::quadrant1;
  if (name == "quadrant2") return Task::quadrant2;
  if (name == "quadrant3") return Task::quadrant3;
  if (name == "topdown") return Task::topdown;
  throw std::invalid_argument("unknown task: " + std::string(name));
}

std::string to_string(Task task) {
  switch (task) {
    case Task::quadrant1: return "quadrant1";
    case Task::quadrant2: return "quadrant2";
    case Task::quadrant3: return "quadrant3";
    case Task::topdown: return "topdown";
  }
  return "?";
}

std::size_t TaskGeometry::x_dim() const {
  return static_cast<std::size_t>(std::count(x_mask.begin(), x_mask.end(), true));
}

std::size_t TaskGeometry::y_dim() const {
  return static_cast<std::size_t>(std::count(y_mask.begin(), y_mask.end(), true));
}

TaskGeometry make_geometry(Task task, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || height % 2 != 0 || width % 2 != 0) {
    throw std::invalid_argument("task geometry needs even, nonzero image dimensions");
  }
  TaskGeometry g;
  g.task = task;
  g.height = height;
  g.width = width;
  g.x_mask.resize(height * width);
  g.y_mask.resize(height * width);
  const std::size_t hh = height / 2, hw = width / 2;
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      bool observed = false;
      switch (task) {
        case Task::quadrant1: observed = r >= hh && c < hw; break;
        case Task::quadrant2: observed = c < hw; break;
        case Task::quadrant3: observed = !(r >= hh && c >= hw); break;
        case Task::topdown: observed = r < hh; break;
      }
      g.x_mask[r * width + c] = observed;
      g.y_mask[r * width + c] = !observed;
    }
  }
  return g;
}

std::vector<SplitSample> split_task(const ImageSet& set, const TaskGeometry& geom) {
  if (set.height != geom.height || set.width != geom.width) {
    throw ShapeError("task geometry does not match the image size");
  }
  std::vector<SplitSample> out(set.count);
  const std::size_t nx = geom.x_dim(), ny = geom.y_dim();
  for (std::size_t n = 0; n < set.count; ++n) {
    auto img = set.image(n);
    SplitSample& s = out[n];
    s.source = n;
    s.x.reserve(nx);
    s.y.reserve(ny);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (geom.x_mask[i]) s.x.push_back(img[i]);
      else s.y.push_back(img[i]);
    }
  }
  return out;
}

std::vector<double> reassemble(std::span<const double> x, std::span<const double> y,
                               const TaskGeometry& geom) {
  if (x.size() != geom.x_dim() || y.size() != geom.y_dim()) {
    throw ShapeError("x/y lengths do not match the task geometry");
  }
  std::vector<double> img(geom.height * geom.width);
  std::size_t ix = 0, iy = 0;
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = geom.x_mask[i] ? x[ix++] : y[iy++];
  return img;
}

// ---------------------------------------------------------------------------
// Semi-supervised split

SemiSplit make_semi_split(const std::vector<SplitSample>& samples, std::size_t n_l,
                          std::uint64_t seed, std::size_t val_size,
                          std::optional<std::size_t> n_u_max) {
  if (n_l == 0) throw std::invalid_argument("n_l must be at least 1");
  if (n_l + val_size > samples.size()) {
    throw DataError("n_l + val_size = " + std::to_string(n_l + val_size) + " exceeds the " +
                    std::to_string(samples.size()) + " available samples");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed({seed, 1}));
  std::shuffle(order.begin(), order.end(), rng);

  SemiSplit split;
  std::size_t pos = 0;
  for (; pos < val_size; ++pos) split.validation.push_back(samples[order[pos]]);
  for (std::size_t i = 0; i < n_l; ++i, ++pos) split.labeled.push_back(samples[order[pos]]);
  std::size_t n_u = samples.size() - pos;
  if (n_u_max) n_u = std::min(n_u, *n_u_max);
  for (std::size_t i = 0; i < n_u; ++i, ++pos) {
    SplitSample sx = samples[order[pos]];
    SplitSample sy = sx;
    sx.y.clear();
    sx.status = LabelStatus::x_only;
    sy.x.clear();
    sy.status = LabelStatus::y_only;
    split.unlabeled_x.push_back(std::move(sx));
    split.unlabeled_y.push_back(std::move(sy));
  }
  std::mt19937_64 rng_y(derive_seed({seed, 2}));
  std::shuffle(split.unlabeled_y.begin(), split.unlabeled_y.end(), rng_y);
  for (auto& s : split.labeled) s.status = LabelStatus::paired;
  return split;
}

// ---------------------------------------------------------------------------
// Shifts

std::vector<int> draw_shifts(std::size_t count, std::uint64_t seed, int max_shift) {
  if (max_shift < 0) throw std::invalid_argument("max_shift must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-max_shift, max_shift);
  std::vector<int> out(count);
  for (int& s : out) s = d(rng);
  return out;
}

ImageSet shift_images(const ImageSet& set, std::span<const int> shifts, ShiftMode mode) {
  if (shifts.size() != set.count) throw std::invalid_argument("one shift per image required");
  ImageSet out = set;
  const std::size_t rows = mode == ShiftMode::pairwise ? set.height : set.height / 2;
  const auto w = static_cast<std::ptrdiff_t>(set.width);
  for (std::size_t n = 0; n < set.count; ++n) {
    auto src = set.image(n);
    auto dst = out.image(n);
    const std::ptrdiff_t s = shifts[n];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::ptrdiff_t c = 0; c < w; ++c) {
        const std::ptrdiff_t from = c - s;
        dst[r * set.width + c] = (from >= 0 && from < w) ? src[r * set.width + from] : 0.0;
      }
    }
  }
  return out;
}

ShiftedImages apply_shift(const ImageSet& set, ShiftMode mode, const TaskGeometry& geom,
                          std::uint64_t seed, int max_shift) {
  if (geom.task != Task::topdown) throw std::invalid_argument("shift tasks require the topdown geometry");
  if (geom.height != set.height || geom.width != set.width) {
    throw ShapeError("task geometry does not match the image size");
  }
  ShiftedImages out;
  out.shifts = draw_shifts(set.count, seed, max_shift);
  out.images = shift_images(set, out.shifts, mode);
  return out;
}

// ---------------------------------------------------------------------------
// Matrices and minibatches

std::span<const double> Matrix::row(std::size_t i) const { return {data.data() + i * cols, cols}; }

Tensor Matrix::to_tensor() const { return Tensor({rows, cols}, data); }

namespace {

Matrix stack(const std::vector<SplitSample>& samples, bool use_x) {
  Matrix m;
  m.rows = samples.size();
  if (samples.empty()) return m;
  m.cols = use_x ? samples[0].x.size() : samples[0].y.size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& s : samples) {
    const auto& v = use_x ? s.x : s.y;
    if (v.size() != m.cols) throw ShapeError("ragged samples");
    m.data.insert(m.data.end(), v.begin(), v.end());
  }
  return m;
}

}  // namespace

Matrix stack_x(const std::vector<SplitSample>& samples) { return stack(samples, true); }
Matrix stack_y(const std::vector<SplitSample>& samples) { return stack(samples, false); }

Tensor gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  std::vector<double> v;
  v.reserve(indices.size() * m.cols);
  for (std::size_t i : indices) {
    if (i >= m.rows) throw std::out_of_range("row index out of range");
    auto r = m.row(i);
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({indices.size(), m.cols}, std::move(v));
}

MinibatchStream::MinibatchStream(std::size_t n_labeled, std::size_t n_x_unlabeled,
                                 std::size_t n_y_unlabeled, std::size_t batch, std::uint64_t seed)
    : n_l_(n_labeled), n_ux_(n_x_unlabeled), n_uy_(n_y_unlabeled), batch_(batch), seed_(seed) {
  if (batch == 0) throw std::invalid_argument("batch size must be at least 1");
}

std::size_t MinibatchStream::steps_per_epoch() const { return (n_l_ + batch_ - 1) / batch_; }

std::vector<std::size_t> MinibatchStream::cyclic_take(std::size_t n, std::uint64_t tag,
                                                      std::size_t begin, std::size_t count) const {
  std::map<std::size_t, std::vector<std::size_t>> perms;
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t p = begin; p < begin + count; ++p) {
    const std::size_t cycle = p / n;
    auto it = perms.find(cycle);
    if (it == perms.end()) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 rng(derive_seed({seed_, tag, cycle}));
      std::shuffle(perm.begin(), perm.end(), rng);
      it = perms.emplace(cycle, std::move(perm)).first;
    }
    out.push_back(it->second[p % n]);
  }
  return out;
}

std::vector<Minibatch> MinibatchStream::epoch(std::size_t e) const {
  std::vector<std::size_t> order(n_l_);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed({seed_, 0, e}));
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t steps = steps_per_epoch();
  const std::size_t bx = std::min(batch_, n_ux_), by = std::min(batch_, n_uy_);
  std::vector<Minibatch> out(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t begin = s * batch_, end = std::min(n_l_, begin + batch_);
    out[s].labeled.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
    const std::size_t global = e * steps + s;
    if (n_ux_ > 0) out[s].x_unlabeled = cyclic_take(n_ux_, 1, global * bx, bx);
    if (n_uy_ > 0) out[s].y_unlabeled = cyclic_take(n_uy_, 2, global * by, by);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preparation and caching

std::pair<Task, std::optional<ShiftMode>> resolve_task(std::string_view name) {
  if (name == "shift-sensitive") return {Task::topdown, ShiftMode::pairwise};
  if (name == "shift-invariant") return {Task::topdown, ShiftMode::x_only};
  return {parse_task(name), std::nullopt};
}

std::string PreparedData::summary() const {
  std::ostringstream os;
  os << "task=" << task << " geometry=" << to_string(geometry.task) << " image=" << geometry.height
     << "x" << geometry.width << " x_dim=" << geometry.x_dim() << " y_dim=" << geometry.y_dim()
     << " labeled=" << x_labeled.rows << " unlabeled_x=" << x_unlabeled.rows
     << " unlabeled_y=" << y_unlabeled.rows << " validation=" << x_val.rows
     << " test=" << x_test.rows;
  return os.str();
}

namespace {

std::string find_idx(const std::string& dir, const std::string& stem) {
  namespace fs = std::filesystem;
  for (const std::string& name : {stem + ".gz", stem}) {
    const fs::path p = fs::path(dir) / name;
    if (fs::exists(p)) return p.string();
  }
  throw DataError("missing data file " + (fs::path(dir) / stem).string() + "[.gz]");
}

ImageSet shifted(const ImageSet& set, const std::optional<ShiftMode>& mode, const TaskGeometry& geom,
                 std::uint64_t seed, int max_shift, std::vector<int>* shifts) {
  if (!mode) return set;
  auto s = apply_shift(set, *mode, geom, seed, max_shift);
  if (shifts) *shifts = s.shifts;
  return std::move(s.images);
}

}  // namespace

PreparedData prepare_data(const PrepareOptions& opts) {
  const auto [task, shift_mode] = resolve_task(opts.task);
  ImageSet train = load_idx(find_idx(opts.data_dir, "train-images-idx3-ubyte"));
  ImageSet test = load_idx(find_idx(opts.data_dir, "t10k-images-idx3-ubyte"));
  std::vector<int> test_labels;
  try {
    test_labels = load_idx_labels(find_idx(opts.data_dir, "t10k-labels-idx1-ubyte"));
  } catch (const DataError&) {
    // Labels only group exported latents; their absence is not fatal.
  }
  if (opts.test_size) {
    if (*opts.test_size == 0 || *opts.test_size > test.count) {
      throw DataError("test_size must be between 1 and " + std::to_string(test.count));
    }
    test = take_first(test, *opts.test_size);
    if (!test_labels.empty()) test_labels.resize(test.count);
  }

  train = binarize_static(downsample(train, opts.downsample), derive_seed({opts.seed, 11}));
  test = binarize_static(downsample(test, opts.downsample), derive_seed({opts.seed, 12}));
  const TaskGeometry geom = make_geometry(task, train.height, train.width);

  PreparedData out;
  train = shifted(train, shift_mode, geom, derive_seed({opts.seed, 13}), opts.max_shift, nullptr);
  test = shifted(test, shift_mode, geom, derive_seed({opts.seed, 14}), opts.max_shift, &out.test_shifts);

  const SemiSplit split =
      make_semi_split(split_task(train, geom), opts.n_l, derive_seed({opts.seed, 15}), opts.val_size, opts.n_u);
  const auto test_samples = split_task(test, geom);

  out.task = opts.task;
  out.geometry = geom;
  out.n_l = opts.n_l;
  out.data_seed = opts.seed;
  out.x_labeled = stack_x(split.labeled);
  out.y_labeled = stack_y(split.labeled);
  out.x_unlabeled = stack_x(split.unlabeled_x);
  out.y_unlabeled = stack_y(split.unlabeled_y);
  out.x_val = stack_x(split.validation);
  out.y_val = stack_y(split.validation);
  out.x_test = stack_x(test_samples);
  out.y_test = stack_y(test_samples);
  out.test_labels = std::move(test_labels);
  return out;
}

namespace {

void put_matrix(TensorArchive& a, const std::string& name, const Matrix& m) {
  a.header[name + ".rows"] = std::to_string(m.rows);
  if (!m.empty()) a.add(name, m.to_tensor());
}

Matrix get_matrix(const TensorArchive& a, const std::string& name, std::size_t cols) {
  Matrix m;
  m.cols = cols;
  m.rows = std::stoul(a.header.at(name + ".rows"));
  if (m.rows == 0) return m;
  const Tensor& t = a.get(name);
  if (t.rank() != 2 || t.dim(0) != m.rows || t.dim(1) != cols) {
    throw FormatError("cache record " + name + " has an unexpected shape");
  }
  m.data.assign(t.values().begin(), t.values().end());
  return m;
}

std::vector<double> ints_to_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<int> doubles_to_ints(std::span<const double> v) {
  std::vector<int> out;
  for (double d : v) out.push_back(static_cast<int>(d));
  return out;
}

}  // namespace

void save_prepared(const std::string& path, const PreparedData& data) {
  TensorArchive a;
  a.header["task"] = data.task;
  a.header["n_l"] = std::to_string(data.n_l);
  a.header["data_seed"] = std::to_string(data.data_seed);
  a.header["height"] = std::to_string(data.geometry.height);
  a.header["width"] = std::to_string(data.geometry.width);
  put_matrix(a, "labeled/x", data.x_labeled);
  put_matrix(a, "labeled/y", data.y_labeled);
  put_matrix(a, "unlabeled/x", data.x_unlabeled);
  put_matrix(a, "unlabeled/y", data.y_unlabeled);
  put_matrix(a, "validation/x", data.x_val);
  put_matrix(a, "validation/y", data.y_val);
  put_matrix(a, "test/x", data.x_test);
  put_matrix(a, "test/y", data.y_test);
  if (!data.test_labels.empty()) a.add("test/labels", Tensor::vector(ints_to_doubles(data.test_labels)));
  if (!data.test_shifts.empty()) a.add("test/shifts", Tensor::vector(ints_to_doubles(data.test_shifts)));
  write_archive(path, kSplitCacheMagic, a, true);
}

PreparedData load_prepared(const std::string& path) {
  const TensorArchive a = read_archive(path, kSplitCacheMagic, true);
  PreparedData d;
  try {
    d.task = a.header.at("task");
    d.n_l = std::stoul(a.header.at("n_l"));
    d.data_seed = std::stoull(a.header.at("data_seed"));
    d.geometry = make_geometry(resolve_task(d.task).first, std::stoul(a.header.at("height")),
                               std::stoul(a.header.at("width")));
  } catch (const std::out_of_range&) {
    throw FormatError(path + ": cache header is incomplete");
  }
  const std::size_t nx = d.geometry.x_dim(), ny = d.geometry.y_dim();
  d.x_labeled = get_matrix(a, "labeled/x", nx);
  d.y_labeled = get_matrix(a, "labeled/y", ny);
  d.x_unlabeled = get_matrix(a, "unlabeled/x", nx);
  d.y_unlabeled = get_matrix(a, "unlabeled/y", ny);
  d.x_val = get_matrix(a, "validation/x", nx);
  d.y_val = get_matrix(a, "validation/y", ny);
  d.x_test = get_matrix(a, "test/x", nx);
  d.y_test = get_matrix(a, "test/y", ny);
  if (a.contains("test/labels")) d.test_labels = doubles_to_ints(a.get("test/labels").values());
  if (a.contains("test/shifts")) d.test_shifts = doubles_to_ints(a.get("test/shifts").values());
  return d;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

int gray_level(double p) { return static_cast<int>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)); }

void write_p2(const std::string& path, const std::vector<int>& levels, std::size_t height,
              std::size_t width) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P2\n" << width << " " << height << "\n255\n";
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) out << (c ? " " : "") << levels[r * width + c];
    out << "\n";
  }
}

}  // namespace

void write_pgm(const std::string& path, std::span<const double> pixels, std::size_t height,
               std::size_t width) {
  if (pixels.size() != height * width) throw ShapeError("pixel count does not match PGM size");
  std::vector<int> levels;
  for (double p : pixels) levels.push_back(gray_level(p));
  write_p2(path, levels, height, width);
}

void write_pgm_grid(const std::string& path, const std::vector<std::vector<double>>& tiles,
                    std::size_t height, std::size_t width, std::size_t columns) {
  if (tiles.empty() || columns == 0) throw std::invalid_argument("empty PGM grid");
  const std::size_t rows = (tiles.size() + columns - 1) / columns;
  const std::size_t gh = rows * (height + 1) + 1, gw = columns * (width + 1) + 1;
  std::vector<int> levels(gh * gw, 128);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    if (tiles[t].size() != height * width) throw ShapeError("tile size does not match PGM grid");
    const std::size_t r0 = (t / columns) * (height + 1) + 1, c0 = (t % columns) * (width + 1) + 1;
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        levels[(r0 + r) * gw + c0 + c] = gray_level(tiles[t][r * width + c]);
      }
    }
  }
  write_p2(path, levels, gh, gw);
}

}  // namespace bcde
