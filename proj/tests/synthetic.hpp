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

// Small synthetic datasets for tests that exercise training and the
// command-line pipeline without MNIST.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <zlib.h>

#include "bcde/data.hpp"

namespace synthetic {

/// Binary matrix rows whose y half is a noisy copy of the x half, so the
/// conditional task is learnable.
inline void fill_pairs(std::mt19937_64& rng, std::size_t n, std::size_t dx, std::size_t dy, bcde::Matrix& x,
                       bcde::Matrix& y) {
  std::bernoulli_distribution on(0.5), flip(0.1);
  x = {n, dx, std::vector<double>(n * dx)};
  y = {n, dy, std::vector<double>(n * dy)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dx; ++j) x.data[i * dx + j] = on(rng) ? 1.0 : 0.0;
    for (std::size_t j = 0; j < dy; ++j) {
      const double src = x.data[i * dx + (j % dx)];
      y.data[i * dy + j] = flip(rng) ? 1.0 - src : src;
    }
  }
}

inline bcde::PreparedData prepared(std::size_t n_l, std::size_t n_u, std::size_t n_val, std::size_t dx,
                                   std::size_t dy, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  bcde::PreparedData d;
  d.task = "synthetic";
  d.n_l = n_l;
  d.data_seed = seed;
  fill_pairs(rng, n_l, dx, dy, d.x_labeled, d.y_labeled);
  fill_pairs(rng, n_u, dx, dy, d.x_unlabeled, d.y_unlabeled);
  fill_pairs(rng, n_val, dx, dy, d.x_val, d.y_val);
  fill_pairs(rng, n_val, dx, dy, d.x_test, d.y_test);
  return d;
}

inline void put_be32(std::string& s, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xff));
}

/// Bytes of an IDX image file.
inline std::string idx_images(std::size_t n, std::size_t h, std::size_t w, const std::vector<std::uint8_t>& pixels) {
  std::string s;
  put_be32(s, 0x00000803);
  put_be32(s, static_cast<std::uint32_t>(n));
  put_be32(s, static_cast<std::uint32_t>(h));
  put_be32(s, static_cast<std::uint32_t>(w));
  s.append(pixels.begin(), pixels.end());
  return s;
}

inline std::string idx_labels(const std::vector<std::uint8_t>& labels) {
  std::string s;
  put_be32(s, 0x00000801);
  put_be32(s, static_cast<std::uint32_t>(labels.size()));
  s.append(labels.begin(), labels.end());
  return s;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void write_gzip(const std::string& path, const std::string& bytes) {
  gzFile f = gzopen(path.c_str(), "wb");
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
}

/// Random gray images with stroke-like structure: each image is a few
/// bright horizontal and vertical bars.
inline std::vector<std::uint8_t> bar_images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> px(n * h * w, 0);
  std::uniform_int_distribution<std::size_t> row(0, h - 1), col(0, w - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t* img = px.data() + i * h * w;
    const std::size_t r = row(rng), c = col(rng);
    for (std::size_t j = 0; j < w; ++j) img[r * w + j] = 230;
    for (std::size_t j = 0; j < h; ++j) img[j * w + c] = 200;
  }
  return px;
}

/// Writes MNIST-named synthetic IDX files (gzip) into `dir`.
inline void write_mnist_like(const std::string& dir, std::size_t n_train, std::size_t n_test, std::size_t h,
                             std::size_t w) {
  std::filesystem::create_directories(dir);
  write_gzip(dir + "/train-images-idx3-ubyte.gz", idx_images(n_train, h, w, bar_images(n_train, h, w, 1)));
  write_gzip(dir + "/t10k-images-idx3-ubyte.gz", idx_images(n_test, h, w, bar_images(n_test, h, w, 2)));
  std::vector<std::uint8_t> labels(n_test);
  for (std::size_t i = 0; i < n_test; ++i) labels[i] = static_cast<std::uint8_t>(i % 10);
  write_gzip(dir + "/t10k-labels-idx1-ubyte.gz", idx_labels(labels));
}

/// Fresh empty directory under the system temp directory.
inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("bcde_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace synthetic
