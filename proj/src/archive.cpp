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

#include "bcde/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bcde {

static_assert(std::endian::native == std::endian::little,
              "archive encoding assumes a little-endian host");

void TensorArchive::add(std::string name, const Tensor& value) {
  records.emplace_back(std::move(name), value.detach());
}

bool TensorArchive::contains(std::string_view name) const {
  for (const auto& r : records) {
    if (r.first == name) return true;
  }
  return false;
}

const Tensor& TensorArchive::get(std::string_view name) const {
  for (const auto& r : records) {
    if (r.first == name) return r.second;
  }
  throw FormatError("archive has no record named " + std::string(name));
}

std::vector<std::pair<std::string, Tensor>> TensorArchive::with_prefix(std::string_view prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& r : records) {
    if (std::string_view(r.first).starts_with(prefix)) out.push_back(r);
  }
  return out;
}

namespace {

class Writer {
 public:
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64s(std::span<const double> v) { raw(v.data(), v.size() * sizeof(double)); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : buf_(std::move(bytes)), path_(std::move(path)) {}

  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError(path_ + ": truncated archive");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    need(sizeof v);
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> f64s(std::uint64_t count) {
    if (count > (buf_.size() - pos_) / sizeof(double)) throw FormatError(path_ + ": truncated archive");
    std::vector<double> v(count);
    std::memcpy(v.data(), buf_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return v;
  }
  std::string_view peek(std::size_t n) const {
    need(n);
    return {buf_.data() + pos_, n};
  }
  void skip(std::size_t n) { pos_ += n; }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void write_archive(const std::string& path, std::string_view magic, const TensorArchive& archive,
                   bool has_header) {
  Writer w;
  w.raw(magic.data(), magic.size());
  if (has_header) {
    w.u64(archive.header.size());
    for (const auto& [k, v] : archive.header) {
      w.str(k);
      w.str(v);
    }
  }
  w.u64(archive.records.size());
  for (const auto& [name, t] : archive.records) {
    w.str(name);
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    w.f64s(t.values());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

TensorArchive read_archive(const std::string& path, std::string_view magic, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);
  if (r.peek(magic.size()) != magic) {
    throw FormatError(path + ": version mismatch (expected magic " + std::string(magic) + ")");
  }
  r.skip(magic.size());
  TensorArchive archive;
  if (has_header) {
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string k = r.str();
      archive.header[k] = r.str();
    }
  }
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint64_t rank = r.u64();
    if (rank > 8) throw FormatError(path + ": implausible rank in record " + name);
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      shape.push_back(r.u64());
      numel *= shape.back();
    }
    auto values = r.f64s(numel);
    try {
      archive.records.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
    } catch (const ShapeError& e) {
      throw FormatError(path + ": " + e.what());
    }
  }
  if (!r.at_end()) throw FormatError(path + ": trailing bytes after last record");
  return archive;
}

}  // namespace bcde
