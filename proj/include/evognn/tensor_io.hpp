// Copyright 2026 The evognn Authors
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

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evognn/common.hpp"

// Shape-prefixed little-endian binary arrays, shared by dataset bundles and
// parameter dumps. Layout: magic "EVOT", u32 dtype code, u32 ndim,
// u64 dims[ndim], then the payload row-major.
namespace evognn::tensor_io {

enum class Dtype : std::uint32_t { F32 = 0, F64 = 1, I32 = 2, U8 = 3 };

inline std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::I32: return 4;
    case Dtype::U8: return 1;
  }
  throw FormatError("tensor: unknown dtype");
}

inline constexpr char kMagic[4] = {'E', 'V', 'O', 'T'};

struct Header {
  Dtype dtype = Dtype::F32;
  std::vector<std::uint64_t> dims;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::uint64_t d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

inline void write_raw(const std::filesystem::path& path, const Header& header,
                      const void* data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  const auto dtype = static_cast<std::uint32_t>(header.dtype);
  const auto ndim = static_cast<std::uint32_t>(header.dims.size());
  out.write(reinterpret_cast<const char*>(&dtype), sizeof dtype);
  out.write(reinterpret_cast<const char*>(&ndim), sizeof ndim);
  for (std::uint64_t d : header.dims) {
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
  }
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(header.element_count() *
                                         dtype_size(header.dtype)));
  if (!out) throw LoadError("short write: " + path.string());
}

inline Header read_header(std::ifstream& in, const std::string& what) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw LoadError(what + ": not a tensor file");
  }
  std::uint32_t dtype = 0, ndim = 0;
  in.read(reinterpret_cast<char*>(&dtype), sizeof dtype);
  in.read(reinterpret_cast<char*>(&ndim), sizeof ndim);
  if (!in || dtype > 3 || ndim > 8) throw LoadError(what + ": corrupt header");
  Header h;
  h.dtype = static_cast<Dtype>(dtype);
  h.dims.resize(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    in.read(reinterpret_cast<char*>(&h.dims[i]), sizeof(std::uint64_t));
  }
  if (!in) throw LoadError(what + ": corrupt header");
  return h;
}

template <typename T>
std::pair<Header, std::vector<T>> read_raw(const std::filesystem::path& path,
                                           Dtype expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path.string());
  Header h = read_header(in, path.filename().string());
  if (h.dtype != expected) {
    throw LoadError(path.filename().string() + ": unexpected dtype");
  }
  std::vector<T> data(h.element_count());
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(T)));
  if (!in) throw LoadError(path.filename().string() + ": truncated payload");
  return {std::move(h), std::move(data)};
}

// Matrices travel row-major regardless of Eigen's in-memory order.

template <typename Derived>
void write_matrix(const std::filesystem::path& path,
                  const Eigen::MatrixBase<Derived>& m, Dtype dtype) {
  using Scalar = typename Derived::Scalar;
  Header h;
  h.dtype = dtype;
  h.dims = {static_cast<std::uint64_t>(m.rows()),
            static_cast<std::uint64_t>(m.cols())};
  std::vector<Scalar> buf(static_cast<std::size_t>(m.size()));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) buf[i++] = m(r, c);
  }
  write_raw(path, h, buf.data());
}

template <typename MatrixType>
MatrixType read_matrix(const std::filesystem::path& path, Dtype expected) {
  using Scalar = typename MatrixType::Scalar;
  auto [h, data] = read_raw<Scalar>(path, expected);
  if (h.dims.size() != 2) {
    throw LoadError(path.filename().string() + ": expected a matrix");
  }
  MatrixType m(static_cast<Eigen::Index>(h.dims[0]),
               static_cast<Eigen::Index>(h.dims[1]));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[i++];
  }
  return m;
}

}  // namespace evognn::tensor_io
