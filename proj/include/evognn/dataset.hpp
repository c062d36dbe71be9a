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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evognn/genome.hpp"
#include "evognn/graph.hpp"
#include "evognn/tensor_io.hpp"

namespace evognn {

/// A loaded node-classification dataset. Immutable after load; shared
/// read-only across workers.
///
/// On-disk bundle layout (one directory):
///   manifest       json: {version, name, task, n, d, classes}
///   edges.tsv      two tab-separated ints per line, one undirected edge
///   features.bin   f32 tensor, n x d
///   labels.bin     i32 tensor: n x 1 class ids (single_label, -1 = unlabeled)
///                  or n x classes of 0/1 (multi_label)
///   masks.bin      u8 tensor, n x 3: train/val/test columns
struct GraphDataset {
  std::string name;
  TaskKind task = TaskKind::SingleLabel;
  Graph graph;
  Eigen::MatrixXf features;  // stored 32-bit, promoted to 64-bit in the engine
  std::vector<int> labels;   // single_label class ids (may be -1 off-mask)
  Mat label_matrix;          // multi_label 0/1 matrix (empty for single_label)
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;
  std::vector<int> train_rows, val_rows, test_rows;
  int classes = 0;
  int raw_edge_count = 0;  // undirected edges as given, before symmetrization

  int node_count() const { return graph.node_count(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  void rebuild_row_lists() {
    train_rows.clear();
    val_rows.clear();
    test_rows.clear();
    for (int i = 0; i < node_count(); ++i) {
      if (train_mask[static_cast<std::size_t>(i)]) train_rows.push_back(i);
      if (val_mask[static_cast<std::size_t>(i)]) val_rows.push_back(i);
      if (test_mask[static_cast<std::size_t>(i)]) test_rows.push_back(i);
    }
  }
};

inline std::vector<std::string> validate_dataset(const GraphDataset& d) {
  std::vector<std::string> v;
  const int n = d.node_count();
  if (d.feature_dim() < 1) v.push_back("feature dimension must be >= 1");
  if (d.classes < 1) v.push_back("classes must be >= 1");
  if (d.features.rows() != n) v.push_back("feature row count != node count");
  if (static_cast<int>(d.train_mask.size()) != n ||
      static_cast<int>(d.val_mask.size()) != n ||
      static_cast<int>(d.test_mask.size()) != n) {
    v.push_back("mask length != node count");
    return v;
  }
  for (int i = 0; i < n; ++i) {
    const int in_masks = (d.train_mask[static_cast<std::size_t>(i)] ? 1 : 0) +
                         (d.val_mask[static_cast<std::size_t>(i)] ? 1 : 0) +
                         (d.test_mask[static_cast<std::size_t>(i)] ? 1 : 0);
    if (in_masks > 1) {
      v.push_back("masks overlap at node " + std::to_string(i));
      break;
    }
  }
  if (d.task == TaskKind::SingleLabel) {
    if (static_cast<int>(d.labels.size()) != n) {
      v.push_back("label count != node count");
      return v;
    }
    for (int i = 0; i < n; ++i) {
      const int y = d.labels[static_cast<std::size_t>(i)];
      if (y >= d.classes || y < -1) {
        v.push_back("label out of range at node " + std::to_string(i));
        break;
      }
      const bool masked = d.train_mask[static_cast<std::size_t>(i)] ||
                          d.val_mask[static_cast<std::size_t>(i)] ||
                          d.test_mask[static_cast<std::size_t>(i)];
      if (masked && y < 0) {
        v.push_back("masked node " + std::to_string(i) + " has no label");
        break;
      }
    }
  } else {
    if (d.label_matrix.rows() != n ||
        d.label_matrix.cols() != d.classes) {
      v.push_back("label matrix shape mismatch");
      return v;
    }
    for (int i = 0; i < n && v.empty(); ++i) {
      for (int c = 0; c < d.classes; ++c) {
        const double y = d.label_matrix(i, c);
        if (y != 0.0 && y != 1.0) {
          v.push_back("non-binary label cell at node " + std::to_string(i));
          break;
        }
      }
    }
  }
  return v;
}

inline void write_bundle(const GraphDataset& d, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["version"] = 1;
  manifest["name"] = d.name;
  manifest["task"] = to_string(d.task);
  manifest["n"] = d.node_count();
  manifest["d"] = d.feature_dim();
  manifest["classes"] = d.classes;
  {
    std::ofstream out(dir / "manifest");
    if (!out) throw LoadError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "edges.tsv");
    // one direction per undirected edge
    for (auto [u, v] : d.graph.edges()) {
      if (u < v) out << u << "\t" << v << "\n";
    }
  }
  tensor_io::write_matrix(dir / "features.bin", d.features,
                          tensor_io::Dtype::F32);
  if (d.task == TaskKind::SingleLabel) {
    Eigen::MatrixXi y(d.node_count(), 1);
    for (int i = 0; i < d.node_count(); ++i) y(i, 0) = d.labels[static_cast<std::size_t>(i)];
    tensor_io::write_matrix(dir / "labels.bin", y, tensor_io::Dtype::I32);
  } else {
    Eigen::MatrixXi y = d.label_matrix.cast<int>();
    tensor_io::write_matrix(dir / "labels.bin", y, tensor_io::Dtype::I32);
  }
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> masks(d.node_count(), 3);
  for (int i = 0; i < d.node_count(); ++i) {
    masks(i, 0) = d.train_mask[static_cast<std::size_t>(i)];
    masks(i, 1) = d.val_mask[static_cast<std::size_t>(i)];
    masks(i, 2) = d.test_mask[static_cast<std::size_t>(i)];
  }
  tensor_io::write_matrix(dir / "masks.bin", masks, tensor_io::Dtype::U8);
}

inline GraphDataset load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw LoadError("bundle directory not found: " + dir.string());
  }
  nlohmann::json manifest;
  {
    std::ifstream in(dir / "manifest");
    if (!in) throw LoadError("missing manifest in " + dir.string());
    try {
      in >> manifest;
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError(std::string("manifest parse: ") + e.what());
    }
  }
  GraphDataset d;
  try {
    if (manifest.at("version").get<int>() != 1) {
      throw LoadError("unsupported bundle version");
    }
    d.name = manifest.at("name").get<std::string>();
    d.task = parse_task_kind(manifest.at("task").get<std::string>());
    d.classes = manifest.at("classes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  }
  const int n = manifest.at("n").get<int>();
  const int dim = manifest.at("d").get<int>();

  std::vector<std::pair<int, int>> edges;
  {
    std::ifstream in(dir / "edges.tsv");
    if (!in) throw LoadError("missing edges.tsv in " + dir.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      int u, v;
      if (!(ss >> u >> v)) {
        throw LoadError("edges.tsv line " + std::to_string(lineno) +
                        ": expected two integers");
      }
      edges.emplace_back(u, v);
    }
  }
  d.raw_edge_count = static_cast<int>(edges.size());
  try {
    d.graph = Graph::from_undirected(n, edges);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("edges.tsv: ") + e.what());
  }

  d.features = tensor_io::read_matrix<Eigen::MatrixXf>(dir / "features.bin",
                                                       tensor_io::Dtype::F32);
  if (d.features.rows() != n || d.features.cols() != dim) {
    throw LoadError("features.bin shape does not match manifest");
  }

  Eigen::MatrixXi y = tensor_io::read_matrix<Eigen::MatrixXi>(
      dir / "labels.bin", tensor_io::Dtype::I32);
  if (d.task == TaskKind::SingleLabel) {
    if (y.rows() != n || y.cols() != 1) {
      throw LoadError("labels.bin: expected n x 1 for single_label");
    }
    d.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) d.labels[static_cast<std::size_t>(i)] = y(i, 0);
  } else {
    if (y.rows() != n || y.cols() != d.classes) {
      throw LoadError("labels.bin: expected n x classes for multi_label");
    }
    d.label_matrix = y.cast<double>();
  }

  auto masks = tensor_io::read_matrix<
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>>(
      dir / "masks.bin", tensor_io::Dtype::U8);
  if (masks.rows() != n || masks.cols() != 3) {
    throw LoadError("masks.bin: expected n x 3");
  }
  d.train_mask.resize(static_cast<std::size_t>(n));
  d.val_mask.resize(static_cast<std::size_t>(n));
  d.test_mask.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    d.train_mask[static_cast<std::size_t>(i)] = masks(i, 0);
    d.val_mask[static_cast<std::size_t>(i)] = masks(i, 1);
    d.test_mask[static_cast<std::size_t>(i)] = masks(i, 2);
  }
  d.rebuild_row_lists();

  auto violations = validate_dataset(d);
  if (!violations.empty()) {
    std::string msg = "bundle " + dir.string() + " invalid:";
    for (const std::string& v : violations) msg += "\n  " + v;
    throw LoadError(msg);
  }
  return d;
}

}  // namespace evognn
