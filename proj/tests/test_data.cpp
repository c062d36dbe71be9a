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

#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "evognn/dataset.hpp"
#include "evognn/sbm.hpp"

using namespace evognn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("evognn_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool datasets_equal(const GraphDataset& a, const GraphDataset& b) {
  return a.name == b.name && a.task == b.task && a.classes == b.classes &&
         a.graph.edges() == b.graph.edges() && a.features == b.features &&
         a.labels == b.labels && a.label_matrix == b.label_matrix &&
         a.train_mask == b.train_mask && a.val_mask == b.val_mask &&
         a.test_mask == b.test_mask;
}

}  // namespace

TEST_CASE("sbm generates the expected deterministic structure") {
  SECTION("p_in=1, p_out=0: two disjoint triangles") {
    SbmParams p;
    p.communities = 2;
    p.nodes_per_community = 3;
    p.p_in = 1.0;
    p.p_out = 0.0;
    p.feature_dim = 2;
    p.train_fraction = 0.4;
    p.val_fraction = 0.3;
    p.test_fraction = 0.3;
    GraphDataset d = generate_sbm(p);
    CHECK(d.graph.undirected_edge_count() == 6);  // 3 per triangle
    for (auto [u, v] : d.graph.edges()) {
      CHECK(u / 3 == v / 3);  // never crosses communities
    }
  }

  SECTION("identical seeds give bit-identical datasets") {
    SbmParams p;
    p.seed = 99;
    p.nodes_per_community = 20;
    GraphDataset a = generate_sbm(p);
    GraphDataset b = generate_sbm(p);
    CHECK(datasets_equal(a, b));
    p.seed = 100;
    CHECK(!datasets_equal(a, generate_sbm(p)));
  }

  SECTION("intra-community density is binomially plausible") {
    SbmParams p;
    p.communities = 2;
    p.nodes_per_community = 40;
    p.p_in = 0.2;
    p.p_out = 0.01;
    long intra_edges = 0;
    const long pairs_per_seed = 2 * (40 * 39 / 2);
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
      p.seed = static_cast<std::uint64_t>(s);
      GraphDataset d = generate_sbm(p);
      for (auto [u, v] : d.graph.edges()) {
        if (u < v && u / 40 == v / 40) ++intra_edges;
      }
    }
    const double n_trials = static_cast<double>(pairs_per_seed * seeds);
    const double expected = n_trials * 0.2;
    const double sigma = std::sqrt(n_trials * 0.2 * 0.8);
    CHECK(std::abs(static_cast<double>(intra_edges) - expected) < 3.0 * sigma);
  }

  SECTION("stratified masks preserve per-community proportions within one node") {
    SbmParams p;
    p.communities = 3;
    p.nodes_per_community = 33;
    p.train_fraction = 0.2;
    p.val_fraction = 0.3;
    p.test_fraction = 0.5;
    p.seed = 4;
    GraphDataset d = generate_sbm(p);
    for (int c = 0; c < 3; ++c) {
      int train = 0, val = 0;
      for (int i = c * 33; i < (c + 1) * 33; ++i) {
        train += d.train_mask[static_cast<std::size_t>(i)];
        val += d.val_mask[static_cast<std::size_t>(i)];
      }
      CHECK(std::abs(train - 0.2 * 33) <= 1.0);
      CHECK(std::abs(val - 0.3 * 33) <= 1.0);
    }
  }

  SECTION("parameter validation") {
    SbmParams p;
    p.p_out = 0.5;
    p.p_in = 0.2;
    CHECK_THROWS_AS(generate_sbm(p), ConfigError);
    SbmParams q;
    q.train_fraction = 0.9;
    q.val_fraction = 0.9;
    CHECK_THROWS_AS(generate_sbm(q), ConfigError);
    SbmParams r;
    r.nodes_per_community = 2;
    r.train_fraction = 0.1;  // rounds to zero nodes per community
    r.val_fraction = 0.4;
    r.test_fraction = 0.5;
    CHECK_THROWS_AS(generate_sbm(r), ConfigError);
  }

  SECTION("multi-label variant emits a valid 0/1 matrix") {
    SbmParams p;
    p.task = TaskKind::MultiLabel;
    p.nodes_per_community = 10;
    GraphDataset d = generate_sbm(p);
    CHECK(validate_dataset(d).empty());
    CHECK(d.label_matrix.rows() == d.node_count());
    // every node carries at least its own community label
    for (int i = 0; i < d.node_count(); ++i) {
      CHECK(d.label_matrix.row(i).sum() >= 1.0);
    }
  }
}

TEST_CASE("bundle round-trips bit-exactly") {
  for (TaskKind task : {TaskKind::SingleLabel, TaskKind::MultiLabel}) {
    SbmParams p;
    p.task = task;
    p.nodes_per_community = 15;
    p.seed = 21;
    GraphDataset d = generate_sbm(p);
    fs::path dir = temp_dir(task == TaskKind::SingleLabel ? "single" : "multi");
    write_bundle(d, dir);
    GraphDataset loaded = load_bundle(dir);
    CHECK(datasets_equal(d, loaded));
    CHECK(loaded.raw_edge_count == d.graph.undirected_edge_count());
    fs::remove_all(dir);
  }
}

TEST_CASE("load_bundle reports descriptive errors") {
  SbmParams p;
  p.nodes_per_community = 8;
  GraphDataset d = generate_sbm(p);
  fs::path dir = temp_dir("errors");

  SECTION("missing files") {
    write_bundle(d, dir);
    fs::remove(dir / "features.bin");
    CHECK_THROWS_AS(load_bundle(dir), LoadError);
    CHECK_THROWS_AS(load_bundle(dir / "nope"), LoadError);
  }

  SECTION("overlapping masks") {
    GraphDataset bad = d;
    bad.val_mask[static_cast<std::size_t>(bad.train_rows[0])] = 1;
    write_bundle(bad, dir);
    CHECK_THROWS_WITH(load_bundle(dir), Catch::Matchers::ContainsSubstring("overlap"));
  }

  SECTION("label out of range") {
    GraphDataset bad = d;
    bad.labels[0] = bad.classes + 3;
    write_bundle(bad, dir);
    CHECK_THROWS_WITH(load_bundle(dir),
                      Catch::Matchers::ContainsSubstring("label out of range"));
  }

  SECTION("shape mismatch against the manifest") {
    write_bundle(d, dir);
    Eigen::MatrixXf wrong(3, 2);
    wrong.setZero();
    tensor_io::write_matrix(dir / "features.bin", wrong, tensor_io::Dtype::F32);
    CHECK_THROWS_WITH(load_bundle(dir), Catch::Matchers::ContainsSubstring("shape"));
  }

  SECTION("truncated tensor payload") {
    write_bundle(d, dir);
    const auto size = fs::file_size(dir / "features.bin");
    fs::resize_file(dir / "features.bin", size / 2);
    CHECK_THROWS_WITH(load_bundle(dir),
                      Catch::Matchers::ContainsSubstring("truncated"));
  }

  SECTION("malformed edge line") {
    write_bundle(d, dir);
    std::ofstream(dir / "edges.tsv", std::ios::app) << "7\tpotato\n";
    CHECK_THROWS_WITH(load_bundle(dir),
                      Catch::Matchers::ContainsSubstring("two integers"));
  }

  fs::remove_all(dir);
}

TEST_CASE("validate_dataset flags the spec'd violations") {
  SbmParams p;
  p.nodes_per_community = 8;
  GraphDataset d = generate_sbm(p);
  CHECK(validate_dataset(d).empty());

  GraphDataset overlap = d;
  overlap.test_mask[static_cast<std::size_t>(overlap.train_rows[0])] = 1;
  CHECK(!validate_dataset(overlap).empty());

  SbmParams mp = p;
  mp.task = TaskKind::MultiLabel;
  GraphDataset md = generate_sbm(mp);
  md.label_matrix(2, 1) = 0.5;
  auto violations = validate_dataset(md);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("non-binary") != std::string::npos);

  GraphDataset unlabeled = d;
  unlabeled.labels[static_cast<std::size_t>(unlabeled.val_rows[0])] = -1;
  CHECK(!validate_dataset(unlabeled).empty());
}

TEST_CASE("tensor files reject foreign content") {
  fs::path dir = temp_dir("tensor");
  std::ofstream(dir / "junk.bin") << "definitely not a tensor";
  CHECK_THROWS_AS(
      tensor_io::read_matrix<Eigen::MatrixXf>(dir / "junk.bin", tensor_io::Dtype::F32),
      LoadError);
  Eigen::MatrixXi m(2, 2);
  m << 1, 2, 3, 4;
  tensor_io::write_matrix(dir / "m.bin", m, tensor_io::Dtype::I32);
  CHECK_THROWS_AS(
      tensor_io::read_matrix<Eigen::MatrixXf>(dir / "m.bin", tensor_io::Dtype::F32),
      LoadError);  // dtype mismatch
  auto back = tensor_io::read_matrix<Eigen::MatrixXi>(dir / "m.bin", tensor_io::Dtype::I32);
  CHECK(back == m);
  fs::remove_all(dir);
}
