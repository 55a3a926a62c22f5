#pragma once

// Dataset bundle I/O. A bundle is a directory:
//   meta.json      {"name":..., "n":..., "d":..., "num_classes":...}
//   edges.tsv      one "u<TAB>v" per line, 0-indexed
//   features.bin   header: two little-endian u32 (n, d); body: n*d
//                  little-endian f32, row-major. features.tsv is the
//                  text fallback (one row per node, tab-separated).
//   labels.tsv     one integer per line
//   splits.tsv     lines "node_id<TAB>{train|val|test}"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcnlab/graph.hpp"

namespace gcnlab {

class BundleError : public std::runtime_error {
 public:
  explicit BundleError(const std::string& what) : std::runtime_error(what) {}
};

struct Dataset {
  Graph graph;
  Dense features;            // n x d
  std::vector<int> labels;   // class id per node, 0..C-1
  std::vector<std::size_t> train_ids, val_ids, test_ids;
  std::string name;
  std::size_t num_classes = 0;
};

namespace detail {

inline void check_disjoint(const std::vector<std::size_t>& a,
                           const std::vector<std::size_t>& b) {
  std::set<std::size_t> sa(a.begin(), a.end());
  for (std::size_t id : b)
    if (sa.count(id)) throw BundleError("overlapping splits");
}

}  // namespace detail

inline void save_bundle(const Dataset& ds, const std::string& path) {
  namespace fs = std::filesystem;
  fs::create_directories(path);

  nlohmann::json meta;
  meta["name"] = ds.name;
  meta["n"] = ds.graph.n;
  meta["d"] = ds.features.cols;
  meta["num_classes"] = ds.num_classes;
  std::ofstream(path + "/meta.json") << meta.dump(2) << "\n";

  std::ofstream edges(path + "/edges.tsv");
  for (std::size_t u = 0; u < ds.graph.n; ++u)
    for (std::size_t k = ds.graph.row_ptr[u]; k < ds.graph.row_ptr[u + 1]; ++k) {
      std::size_t v = ds.graph.col_idx[k];
      if (u < v) edges << u << "\t" << v << "\n";
    }
  edges.close();

  std::ofstream feat(path + "/features.bin", std::ios::binary);
  std::uint32_t n32 = static_cast<std::uint32_t>(ds.features.rows);
  std::uint32_t d32 = static_cast<std::uint32_t>(ds.features.cols);
  feat.write(reinterpret_cast<const char*>(&n32), 4);
  feat.write(reinterpret_cast<const char*>(&d32), 4);
  for (double v : ds.features.data) {
    float f = static_cast<float>(v);
    feat.write(reinterpret_cast<const char*>(&f), 4);
  }
  feat.close();

  std::ofstream labels(path + "/labels.tsv");
  for (int y : ds.labels) labels << y << "\n";
  labels.close();

  std::ofstream splits(path + "/splits.tsv");
  for (std::size_t id : ds.train_ids) splits << id << "\ttrain\n";
  for (std::size_t id : ds.val_ids) splits << id << "\tval\n";
  for (std::size_t id : ds.test_ids) splits << id << "\ttest\n";
}

inline Dataset load_bundle(const std::string& path) {
  namespace fs = std::filesystem;
  auto require = [&](const std::string& f) {
    if (!fs::exists(path + "/" + f)) throw BundleError("missing file: " + f);
  };
  require("meta.json");
  require("edges.tsv");
  require("labels.tsv");
  require("splits.tsv");

  Dataset ds;
  nlohmann::json meta;
  {
    std::ifstream in(path + "/meta.json");
    in >> meta;
  }
  ds.name = meta.value("name", std::string("unnamed"));
  std::size_t n = meta.at("n").get<std::size_t>();
  std::size_t d = meta.at("d").get<std::size_t>();
  ds.num_classes = meta.at("num_classes").get<std::size_t>();

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  {
    std::ifstream in(path + "/edges.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::size_t u, v;
      if (!(ss >> u >> v)) throw BundleError("malformed edges.tsv line: " + line);
      edges.emplace_back(u, v);
    }
  }
  try {
    ds.graph = build_graph(edges, n);
  } catch (const std::invalid_argument& e) {
    throw BundleError(std::string("bad edge list: ") + e.what());
  }

  if (fs::exists(path + "/features.bin")) {
    std::ifstream in(path + "/features.bin", std::ios::binary);
    std::uint32_t n32 = 0, d32 = 0;
    in.read(reinterpret_cast<char*>(&n32), 4);
    in.read(reinterpret_cast<char*>(&d32), 4);
    if (!in || n32 != n || d32 != d)
      throw BundleError("features.bin header disagrees with meta.json");
    ds.features = Dense(n, d);
    for (double& v : ds.features.data) {
      float f = 0.0f;
      in.read(reinterpret_cast<char*>(&f), 4);
      v = static_cast<double>(f);
    }
    if (!in) throw BundleError("features.bin truncated");
  } else if (fs::exists(path + "/features.tsv")) {
    std::ifstream in(path + "/features.tsv");
    ds.features = Dense(n, d);
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (i >= n) throw BundleError("features.tsv has more rows than meta.json n");
      std::istringstream ss(line);
      for (std::size_t j = 0; j < d; ++j)
        if (!(ss >> ds.features(i, j))) throw BundleError("features.tsv row too short");
      ++i;
    }
    if (i != n) throw BundleError("features.tsv has fewer rows than meta.json n");
  } else {
    throw BundleError("missing file: features.bin or features.tsv");
  }

  {
    std::ifstream in(path + "/labels.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ds.labels.push_back(std::stoi(line));
    }
    if (ds.labels.size() != n) throw BundleError("labels.tsv row count disagrees with meta.json n");
    for (int y : ds.labels)
      if (y < 0 || static_cast<std::size_t>(y) >= ds.num_classes)
        throw BundleError("label out of range");
  }

  {
    std::ifstream in(path + "/splits.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::size_t id;
      std::string tag;
      if (!(ss >> id >> tag)) throw BundleError("malformed splits.tsv line: " + line);
      if (id >= n) throw BundleError("split node id out of range");
      if (tag == "train")
        ds.train_ids.push_back(id);
      else if (tag == "val")
        ds.val_ids.push_back(id);
      else if (tag == "test")
        ds.test_ids.push_back(id);
      else
        throw BundleError("unknown split tag: " + tag);
    }
  }
  detail::check_disjoint(ds.train_ids, ds.val_ids);
  detail::check_disjoint(ds.train_ids, ds.test_ids);
  detail::check_disjoint(ds.val_ids, ds.test_ids);
  return ds;
}

}  // namespace gcnlab
