#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gcnlab/bundle.hpp"

using namespace gcnlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gcnlab_bundle_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Dataset toy_dataset() {
  Dataset ds;
  ds.name = "toy";
  ds.graph = build_graph({{0, 1}, {1, 2}}, 3);
  ds.features = Dense(3, 2);
  // f32-representable values survive the binary round trip bit-exactly
  ds.features(0, 0) = 0.5;
  ds.features(0, 1) = -1.25;
  ds.features(1, 0) = 2.0;
  ds.features(1, 1) = 0.0;
  ds.features(2, 0) = -3.5;
  ds.features(2, 1) = 7.0;
  ds.labels = {0, 1, 1};
  ds.num_classes = 2;
  ds.train_ids = {0};
  ds.val_ids = {1};
  ds.test_ids = {2};
  return ds;
}

}  // namespace

TEST(Bundle, RoundTripIsIdentity) {
  TempDir tmp;
  Dataset ds = toy_dataset();
  save_bundle(ds, tmp.path.string());
  Dataset got = load_bundle(tmp.path.string());
  EXPECT_EQ(got.name, ds.name);
  EXPECT_EQ(got.graph.row_ptr, ds.graph.row_ptr);
  EXPECT_EQ(got.graph.col_idx, ds.graph.col_idx);
  EXPECT_EQ(got.features.data, ds.features.data);
  EXPECT_EQ(got.labels, ds.labels);
  EXPECT_EQ(got.train_ids, ds.train_ids);
  EXPECT_EQ(got.val_ids, ds.val_ids);
  EXPECT_EQ(got.test_ids, ds.test_ids);
  EXPECT_EQ(got.num_classes, ds.num_classes);
}

TEST(Bundle, LabelOutOfRange) {
  TempDir tmp;
  Dataset ds = toy_dataset();
  save_bundle(ds, tmp.path.string());
  std::ofstream(tmp.path / "labels.tsv") << "0\n2\n1\n";
  try {
    load_bundle(tmp.path.string());
    FAIL() << "expected BundleError";
  } catch (const BundleError& e) {
    EXPECT_NE(std::string(e.what()).find("label out of range"), std::string::npos);
  }
}

TEST(Bundle, OverlappingSplits) {
  TempDir tmp;
  Dataset ds = toy_dataset();
  save_bundle(ds, tmp.path.string());
  std::ofstream(tmp.path / "splits.tsv") << "0\ttrain\n0\ttest\n";
  try {
    load_bundle(tmp.path.string());
    FAIL() << "expected BundleError";
  } catch (const BundleError& e) {
    EXPECT_NE(std::string(e.what()).find("overlapping splits"), std::string::npos);
  }
}

TEST(Bundle, MissingFile) {
  TempDir tmp;
  Dataset ds = toy_dataset();
  save_bundle(ds, tmp.path.string());
  fs::remove(tmp.path / "edges.tsv");
  EXPECT_THROW(load_bundle(tmp.path.string()), BundleError);
}

TEST(Bundle, HeaderDimensionMismatch) {
  TempDir tmp;
  Dataset ds = toy_dataset();
  save_bundle(ds, tmp.path.string());
  // corrupt the feature header
  std::ofstream f(tmp.path / "features.bin", std::ios::binary);
  std::uint32_t n = 4, d = 2;
  f.write(reinterpret_cast<const char*>(&n), 4);
  f.write(reinterpret_cast<const char*>(&d), 4);
  f.close();
  EXPECT_THROW(load_bundle(tmp.path.string()), BundleError);
}

TEST(Bundle, TextFeatureFallback) {
  TempDir tmp;
  Dataset ds = toy_dataset();
  save_bundle(ds, tmp.path.string());
  fs::remove(tmp.path / "features.bin");
  std::ofstream(tmp.path / "features.tsv") << "0.5\t-1.25\n2\t0\n-3.5\t7\n";
  Dataset got = load_bundle(tmp.path.string());
  EXPECT_EQ(got.features.data, ds.features.data);
}
