#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kpsim/data.hpp"
#include "kpsim/eval.hpp"

using namespace kpsim;
namespace fs = std::filesystem;

TEST_CASE("synthetic stream is deterministic per seed") {
  SyntheticSpec spec;
  spec.seed = 123;
  spec.n_instances = 500;
  spec.vocab = 200;
  spec.nnz_mean = 5.0;

  const auto a = generate_synthetic_ctr(spec, 128);
  const auto b = generate_synthetic_ctr(spec, 128);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].instances.size() == b[i].instances.size());
    for (std::size_t j = 0; j < a[i].instances.size(); ++j) {
      CHECK(a[i].instances[j].label == b[i].instances[j].label);
      CHECK(a[i].instances[j].feature_ids == b[i].instances[j].feature_ids);
    }
  }
  spec.seed = 124;
  const auto c = generate_synthetic_ctr(spec, 128);
  bool differs = false;
  for (std::size_t j = 0; j < a[0].instances.size() && !differs; ++j)
    differs = a[0].instances[j].feature_ids != c[0].instances[j].feature_ids;
  CHECK(differs);
}

TEST_CASE("instances are well-formed") {
  SyntheticSpec spec;
  spec.seed = 5;
  spec.n_instances = 2000;
  spec.vocab = 50;
  spec.nnz_mean = 4.0;
  const auto batches = generate_synthetic_ctr(spec, 512);
  for (const auto& b : batches) {
    for (const auto& inst : b.instances) {
      CHECK(!inst.feature_ids.empty());
      CHECK((inst.label == 0 || inst.label == 1));
      for (std::size_t i = 1; i < inst.feature_ids.size(); ++i)
        CHECK(inst.feature_ids[i - 1] < inst.feature_ids[i]);  // deduped
      CHECK(inst.feature_ids.back() < spec.vocab);
    }
  }
}

TEST_CASE("vocab of one pins every instance to feature zero") {
  SyntheticSpec spec;
  spec.seed = 9;
  spec.n_instances = 50;
  spec.vocab = 1;
  spec.nnz_mean = 1.0;
  const auto batches = generate_synthetic_ctr(spec, 32);
  for (const auto& b : batches)
    for (const auto& inst : b.instances)
      CHECK(inst.feature_ids == std::vector<ParameterKey>{0});
}

TEST_CASE("planted model is learnable: its own scores rank well") {
  // achievability oracle: scoring by the planted logit bounds what any
  // trained model can reach; the bound must clear the acceptance target
  SyntheticSpec spec;
  spec.seed = 42;
  spec.n_instances = 20000;
  spec.vocab = 10000;
  spec.nnz_mean = 10.0;
  SyntheticCtr gen(spec);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::uint64_t i = 0; i < spec.n_instances; ++i) {
    const auto inst = gen.next();
    scores.push_back(gen.planted_logit(inst));
    labels.push_back(inst.label);
  }
  const auto auc = compute_auc(scores, labels);
  REQUIRE(auc.has_value());
  CHECK(*auc >= 0.75);
  // labels are roughly balanced
  double positives = 0;
  for (int y : labels) positives += y;
  CHECK(positives / static_cast<double>(labels.size()) > 0.35);
  CHECK(positives / static_cast<double>(labels.size()) < 0.65);
}

TEST_CASE("instance file round trip and validation") {
  const auto path =
      (fs::temp_directory_path() / "kpsim_instances_test.tsv").string();

  SUBCASE("round trip") {
    std::vector<Instance> data = {{{3, 5, 9}, 1}, {{1}, 0}, {{2, 4}, 1}};
    write_instances(path, data);
    const auto back = read_instances(path);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(back[i].label == data[i].label);
      CHECK(back[i].feature_ids == data[i].feature_ids);
    }
  }
  SUBCASE("bad label") {
    std::ofstream(path) << "2\t1,2\n";
    CHECK_THROWS_AS(read_instances(path), Error);
  }
  SUBCASE("missing ids") {
    std::ofstream(path) << "1\t\n";
    CHECK_THROWS_AS(read_instances(path), Error);
  }
  SUBCASE("missing tab") {
    std::ofstream(path) << "1 2,3\n";
    CHECK_THROWS_AS(read_instances(path), Error);
  }
  fs::remove(path);
}

TEST_CASE("make_batches partitions in order") {
  std::vector<Instance> data;
  for (int i = 0; i < 10; ++i)
    data.push_back({{static_cast<ParameterKey>(i)}, i % 2});
  const auto batches = make_batches(data, 4);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].instances.size() == 4);
  CHECK(batches[1].instances.size() == 4);
  CHECK(batches[2].instances.size() == 2);
  CHECK(batches[2].id == 2);
  CHECK(batches[1].instances[0].feature_ids[0] == 4);
}
