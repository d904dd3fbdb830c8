#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cdtrans/cdtrans.h"

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "cdt_capi_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

constexpr const char* kSmallShift = R"({
  "class_count": 2, "tokens": 2, "patch_dim": 4, "samples_per_class": 12,
  "noise_sigma": 0.3, "mean_scale": 2.0, "rotation_angle": 0.6,
  "translation": 1.0
})";

constexpr const char* kSmallModel = R"({
  "patch_count": 2, "patch_dim": 4, "width": 8, "layers": 1, "heads": 2,
  "classes": 2, "mlp_hidden": 16
})";

constexpr const char* kSmallTrain = R"({
  "learning_rate": 0.1, "epochs": 4, "batch_size": 8, "seed": 5,
  "eval_every": 0
})";

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("status names and version") {
  CHECK(std::string(cdt_version()) == "1.0.0");
  CHECK(std::string(cdt_status_name(CDT_OK)) == "ok");
  CHECK(std::string(cdt_status_name(CDT_ERR_CONDITIONS_UNMET)) ==
        "conditions_unmet");
}

TEST_CASE("null arguments are rejected with a message") {
  CHECK(cdt_dataset_load(nullptr, nullptr) == CDT_ERR_INVALID_ARGUMENT);
  CHECK(std::string(cdt_last_error()).size() > 0);
}

TEST_CASE("bad json config maps to CDT_ERR_CONFIG") {
  cdt_dataset* a = nullptr;
  cdt_dataset* b = nullptr;
  CHECK(cdt_dataset_generate("{nonsense", 1, &a, &b) == CDT_ERR_CONFIG);
  CHECK(cdt_dataset_generate(R"({"bogus_key": 1})", 1, &a, &b) ==
        CDT_ERR_CONFIG);
  const std::string msg = cdt_last_error();
  CHECK(msg.find("bogus_key") != std::string::npos);
}

TEST_CASE("missing files map to CDT_ERR_IO and bad magic to FORMAT") {
  cdt_dataset* ds = nullptr;
  CHECK(cdt_dataset_load("/nonexistent/nowhere.ds", &ds) == CDT_ERR_IO);

  TempDir tmp;
  {
    std::ofstream os(tmp.file("junk.ds"), std::ios::binary);
    os << "garbagegarbagegarbage";
  }
  CHECK(cdt_dataset_load(tmp.file("junk.ds").c_str(), &ds) ==
        CDT_ERR_FORMAT);
}

TEST_CASE("dataset generate, save, load, sample access") {
  TempDir tmp;
  cdt_dataset* src = nullptr;
  cdt_dataset* tgt = nullptr;
  REQUIRE(cdt_dataset_generate(kSmallShift, 11, &src, &tgt) == CDT_OK);
  CHECK(cdt_dataset_size(src) == 24);
  CHECK(cdt_dataset_classes(src) == 2);
  CHECK(cdt_dataset_sample_dim(src) == 8);

  REQUIRE(cdt_dataset_save(src, tmp.file("s.ds").c_str()) == CDT_OK);
  cdt_dataset* loaded = nullptr;
  REQUIRE(cdt_dataset_load(tmp.file("s.ds").c_str(), &loaded) == CDT_OK);
  CHECK(cdt_dataset_size(loaded) == 24);

  std::vector<double> buf(8);
  int label = -1;
  REQUIRE(cdt_dataset_sample(loaded, 3, buf.data(), buf.size(), &label) ==
          CDT_OK);
  CHECK(label >= 0);
  CHECK(cdt_dataset_sample(loaded, 999, buf.data(), buf.size(), &label) ==
        CDT_ERR_INVALID_ARGUMENT);

  cdt_dataset_free(src);
  cdt_dataset_free(tgt);
  cdt_dataset_free(loaded);
}

TEST_CASE("full pipeline through the shared library is deterministic") {
  TempDir tmp;

  auto run_once = [&](const char* tag) {
    cdt_dataset* src = nullptr;
    cdt_dataset* tgt = nullptr;
    REQUIRE(cdt_dataset_generate(kSmallShift, 42, &src, &tgt) == CDT_OK);

    cdt_model* model = nullptr;
    REQUIRE(cdt_model_create(kSmallModel, 7, &model) == CDT_OK);
    cdt_report* pre = nullptr;
    REQUIRE(cdt_model_pretrain(model, src, tgt, kSmallTrain, nullptr,
                               nullptr, &pre) == CDT_OK);
    cdt_report_free(pre);

    cdt_pairset* pairs = nullptr;
    REQUIRE(cdt_pairs_build(model, src, tgt, "two_way_center_aware",
                            "cosine", &pairs) == CDT_OK);
    CHECK(cdt_pairs_kept(pairs) > 0);

    cdt_report* train = nullptr;
    REQUIRE(cdt_train(model, pairs, src, tgt, kSmallTrain, nullptr, nullptr,
                      &train) == CDT_OK);
    cdt_report_free(train);

    const std::string ckpt = tmp.file(tag);
    REQUIRE(cdt_model_save(model, ckpt.c_str()) == CDT_OK);

    cdt_pairs_free(pairs);
    cdt_model_free(model);
    cdt_dataset_free(src);
    cdt_dataset_free(tgt);
    return read_file(ckpt);
  };

  CHECK(run_once("a.ckpt") == run_once("b.ckpt"));
}

TEST_CASE("pair metrics and ground-truth pair corruption") {
  cdt_dataset* src = nullptr;
  cdt_dataset* tgt = nullptr;
  REQUIRE(cdt_dataset_generate(kSmallShift, 3, &src, &tgt) == CDT_OK);

  cdt_pairset* pairs = nullptr;
  REQUIRE(cdt_pairs_ground_truth(src, tgt, 5, &pairs) == CDT_OK);
  CHECK(cdt_pairs_size(pairs) == cdt_dataset_size(tgt));

  cdt_report* quality = nullptr;
  REQUIRE(cdt_pairs_metrics(pairs, src, tgt, &quality) == CDT_OK);
  std::string json = cdt_report_json(quality);
  CHECK(json.find("\"precision\": 100.0") != std::string::npos);
  cdt_report_free(quality);

  REQUIRE(cdt_pairs_corrupt(pairs, tgt, 0.5, 9) == CDT_OK);
  REQUIRE(cdt_pairs_metrics(pairs, src, tgt, &quality) == CDT_OK);
  json = cdt_report_json(quality);
  CHECK(json.find("\"precision\": 50.0") != std::string::npos);
  cdt_report_free(quality);

  cdt_pairs_free(pairs);
  cdt_dataset_free(src);
  cdt_dataset_free(tgt);
}

TEST_CASE("theorem verifier statuses distinguish unmet conditions") {
  // Deliberately unmet: K far below the printed bound.
  const char* unmet = R"({
    "dim": 64, "samples": 32, "clusters": 2, "sigma": 0.2,
    "r_lower": 1.2, "r_upper": 1.6, "delta": 0.05, "k_neighbors": 2,
    "lambda": 2.0
  })";
  cdt_report* report = nullptr;
  CHECK(cdt_verify_theorem1(unmet, 5, 1, 1, nullptr, &report) ==
        CDT_ERR_CONDITIONS_UNMET);
  REQUIRE(report != nullptr);
  const std::string json = cdt_report_json(report);
  CHECK(json.find("\"conditions_met\": false") != std::string::npos);
  cdt_report_free(report);

  // Feasible: matches the verified unit spec.
  const char* feasible = R"({
    "dim": 512, "samples": 512, "clusters": 4, "sigma": 0.05,
    "r_lower": 1.2, "r_upper": 1.6, "delta": 0.15, "k_neighbors": 74,
    "lambda": 2.0
  })";
  TempDir tmp;
  CHECK(cdt_verify_theorem1(feasible, 30, 1, 2,
                            tmp.file("t1.json").c_str(),
                            &report) == CDT_OK);
  CHECK(fs::exists(tmp.file("t1.json")));
  cdt_report_free(report);
}

TEST_CASE("attention csv export writes a row per query token") {
  TempDir tmp;
  cdt_dataset* src = nullptr;
  cdt_dataset* tgt = nullptr;
  REQUIRE(cdt_dataset_generate(kSmallShift, 8, &src, &tgt) == CDT_OK);
  cdt_model* model = nullptr;
  REQUIRE(cdt_model_create(kSmallModel, 2, &model) == CDT_OK);
  REQUIRE(cdt_model_attention_csv(model, src, 0, tgt, 0, 0,
                                  tmp.file("attn.csv").c_str()) == CDT_OK);
  std::ifstream is(tmp.file("attn.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 4);  // header + cls + two patch tokens
  cdt_model_free(model);
  cdt_dataset_free(src);
  cdt_dataset_free(tgt);
}

TEST_CASE("default configs are valid json for every kind") {
  for (const char* kind : {"shift", "model", "train", "gmm"}) {
    cdt_report* r = nullptr;
    REQUIRE(cdt_default_config(kind, &r) == CDT_OK);
    const std::string json = cdt_report_json(r);
    CHECK(json.find('{') == 0);
    cdt_report_free(r);
  }
  cdt_report* r = nullptr;
  CHECK(cdt_default_config("nope", &r) == CDT_ERR_CONFIG);
}

}  // TEST_SUITE
