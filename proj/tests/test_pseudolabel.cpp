#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "core/error.hpp"
#include "core/pseudolabel.hpp"
#include "core/rng.hpp"

using namespace cdt;

namespace {

FeatureBank bank_from(std::vector<std::vector<double>> rows,
                      std::vector<int> labels = {}) {
  FeatureBank b;
  const std::size_t n = rows.size(), d = rows.empty() ? 0 : rows[0].size();
  b.features = Matrix(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) b.features(r, c) = rows[r][c];
  b.labels = std::move(labels);
  return b;
}

FeatureBank random_bank(std::size_t n, std::size_t d, Rng& rng,
                        std::size_t classes = 0) {
  FeatureBank b;
  b.features = Matrix(n, d);
  for (std::size_t i = 0; i < b.features.size(); ++i)
    b.features[i] = rng.uniform(-1.0, 1.0);
  if (classes) {
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      b.labels[i] = static_cast<int>(rng.below(classes));
  }
  return b;
}

// Exhaustive nearest-partner oracle over the full distance table.
std::size_t nearest_oracle(const Matrix& d, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < d.cols(); ++j)
    if (d(row, j) < d(row, best)) best = j;
  return best;
}

}  // namespace

TEST_SUITE("pseudolabel") {

TEST_CASE("single source and target give the single pair") {
  const FeatureBank src = bank_from({{1.0, 0.0}}, {2});
  const FeatureBank tgt = bank_from({{0.0, 1.0}});
  const PairSet p = build_pairs_source(src, tgt, Metric::cosine);
  REQUIRE(p.size() == 1);
  CHECK(p.pairs[0].source == 0);
  CHECK(p.pairs[0].target == 0);
  CHECK(p.pairs[0].label == 2);
  CHECK(p.pairs[0].kept);
}

TEST_CASE("source pairs match the exhaustive oracle") {
  const FeatureBank src =
      bank_from({{1, 0}, {0, 1}, {-1, -1}}, {0, 1, 2});
  const FeatureBank tgt =
      bank_from({{0.9, 0.1}, {0.2, 0.8}, {-0.5, -0.6}, {1, 1}});
  for (const Metric metric : {Metric::cosine, Metric::euclidean}) {
    const Matrix d = pairwise_distances(src.features, tgt.features, metric);
    const PairSet p = build_pairs_source(src, tgt, metric);
    REQUIRE(p.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(p.pairs[s].source == s);
      CHECK(p.pairs[s].target == nearest_oracle(d, s));
    }
  }
}

TEST_CASE("target pairs mirror the construction") {
  const FeatureBank src =
      bank_from({{1, 0}, {0, 1}, {-1, -1}}, {0, 1, 2});
  const FeatureBank tgt =
      bank_from({{0.9, 0.1}, {0.2, 0.8}, {-0.5, -0.6}, {1, 1}});
  const Matrix d =
      pairwise_distances(tgt.features, src.features, Metric::euclidean);
  const PairSet p = build_pairs_target(src, tgt, Metric::euclidean);
  REQUIRE(p.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(p.pairs[t].target == t);
    CHECK(p.pairs[t].source == nearest_oracle(d, t));
    CHECK(p.pairs[t].label == src.labels[p.pairs[t].source]);
  }
}

TEST_CASE("coverage: every source exactly once, every target exactly once") {
  Rng rng(17);
  const FeatureBank src = random_bank(23, 5, rng, 4);
  const FeatureBank tgt = random_bank(31, 5, rng);
  const PairSet ps = build_pairs_source(src, tgt, Metric::cosine);
  std::set<std::uint32_t> sources;
  for (const LabeledPair& p : ps.pairs) sources.insert(p.source);
  CHECK(sources.size() == 23);
  CHECK(ps.size() == 23);

  const PairSet pt = build_pairs_target(src, tgt, Metric::cosine);
  std::set<std::uint32_t> targets;
  for (const LabeledPair& p : pt.pairs) targets.insert(p.target);
  CHECK(targets.size() == 31);
  CHECK(pt.size() == 31);

  const PairQuality qs = pair_metrics(ps, 23, 31, std::vector<int>(31, 0));
  CHECK(qs.recall_source == 100.0);
  const PairQuality qt = pair_metrics(pt, 23, 31, std::vector<int>(31, 0));
  CHECK(qt.recall_target == 100.0);

  const PairQuality qu =
      pair_metrics(union_pairs(ps, pt), 23, 31, std::vector<int>(31, 0));
  CHECK(qu.recall_source == 100.0);
  CHECK(qu.recall_target == 100.0);
}

TEST_CASE("empty banks are rejected") {
  const FeatureBank empty;
  const FeatureBank one = bank_from({{1.0}});
  CHECK_THROWS_AS(build_pairs_source(empty, one, Metric::cosine), Error);
  CHECK_THROWS_AS(build_pairs_target(one, empty, Metric::cosine), Error);
}

TEST_CASE("union: disjoint sets concatenate, identical sets collapse") {
  PairSet a, b;
  LabeledPair p1;
  p1.source = 0;
  p1.target = 1;
  p1.label = 0;
  p1.provenance = kProvenanceSource;
  LabeledPair p2;
  p2.source = 1;
  p2.target = 0;
  p2.label = 1;
  p2.provenance = kProvenanceTarget;
  a.pairs = {p1};
  b.pairs = {p2};
  CHECK(union_pairs(a, b).size() == 2);

  PairSet same_a = a;
  PairSet same_b = a;
  same_b.pairs[0].provenance = kProvenanceTarget;
  const PairSet u = union_pairs(same_a, same_b);
  REQUIRE(u.size() == 1);
  CHECK(u.pairs[0].provenance == (kProvenanceSource | kProvenanceTarget));
}

TEST_CASE("union is idempotent") {
  Rng rng(18);
  const FeatureBank src = random_bank(9, 3, rng, 3);
  const FeatureBank tgt = random_bank(12, 3, rng);
  const PairSet u =
      union_pairs(build_pairs_source(src, tgt, Metric::cosine),
                  build_pairs_target(src, tgt, Metric::cosine));
  const PairSet uu = union_pairs(u, u);
  REQUIRE(uu.size() == u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(uu.pairs[i].source == u.pairs[i].source);
    CHECK(uu.pairs[i].target == u.pairs[i].target);
  }
}

TEST_CASE("initial centers: one-hot weight copies the feature") {
  FeatureBank tgt = bank_from({{0.5, -0.25}});
  tgt.probs = Matrix{{0.0, 1.0, 0.0}};
  const Centers c = initial_centers(tgt);
  REQUIRE(c.classes() == 3);
  CHECK_FALSE(c.defined[0]);
  CHECK(c.defined[1]);
  CHECK_FALSE(c.defined[2]);
  CHECK(c.c(1, 0) == 0.5);
  CHECK(c.c(1, 1) == -0.25);
}

TEST_CASE("initial centers: identical features collapse to that feature") {
  FeatureBank tgt = bank_from({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  tgt.probs = Matrix{{0.6, 0.4}, {0.5, 0.5}, {0.1, 0.9}};
  const Centers c = initial_centers(tgt);
  for (std::size_t k = 0; k < 2; ++k) {
    REQUIRE(c.defined[k]);
    CHECK(std::fabs(c.c(k, 0) - 1.0) < 1e-12);
    CHECK(std::fabs(c.c(k, 1) - 2.0) < 1e-12);
  }
}

TEST_CASE("initial centers: weighted means match hand arithmetic") {
  FeatureBank tgt = bank_from({{1.0, 0.0}, {0.0, 1.0}});
  tgt.probs = Matrix{{0.8, 0.2}, {0.4, 0.6}};
  const Centers c = initial_centers(tgt);
  // c_0 = (0.8*[1,0] + 0.4*[0,1]) / 1.2, c_1 = (0.2*[1,0] + 0.6*[0,1]) / 0.8
  CHECK(std::fabs(c.c(0, 0) - 0.8 / 1.2) < 1e-12);
  CHECK(std::fabs(c.c(0, 1) - 0.4 / 1.2) < 1e-12);
  CHECK(std::fabs(c.c(1, 0) - 0.2 / 0.8) < 1e-12);
  CHECK(std::fabs(c.c(1, 1) - 0.6 / 0.8) < 1e-12);
}

TEST_CASE("assign_labels: exact center match and tie rule") {
  FeatureBank tgt = bank_from({{0.0, 1.0}, {1.0, 1.0}});
  Centers centers;
  centers.c = Matrix{{1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}};
  centers.defined = {true, true, true};
  const std::vector<int> labels =
      assign_labels(tgt, centers, Metric::euclidean);
  CHECK(labels[0] == 1);  // exact match with c_1 (c_2 ties -> lower index)
  CHECK(labels[1] == 0);  // equidistant from all three -> class 0
}

TEST_CASE("assign_labels skips undefined centers and matches the oracle") {
  Rng rng(19);
  FeatureBank tgt = random_bank(15, 4, rng);
  Centers centers;
  centers.c = random_bank(5, 4, rng).features;
  centers.defined = {true, false, true, true, false};
  const std::vector<int> labels = assign_labels(tgt, centers, Metric::cosine);
  const Matrix d = pairwise_distances(tgt.features, centers.c, Metric::cosine);
  for (std::size_t t = 0; t < 15; ++t) {
    int best = -1;
    for (const std::size_t k : {0, 2, 3}) {
      if (best < 0 || d(t, k) < d(t, static_cast<std::size_t>(best))) {
        best = static_cast<int>(k);
      }
    }
    CHECK(labels[t] == best);
  }

  Centers none;
  none.c = Matrix(2, 4);
  none.defined = {false, false};
  CHECK_THROWS_AS(assign_labels(tgt, none, Metric::cosine), Error);
}

TEST_CASE("recompute centers: single class means everything") {
  const FeatureBank tgt = bank_from({{1, 1}, {3, 3}, {5, 5}});
  Centers prev;
  prev.c = Matrix(1, 2);
  prev.defined = {true};
  const Centers c = recompute_centers(tgt, {0, 0, 0}, prev);
  CHECK(c.c(0, 0) == 3.0);
  CHECK(c.c(0, 1) == 3.0);
}

TEST_CASE("recompute centers: per-class midpoints and empty-class carry") {
  const FeatureBank tgt = bank_from({{0, 0}, {2, 0}, {0, 4}, {0, 6}});
  Centers prev;
  prev.c = Matrix{{9, 9}, {8, 8}, {7, 7}};
  prev.defined = {true, true, true};
  const Centers c = recompute_centers(tgt, {0, 0, 1, 1}, prev);
  CHECK(c.c(0, 0) == 1.0);
  CHECK(c.c(0, 1) == 0.0);
  CHECK(c.c(1, 0) == 0.0);
  CHECK(c.c(1, 1) == 5.0);
  CHECK(c.c(2, 0) == 7.0);  // empty class keeps the previous center
  CHECK(c.defined[2]);
}

TEST_CASE("center-aware labels recover well separated clusters") {
  Rng rng(20);
  const std::size_t per = 12, d = 6;
  FeatureBank tgt;
  tgt.features = Matrix(2 * per, d);
  tgt.probs = Matrix(2 * per, 2);
  std::vector<int> truth(2 * per);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const int cls = i < per ? 0 : 1;
    truth[i] = cls;
    for (std::size_t c = 0; c < d; ++c) {
      tgt.features(i, c) =
          (cls == 0 ? 1.0 : -1.0) * (c < 3 ? 1.0 : 0.2) +
          0.05 * rng.gaussian();
    }
    // Mostly-correct classifier beliefs with some noise.
    const double correct = 0.7 + 0.2 * rng.uniform01();
    tgt.probs(i, static_cast<std::size_t>(cls)) = correct;
    tgt.probs(i, static_cast<std::size_t>(1 - cls)) = 1.0 - correct;
  }
  const std::vector<int> labels = center_aware_labels(tgt, Metric::cosine);
  CHECK(labels == truth);
}

TEST_CASE("center-aware pipeline equals composing the sub-operations") {
  Rng rng(21);
  FeatureBank tgt = random_bank(10, 3, rng);
  tgt.probs = Matrix(10, 4);
  for (std::size_t i = 0; i < 10; ++i) {
    double total = 0.0;
    std::vector<double> raw(4);
    for (double& v : raw) {
      v = rng.uniform01() + 0.05;
      total += v;
    }
    for (std::size_t k = 0; k < 4; ++k) tgt.probs(i, k) = raw[k] / total;
  }
  const Centers first = initial_centers(tgt);
  const std::vector<int> initial =
      assign_labels(tgt, first, Metric::cosine);
  const Centers refined = recompute_centers(tgt, initial, first);
  const std::vector<int> expected =
      assign_labels(tgt, refined, Metric::cosine);
  CHECK(center_aware_labels(tgt, Metric::cosine) == expected);
}

TEST_CASE("single target sample") {
  // With one sample every positively weighted center collapses onto that
  // sample's feature, so the assignment ties and resolves to the lowest
  // index; the argmax class agrees with that only when it sits at index 0.
  FeatureBank tgt = bank_from({{0.3, 0.7}});
  tgt.probs = Matrix{{0.5, 0.2, 0.3}};
  const std::vector<int> labels = center_aware_labels(tgt, Metric::cosine);
  REQUIRE(labels.size() == 1);
  CHECK(labels[0] == 0);

  // One-hot beliefs leave the other centers undefined and the argmax class
  // is the only candidate.
  FeatureBank hot = bank_from({{0.3, 0.7}});
  hot.probs = Matrix{{0.0, 1.0, 0.0}};
  const std::vector<int> hot_labels = center_aware_labels(hot, Metric::cosine);
  CHECK(hot_labels[0] == 1);
}

TEST_CASE("filter keeps matches and discards mismatches") {
  PairSet pairs;
  LabeledPair a;
  a.source = 0;
  a.target = 0;
  a.label = 1;
  LabeledPair b;
  b.source = 1;
  b.target = 1;
  b.label = 0;
  pairs.pairs = {a, b};
  const std::vector<int> src_labels = {1, 0};
  const std::vector<int> pseudo = {1, 2};
  const PairSet f = filter_pairs(pairs, src_labels, pseudo);
  CHECK(f.pairs[0].kept);
  CHECK_FALSE(f.pairs[1].kept);
  CHECK(f.size() == pairs.size());  // subset by flag, nothing added
}

TEST_CASE("filtering raises precision on a noisy synthetic instance") {
  Rng rng(22);
  const std::size_t n = 400, classes = 4;
  std::vector<int> truth(n), src_labels(n);
  PairSet pairs;
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = static_cast<int>(rng.below(classes));
    // Pair labels are right 70% of the time.
    const bool correct = rng.uniform01() < 0.7;
    const int label =
        correct ? truth[i]
                : static_cast<int>((truth[i] + 1 + rng.below(classes - 1)) %
                                   classes);
    src_labels[i] = label;
    LabeledPair p;
    p.source = static_cast<std::uint32_t>(i);
    p.target = static_cast<std::uint32_t>(i);
    p.label = label;
    pairs.pairs.push_back(p);
  }
  // Pseudo labels are right 90% of the time, independent of the pair noise.
  std::vector<int> pseudo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool correct = rng.uniform01() < 0.9;
    pseudo[i] = correct ? truth[i]
                        : static_cast<int>(
                              (truth[i] + 1 + rng.below(classes - 1)) %
                              classes);
  }
  const PairQuality before = pair_metrics(pairs, n, n, truth);
  const PairSet filtered = filter_pairs(pairs, src_labels, pseudo);
  const PairQuality after = pair_metrics(filtered, n, n, truth);
  REQUIRE(before.precision.has_value());
  REQUIRE(after.precision.has_value());
  CHECK(*after.precision > *before.precision);
  CHECK(after.kept < before.kept);
}

TEST_CASE("pair metrics: perfect pairs and hand counts") {
  PairSet pairs;
  for (std::uint32_t i = 0; i < 4; ++i) {
    LabeledPair p;
    p.source = i;
    p.target = i;
    p.label = static_cast<int>(i);
    pairs.pairs.push_back(p);
  }
  const PairQuality perfect =
      pair_metrics(pairs, 4, 4, std::vector<int>{0, 1, 2, 3});
  CHECK(perfect.recall_source == 100.0);
  CHECK(perfect.recall_target == 100.0);
  CHECK(*perfect.precision == 100.0);

  const PairQuality one_wrong =
      pair_metrics(pairs, 4, 4, std::vector<int>{0, 1, 2, 0});
  CHECK(*one_wrong.precision == 75.0);
}

TEST_CASE("empty kept set reports precision as absent") {
  PairSet pairs;
  LabeledPair p;
  p.kept = false;
  pairs.pairs = {p};
  const PairQuality q = pair_metrics(pairs, 1, 1, {0});
  CHECK_FALSE(q.precision.has_value());
}

TEST_CASE("pair csv round trip") {
  PairSet pairs;
  LabeledPair a;
  a.source = 3;
  a.target = 9;
  a.label = 2;
  a.kept = true;
  a.provenance = kProvenanceSource | kProvenanceTarget;
  LabeledPair b;
  b.source = 1;
  b.target = 0;
  b.label = 0;
  b.kept = false;
  b.provenance = kProvenanceTarget;
  pairs.pairs = {a, b};
  const std::string path = "/tmp/cdt_test_pairs.csv";
  save_pairs_csv(pairs, path);
  const PairSet loaded = load_pairs_csv(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.pairs[0].source == 3);
  CHECK(loaded.pairs[0].target == 9);
  CHECK(loaded.pairs[0].label == 2);
  CHECK(loaded.pairs[0].kept);
  CHECK(loaded.pairs[0].provenance ==
        (kProvenanceSource | kProvenanceTarget));
  CHECK_FALSE(loaded.pairs[1].kept);
  std::remove(path.c_str());
}

TEST_CASE("assign_labels is invariant under center storage permutation") {
  Rng rng(23);
  FeatureBank tgt = random_bank(20, 4, rng);
  Centers centers;
  centers.c = random_bank(3, 4, rng).features;
  centers.defined = {true, true, true};
  const std::vector<int> base = assign_labels(tgt, centers, Metric::cosine);

  // Swap storage of centers 1 and 2 and remap expectations.
  Centers swapped;
  swapped.c = Matrix(3, 4);
  swapped.defined = {true, true, true};
  for (std::size_t c = 0; c < 4; ++c) {
    swapped.c(0, c) = centers.c(0, c);
    swapped.c(1, c) = centers.c(2, c);
    swapped.c(2, c) = centers.c(1, c);
  }
  const std::vector<int> out = assign_labels(tgt, swapped, Metric::cosine);
  for (std::size_t t = 0; t < 20; ++t) {
    const int remapped = base[t] == 1 ? 2 : base[t] == 2 ? 1 : base[t];
    // Tie-broken cases may differ only when the two distances are equal.
    if (out[t] != remapped) {
      const Matrix d =
          pairwise_distances(tgt.features, swapped.c, Metric::cosine);
      CHECK(std::fabs(d(t, static_cast<std::size_t>(out[t])) -
                      d(t, static_cast<std::size_t>(remapped))) < 1e-15);
    }
  }
}

}  // TEST_SUITE
