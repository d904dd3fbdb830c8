#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/matrix.hpp"
#include "core/pseudolabel.hpp"
#include "core/rng.hpp"

namespace cdt {

struct DomainDataset {
  std::size_t classes = 0;
  std::size_t patch_count = 0;
  std::size_t patch_dim = 0;
  std::uint32_t domain_tag = 0;  // 0 source, 1 target
  Matrix samples;                // n x (patch_count * patch_dim)
  std::vector<int> labels;       // target labels are for evaluation only

  std::size_t size() const { return samples.rows(); }
  std::size_t sample_dim() const { return patch_count * patch_dim; }
  void validate() const;
};

// Controls a synthetic source/target pair: per-class token Gaussians for the
// source and the affine image of those Gaussians for the target. The
// rotation applies plane-wise Givens rotations over consecutive coordinate
// pairs; the translation moves along the normalized all-ones direction.
struct ShiftSpec {
  std::size_t class_count = 4;
  std::size_t tokens = 16;
  std::size_t patch_dim = 12;
  std::size_t samples_per_class = 200;
  double rotation_angle = 0.5235987755982988;  // pi/6
  double translation = 1.0;
  double scale = 1.0;
  double noise_sigma = 0.5;
  double label_noise_ratio = 0.0;  // corruption grid default for sweeps
  double mean_scale = 1.0;         // radius of the drawn class means
  Matrix class_means;              // class_count x patch_dim; empty -> drawn

  void validate() const;
};

// Both domains are balanced and share the label set; everything is a pure
// function of (spec, rng seed).
std::pair<DomainDataset, DomainDataset> generate_domain_pair(
    const ShiftSpec& spec, Rng& rng);

// Replaces the target of ceil(ratio * size) uniformly chosen pairs with a
// random target of a different class, turning them into false positives.
void corrupt_pairs(PairSet& pairs, const std::vector<int>& target_labels,
                   double ratio, Rng& rng);

void save_dataset(const DomainDataset& ds, const std::string& path);
DomainDataset load_dataset(const std::string& path);
void export_dataset_csv(const DomainDataset& ds, const std::string& path);

}  // namespace cdt
