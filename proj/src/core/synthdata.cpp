#include "core/synthdata.hpp"

#include <cmath>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/io_util.hpp"

namespace cdt {

void DomainDataset::validate() const {
  if (classes == 0 || patch_count == 0 || patch_dim == 0) {
    fail(ErrorCode::bad_config, "DomainDataset: zero-sized dimensions");
  }
  if (samples.cols() != sample_dim()) {
    fail(ErrorCode::dimension_mismatch,
         "DomainDataset: sample width " + std::to_string(samples.cols()) +
             " != patch_count*patch_dim = " + std::to_string(sample_dim()));
  }
  if (labels.size() != samples.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "DomainDataset: label count does not match sample count");
  }
  for (const int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      fail(ErrorCode::invalid_argument,
           "DomainDataset: label " + std::to_string(l) + " out of range");
    }
  }
}

void ShiftSpec::validate() const {
  if (class_count == 0 || tokens == 0 || patch_dim == 0 ||
      samples_per_class == 0) {
    fail(ErrorCode::bad_config, "ShiftSpec: all counts must be >= 1");
  }
  if (noise_sigma <= 0.0) {
    fail(ErrorCode::bad_config, "ShiftSpec: noise_sigma must be > 0");
  }
  constexpr double kPi = 3.14159265358979323846;
  if (rotation_angle < 0.0 || rotation_angle >= kPi) {
    fail(ErrorCode::bad_config, "ShiftSpec: rotation_angle must be in [0, pi)");
  }
  if (label_noise_ratio < 0.0 || label_noise_ratio > 1.0) {
    fail(ErrorCode::bad_config, "ShiftSpec: label_noise_ratio must be in [0,1]");
  }
  if (scale <= 0.0) {
    fail(ErrorCode::bad_config, "ShiftSpec: scale must be > 0");
  }
  if (!class_means.empty() &&
      (class_means.rows() != class_count || class_means.cols() != patch_dim)) {
    fail(ErrorCode::dimension_mismatch,
         "ShiftSpec: class_means must be class_count x patch_dim");
  }
}

namespace {

// Token-space rotation realized as plane rotations. When room allows, each
// plane pairs one class-mean direction with a fresh orthogonal direction, so
// every class moves away from its source position by the same angle without
// drifting toward another class; the fallback rotates consecutive
// coordinate pairs.
struct ShiftTransform {
  Matrix plane_u;  // planes x dim
  Matrix plane_v;  // planes x dim
  std::vector<double> translation_dir;  // unit vector
  double angle = 0.0;
  double scale = 1.0;
  double translation = 0.0;
  bool coordinate_planes = false;

  std::vector<double> apply(const std::vector<double>& x) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    std::vector<double> out = x;
    if (coordinate_planes) {
      for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
        out[i] = c * x[i] - s * x[i + 1];
        out[i + 1] = s * x[i] + c * x[i + 1];
      }
    } else {
      for (std::size_t p = 0; p < plane_u.rows(); ++p) {
        double a = 0.0, b = 0.0;
        for (std::size_t t = 0; t < x.size(); ++t) {
          a += x[t] * plane_u(p, t);
          b += x[t] * plane_v(p, t);
        }
        const double da = (c * a - s * b) - a;
        const double db = (s * a + c * b) - b;
        for (std::size_t t = 0; t < x.size(); ++t) {
          out[t] += da * plane_u(p, t) + db * plane_v(p, t);
        }
      }
    }
    for (std::size_t t = 0; t < out.size(); ++t) {
      out[t] = scale * out[t] + translation * translation_dir[t];
    }
    return out;
  }
};

// Gram-Schmidt a fresh unit vector against the given unit rows.
bool draw_orthonormal_to(const Matrix& basis, std::size_t used, Rng& rng,
                         std::vector<double>& out) {
  const std::size_t dim = basis.cols();
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (double& x : out) x = rng.gaussian();
    for (std::size_t j = 0; j < used; ++j) {
      double proj = 0.0;
      for (std::size_t t = 0; t < dim; ++t) proj += out[t] * basis(j, t);
      for (std::size_t t = 0; t < dim; ++t) out[t] -= proj * basis(j, t);
    }
    double norm2 = 0.0;
    for (const double x : out) norm2 += x * x;
    if (norm2 > 1e-10) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : out) x *= inv;
      return true;
    }
  }
  return false;
}

ShiftTransform build_shift(const ShiftSpec& spec, const Matrix& means,
                           Rng& rng) {
  ShiftTransform shift;
  shift.angle = spec.rotation_angle;
  shift.scale = spec.scale;
  shift.translation = spec.translation;
  // Class-independent offset along a drawn direction; a uniform displacement
  // can never swap two classes, so the translation magnitude is a clean
  // difficulty knob.
  shift.translation_dir.resize(spec.patch_dim);
  {
    double norm2 = 0.0;
    for (double& x : shift.translation_dir) {
      x = rng.gaussian();
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
    for (double& x : shift.translation_dir) x *= inv;
  }

  const std::size_t k = spec.class_count, d = spec.patch_dim;
  if (2 * k > d) {
    shift.coordinate_planes = true;
    return shift;
  }
  // Orthonormal stack: Gram-Schmidted class-mean directions first, then one
  // fresh direction per class.
  Matrix stack(2 * k, d);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> v(d);
    for (std::size_t t = 0; t < d; ++t) v[t] = means(i, t);
    for (std::size_t j = 0; j < i; ++j) {
      double proj = 0.0;
      for (std::size_t t = 0; t < d; ++t) proj += v[t] * stack(j, t);
      for (std::size_t t = 0; t < d; ++t) v[t] -= proj * stack(j, t);
    }
    double norm2 = 0.0;
    for (const double x : v) norm2 += x * x;
    if (norm2 < 1e-10) {
      shift.coordinate_planes = true;  // means were not independent
      return shift;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t t = 0; t < d; ++t) stack(i, t) = v[t] * inv;
  }
  std::vector<double> fresh(d);
  for (std::size_t i = 0; i < k; ++i) {
    if (!draw_orthonormal_to(stack, k + i, rng, fresh)) {
      shift.coordinate_planes = true;  // means were not independent
      return shift;
    }
    for (std::size_t t = 0; t < d; ++t) stack(k + i, t) = fresh[t];
  }
  shift.plane_u = Matrix(k, d);
  shift.plane_v = Matrix(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t t = 0; t < d; ++t) {
      shift.plane_u(i, t) = stack(i, t);
      shift.plane_v(i, t) = stack(k + i, t);
    }
  }
  return shift;
}

// Random class means at radius mean_scale. While they fit (class_count <=
// patch_dim) the directions are orthonormalized so every class pair sits at
// the same distance; random unit vectors otherwise.
Matrix draw_class_means(const ShiftSpec& spec, Rng& rng) {
  Matrix means(spec.class_count, spec.patch_dim);
  const bool orthogonalize = spec.class_count <= spec.patch_dim;
  for (std::size_t k = 0; k < spec.class_count; ++k) {
    std::vector<double> v(spec.patch_dim);
    for (;;) {
      for (double& x : v) x = rng.gaussian();
      if (orthogonalize) {
        for (std::size_t j = 0; j < k; ++j) {
          double proj = 0.0;
          for (std::size_t c = 0; c < spec.patch_dim; ++c)
            proj += v[c] * means(j, c);
          proj /= spec.mean_scale * spec.mean_scale;
          for (std::size_t c = 0; c < spec.patch_dim; ++c)
            v[c] -= proj * means(j, c);
        }
      }
      double norm2 = 0.0;
      for (const double x : v) norm2 += x * x;
      if (norm2 > 1e-12) {
        const double inv = spec.mean_scale / std::sqrt(norm2);
        for (std::size_t c = 0; c < spec.patch_dim; ++c)
          means(k, c) = v[c] * inv;
        break;
      }
    }
  }
  return means;
}

DomainDataset make_domain(const ShiftSpec& spec, const Matrix& means,
                          const ShiftTransform* shift, std::uint32_t tag,
                          Rng& rng) {
  DomainDataset ds;
  ds.classes = spec.class_count;
  ds.patch_count = spec.tokens;
  ds.patch_dim = spec.patch_dim;
  ds.domain_tag = tag;
  const std::size_t n = spec.class_count * spec.samples_per_class;
  ds.samples = Matrix(n, spec.tokens * spec.patch_dim);
  ds.labels.resize(n);

  std::size_t row = 0;
  std::vector<double> token(spec.patch_dim);
  for (std::size_t k = 0; k < spec.class_count; ++k) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i, ++row) {
      ds.labels[row] = static_cast<int>(k);
      for (std::size_t t = 0; t < spec.tokens; ++t) {
        for (std::size_t c = 0; c < spec.patch_dim; ++c) {
          token[c] = means(k, c) + spec.noise_sigma * rng.gaussian();
        }
        const std::vector<double> placed =
            shift ? shift->apply(token) : token;
        for (std::size_t c = 0; c < spec.patch_dim; ++c) {
          ds.samples(row, t * spec.patch_dim + c) = placed[c];
        }
      }
    }
  }
  return ds;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> generate_domain_pair(
    const ShiftSpec& spec, Rng& rng) {
  spec.validate();
  Rng mean_rng = rng.derive(0x6d65616e);
  Rng src_rng = rng.derive(0x737263);
  Rng tgt_rng = rng.derive(0x746774);
  const Matrix means =
      spec.class_means.empty() ? draw_class_means(spec, mean_rng)
                               : spec.class_means;
  const ShiftTransform shift = build_shift(spec, means, mean_rng);
  DomainDataset source = make_domain(spec, means, nullptr, 0, src_rng);
  DomainDataset target = make_domain(spec, means, &shift, 1, tgt_rng);
  return {std::move(source), std::move(target)};
}

void corrupt_pairs(PairSet& pairs, const std::vector<int>& target_labels,
                   double ratio, Rng& rng) {
  if (ratio < 0.0 || ratio > 1.0) {
    fail(ErrorCode::invalid_argument, "corrupt_pairs: ratio must be in [0,1]");
  }
  if (pairs.size() == 0 || ratio == 0.0) return;
  const std::size_t want = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(pairs.size())));

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  for (std::size_t i = 0; i < want; ++i) {
    LabeledPair& p = pairs.pairs[order[i]];
    std::vector<std::uint32_t> candidates;
    for (std::size_t t = 0; t < target_labels.size(); ++t) {
      if (target_labels[t] != p.label) {
        candidates.push_back(static_cast<std::uint32_t>(t));
      }
    }
    if (candidates.empty()) {
      fail(ErrorCode::bad_state,
           "corrupt_pairs: no target of a different class exists");
    }
    p.target = candidates[rng.below(candidates.size())];
  }
}

namespace {
constexpr char kMagic[9] = "CDTDATA\0";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_dataset(const DomainDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream os = open_out(path);
  os.write(kMagic, 8);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.classes));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.patch_count));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.patch_dim));
  write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(ds.size()));
  write_pod<std::uint32_t>(os, ds.domain_tag);
  for (const int l : ds.labels) write_pod<std::int32_t>(os, l);
  write_bytes(os, ds.samples.data(), ds.samples.size() * sizeof(double));
  if (!os) fail(ErrorCode::io, "failed writing dataset " + path);
}

DomainDataset load_dataset(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, kMagic, "dataset");
  const auto version = read_pod<std::uint32_t>(is, "dataset version");
  if (version != kVersion) {
    fail(ErrorCode::bad_version,
         "unsupported dataset version " + std::to_string(version));
  }
  DomainDataset ds;
  ds.classes = read_pod<std::uint32_t>(is, "dataset classes");
  ds.patch_count = read_pod<std::uint32_t>(is, "dataset patch_count");
  ds.patch_dim = read_pod<std::uint32_t>(is, "dataset patch_dim");
  const auto count = read_pod<std::uint64_t>(is, "dataset count");
  ds.domain_tag = read_pod<std::uint32_t>(is, "dataset domain_tag");
  ds.labels.resize(static_cast<std::size_t>(count));
  for (int& l : ds.labels) l = read_pod<std::int32_t>(is, "dataset labels");
  ds.samples =
      Matrix(static_cast<std::size_t>(count), ds.patch_count * ds.patch_dim);
  read_bytes(is, ds.samples.data(), ds.samples.size() * sizeof(double),
             "dataset samples");
  ds.validate();
  return ds;
}

void export_dataset_csv(const DomainDataset& ds, const std::string& path) {
  CsvWriter csv(path);
  std::vector<std::string> header = {"index", "label"};
  for (std::size_t c = 0; c < ds.sample_dim(); ++c) {
    header.push_back("x" + std::to_string(c));
  }
  csv.header(header);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::vector<std::string> row = {std::to_string(r),
                                    std::to_string(ds.labels[r])};
    for (std::size_t c = 0; c < ds.sample_dim(); ++c) {
      row.push_back(format_double(ds.samples(r, c)));
    }
    csv.row(row);
  }
}

}  // namespace cdt
