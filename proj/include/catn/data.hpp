#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "catn/tensor.hpp"

namespace catn {

// Row-major sample matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  Tensor to_tensor() const;
  Matrix gather(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;
};

using Labels = std::vector<std::size_t>;

struct LabeledSamples {
  Matrix x;
  Labels y;
};

// The only part of a DomainPair a training step may see.
struct TrainingView {
  const Matrix& x_s;
  std::span<const std::size_t> y_s;
  const Matrix& x_t;
  std::size_t num_classes;
};

struct DomainPair {
  Matrix x_s;
  Labels y_s;
  Matrix x_t;
  std::optional<Labels> y_t_eval;  // held out; used only for evaluation
  std::size_t num_classes = 2;

  std::size_t input_dim() const { return x_s.cols; }
  TrainingView training_view() const { return {x_s, y_s, x_t, num_classes}; }
  bool has_target_labels() const { return y_t_eval.has_value(); }
  // Throws ContractError when the target file carried no labels.
  const Labels& target_labels() const;
};

// Throws when sizes, label ranges, or widths are inconsistent.
void validate(const DomainPair& pair);

struct ShiftSpec {
  enum class Kind { rotation, affine, both };

  Kind kind = Kind::rotation;
  // Counter-clockwise, about the sample centroid, in the plane of the first two features.
  double rotation_deg = 45.0;
  std::vector<double> scale;      // per feature; empty means ones
  std::vector<double> translate;  // per feature; empty means zeros
  double noise_std = 0.1;
};

std::string_view to_string(ShiftSpec::Kind kind);
ShiftSpec::Kind shift_kind_from_string(std::string_view name);
void validate(const ShiftSpec& shift);

// Rotation about the centroid first, then x <- scale * x + translate,
// depending on shift.kind. noise_std is not used here.
void apply_shift(Matrix& x, const ShiftSpec& shift);

// Balanced labels 0..C-1 (counts differ by at most one) in shuffled order.
Labels balanced_labels(std::size_t n, std::size_t num_classes, std::uint64_t seed);

// Interleaving half circles with Gaussian noise: class 0 is the upper moon
// (cos t, sin t), class 1 the lower moon (1 - cos t, 0.5 - sin t).
LabeledSamples sample_two_moons(std::size_t n, double noise_std, std::uint64_t seed);

// Source is plain two-moons; target is an independent draw with the shift
// applied. The source and target streams are derived from `seed`.
DomainPair gen_two_moons_pair(std::size_t n_per_domain, const ShiftSpec& shift, std::uint64_t seed);

struct GaussianMixtureSpec {
  std::vector<std::vector<double>> means;        // C x dim
  std::vector<std::vector<double>> covariances;  // C x (dim*dim), row-major
};

LabeledSamples sample_gaussian_mixture(std::size_t n, const GaussianMixtureSpec& mixture, std::uint64_t seed);

DomainPair gen_gaussian_shift_pair(std::size_t n_per_domain, const GaussianMixtureSpec& mixture,
                                   const ShiftSpec& shift, std::uint64_t seed);

// CSV: header f0,...,f{k-1}[,label]; one sample per row.
void save_domain_csv(const std::filesystem::path& path, const Matrix& x, const Labels* labels);
LabeledSamples load_domain_csv(const std::filesystem::path& path, bool* has_labels);

void save_pair_csv(const DomainPair& pair, const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path);
// Source labels are required, target labels optional.
DomainPair load_pair_csv(const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                         std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace catn
