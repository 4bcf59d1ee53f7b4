#include "catn/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "catn/errors.hpp"
#include "catn/rng.hpp"

namespace catn {

namespace {

enum Stream : std::uint64_t {
  kSourceStream = 101,
  kTargetStream = 102,
  kLabelStream = 1,
  kSampleStream = 2,
};

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
std::vector<double> cholesky(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 1e-12)) throw ContractError("covariance matrix is not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return l;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw FormatError(path.string() + ":" + std::to_string(line) + ": malformed number '" + t + "'");
  return v;
}

std::size_t parse_label(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
  const std::string t = trim(cell);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw FormatError(path.string() + ":" + std::to_string(line) + ": malformed label '" + t + "'");
  return v;
}

}  // namespace

Tensor Matrix::to_tensor() const { return Tensor::from({rows, cols}, values, false); }

Matrix Matrix::gather(std::span<const std::size_t> indices) const {
  Matrix out{.rows = indices.size(), .cols = cols, .values = {}};
  out.values.reserve(indices.size() * cols);
  for (auto i : indices) {
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
  }
  return out;
}

const Labels& DomainPair::target_labels() const {
  if (!y_t_eval) throw ContractError("target domain has no labels; evaluation is unavailable");
  return *y_t_eval;
}

void validate(const DomainPair& pair) {
  if (pair.num_classes < 2) throw ContractError("domain pair needs at least 2 classes");
  if (pair.x_s.rows == 0 || pair.x_t.rows == 0) throw ContractError("both domains need at least one sample");
  if (pair.x_s.cols != pair.x_t.cols)
    throw FormatError("source has " + std::to_string(pair.x_s.cols) + " features, target has " +
                      std::to_string(pair.x_t.cols));
  if (pair.y_s.size() != pair.x_s.rows) throw ContractError("source label count differs from sample count");
  for (auto y : pair.y_s)
    if (y >= pair.num_classes) throw ContractError("source label " + std::to_string(y) + " out of range");
  if (pair.y_t_eval) {
    if (pair.y_t_eval->size() != pair.x_t.rows) throw ContractError("target label count differs from sample count");
    for (auto y : *pair.y_t_eval)
      if (y >= pair.num_classes) throw ContractError("target label " + std::to_string(y) + " out of range");
  }
}

std::string_view to_string(ShiftSpec::Kind kind) {
  switch (kind) {
    case ShiftSpec::Kind::rotation: return "rotation";
    case ShiftSpec::Kind::affine: return "affine";
    case ShiftSpec::Kind::both: return "both";
  }
  return "rotation";
}

ShiftSpec::Kind shift_kind_from_string(std::string_view name) {
  if (name == "rotation") return ShiftSpec::Kind::rotation;
  if (name == "affine") return ShiftSpec::Kind::affine;
  if (name == "both") return ShiftSpec::Kind::both;
  throw ContractError("unknown shift kind '" + std::string(name) + "'");
}

void validate(const ShiftSpec& shift) {
  if (!(shift.rotation_deg >= 0.0 && shift.rotation_deg < 360.0))
    throw ContractError("rotation_deg must lie in [0, 360)");
  if (!(shift.noise_std >= 0.0)) throw ContractError("noise_std must be nonnegative");
}

void apply_shift(Matrix& x, const ShiftSpec& shift) {
  validate(shift);
  const bool rotate = shift.kind != ShiftSpec::Kind::affine;
  const bool affine = shift.kind != ShiftSpec::Kind::rotation;
  if (rotate && shift.rotation_deg != 0.0) {
    if (x.cols < 2) throw DimensionError("rotation shift needs at least 2 features");
    double cx = 0.0, cy = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      cx += x(r, 0);
      cy += x(r, 1);
    }
    cx /= static_cast<double>(x.rows);
    cy /= static_cast<double>(x.rows);
    const double angle = shift.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double dx = x(r, 0) - cx, dy = x(r, 1) - cy;
      x(r, 0) = cx + c * dx - s * dy;
      x(r, 1) = cy + s * dx + c * dy;
    }
  }
  if (affine) {
    if (!shift.scale.empty() && shift.scale.size() != x.cols)
      throw DimensionError("shift scale has " + std::to_string(shift.scale.size()) + " entries for " +
                           std::to_string(x.cols) + " features");
    if (!shift.translate.empty() && shift.translate.size() != x.cols)
      throw DimensionError("shift translate has " + std::to_string(shift.translate.size()) + " entries for " +
                           std::to_string(x.cols) + " features");
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) {
        double v = x(r, c);
        if (!shift.scale.empty()) v *= shift.scale[c];
        if (!shift.translate.empty()) v += shift.translate[c];
        x(r, c) = v;
      }
    }
  }
}

Labels balanced_labels(std::size_t n, std::size_t num_classes, std::uint64_t seed) {
  Labels labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % num_classes;
  Rng rng(seed);
  rng.shuffle(labels.begin(), labels.end());
  return labels;
}

LabeledSamples sample_two_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 4) throw ContractError("two-moons needs at least 2 samples per class");
  if (!(noise_std >= 0.0)) throw ContractError("noise_std must be nonnegative");
  LabeledSamples out;
  out.y = balanced_labels(n, 2, derive_seed(seed, kLabelStream));
  out.x = Matrix{.rows = n, .cols = 2, .values = std::vector<double>(2 * n)};
  Rng rng(derive_seed(seed, kSampleStream));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, std::numbers::pi);
    double px = std::cos(t), py = std::sin(t);
    if (out.y[i] == 1) {
      px = 1.0 - px;
      py = 0.5 - py;
    }
    out.x(i, 0) = px + noise_std * rng.normal();
    out.x(i, 1) = py + noise_std * rng.normal();
  }
  return out;
}

DomainPair gen_two_moons_pair(std::size_t n_per_domain, const ShiftSpec& shift, std::uint64_t seed) {
  validate(shift);
  auto source = sample_two_moons(n_per_domain, shift.noise_std, derive_seed(seed, kSourceStream));
  auto target = sample_two_moons(n_per_domain, shift.noise_std, derive_seed(seed, kTargetStream));
  apply_shift(target.x, shift);
  DomainPair pair{.x_s = std::move(source.x),
                  .y_s = std::move(source.y),
                  .x_t = std::move(target.x),
                  .y_t_eval = std::move(target.y),
                  .num_classes = 2};
  return pair;
}

LabeledSamples sample_gaussian_mixture(std::size_t n, const GaussianMixtureSpec& mixture, std::uint64_t seed) {
  const std::size_t classes = mixture.means.size();
  if (classes < 2) throw ContractError("gaussian mixture needs at least 2 classes");
  if (mixture.covariances.size() != classes) throw ContractError("one covariance per class is required");
  const std::size_t dim = mixture.means[0].size();
  if (dim == 0) throw ContractError("gaussian mixture means must be non-empty");
  std::vector<std::vector<double>> factors;
  for (std::size_t c = 0; c < classes; ++c) {
    if (mixture.means[c].size() != dim) throw DimensionError("gaussian mixture means differ in dimension");
    if (mixture.covariances[c].size() != dim * dim)
      throw DimensionError("covariance " + std::to_string(c) + " must have dim*dim entries");
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(mixture.covariances[c][i * dim + j] - mixture.covariances[c][j * dim + i]) > 1e-12)
          throw ContractError("covariance " + std::to_string(c) + " is not symmetric");
    for (std::size_t other = 0; other < c; ++other)
      if (mixture.means[other] == mixture.means[c]) throw ContractError("gaussian mixture means must be distinct");
    factors.push_back(cholesky(mixture.covariances[c], dim));
  }
  if (n < 2 * classes) throw ContractError("need at least 2 samples per class");

  LabeledSamples out;
  out.y = balanced_labels(n, classes, derive_seed(seed, kLabelStream));
  out.x = Matrix{.rows = n, .cols = dim, .values = std::vector<double>(n * dim)};
  Rng rng(derive_seed(seed, kSampleStream));
  std::vector<double> z(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = out.y[i];
    for (auto& v : z) v = rng.normal();
    for (std::size_t r = 0; r < dim; ++r) {
      double v = mixture.means[c][r];
      for (std::size_t k = 0; k <= r; ++k) v += factors[c][r * dim + k] * z[k];
      out.x(i, r) = v;
    }
  }
  return out;
}

DomainPair gen_gaussian_shift_pair(std::size_t n_per_domain, const GaussianMixtureSpec& mixture,
                                   const ShiftSpec& shift, std::uint64_t seed) {
  validate(shift);
  auto source = sample_gaussian_mixture(n_per_domain, mixture, derive_seed(seed, kSourceStream));
  auto target = sample_gaussian_mixture(n_per_domain, mixture, derive_seed(seed, kTargetStream));
  apply_shift(target.x, shift);
  return DomainPair{.x_s = std::move(source.x),
                    .y_s = std::move(source.y),
                    .x_t = std::move(target.x),
                    .y_t_eval = std::move(target.y),
                    .num_classes = mixture.means.size()};
}

void save_domain_csv(const std::filesystem::path& path, const Matrix& x, const Labels* labels) {
  if (labels && labels->size() != x.rows) throw ContractError("label count differs from sample count");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  for (std::size_t c = 0; c < x.cols; ++c) out << (c ? "," : "") << 'f' << c;
  if (labels) out << ",label";
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", x(r, c));
      out << (c ? "," : "") << buf;
    }
    if (labels) out << ',' << (*labels)[r];
    out << '\n';
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

LabeledSamples load_domain_csv(const std::filesystem::path& path, bool* has_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.empty()) throw FormatError(path.string() + ":1: empty header");
  const bool labelled = trim(header.back()) == "label";
  const std::size_t features = header.size() - (labelled ? 1 : 0);
  if (features == 0) throw FormatError(path.string() + ":1: no feature columns");
  for (std::size_t c = 0; c < features; ++c)
    if (trim(header[c]) != "f" + std::to_string(c))
      throw FormatError(path.string() + ":1: expected column 'f" + std::to_string(c) + "', found '" +
                        trim(header[c]) + "'");

  LabeledSamples out;
  out.x.cols = features;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < features; ++c) out.x.values.push_back(parse_double(cells[c], path, line_no));
    if (labelled) out.y.push_back(parse_label(cells.back(), path, line_no));
    ++out.x.rows;
  }
  if (out.x.rows == 0) throw FormatError(path.string() + ": no data rows");
  if (has_labels) *has_labels = labelled;
  return out;
}

void save_pair_csv(const DomainPair& pair, const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path) {
  save_domain_csv(source_path, pair.x_s, &pair.y_s);
  save_domain_csv(target_path, pair.x_t, pair.y_t_eval ? &*pair.y_t_eval : nullptr);
}

DomainPair load_pair_csv(const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                         std::optional<std::size_t> num_classes) {
  bool source_labelled = false, target_labelled = false;
  auto source = load_domain_csv(source_path, &source_labelled);
  auto target = load_domain_csv(target_path, &target_labelled);
  if (!source_labelled) throw FormatError(source_path.string() + ": source file needs a label column");
  if (source.x.cols != target.x.cols)
    throw FormatError("schema mismatch: source has " + std::to_string(source.x.cols) + " features, target has " +
                      std::to_string(target.x.cols));
  DomainPair pair;
  pair.x_s = std::move(source.x);
  pair.y_s = std::move(source.y);
  pair.x_t = std::move(target.x);
  if (target_labelled) pair.y_t_eval = std::move(target.y);
  std::size_t classes = 0;
  for (auto y : pair.y_s) classes = std::max(classes, y + 1);
  if (pair.y_t_eval)
    for (auto y : *pair.y_t_eval) classes = std::max(classes, y + 1);
  pair.num_classes = num_classes.value_or(std::max<std::size_t>(classes, 2));
  validate(pair);
  return pair;
}

}  // namespace catn
