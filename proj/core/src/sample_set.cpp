#include "messy/sample_set.hpp"

#include <cmath>
#include <limits>

#include "messy/error.hpp"

namespace messy {

bool Interval::finite() const { return std::isfinite(lo) && std::isfinite(hi); }

Box unbounded_box(int dim) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return Box(static_cast<std::size_t>(dim), Interval{-inf, inf});
}

bool box_contains(const Box& box, std::span<const double> x) {
  for (std::size_t j = 0; j < box.size(); ++j) {
    if (!box[j].contains(x[j])) return false;
  }
  return true;
}

SampleSet::SampleSet(Eigen::MatrixXd values, std::string source, std::uint64_t seed)
    : values_(std::move(values)), source_(std::move(source)), seed_(seed) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw DegenerateDataError("sample set needs at least one sample and one dimension");
  }
  if (!values_.allFinite()) {
    throw DegenerateDataError("sample set contains non-finite values");
  }
  const auto n = static_cast<double>(values_.rows());
  mean_ = values_.colwise().mean().transpose();
  stddev_.resize(values_.cols());
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    const double ss = (values_.col(j).array() - mean_(j)).square().sum();
    stddev_(j) = values_.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  min_ = values_.colwise().minCoeff().transpose();
  max_ = values_.colwise().maxCoeff().transpose();
}

SampleSet SampleSet::from_column(std::span<const double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return SampleSet(std::move(m));
}

Eigen::MatrixXd SampleSet::covariance() const {
  const Eigen::MatrixXd centered = values_.rowwise() - mean_.transpose();
  const double denom = values_.rows() > 1 ? static_cast<double>(values_.rows() - 1) : 1.0;
  return centered.transpose() * centered / denom;
}

Box SampleSet::bounding_box() const {
  Box box(static_cast<std::size_t>(dim()));
  for (int j = 0; j < dim(); ++j) box[static_cast<std::size_t>(j)] = {min_(j), max_(j)};
  return box;
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), values_.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = values_.row(static_cast<Eigen::Index>(indices[k]));
  }
  return SampleSet(std::move(out), source_, seed_);
}

}  // namespace messy
