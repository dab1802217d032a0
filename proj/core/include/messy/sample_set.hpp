#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace messy {

/// Closed interval per dimension; either end may be infinite.
struct Interval {
  double lo;
  double hi;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool finite() const;
  double width() const { return hi - lo; }
};

using Box = std::vector<Interval>;

Box unbounded_box(int dim);
bool box_contains(const Box& box, std::span<const double> x);

/// Immutable N x d matrix of samples, one sample per row.
class SampleSet {
 public:
  explicit SampleSet(Eigen::MatrixXd values, std::string source = {},
                     std::uint64_t seed = 0);

  static SampleSet from_column(std::span<const double> values);

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  int dim() const { return static_cast<int>(values_.cols()); }

  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(std::size_t i, int j) const { return values_(static_cast<Eigen::Index>(i), j); }
  Eigen::RowVectorXd row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  const Eigen::VectorXd& min() const { return min_; }
  const Eigen::VectorXd& max() const { return max_; }
  Eigen::MatrixXd covariance() const;

  Box bounding_box() const;

  const std::string& source() const { return source_; }
  std::uint64_t seed() const { return seed_; }

  SampleSet subset(std::span<const std::size_t> indices) const;

 private:
  Eigen::MatrixXd values_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
  Eigen::VectorXd min_;
  Eigen::VectorXd max_;
  std::string source_;
  std::uint64_t seed_;
};

}  // namespace messy
