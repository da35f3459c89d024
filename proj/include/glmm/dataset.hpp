#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glmm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Read-only view of one subject's rows.
struct SubjectView {
  Eigen::Block<const MatrixXd> X;
  Eigen::Block<const MatrixXd> Z;
  Eigen::VectorBlock<const VectorXd> y;
  std::optional<int> w;

  Index size() const { return y.size(); }
};

/// Subject-partitioned observations. Rows are stored contiguously per subject;
/// offsets[i] .. offsets[i+1] delimit subject i.
class Dataset {
 public:
  Dataset() = default;
  Dataset(MatrixXd X, MatrixXd Z, VectorXd y, std::vector<Index> offsets,
          std::optional<std::vector<int>> w = std::nullopt);

  Index n_subjects() const { return static_cast<Index>(offsets_.empty() ? 0 : offsets_.size() - 1); }
  Index n_rows() const { return y_.size(); }
  Index p() const { return X_.cols(); }
  Index q() const { return Z_.cols(); }
  Index subject_size(Index i) const { return offsets_[i + 1] - offsets_[i]; }
  bool has_indicator() const { return w_.has_value(); }

  SubjectView subject(Index i) const;

  const MatrixXd& X() const { return X_; }
  const MatrixXd& Z() const { return Z_; }
  const VectorXd& y() const { return y_; }
  const std::vector<Index>& offsets() const { return offsets_; }
  const std::optional<std::vector<int>>& indicator() const { return w_; }

  /// Subject ids and time stamps as read from file (defaults: 1..n, 1..n_i).
  std::vector<std::int64_t> subject_ids;
  std::vector<double> times;

  /// Sets w_i = 1(sum_t Y_it == 0) for every subject.
  void compute_indicator();

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

 private:
  MatrixXd X_;
  MatrixXd Z_;
  VectorXd y_;
  std::vector<Index> offsets_;
  std::optional<std::vector<int>> w_;
};

/// CSV with header `subject_id,t,y,x_1..x_p,z_1..z_q[,w]`, rows grouped by
/// subject_id with ascending t. The indicator column is per row but must be
/// constant within a subject.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace glmm
