// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/system_model.hpp>

#include <Eigen/SVD>

#include <stdexcept>
#include <string>
#include <vector>

namespace riscell {

// Raised when the stacked channel matrix of a cell loses column rank and
// zero-forcing directions stop existing.
class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(int numerical_rank, int required)
      : std::runtime_error("rank-deficient channel matrix: numerical rank " +
                           std::to_string(numerical_rank) + " < " +
                           std::to_string(required) + " columns"),
        rank_(numerical_rank),
        required_(required) {}

  int numerical_rank() const { return rank_; }
  int required() const { return required_; }

 private:
  int rank_;
  int required_;
};

// Moore-Penrose pseudo-inverse of a tall matrix (rows >= cols) via SVD.
// Singular values below smax * 1e-12 * max(rows, cols) count as zero; a
// numerical rank short of the column count throws RankDeficientError.
inline cmat pseudo_inverse(const cmat& h) {
  const Eigen::Index rows = h.rows();
  const Eigen::Index cols = h.cols();
  if (cols < 1) {
    throw std::invalid_argument("pseudo_inverse: empty matrix");
  }
  if (cols > rows) {
    throw std::invalid_argument("pseudo_inverse: more columns than rows");
  }
  Eigen::JacobiSVD<cmat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff =
      sv.size() > 0 ? sv(0) * 1e-12 * static_cast<double>(std::max(rows, cols))
                    : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 0.0 && sv(i) >= cutoff) ++rank;
  }
  if (rank < cols) {
    throw RankDeficientError(rank, static_cast<int>(cols));
  }
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() *
         svd.matrixU().adjoint();
}

// Normalized zero-forcing beams for one cell. Column l of `h_stacked` is the
// effective channel of the cell's l-th served user; the beam for that user is
// sqrt(p_max / total_users) times the unit-normalized conjugate of the l-th
// pseudo-inverse row. `total_users` is the network-wide K: the budget is
// split evenly across all users, not per cell.
inline cmat zf_columns(const cmat& h_stacked, double p_max, int total_users) {
  if (!(p_max > 0.0) || total_users < 1) {
    throw std::invalid_argument("zf_columns: need positive power and user count");
  }
  const cmat pinv = pseudo_inverse(h_stacked);
  const double per_user = p_max / static_cast<double>(total_users);
  cmat w(h_stacked.rows(), h_stacked.cols());
  for (Eigen::Index l = 0; l < h_stacked.cols(); ++l) {
    const cvec f = pinv.row(l).adjoint();
    w.col(l) = std::sqrt(per_user) * f / f.norm();
  }
  return w;
}

// Beams of every cell, columns ordered like the association's served sets.
struct BeamformerSet {
  std::vector<std::vector<int>> users; // per BS, user of each beam column
  std::vector<cmat> w;                 // per BS, M x |A_j|
  double per_user_power = 0.0;         // p_max / K, every beam's norm squared

  // Beam of (BS j, user k); k must be served by j.
  cvec beam(int j, int k) const {
    const auto& a = users[j];
    for (std::size_t col = 0; col < a.size(); ++col) {
      if (a[col] == k) return w[j].col(static_cast<Eigen::Index>(col));
    }
    throw std::invalid_argument("BeamformerSet::beam: user not served by BS");
  }
};

} // namespace riscell
