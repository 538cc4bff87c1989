#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "conley/frame.hpp"
#include "conley/spectral.hpp"

// Internal helpers for exact finite-window computations.  A window is a
// sorted coordinate set closed under the linear parts of a field: the core
// block maps core coordinates to core coordinates, compact blocks live in
// [0, block_dim), and everything else is diagonal.  Operators restricted to
// a window therefore agree with their ambient action on the window's span.

namespace conley::detail {

inline std::vector<int32_t> window_union(const SpectralOperator& L,
                                         std::span<const int32_t> extra,
                                         int32_t extra_block = 0) {
  const int32_t head = std::max(L.core_dim, extra_block);
  std::vector<int32_t> u;
  for (int32_t i = 0; i < head; ++i) u.push_back(i);
  for (int32_t i : extra)
    if (i >= head) u.push_back(i);
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

inline Eigen::MatrixXd dense_window(const SpectralOperator& L,
                                    const std::vector<int32_t>& u) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    if (u[r] < L.core_dim) {
      for (int c = 0; c < n; ++c)
        if (u[c] < L.core_dim)
          M(r, c) = L.core[static_cast<std::size_t>(u[r]) * L.core_dim + u[c]];
    } else {
      M(r, r) = L.tail_at(u[r]);
    }
  }
  return M;
}

// Dense window matrix of the compact linear part A + diag(kappa) of Q.
inline Eigen::MatrixXd dense_q_linear(const StructuredCompactMap& Q,
                                      const std::vector<int32_t>& u) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    if (u[r] < Q.linear_block_dim)
      for (int c = 0; c < n; ++c)
        if (u[c] < Q.linear_block_dim)
          M(r, c) = Q.linear_block[static_cast<std::size_t>(u[r]) *
                                       Q.linear_block_dim +
                                   u[c]];
    M(r, r) += Q.diagonal_compact.value(u[r]);
  }
  return M;
}

// Frame columns embedded on the window coordinates (|u| x dim).  Window
// rows outside the frame support stay zero.
inline Eigen::MatrixXd embed_columns(const Frame& V,
                                     const std::vector<int32_t>& u) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<int>(u.size()), V.dim);
  for (std::size_t r = 0; r < V.support.size(); ++r) {
    const auto it = std::lower_bound(u.begin(), u.end(), V.support[r]);
    if (it == u.end() || *it != V.support[r]) continue;
    const int row = static_cast<int>(it - u.begin());
    for (int32_t j = 0; j < V.dim; ++j)
      C(row, j) = V.cols[r * static_cast<std::size_t>(V.dim) + j];
  }
  return C;
}

}  // namespace conley::detail
