#pragma once

#include <cstddef>
#include <vector>

#include "garmentsynth/latent.hpp"
#include "garmentsynth/similarity.hpp"

namespace garmentsynth {

// Square cost matrix. When built from a rectangular problem, rows >= real_rows
// and columns >= real_cols are zero-cost dummies.
class CostMatrix {
 public:
  explicit CostMatrix(std::size_t n) : n_(n), real_rows_(n), real_cols_(n), data_(n * n, 0.0) {}
  static CostMatrix padded(std::size_t rows, std::size_t cols);

  std::size_t size() const { return n_; }
  std::size_t real_rows() const { return real_rows_; }
  std::size_t real_cols() const { return real_cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::size_t real_rows_;
  std::size_t real_cols_;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::size_t> row_to_col;  // part -> phrase (padded indices)
  std::vector<double> similarity;       // -cost of each chosen pair
  std::vector<bool> dummy;              // pair involves a padding row or column
  double total_cost = 0.0;
};

// Minimum-cost perfect matching; among optimal matchings the lexicographically
// smallest row_to_col is returned. Throws NonFinite.
Assignment hungarian(const CostMatrix& cost);

struct HungarianScore {
  double value = 0.0;
  Assignment assignment;
  std::vector<PartId> parts;  // template part of each real row
};

// Sum of matched part/phrase similarities plus the full-image term.
HungarianScore l_hungarian(const PartSet& v, const APTree& w, const World& world);

struct LatentGradient {
  double value = 0.0;
  Latent gradient;
  Assignment assignment;
};

// Gradient of L_Hungarian(segment(decode(z))) w.r.t. z. The assignment is
// recomputed at z unless one is supplied, and then held fixed.
LatentGradient hungarian_gradient(const Latent& z, const APTree& w, const World& world,
                                  const Assignment* fixed = nullptr);

struct GuidanceStep {
  Latent latent;
  double loss_before = 0.0;
  double step_norm = 0.0;
};

// z + alpha * grad L_Hungarian. Throws NonFinite.
GuidanceStep consensus_guidance_step(const Latent& z, const APTree& w, double alpha, const World& world);

}  // namespace garmentsynth
