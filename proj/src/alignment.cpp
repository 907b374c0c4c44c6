#include "garmentsynth/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

CostMatrix CostMatrix::padded(std::size_t rows, std::size_t cols) {
  CostMatrix m(std::max(rows, cols));
  m.real_rows_ = rows;
  m.real_cols_ = cols;
  return m;
}

namespace {

// Kuhn-Munkres with row/column potentials on the sub-matrix given by rows x cols.
// Returns the column chosen for each entry of `rows`.
std::vector<std::size_t> solve_assignment(const CostMatrix& cost, const std::vector<std::size_t>& rows,
                                          const std::vector<std::size_t>& cols, double* total) {
  const std::size_t n = rows.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> result(n);
  double sum = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    result[p[j] - 1] = cols[j - 1];
  }
  for (std::size_t i = 0; i < n; ++i) sum += cost(rows[i], result[i]);
  if (total) *total = sum;
  return result;
}

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(b)); }

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(cost(i, j))) throw Error(ErrorCode::kNonFinite, "cost matrix has a non-finite entry");
    }
  }
  Assignment a;
  a.row_to_col.resize(n);
  if (n == 0) return a;

  std::vector<std::size_t> rows(n), free_cols(n);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(free_cols.begin(), free_cols.end(), 0);
  double remaining = 0.0;
  solve_assignment(cost, rows, free_cols, &remaining);

  // Fix rows one at a time to the smallest column that still admits an optimal completion.
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<std::size_t> rest_rows(rows.begin() + static_cast<std::ptrdiff_t>(i) + 1, rows.end());
    bool placed = false;
    for (std::size_t k = 0; k < free_cols.size() && !placed; ++k) {
      const std::size_t j = free_cols[k];
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
      double sub = 0.0;
      if (!rest_rows.empty()) solve_assignment(cost, rest_rows, rest_cols, &sub);
      const double candidate = cost(i, j) + sub;
      if (nearly_equal(candidate, remaining) || k + 1 == free_cols.size()) {
        a.row_to_col[i] = j;
        remaining = sub;
        free_cols = std::move(rest_cols);
        placed = true;
      }
    }
  }

  a.similarity.resize(n);
  a.dummy.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = a.row_to_col[i];
    a.total_cost += cost(i, j);
    a.similarity[i] = -cost(i, j);
    a.dummy[i] = i >= cost.real_rows() || j >= cost.real_cols();
  }
  return a;
}

namespace {

struct Embedded {
  std::vector<PartId> parts;
  std::vector<const Mask*> masks;
  std::vector<ImageEmbedding> part_emb;
  std::vector<TextEmbedding> ap_emb;
};

Embedded embed_all(const Image& image, const APTree& w, const World& world) {
  const LayoutTemplate& layout = world.templates.at(w.category);
  Embedded e;
  for (const auto& [id, m] : layout.parts) {
    e.parts.push_back(id);
    e.masks.push_back(&m);
    e.part_emb.push_back(embed_part(image, m, id));
  }
  for (const auto& ap : w.aps) {
    e.ap_emb.push_back(embed_ap(ap, world.lexicon));
    if (!layout.has_part(e.ap_emb.back().part)) {
      throw Error(ErrorCode::kInvalidScene, "phrase '" + ap.noun.text + "' names a part the '" + w.category +
                                                "' template does not have");
    }
  }
  return e;
}

std::size_t part_slot(const Embedded& e, PartId part) {
  return static_cast<std::size_t>(std::find(e.parts.begin(), e.parts.end(), part) - e.parts.begin());
}

Assignment match(const Embedded& e) {
  CostMatrix cost = CostMatrix::padded(e.parts.size(), e.ap_emb.size());
  for (std::size_t i = 0; i < e.parts.size(); ++i) {
    for (std::size_t j = 0; j < e.ap_emb.size(); ++j) cost(i, j) = -sim(e.part_emb[i], e.ap_emb[j]);
  }
  return hungarian(cost);
}

double score(const Embedded& e, const Assignment& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < e.parts.size(); ++i) {
    if (!a.dummy[i]) total += sim(e.part_emb[i], e.ap_emb[a.row_to_col[i]]);
  }
  double full = 0.0;
  for (const auto& te : e.ap_emb) full += sim(e.part_emb[part_slot(e, te.part)], te);
  if (!e.ap_emb.empty()) total += full / static_cast<double>(e.ap_emb.size());
  return total;
}

void accumulate(Image& into, const Image& g) {
  auto& d = into.data();
  const auto& s = g.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

}  // namespace

HungarianScore l_hungarian(const PartSet& v, const APTree& w, const World& world) {
  const Embedded e = embed_all(v.full_image, w, world);
  HungarianScore s;
  s.assignment = match(e);
  s.parts = e.parts;
  s.value = score(e, s.assignment);
  return s;
}

LatentGradient hungarian_gradient(const Latent& z, const APTree& w, const World& world, const Assignment* fixed) {
  const Image image = decode(z);
  const Embedded e = embed_all(image, w, world);
  LatentGradient out;
  out.assignment = fixed ? *fixed : match(e);
  out.value = score(e, out.assignment);

  Image grad(kCanvasSize, kCanvasSize, Rgb{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < e.parts.size(); ++i) {
    if (out.assignment.dummy[i]) continue;
    accumulate(grad, grad_sim_image(image, *e.masks[i], e.parts[i], e.ap_emb[out.assignment.row_to_col[i]]));
  }
  const double inv_m = e.ap_emb.empty() ? 0.0 : 1.0 / static_cast<double>(e.ap_emb.size());
  for (const auto& te : e.ap_emb) {
    Image g = grad_sim_image(image, *e.masks[part_slot(e, te.part)], te.part, te);
    for (double& x : g.data()) x *= inv_m;
    accumulate(grad, g);
  }
  out.gradient = decode_adjoint(grad);
  out.gradient.t = z.t;
  return out;
}

GuidanceStep consensus_guidance_step(const Latent& z, const APTree& w, double alpha, const World& world) {
  GuidanceStep step;
  step.latent = z;
  if (alpha == 0.0) {
    step.loss_before = hungarian_gradient(z, w, world).value;
    return step;
  }
  const LatentGradient g = hungarian_gradient(z, w, world);
  step.loss_before = g.value;
  double sq = 0.0;
  for (std::size_t k = 0; k < z.values.size(); ++k) {
    const double d = alpha * g.gradient.values[k];
    step.latent.values[k] += d;
    sq += d * d;
  }
  step.step_norm = std::sqrt(sq);
  if (!step.latent.finite()) throw Error(ErrorCode::kNonFinite, "consensus guidance produced a non-finite latent");
  return step;
}

}  // namespace garmentsynth
