#include "slhoi/matching.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "slhoi/errors.hpp"

namespace slhoi {

std::vector<int> solve_assignment(const Mat& cost) {
  const int n = cost.rows(), m = cost.cols();
  assert(n <= m);
  const double inf = std::numeric_limits<double>::infinity();

  // Potentials-based shortest augmenting path; 1-indexed with column 0 as the
  // virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double assignment_cost(const Mat& cost, const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(row_to_col.size()); ++i) total += cost(i, row_to_col[i]);
  return total;
}

Box row_to_box(const Mat& m, int row) {
  return Box{m(row, 0), m(row, 1), m(row, 2), m(row, 3)};
}

Mat matching_cost(const MatchInputs& preds, const std::vector<MatchTarget>& targets,
                  const MatchWeights& w) {
  const int nq = preds.human_boxes.rows();
  const int nt = static_cast<int>(targets.size());
  Mat cost(nt, nq);
  for (int j = 0; j < nt; ++j) {
    const MatchTarget& t = targets[j];
    for (int i = 0; i < nq; ++i) {
      const Box bh = row_to_box(preds.human_boxes, i);
      const Box bo = row_to_box(preds.object_boxes, i);
      double c = w.w_cls * (-preds.class_probs(i, t.class_col));
      c += w.w_l1 * (box_l1(bh, t.human) + box_l1(bo, t.object));
      c += w.w_giou * ((1.0 - box_giou(bh, t.human)) + (1.0 - box_giou(bo, t.object)));
      cost(j, i) = c;
    }
  }
  return cost;
}

MatchAssignment hungarian_match(const MatchInputs& preds,
                                const std::vector<MatchTarget>& targets,
                                const MatchWeights& w) {
  const int nq = preds.human_boxes.rows();
  const int nt = static_cast<int>(targets.size());
  if (nt > nq) {
    throw DataError("cannot match " + std::to_string(nt) + " targets against " +
                    std::to_string(nq) + " predictions");
  }
  MatchAssignment out;
  if (nt == 0) return out;
  const Mat cost = matching_cost(preds, targets, w);
  // Non-finite costs would starve the augmenting-path search of candidate
  // columns and spin forever; surface them as the numerical failure they are.
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (!std::isfinite(cost.data()[i])) {
      throw NumericalError("non-finite matching cost; predictions contain NaN or infinity");
    }
  }
  const std::vector<int> row_to_col = solve_assignment(cost);
  for (int j = 0; j < nt; ++j) out.pairs.emplace_back(row_to_col[j], j);
  return out;
}

}  // namespace slhoi
