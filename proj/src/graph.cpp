#include "slhoi/graph.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace slhoi {

namespace {

Var make_node(Mat value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

void ensure_grad(const Var& v) {
  if (!v->requires_grad) return;
  if (v->grad.rows() != v->value.rows() || v->grad.cols() != v->value.cols())
    v->grad = Mat(v->value.rows(), v->value.cols(), 0.0);
}

void accumulate(const Var& p, const Mat& g) {
  if (!p->requires_grad) return;
  ensure_grad(p);
  assert(p->grad.same_shape(g));
  for (std::size_t i = 0; i < g.size(); ++i) p->grad.data()[i] += g.data()[i];
}

}  // namespace

Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = false;
  return n;
}

Var constant_scalar(double v) { return constant(Mat(1, 1, v)); }

void backward(const Var& root) {
  assert(root->value.rows() == 1 && root->value.cols() == 1 &&
         "backward expects a scalar root");
  // Iterative post-order DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  ensure_grad(root);
  root->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->requires_grad && n->backprop) n->backprop(*n);
  }
}

// --------------------------------------------------------------------------
// Arithmetic

Var add(Var a, Var b) {
  assert(a->value.same_shape(b->value));
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b->value.data()[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    accumulate(a, self.grad);
    accumulate(b, self.grad);
  });
}

Var sub(Var a, Var b) {
  assert(a->value.same_shape(b->value));
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b->value.data()[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    accumulate(a, self.grad);
    if (b->requires_grad) {
      Mat g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = -g.data()[i];
      accumulate(b, g);
    }
  });
}

Var mul(Var a, Var b) {
  assert(a->value.same_shape(b->value));
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b->value.data()[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad) {
      Mat g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= b->value.data()[i];
      accumulate(a, g);
    }
    if (b->requires_grad) {
      Mat g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= a->value.data()[i];
      accumulate(b, g);
    }
  });
}

Var divide(Var a, Var b) {
  assert(a->value.same_shape(b->value));
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= b->value.data()[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad) {
      Mat g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] /= b->value.data()[i];
      accumulate(a, g);
    }
    if (b->requires_grad) {
      Mat g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double bv = b->value.data()[i];
        g.data()[i] *= -a->value.data()[i] / (bv * bv);
      }
      accumulate(b, g);
    }
  });
}

Var neg(Var a) { return scale(std::move(a), -1.0); }

Var scale(Var a, double s) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
  return make_node(std::move(out), {a}, [a, s](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= s;
    accumulate(a, g);
  });
}

Var add_scalar(Var a, double s) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += s;
  return make_node(std::move(out), {a}, [a](Node& self) { accumulate(a, self.grad); });
}

Var add_rowvec(Var a, Var r) {
  assert(r->value.rows() == 1 && r->value.cols() == a->value.cols());
  Mat out = a->value;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) += r->value(0, j);
  return make_node(std::move(out), {a, r}, [a, r](Node& self) {
    accumulate(a, self.grad);
    if (r->requires_grad) {
      Mat g(1, self.grad.cols(), 0.0);
      for (int i = 0; i < self.grad.rows(); ++i)
        for (int j = 0; j < self.grad.cols(); ++j) g(0, j) += self.grad(i, j);
      accumulate(r, g);
    }
  });
}

Var mul_colvec(Var a, Var c) {
  assert(c->value.cols() == 1 && c->value.rows() == a->value.rows());
  Mat out = a->value;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) *= c->value(i, 0);
  return make_node(std::move(out), {a, c}, [a, c](Node& self) {
    if (a->requires_grad) {
      Mat g = self.grad;
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) g(i, j) *= c->value(i, 0);
      accumulate(a, g);
    }
    if (c->requires_grad) {
      Mat g(self.grad.rows(), 1, 0.0);
      for (int i = 0; i < self.grad.rows(); ++i)
        for (int j = 0; j < self.grad.cols(); ++j)
          g(i, 0) += self.grad(i, j) * a->value(i, j);
      accumulate(c, g);
    }
  });
}

Var mul_scalar_var(Var a, Var s) {
  assert(s->value.rows() == 1 && s->value.cols() == 1);
  const double sv = s->value(0, 0);
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= sv;
  return make_node(std::move(out), {a, s}, [a, s, sv](Node& self) {
    if (a->requires_grad) {
      Mat g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= sv;
      accumulate(a, g);
    }
    if (s->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        acc += self.grad.data()[i] * a->value.data()[i];
      accumulate(s, Mat(1, 1, acc));
    }
  });
}

Var minimum(Var a, Var b) {
  assert(a->value.same_shape(b->value));
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::min(a->value.data()[i], b->value.data()[i]);
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    Mat ga(self.grad.rows(), self.grad.cols(), 0.0);
    Mat gb = ga;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (a->value.data()[i] <= b->value.data()[i])
        ga.data()[i] = self.grad.data()[i];
      else
        gb.data()[i] = self.grad.data()[i];
    }
    accumulate(a, ga);
    accumulate(b, gb);
  });
}

Var maximum(Var a, Var b) {
  assert(a->value.same_shape(b->value));
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::max(a->value.data()[i], b->value.data()[i]);
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    Mat ga(self.grad.rows(), self.grad.cols(), 0.0);
    Mat gb = ga;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (a->value.data()[i] >= b->value.data()[i])
        ga.data()[i] = self.grad.data()[i];
      else
        gb.data()[i] = self.grad.data()[i];
    }
    accumulate(a, ga);
    accumulate(b, gb);
  });
}

Var clamp_max(Var a, double cap) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::min(out.data()[i], cap);
  return make_node(std::move(out), {a}, [a, cap](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a->value.data()[i] > cap) g.data()[i] = 0.0;
    accumulate(a, g);
  });
}

// --------------------------------------------------------------------------
// Nonlinearities

Var relu(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(out.data()[i], 0.0);
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a->value.data()[i] <= 0.0) g.data()[i] = 0.0;
    accumulate(a, g);
  });
}

Var gelu(Var a) {
  // Exact erf form: x * Phi(x).
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.data()[i];
    out.data()[i] = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
  }
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = a->value.data()[i];
      const double phi_cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
      const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
      g.data()[i] *= phi_cdf + x * phi_pdf;
    }
    accumulate(a, g);
  });
}

Var sigmoid(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.data()[i];
    out.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                             : std::exp(x) / (1.0 + std::exp(x));
  }
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value.data()[i];
      g.data()[i] *= y * (1.0 - y);
    }
    accumulate(a, g);
  });
}

Var softplus(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.data()[i];
    out.data()[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = a->value.data()[i];
      const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                  : std::exp(x) / (1.0 + std::exp(x));
      g.data()[i] *= sig;
    }
    accumulate(a, g);
  });
}

Var exp_v(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(out.data()[i]);
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= self.value.data()[i];
    accumulate(a, g);
  });
}

Var log_v(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(out.data()[i]);
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] /= a->value.data()[i];
    accumulate(a, g);
  });
}

Var abs_v(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::fabs(out.data()[i]);
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = a->value.data()[i];
      g.data()[i] *= (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    }
    accumulate(a, g);
  });
}

Var rsqrt(Var a) {
  Mat out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = 1.0 / std::sqrt(out.data()[i]);
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value.data()[i];  // a^{-1/2}
      g.data()[i] *= -0.5 * y * y * y;
    }
    accumulate(a, g);
  });
}

// --------------------------------------------------------------------------
// Structure

Var matmul(Var a, Var b) {
  Mat out = matmul(a->value, b->value);
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad) accumulate(a, matmul(self.grad, transposed(b->value)));
    if (b->requires_grad) accumulate(b, matmul(transposed(a->value), self.grad));
  });
}

Var transpose(Var a) {
  return make_node(transposed(a->value), {a},
                   [a](Node& self) { accumulate(a, transposed(self.grad)); });
}

Var concat_rows(const std::vector<Var>& parts) {
  assert(!parts.empty());
  int rows = 0;
  const int cols = parts[0]->value.cols();
  for (const auto& p : parts) {
    assert(p->value.cols() == cols);
    rows += p->value.rows();
  }
  Mat out(rows, cols);
  int r = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p->value.rows(); ++i)
      for (int j = 0; j < cols; ++j) out(r + i, j) = p->value(i, j);
    r += p->value.rows();
  }
  std::vector<Var> parents = parts;
  return make_node(std::move(out), parents, [parents](Node& self) {
    int r0 = 0;
    for (const auto& p : parents) {
      if (p->requires_grad) {
        Mat g(p->value.rows(), p->value.cols());
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) g(i, j) = self.grad(r0 + i, j);
        accumulate(p, g);
      }
      r0 += p->value.rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  int cols = 0;
  const int rows = parts[0]->value.rows();
  for (const auto& p : parts) {
    assert(p->value.rows() == rows);
    cols += p->value.cols();
  }
  Mat out(rows, cols);
  int c = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < p->value.cols(); ++j) out(i, c + j) = p->value(i, j);
    c += p->value.cols();
  }
  std::vector<Var> parents = parts;
  return make_node(std::move(out), parents, [parents](Node& self) {
    int c0 = 0;
    for (const auto& p : parents) {
      if (p->requires_grad) {
        Mat g(p->value.rows(), p->value.cols());
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) g(i, j) = self.grad(i, c0 + j);
        accumulate(p, g);
      }
      c0 += p->value.cols();
    }
  });
}

Var slice_rows(Var a, int begin, int end) {
  assert(begin >= 0 && end <= a->value.rows() && begin <= end);
  Mat out(end - begin, a->value.cols());
  for (int i = begin; i < end; ++i)
    for (int j = 0; j < out.cols(); ++j) out(i - begin, j) = a->value(i, j);
  return make_node(std::move(out), {a}, [a, begin](Node& self) {
    Mat g(a->value.rows(), a->value.cols(), 0.0);
    for (int i = 0; i < self.grad.rows(); ++i)
      for (int j = 0; j < self.grad.cols(); ++j) g(begin + i, j) = self.grad(i, j);
    accumulate(a, g);
  });
}

Var slice_cols(Var a, int begin, int end) {
  assert(begin >= 0 && end <= a->value.cols() && begin <= end);
  Mat out(a->value.rows(), end - begin);
  for (int i = 0; i < out.rows(); ++i)
    for (int j = begin; j < end; ++j) out(i, j - begin) = a->value(i, j);
  return make_node(std::move(out), {a}, [a, begin](Node& self) {
    Mat g(a->value.rows(), a->value.cols(), 0.0);
    for (int i = 0; i < self.grad.rows(); ++i)
      for (int j = 0; j < self.grad.cols(); ++j) g(i, begin + j) = self.grad(i, j);
    accumulate(a, g);
  });
}

// --------------------------------------------------------------------------
// Reductions

Var sum_all(Var a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) s += a->value.data()[i];
  return make_node(Mat(1, 1, s), {a}, [a](Node& self) {
    Mat g(a->value.rows(), a->value.cols(), self.grad(0, 0));
    accumulate(a, g);
  });
}

Var mean_all(Var a) {
  const double inv = 1.0 / static_cast<double>(a->value.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) s += a->value.data()[i];
  return make_node(Mat(1, 1, s * inv), {a}, [a, inv](Node& self) {
    Mat g(a->value.rows(), a->value.cols(), self.grad(0, 0) * inv);
    accumulate(a, g);
  });
}

Var row_sum(Var a) {
  Mat out(a->value.rows(), 1, 0.0);
  for (int i = 0; i < a->value.rows(); ++i)
    for (int j = 0; j < a->value.cols(); ++j) out(i, 0) += a->value(i, j);
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g(a->value.rows(), a->value.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) g(i, j) = self.grad(i, 0);
    accumulate(a, g);
  });
}

Var col_mean(Var a) {
  const int rows = a->value.rows();
  assert(rows > 0);
  Mat out(1, a->value.cols(), 0.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < a->value.cols(); ++j) out(0, j) += a->value(i, j);
  for (int j = 0; j < out.cols(); ++j) out(0, j) /= rows;
  return make_node(std::move(out), {a}, [a, rows](Node& self) {
    Mat g(a->value.rows(), a->value.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) g(i, j) = self.grad(0, j) / rows;
    accumulate(a, g);
  });
}

// --------------------------------------------------------------------------
// Softmax family

namespace {

Mat softmax_rows_value(const Mat& a, const Mat* mask) {
  Mat out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < a.cols(); ++j) {
      const double v = a(i, j) + (mask ? (*mask)(i, j) : 0.0);
      if (v > mx) mx = v;
    }
    assert(std::isfinite(mx) && "softmax row fully masked");
    double sum = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      const double v = a(i, j) + (mask ? (*mask)(i, j) : 0.0);
      const double e = std::exp(v - mx);
      out(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < a.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

Var softmax_impl(Var a, const Mat* mask) {
  Mat out = softmax_rows_value(a->value, mask);
  return make_node(std::move(out), {a}, [a](Node& self) {
    // dx = y * (dy - sum_k dy_k y_k) per row; masked entries have y == 0.
    Mat g(self.grad.rows(), self.grad.cols());
    for (int i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) dot += self.grad(i, j) * self.value(i, j);
      for (int j = 0; j < g.cols(); ++j)
        g(i, j) = self.value(i, j) * (self.grad(i, j) - dot);
    }
    accumulate(a, g);
  });
}

}  // namespace

Var softmax_rows(Var a) { return softmax_impl(std::move(a), nullptr); }

Var softmax_rows_masked(Var a, const Mat& additive_mask) {
  assert(additive_mask.same_shape(a->value));
  return softmax_impl(std::move(a), &additive_mask);
}

Var logsumexp_rows(Var a) {
  Mat out(a->value.rows(), 1);
  for (int i = 0; i < a->value.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < a->value.cols(); ++j) mx = std::max(mx, a->value(i, j));
    double sum = 0.0;
    for (int j = 0; j < a->value.cols(); ++j) sum += std::exp(a->value(i, j) - mx);
    out(i, 0) = mx + std::log(sum);
  }
  return make_node(std::move(out), {a}, [a](Node& self) {
    Mat g(a->value.rows(), a->value.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        g(i, j) = self.grad(i, 0) * std::exp(a->value(i, j) - self.value(i, 0));
    accumulate(a, g);
  });
}

// --------------------------------------------------------------------------
// Layer norm

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const int R = x->value.rows(), C = x->value.cols();
  assert(gain->value.rows() == 1 && gain->value.cols() == C);
  assert(bias->value.rows() == 1 && bias->value.cols() == C);
  Mat out(R, C);
  Mat xhat(R, C);
  Mat inv_sigma(R, 1);
  for (int i = 0; i < R; ++i) {
    double mu = 0.0;
    for (int j = 0; j < C; ++j) mu += x->value(i, j);
    mu /= C;
    double var = 0.0;
    for (int j = 0; j < C; ++j) {
      const double d = x->value(i, j) - mu;
      var += d * d;
    }
    var /= C;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma(i, 0) = is;
    for (int j = 0; j < C; ++j) {
      xhat(i, j) = (x->value(i, j) - mu) * is;
      out(i, j) = gain->value(0, j) * xhat(i, j) + bias->value(0, j);
    }
  }
  return make_node(std::move(out), {x, gain, bias},
                   [x, gain, bias, xhat, inv_sigma](Node& self) {
    const int R = x->value.rows(), C = x->value.cols();
    if (gain->requires_grad) {
      Mat gg(1, C, 0.0);
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) gg(0, j) += self.grad(i, j) * xhat(i, j);
      accumulate(gain, gg);
    }
    if (bias->requires_grad) {
      Mat gb(1, C, 0.0);
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) gb(0, j) += self.grad(i, j);
      accumulate(bias, gb);
    }
    if (x->requires_grad) {
      Mat gx(R, C);
      for (int i = 0; i < R; ++i) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < C; ++j) {
          const double dxh = self.grad(i, j) * gain->value(0, j);
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xhat(i, j);
        }
        mean_dxhat /= C;
        mean_dxhat_xhat /= C;
        for (int j = 0; j < C; ++j) {
          const double dxh = self.grad(i, j) * gain->value(0, j);
          gx(i, j) = inv_sigma(i, 0) * (dxh - mean_dxhat - xhat(i, j) * mean_dxhat_xhat);
        }
      }
      accumulate(x, gx);
    }
  });
}

Var l2_normalize_rows(Var x, double eps) {
  Var sq = mul(x, x);
  Var norms2 = add_scalar(row_sum(sq), eps);
  Var inv = rsqrt(norms2);  // R x 1
  return mul_colvec(x, inv);
}

// --------------------------------------------------------------------------
// Graph / parameter binding

Var Graph::param(Parameter& p) {
  if (p.frozen) return constant(p.value);
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->requires_grad = true;
  bindings_.push_back({&p, n});
  return n;
}

void Graph::backward_and_flush(const Var& root) {
  backward(root);
  for (auto& [param, var] : bindings_) {
    if (var->grad.empty()) continue;  // path never reached the root
    assert(param->grad.same_shape(var->grad));
    for (std::size_t i = 0; i < var->grad.size(); ++i)
      param->grad.data()[i] += var->grad.data()[i];
  }
}

}  // namespace slhoi
