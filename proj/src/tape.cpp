#include "hetmp/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace hetmp {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Var Tape::make(Tensor value) {
  auto n = std::make_unique<TapeNode>();
  n->value = std::move(value);
  n->grad = Tensor(n->value.shape);
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

Var Tape::constant(Tensor t) { return make(std::move(t)); }

Var Tape::param(const std::string& name, const Tensor& t) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    // Shared parameters: later registrations reuse the first node so the
    // adjoints of every use accumulate into one gradient.
    require(it->second->value.same_shape(t), "param reuse with new shape: " + name);
    return it->second;
  }
  Var v = make(t);
  params_[name] = v;
  return v;
}

Var Tape::add(Var a, Var b) {
  require(a->value.same_shape(b->value), "add: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += b->value.data[i];
  Var o = make(std::move(out));
  o->backward = [a, b, o] {
    for (int64_t i = 0; i < o->grad.numel(); ++i) {
      a->grad.data[i] += o->grad.data[i];
      b->grad.data[i] += o->grad.data[i];
    }
  };
  return o;
}

Var Tape::add_rowvec(Var a, Var b) {
  require(a->value.ndim() == 2, "add_rowvec: a must be 2-d");
  int m = a->value.rows(), n = a->value.cols();
  require(b->value.numel() == n, "add_rowvec: width mismatch");
  Tensor out = a->value;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += b->value.data[j];
  Var o = make(std::move(out));
  o->backward = [a, b, o, m, n] {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        a->grad.at(i, j) += o->grad.at(i, j);
        b->grad.data[j] += o->grad.at(i, j);
      }
  };
  return o;
}

Var Tape::sub(Var a, Var b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= b->value.data[i];
  Var o = make(std::move(out));
  o->backward = [a, b, o] {
    for (int64_t i = 0; i < o->grad.numel(); ++i) {
      a->grad.data[i] += o->grad.data[i];
      b->grad.data[i] -= o->grad.data[i];
    }
  };
  return o;
}

Var Tape::mul(Var a, Var b) {
  require(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= b->value.data[i];
  Var o = make(std::move(out));
  o->backward = [a, b, o] {
    for (int64_t i = 0; i < o->grad.numel(); ++i) {
      a->grad.data[i] += o->grad.data[i] * b->value.data[i];
      b->grad.data[i] += o->grad.data[i] * a->value.data[i];
    }
  };
  return o;
}

Var Tape::scale(Var a, double c) {
  Tensor out = a->value;
  for (auto& v : out.data) v *= c;
  Var o = make(std::move(out));
  o->backward = [a, o, c] {
    for (int64_t i = 0; i < o->grad.numel(); ++i)
      a->grad.data[i] += c * o->grad.data[i];
  };
  return o;
}

Var Tape::matmul(Var a, Var b) {
  require(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul: need 2-d");
  int m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
  require(b->value.rows() == k, "matmul: inner dimension mismatch " +
                                    a->value.shape_str() + " x " +
                                    b->value.shape_str());
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = a->value.at(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at(i, j) += av * b->value.at(p, j);
    }
  Var o = make(std::move(out));
  o->backward = [a, b, o, m, k, n] {
    // dA += dC * B^T ; dB += A^T * dC
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double g = o->grad.at(i, j);
        if (g == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          a->grad.at(i, p) += g * b->value.at(p, j);
          b->grad.at(p, j) += g * a->value.at(i, p);
        }
      }
  };
  return o;
}

Var Tape::transpose(Var a) {
  require(a->value.ndim() == 2, "transpose: need 2-d");
  int m = a->value.rows(), n = a->value.cols();
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a->value.at(i, j);
  Var o = make(std::move(out));
  o->backward = [a, o, m, n] {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) a->grad.at(i, j) += o->grad.at(j, i);
  };
  return o;
}

Var Tape::exp_(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = std::exp(v);
  Var o = make(std::move(out));
  o->backward = [a, o] {
    for (int64_t i = 0; i < o->grad.numel(); ++i)
      a->grad.data[i] += o->grad.data[i] * o->value.data[i];
  };
  return o;
}

Var Tape::log_(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = std::log(v);
  Var o = make(std::move(out));
  o->backward = [a, o] {
    for (int64_t i = 0; i < o->grad.numel(); ++i)
      a->grad.data[i] += o->grad.data[i] / a->value.data[i];
  };
  return o;
}

Var Tape::tanh_(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = std::tanh(v);
  Var o = make(std::move(out));
  o->backward = [a, o] {
    for (int64_t i = 0; i < o->grad.numel(); ++i)
      a->grad.data[i] += o->grad.data[i] * (1.0 - o->value.data[i] * o->value.data[i]);
  };
  return o;
}

Var Tape::relu(Var a) { return leaky_relu(a, 0.0); }

Var Tape::leaky_relu(Var a, double slope) {
  Tensor out = a->value;
  for (auto& v : out.data) v = v > 0.0 ? v : slope * v;
  Var o = make(std::move(out));
  o->backward = [a, o, slope] {
    for (int64_t i = 0; i < o->grad.numel(); ++i)
      a->grad.data[i] += o->grad.data[i] * (a->value.data[i] > 0.0 ? 1.0 : slope);
  };
  return o;
}

Var Tape::softmax_rows(Var a) {
  require(a->value.ndim() == 2, "softmax_rows: need 2-d");
  int m = a->value.rows(), n = a->value.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = a->value.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, a->value.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(a->value.at(i, j) - mx);
    for (int j = 0; j < n; ++j) out.at(i, j) = std::exp(a->value.at(i, j) - mx) / z;
  }
  Var o = make(std::move(out));
  o->backward = [a, o, m, n] {
    for (int i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += o->grad.at(i, j) * o->value.at(i, j);
      for (int j = 0; j < n; ++j)
        a->grad.at(i, j) += o->value.at(i, j) * (o->grad.at(i, j) - dot);
    }
  };
  return o;
}

Var Tape::sum_all(Var a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  Var o = make(Tensor::scalar(s));
  o->backward = [a, o] {
    for (auto& g : a->grad.data) g += o->grad.data[0];
  };
  return o;
}

Var Tape::mean_all(Var a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a->value.numel()));
}

Var Tape::sum_axis(Var a, int axis) {
  require(a->value.ndim() == 2 && (axis == 0 || axis == 1), "sum_axis: 2-d only");
  int m = a->value.rows(), n = a->value.cols();
  Tensor out(axis == 0 ? std::vector<int>{1, n} : std::vector<int>{m, 1});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[axis == 0 ? j : i] += a->value.at(i, j);
  Var o = make(std::move(out));
  o->backward = [a, o, m, n, axis] {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        a->grad.at(i, j) += o->grad.data[axis == 0 ? j : i];
  };
  return o;
}

Var Tape::mean_axis(Var a, int axis) {
  double denom = axis == 0 ? a->value.rows() : a->value.cols();
  return scale(sum_axis(a, axis), 1.0 / denom);
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input");
  int m = xs[0]->value.rows(), total = 0;
  for (Var x : xs) {
    require(x->value.ndim() == 2 && x->value.rows() == m,
            "concat_cols: row mismatch");
    total += x->value.cols();
  }
  Tensor out({m, total});
  int off = 0;
  for (Var x : xs) {
    int n = x->value.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(i, off + j) = x->value.at(i, j);
    off += n;
  }
  Var o = make(std::move(out));
  o->backward = [xs, o, m] {
    int off = 0;
    for (Var x : xs) {
      int n = x->value.cols();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) x->grad.at(i, j) += o->grad.at(i, off + j);
      off += n;
    }
  };
  return o;
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  require(a->value.ndim() == 2 && 0 <= r0 && r0 <= r1 && r1 <= a->value.rows(),
          "slice_rows: bad range");
  int n = a->value.cols();
  Tensor out({r1 - r0, n});
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < n; ++j) out.at(i - r0, j) = a->value.at(i, j);
  Var o = make(std::move(out));
  o->backward = [a, o, r0, r1, n] {
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < n; ++j) a->grad.at(i, j) += o->grad.at(i - r0, j);
  };
  return o;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  require(a->value.ndim() == 2 && 0 <= c0 && c0 <= c1 && c1 <= a->value.cols(),
          "slice_cols: bad range");
  int m = a->value.rows();
  Tensor out({m, c1 - c0});
  for (int i = 0; i < m; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a->value.at(i, j);
  Var o = make(std::move(out));
  o->backward = [a, o, c0, c1, m] {
    for (int i = 0; i < m; ++i)
      for (int j = c0; j < c1; ++j) a->grad.at(i, j) += o->grad.at(i, j - c0);
  };
  return o;
}

Var Tape::hadamard_mask(Var a, const Tensor& mask) {
  require(a->value.same_shape(mask), "hadamard_mask: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
  Var o = make(std::move(out));
  Tensor m = mask;
  o->backward = [a, o, m] {
    for (int64_t i = 0; i < o->grad.numel(); ++i)
      a->grad.data[i] += o->grad.data[i] * m.data[i];
  };
  return o;
}

Var Tape::add_n(const std::vector<Var>& xs) {
  require(!xs.empty(), "add_n: empty input");
  Var acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Var Tape::dropout(Var a, double p, Rng& rng, bool train) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (!train || p == 0.0) return a;
  Tensor mask(a->value.shape);
  double keep = 1.0 - p;
  for (auto& v : mask.data) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return hadamard_mask(a, mask);
}

Var Tape::batch_norm(Var x, Var gamma, Var beta, bool train,
                     Tensor* running_mean, Tensor* running_var,
                     double momentum, double eps) {
  require(x->value.ndim() == 2, "batch_norm: need 2-d");
  int m = x->value.rows(), n = x->value.cols();
  require(gamma->value.numel() == n && beta->value.numel() == n,
          "batch_norm: gamma/beta width mismatch");
  Tensor mean({n}), var({n});
  if (train) {
    for (int j = 0; j < n; ++j) {
      double mu = 0.0;
      for (int i = 0; i < m; ++i) mu += x->value.at(i, j);
      mu /= m;
      double v2 = 0.0;
      for (int i = 0; i < m; ++i) {
        double d = x->value.at(i, j) - mu;
        v2 += d * d;
      }
      mean.data[j] = mu;
      var.data[j] = v2 / m;
    }
    if (running_mean && running_var) {
      for (int j = 0; j < n; ++j) {
        running_mean->data[j] = (1 - momentum) * running_mean->data[j] + momentum * mean.data[j];
        running_var->data[j] = (1 - momentum) * running_var->data[j] + momentum * var.data[j];
      }
    }
  } else {
    require(running_mean && running_var, "batch_norm: eval needs running stats");
    mean = *running_mean;
    var = *running_var;
  }
  Tensor xhat({m, n});
  Tensor istd({n});
  for (int j = 0; j < n; ++j) istd.data[j] = 1.0 / std::sqrt(var.data[j] + eps);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      xhat.at(i, j) = (x->value.at(i, j) - mean.data[j]) * istd.data[j];
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.at(i, j) = gamma->value.data[j] * xhat.at(i, j) + beta->value.data[j];
  Var o = make(std::move(out));
  o->backward = [x, gamma, beta, o, xhat, istd, m, n, train] {
    for (int j = 0; j < n; ++j) {
      double dg = 0.0, db = 0.0;
      for (int i = 0; i < m; ++i) {
        dg += o->grad.at(i, j) * xhat.at(i, j);
        db += o->grad.at(i, j);
      }
      gamma->grad.data[j] += dg;
      beta->grad.data[j] += db;
      double g = gamma->value.data[j];
      if (train) {
        for (int i = 0; i < m; ++i) {
          double dxh = o->grad.at(i, j) * g;
          x->grad.at(i, j) += istd.data[j] * (dxh - db * g / m - xhat.at(i, j) * dg * g / m);
        }
      } else {
        for (int i = 0; i < m; ++i)
          x->grad.at(i, j) += o->grad.at(i, j) * g * istd.data[j];
      }
    }
  };
  return o;
}

Var Tape::gather_rows(Var h, const std::vector<int>& idx) {
  require(h->value.ndim() == 2, "gather_rows: need 2-d");
  int n = h->value.rows(), d = h->value.cols();
  for (int i : idx) require(0 <= i && i < n, "gather_rows: index out of range");
  Tensor out({static_cast<int>(idx.size()), d});
  for (size_t e = 0; e < idx.size(); ++e)
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(e), j) = h->value.at(idx[e], j);
  Var o = make(std::move(out));
  o->backward = [h, o, idx, d] {
    for (size_t e = 0; e < idx.size(); ++e)
      for (int j = 0; j < d; ++j)
        h->grad.at(idx[e], j) += o->grad.at(static_cast<int>(e), j);
  };
  return o;
}

Var Tape::scatter_add_rows(Var m, const std::vector<int>& idx, int num_rows) {
  require(m->value.ndim() == 2, "scatter_add_rows: need 2-d");
  require(m->value.rows() == static_cast<int>(idx.size()),
          "scatter_add_rows: index count mismatch");
  int d = m->value.cols();
  for (int i : idx) require(0 <= i && i < num_rows, "scatter_add_rows: index out of range");
  Tensor out({num_rows, d});
  for (size_t e = 0; e < idx.size(); ++e)
    for (int j = 0; j < d; ++j) out.at(idx[e], j) += m->value.at(static_cast<int>(e), j);
  Var o = make(std::move(out));
  o->backward = [m, o, idx, d] {
    for (size_t e = 0; e < idx.size(); ++e)
      for (int j = 0; j < d; ++j)
        m->grad.at(static_cast<int>(e), j) += o->grad.at(idx[e], j);
  };
  return o;
}

Var Tape::mul_col(Var a, Var s) {
  require(a->value.ndim() == 2 && s->value.rows() == a->value.rows() &&
              s->value.numel() == a->value.rows(),
          "mul_col: s must be [m,1] matching rows of a");
  int m = a->value.rows(), n = a->value.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = a->value.at(i, j) * s->value.data[i];
  Var o = make(std::move(out));
  o->backward = [a, s, o, m, n] {
    for (int i = 0; i < m; ++i) {
      double ds = 0.0;
      for (int j = 0; j < n; ++j) {
        a->grad.at(i, j) += o->grad.at(i, j) * s->value.data[i];
        ds += o->grad.at(i, j) * a->value.at(i, j);
      }
      s->grad.data[i] += ds;
    }
  };
  return o;
}

Var Tape::segment_softmax(Var logits, const std::vector<int>& seg, int num_segments) {
  int m = logits->value.rows();
  require(static_cast<int>(seg.size()) == m, "segment_softmax: segment count mismatch");
  std::vector<double> mx(num_segments, -1e300), z(num_segments, 0.0);
  for (int i = 0; i < m; ++i) mx[seg[i]] = std::max(mx[seg[i]], logits->value.data[i]);
  Tensor out({m, 1});
  for (int i = 0; i < m; ++i) {
    out.data[i] = std::exp(logits->value.data[i] - mx[seg[i]]);
    z[seg[i]] += out.data[i];
  }
  for (int i = 0; i < m; ++i) out.data[i] /= z[seg[i]];
  Var o = make(std::move(out));
  o->backward = [logits, o, seg, num_segments, m] {
    std::vector<double> dot(num_segments, 0.0);
    for (int i = 0; i < m; ++i) dot[seg[i]] += o->grad.data[i] * o->value.data[i];
    for (int i = 0; i < m; ++i)
      logits->grad.data[i] += o->value.data[i] * (o->grad.data[i] - dot[seg[i]]);
  };
  return o;
}

namespace {

// Cosine of two rows with the zero-norm convention; also emits the pieces
// the adjoint needs.
struct CosParts {
  double c, na, nb;
  bool live;
};

CosParts row_cosine(const Tensor& h, int u, int v) {
  int d = h.cols();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int j = 0; j < d; ++j) {
    double a = h.at(u, j), b = h.at(v, j);
    dot += a * b;
    na += a * a;
    nb += b * b;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < Tape::kEpsNorm || nb < Tape::kEpsNorm) return {0.0, na, nb, false};
  return {dot / (na * nb), na, nb, true};
}

}  // namespace

Var Tape::edge_cosine(Var h, const std::vector<int>& src,
                      const std::vector<int>& dst, bool detach) {
  require(src.size() == dst.size(), "edge_cosine: endpoint list mismatch");
  int e_count = static_cast<int>(src.size());
  int d = h->value.cols();
  Tensor out({e_count, 1});
  std::vector<CosParts> parts(e_count);
  for (int e = 0; e < e_count; ++e) {
    parts[e] = row_cosine(h->value, src[e], dst[e]);
    out.data[e] = parts[e].c;
  }
  Var o = make(std::move(out));
  if (!detach) {
    o->backward = [h, o, src, dst, parts, d, e_count] {
      for (int e = 0; e < e_count; ++e) {
        const auto& p = parts[e];
        if (!p.live) continue;
        double g = o->grad.data[e];
        if (g == 0.0) continue;
        int u = src[e], v = dst[e];
        for (int j = 0; j < d; ++j) {
          double a = h->value.at(u, j), b = h->value.at(v, j);
          h->grad.at(u, j) += g * (b / (p.na * p.nb) - p.c * a / (p.na * p.na));
          h->grad.at(v, j) += g * (a / (p.na * p.nb) - p.c * b / (p.nb * p.nb));
        }
      }
    };
  }
  return o;
}

Var Tape::cosine_matrix(Var h, bool detach) {
  require(h->value.ndim() == 2, "cosine_matrix: need 2-d");
  int n = h->value.rows(), d = h->value.cols();
  Tensor out({n, n});
  std::vector<CosParts> parts(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      parts[u * n + v] = row_cosine(h->value, u, v);
      out.at(u, v) = parts[u * n + v].c;
    }
  Var o = make(std::move(out));
  if (!detach) {
    o->backward = [h, o, parts, n, d] {
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          const auto& p = parts[u * n + v];
          if (!p.live) continue;
          double g = o->grad.at(u, v);
          if (g == 0.0) continue;
          for (int j = 0; j < d; ++j) {
            double a = h->value.at(u, j), b = h->value.at(v, j);
            h->grad.at(u, j) += g * (b / (p.na * p.nb) - p.c * a / (p.na * p.na));
            h->grad.at(v, j) += g * (a / (p.na * p.nb) - p.c * b / (p.nb * p.nb));
          }
        }
    };
  }
  return o;
}

Var Tape::masked_cross_entropy(Var logits, const std::vector<int>& labels,
                               const std::vector<bool>& mask) {
  require(logits->value.ndim() == 2, "masked_cross_entropy: need 2-d");
  int n = logits->value.rows(), c = logits->value.cols();
  require(static_cast<int>(labels.size()) == n &&
              static_cast<int>(mask.size()) == n,
          "masked_cross_entropy: label/mask length mismatch");
  int count = 0;
  double loss = 0.0;
  Tensor probs({n, c});
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    require(0 <= labels[i] && labels[i] < c, "masked_cross_entropy: label out of range");
    double mx = logits->value.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits->value.at(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(logits->value.at(i, j) - mx);
    for (int j = 0; j < c; ++j) probs.at(i, j) = std::exp(logits->value.at(i, j) - mx) / z;
    loss -= std::log(std::max(probs.at(i, labels[i]), 1e-300));
    ++count;
  }
  require(count > 0, "masked_cross_entropy: empty mask");
  Var o = make(Tensor::scalar(loss / count));
  o->backward = [logits, o, labels, mask, probs, n, c, count] {
    double g = o->grad.data[0] / count;
    for (int i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      for (int j = 0; j < c; ++j)
        logits->grad.at(i, j) += g * (probs.at(i, j) - (j == labels[i] ? 1.0 : 0.0));
    }
  };
  return o;
}

Var Tape::conv2d(Var x, Var w, Var bias) {
  require(x->value.ndim() == 3 && w->value.ndim() == 4, "conv2d: shapes");
  int H = x->value.shape[0], W = x->value.shape[1], Cin = x->value.shape[2];
  int kh = w->value.shape[0], kw = w->value.shape[1];
  require(w->value.shape[2] == Cin, "conv2d: channel mismatch");
  int Cout = w->value.shape[3];
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d: odd kernels only");
  require(bias->value.numel() == Cout, "conv2d: bias size");
  int ph = kh / 2, pw = kw / 2;
  Tensor out({H, W, Cout});
  auto widx = [kw, Cin, Cout](int a, int b, int ci, int co) {
    return ((a * kw + b) * Cin + ci) * Cout + co;
  };
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int co = 0; co < Cout; ++co) {
        double s = bias->value.data[co];
        for (int a = 0; a < kh; ++a) {
          int ii = i + a - ph;
          if (ii < 0 || ii >= H) continue;
          for (int b = 0; b < kw; ++b) {
            int jj = j + b - pw;
            if (jj < 0 || jj >= W) continue;
            for (int ci = 0; ci < Cin; ++ci)
              s += x->value.at(ii, jj, ci) * w->value.data[widx(a, b, ci, co)];
          }
        }
        out.at(i, j, co) = s;
      }
  Var o = make(std::move(out));
  o->backward = [x, w, bias, o, H, W, Cin, Cout, kh, kw, ph, pw, widx] {
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        for (int co = 0; co < Cout; ++co) {
          double g = o->grad.at(i, j, co);
          if (g == 0.0) continue;
          bias->grad.data[co] += g;
          for (int a = 0; a < kh; ++a) {
            int ii = i + a - ph;
            if (ii < 0 || ii >= H) continue;
            for (int b = 0; b < kw; ++b) {
              int jj = j + b - pw;
              if (jj < 0 || jj >= W) continue;
              for (int ci = 0; ci < Cin; ++ci) {
                x->grad.at(ii, jj, ci) += g * w->value.data[widx(a, b, ci, co)];
                w->grad.data[widx(a, b, ci, co)] += g * x->value.at(ii, jj, ci);
              }
            }
          }
        }
  };
  return o;
}

Var Tape::slice_channels(Var x, int c0, int c1) {
  require(x->value.ndim() == 3, "slice_channels: need 3-d input");
  int H = x->value.shape[0], W = x->value.shape[1], C = x->value.shape[2];
  require(0 <= c0 && c0 < c1 && c1 <= C, "slice_channels: bad range");
  Tensor out({H, W, c1 - c0});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int c = c0; c < c1; ++c) out.at(i, j, c - c0) = x->value.at(i, j, c);
  Var o = make(std::move(out));
  o->backward = [x, o, H, W, c0, c1] {
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        for (int c = c0; c < c1; ++c)
          x->grad.at(i, j, c) += o->grad.at(i, j, c - c0);
  };
  return o;
}

std::map<std::string, Tensor> Tape::grad(Var loss) {
  require(loss->value.numel() == 1, "grad: loss must be scalar");
  for (auto& n : nodes_) std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
  loss->grad.data[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if ((*it)->backward) (*it)->backward();
  std::map<std::string, Tensor> out;
  for (auto& [name, v] : params_) out[name] = v->grad;
  return out;
}

void adamw_step(ParamStore& params, const std::map<std::string, Tensor>& grads,
                AdamWState& state, const AdamWConfig& cfg) {
  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params.values) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    if (!g.same_shape(p)) throw std::invalid_argument("adamw_step: shape mismatch for " + name);
    Tensor& m = state.m.try_emplace(name, Tensor(p.shape)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(p.shape)).first->second;
    for (int64_t i = 0; i < p.numel(); ++i) {
      p.data[i] *= 1.0 - cfg.lr * cfg.weight_decay;  // decoupled decay
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace hetmp
