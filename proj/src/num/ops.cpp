#include "bit/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace bit::num {

namespace {

Array transpose2d(const Array& a) {
    Array t({a.dim(1), a.dim(0)});
    for (int64_t i = 0; i < a.dim(0); ++i)
        for (int64_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

void require_2d(const Array& a, const char* who) {
    if (a.ndim() != 2) throw NumericError(std::string(who) + ": expected 2-d array, got " + shape_str(a.shape()));
}

Tensor finish(Array v, std::vector<Tensor> inputs, std::function<void(Node&)> bw, const char* op) {
    check_finite(v, op);
    return Tensor::make(std::move(v), std::move(inputs), std::move(bw), op);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Array matmul_plain(const Array& a, const Array& b, bool ta, bool tb) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    Array acopy, bcopy;
    const Array* ap = &a;
    const Array* bp = &b;
    if (ta) {
        acopy = transpose2d(a);
        ap = &acopy;
    }
    if (tb) {
        bcopy = transpose2d(b);
        bp = &bcopy;
    }
    const int64_t m = ap->dim(0), k = ap->dim(1), k2 = bp->dim(0), n = bp->dim(1);
    if (k != k2)
        throw NumericError("matmul: inner dimensions disagree " + shape_str(ap->shape()) + " x " +
                           shape_str(bp->shape()));
    Array c({m, n});
    const double* A = ap->data();
    const double* B = bp->data();
    double* C = c.data();
    for (int64_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = B + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

std::vector<double> stable_softmax(const std::vector<double>& logits,
                                   const std::vector<uint8_t>* mask) {
    const size_t n = logits.size();
    if (mask && mask->size() != n) throw NumericError("stable_softmax: mask length mismatch");
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i)
        if (!mask || (*mask)[i]) mx = std::max(mx, logits[i]);
    if (!std::isfinite(mx)) throw NumericError("stable_softmax: all entries masked");
    std::vector<double> p(n, 0.0);
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!mask || (*mask)[i]) {
            p[i] = std::exp(logits[i] - mx);
            z += p[i];
        }
    }
    for (auto& v : p) v /= z;
    return p;
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.value().same_shape(b.value())) throw NumericError("add: shape mismatch");
    Array v = a.value();
    const double* bb = b.value().data();
    for (int64_t i = 0; i < v.size(); ++i) v[i] += bb[i];
    return finish(std::move(v), {a, b},
                  [a, b](Node& n) {
                      if (a.node()->requires_grad) a.node()->accumulate(n.grad);
                      if (b.node()->requires_grad) b.node()->accumulate(n.grad);
                  },
                  "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.value().same_shape(b.value())) throw NumericError("sub: shape mismatch");
    Array v = a.value();
    const double* bb = b.value().data();
    for (int64_t i = 0; i < v.size(); ++i) v[i] -= bb[i];
    return finish(std::move(v), {a, b},
                  [a, b](Node& n) {
                      if (a.node()->requires_grad) a.node()->accumulate(n.grad);
                      if (b.node()->requires_grad) {
                          Node* bn = b.node();
                          bn->ensure_grad();
                          for (int64_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
                      }
                  },
                  "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.value().same_shape(b.value())) throw NumericError("mul: shape mismatch");
    Array v = a.value();
    const double* bb = b.value().data();
    for (int64_t i = 0; i < v.size(); ++i) v[i] *= bb[i];
    return finish(std::move(v), {a, b},
                  [a, b](Node& n) {
                      if (a.node()->requires_grad) {
                          Node* an = a.node();
                          an->ensure_grad();
                          const double* bv = b.value().data();
                          for (int64_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bv[i];
                      }
                      if (b.node()->requires_grad) {
                          Node* bn = b.node();
                          bn->ensure_grad();
                          const double* av = a.value().data();
                          for (int64_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * av[i];
                      }
                  },
                  "mul");
}

Tensor scale(const Tensor& a, double c) {
    Array v = a.value();
    for (int64_t i = 0; i < v.size(); ++i) v[i] *= c;
    return finish(std::move(v), {a},
                  [a, c](Node& n) {
                      Node* an = a.node();
                      an->ensure_grad();
                      for (int64_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * c;
                  },
                  "scale");
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require_2d(x.value(), "add_rowvec");
    const int64_t n = x.value().dim(0), d = x.value().dim(1);
    if (b.value().size() != d) throw NumericError("add_rowvec: vector length mismatch");
    Array v = x.value();
    const double* bv = b.value().data();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) v.at(i, j) += bv[j];
    return finish(std::move(v), {x, b},
                  [x, b, n, d](Node& nd) {
                      if (x.node()->requires_grad) x.node()->accumulate(nd.grad);
                      if (b.node()->requires_grad) {
                          Node* bn = b.node();
                          bn->ensure_grad();
                          for (int64_t i = 0; i < n; ++i)
                              for (int64_t j = 0; j < d; ++j) bn->grad[j] += nd.grad.at(i, j);
                      }
                  },
                  "add_rowvec");
}

Tensor mul_const(const Tensor& a, const Array& c) {
    if (!a.value().same_shape(c)) throw NumericError("mul_const: shape mismatch");
    Array v = a.value();
    const double* cc = c.data();
    for (int64_t i = 0; i < v.size(); ++i) v[i] *= cc[i];
    Array ccopy = c;
    return finish(std::move(v), {a},
                  [a, ccopy](Node& n) {
                      Node* an = a.node();
                      an->ensure_grad();
                      const double* cv = ccopy.data();
                      for (int64_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * cv[i];
                  },
                  "mul_const");
}

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    Array v = matmul_plain(a.value(), b.value(), ta, tb);
    return finish(std::move(v), {a, b},
                  [a, b, ta, tb](Node& n) {
                      const Array& g = n.grad;
                      if (a.node()->requires_grad) {
                          Array da = ta ? (tb ? matmul_plain(b.value(), g, true, true)
                                              : matmul_plain(b.value(), g, false, true))
                                        : (tb ? matmul_plain(g, b.value(), false, false)
                                              : matmul_plain(g, b.value(), false, true));
                          a.node()->accumulate(da);
                      }
                      if (b.node()->requires_grad) {
                          Array db = tb ? (ta ? matmul_plain(g, a.value(), true, true)
                                              : matmul_plain(g, a.value(), true, false))
                                        : (ta ? matmul_plain(a.value(), g, false, false)
                                              : matmul_plain(a.value(), g, true, false));
                          b.node()->accumulate(db);
                      }
                  },
                  "matmul");
}

Tensor gelu(const Tensor& x) {
    Array v = x.value();
    for (int64_t i = 0; i < v.size(); ++i) {
        const double xv = v[i];
        const double u = kGeluC * (xv + kGeluA * xv * xv * xv);
        v[i] = 0.5 * xv * (1.0 + std::tanh(u));
    }
    return finish(std::move(v), {x},
                  [x](Node& n) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      const double* xv = x.value().data();
                      for (int64_t i = 0; i < n.grad.size(); ++i) {
                          const double xi = xv[i];
                          const double u = kGeluC * (xi + kGeluA * xi * xi * xi);
                          const double t = std::tanh(u);
                          const double sech2 = 1.0 - t * t;
                          const double du = kGeluC * (1.0 + 3.0 * kGeluA * xi * xi);
                          xn->grad[i] += n.grad[i] * (0.5 * (1.0 + t) + 0.5 * xi * sech2 * du);
                      }
                  },
                  "gelu");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_2d(x.value(), "layer_norm");
    const int64_t n = x.value().dim(0), d = x.value().dim(1);
    if (gamma.value().size() != d || beta.value().size() != d)
        throw NumericError("layer_norm: gamma/beta length mismatch");
    Array v({n, d});
    Array yhat({n, d});   // normalized rows, saved for backward
    Array inv_sd({n});
    for (int64_t i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += x.value().at(i, j);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = x.value().at(i, j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double isd = 1.0 / std::sqrt(var + eps);
        inv_sd[i] = isd;
        for (int64_t j = 0; j < d; ++j) {
            const double y = (x.value().at(i, j) - mean) * isd;
            yhat.at(i, j) = y;
            v.at(i, j) = gamma.value()[j] * y + beta.value()[j];
        }
    }
    return finish(std::move(v), {x, gamma, beta},
                  [x, gamma, beta, yhat, inv_sd, n, d](Node& nd) {
                      Node* gn = gamma.node();
                      Node* bn = beta.node();
                      if (gn->requires_grad) gn->ensure_grad();
                      if (bn->requires_grad) bn->ensure_grad();
                      Node* xn = x.node();
                      if (xn->requires_grad) xn->ensure_grad();
                      for (int64_t i = 0; i < n; ++i) {
                          double mean_dy = 0.0, mean_dyy = 0.0;
                          for (int64_t j = 0; j < d; ++j) {
                              const double g = nd.grad.at(i, j);
                              const double y = yhat.at(i, j);
                              if (gn->requires_grad) gn->grad[j] += g * y;
                              if (bn->requires_grad) bn->grad[j] += g;
                              const double dy = g * gamma.value()[j];
                              mean_dy += dy;
                              mean_dyy += dy * y;
                          }
                          if (!xn->requires_grad) continue;
                          mean_dy /= static_cast<double>(d);
                          mean_dyy /= static_cast<double>(d);
                          for (int64_t j = 0; j < d; ++j) {
                              const double dy = nd.grad.at(i, j) * gamma.value()[j];
                              xn->grad.at(i, j) += inv_sd[i] * (dy - mean_dy - yhat.at(i, j) * mean_dyy);
                          }
                      }
                  },
                  "layer_norm");
}

Tensor softmax_rows(const Tensor& x, const std::vector<uint8_t>* key_mask,
                    const std::vector<uint8_t>* query_mask) {
    require_2d(x.value(), "softmax_rows");
    const int64_t n = x.value().dim(0), m = x.value().dim(1);
    if (key_mask && static_cast<int64_t>(key_mask->size()) != m)
        throw NumericError("softmax_rows: key mask length mismatch");
    if (query_mask && static_cast<int64_t>(query_mask->size()) != n)
        throw NumericError("softmax_rows: query mask length mismatch");
    Array v({n, m});
    std::vector<double> row(static_cast<size_t>(m));
    for (int64_t i = 0; i < n; ++i) {
        if (query_mask && !(*query_mask)[static_cast<size_t>(i)]) continue;  // row stays 0
        for (int64_t j = 0; j < m; ++j) row[static_cast<size_t>(j)] = x.value().at(i, j);
        auto p = stable_softmax(row, key_mask);
        for (int64_t j = 0; j < m; ++j) v.at(i, j) = p[static_cast<size_t>(j)];
    }
    Array saved = v;
    return finish(std::move(v), {x},
                  [x, saved, n, m](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      for (int64_t i = 0; i < n; ++i) {
                          double dot = 0.0;
                          for (int64_t j = 0; j < m; ++j) dot += nd.grad.at(i, j) * saved.at(i, j);
                          for (int64_t j = 0; j < m; ++j) {
                              const double p = saved.at(i, j);
                              if (p != 0.0) xn->grad.at(i, j) += p * (nd.grad.at(i, j) - dot);
                          }
                      }
                  },
                  "softmax_rows");
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    require_2d(table.value(), "embedding");
    const int64_t v = table.value().dim(0), d = table.value().dim(1);
    const int64_t n = static_cast<int64_t>(ids.size());
    for (int id : ids)
        if (id < 0 || id >= v) throw NumericError("embedding: id " + std::to_string(id) + " out of vocabulary");
    Array out({n, d});
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * d, table.value().data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d,
                    static_cast<size_t>(d) * sizeof(double));
    return finish(std::move(out), {table},
                  [table, ids, d](Node& nd) {
                      Node* tn = table.node();
                      tn->ensure_grad();
                      for (size_t i = 0; i < ids.size(); ++i) {
                          double* dst = tn->grad.data() + static_cast<int64_t>(ids[i]) * d;
                          const double* src = nd.grad.data() + static_cast<int64_t>(i) * d;
                          for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
                      }
                  },
                  "embedding");
}

Tensor select_rows(const Tensor& x, const std::vector<int>& idx) {
    require_2d(x.value(), "select_rows");
    const int64_t n = x.value().dim(0), d = x.value().dim(1);
    for (int i : idx)
        if (i < 0 || i >= n) throw NumericError("select_rows: row index out of range");
    Array out({static_cast<int64_t>(idx.size()), d});
    for (size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.data() + static_cast<int64_t>(i) * d,
                    x.value().data() + static_cast<int64_t>(idx[i]) * d, static_cast<size_t>(d) * sizeof(double));
    return finish(std::move(out), {x},
                  [x, idx, d](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      for (size_t i = 0; i < idx.size(); ++i) {
                          double* dst = xn->grad.data() + static_cast<int64_t>(idx[i]) * d;
                          const double* src = nd.grad.data() + static_cast<int64_t>(i) * d;
                          for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
                      }
                  },
                  "select_rows");
}

Tensor merge_rows(const std::vector<RowPart>& parts, int64_t n_rows) {
    if (parts.empty()) throw NumericError("merge_rows: no parts");
    const int64_t d = parts[0].rows.value().dim(1);
    Array out({n_rows, d});
    std::vector<uint8_t> covered(static_cast<size_t>(n_rows), 0);
    std::vector<Tensor> inputs;
    for (const auto& p : parts) {
        require_2d(p.rows.value(), "merge_rows");
        if (p.rows.value().dim(1) != d) throw NumericError("merge_rows: column mismatch");
        if (p.rows.value().dim(0) != static_cast<int64_t>(p.idx->size()))
            throw NumericError("merge_rows: index/row count mismatch");
        for (size_t i = 0; i < p.idx->size(); ++i) {
            const int r = (*p.idx)[i];
            if (r < 0 || r >= n_rows) throw NumericError("merge_rows: target row out of range");
            if (covered[static_cast<size_t>(r)]) throw NumericError("merge_rows: row covered twice");
            covered[static_cast<size_t>(r)] = 1;
            std::memcpy(out.data() + static_cast<int64_t>(r) * d,
                        p.rows.value().data() + static_cast<int64_t>(i) * d,
                        static_cast<size_t>(d) * sizeof(double));
        }
        inputs.push_back(p.rows);
    }
    for (int64_t r = 0; r < n_rows; ++r)
        if (!covered[static_cast<size_t>(r)]) throw NumericError("merge_rows: row left uncovered");
    // Copy index vectors for the closure; callers may pass temporaries.
    std::vector<std::vector<int>> idxs;
    idxs.reserve(parts.size());
    for (const auto& p : parts) idxs.push_back(*p.idx);
    return finish(std::move(out), std::move(inputs),
                  [idxs, d](Node& nd) {
                      for (size_t pi = 0; pi < idxs.size(); ++pi) {
                          Node* part = nd.inputs[pi].get();
                          if (!part->requires_grad) continue;
                          part->ensure_grad();
                          for (size_t i = 0; i < idxs[pi].size(); ++i) {
                              const double* src = nd.grad.data() + static_cast<int64_t>(idxs[pi][i]) * d;
                              double* dst = part->grad.data() + static_cast<int64_t>(i) * d;
                              for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
                          }
                      }
                  },
                  "merge_rows");
}

Tensor slice_cols(const Tensor& x, int64_t start, int64_t len) {
    require_2d(x.value(), "slice_cols");
    const int64_t n = x.value().dim(0), d = x.value().dim(1);
    if (start < 0 || len <= 0 || start + len > d) throw NumericError("slice_cols: range out of bounds");
    Array out({n, len});
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * len, x.value().data() + i * d + start, static_cast<size_t>(len) * sizeof(double));
    return finish(std::move(out), {x},
                  [x, start, len, d](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      const int64_t n = nd.grad.dim(0);
                      for (int64_t i = 0; i < n; ++i) {
                          double* dst = xn->grad.data() + i * d + start;
                          const double* src = nd.grad.data() + i * len;
                          for (int64_t j = 0; j < len; ++j) dst[j] += src[j];
                      }
                  },
                  "slice_cols");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw NumericError("concat_cols: no parts");
    const int64_t n = parts[0].value().dim(0);
    int64_t total = 0;
    for (const auto& p : parts) {
        require_2d(p.value(), "concat_cols");
        if (p.value().dim(0) != n) throw NumericError("concat_cols: row mismatch");
        total += p.value().dim(1);
    }
    Array out({n, total});
    int64_t off = 0;
    std::vector<int64_t> offsets;
    std::vector<int64_t> widths;
    for (const auto& p : parts) {
        const int64_t w = p.value().dim(1);
        offsets.push_back(off);
        widths.push_back(w);
        for (int64_t i = 0; i < n; ++i)
            std::memcpy(out.data() + i * total + off, p.value().data() + i * w,
                        static_cast<size_t>(w) * sizeof(double));
        off += w;
    }
    return finish(std::move(out), parts,
                  [offsets, widths, total, n](Node& nd) {
                      for (size_t pi = 0; pi < offsets.size(); ++pi) {
                          Node* part = nd.inputs[pi].get();
                          if (!part->requires_grad) continue;
                          part->ensure_grad();
                          const int64_t w = widths[pi], o = offsets[pi];
                          for (int64_t i = 0; i < n; ++i) {
                              const double* src = nd.grad.data() + i * total + o;
                              double* dst = part->grad.data() + i * w;
                              for (int64_t j = 0; j < w; ++j) dst[j] += src[j];
                          }
                      }
                  },
                  "concat_cols");
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (int64_t i = 0; i < x.value().size(); ++i) s += x.value()[i];
    return finish(Array::scalar(s), {x},
                  [x](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      const double g = nd.grad[0];
                      for (int64_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
                  },
                  "sum_all");
}

Tensor mean_all(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.value().size());
    double s = 0.0;
    for (int64_t i = 0; i < x.value().size(); ++i) s += x.value()[i];
    return finish(Array::scalar(s * inv), {x},
                  [x, inv](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      const double g = nd.grad[0] * inv;
                      for (int64_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
                  },
                  "mean_all");
}

Tensor mean_sq(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.value().size());
    double s = 0.0;
    for (int64_t i = 0; i < x.value().size(); ++i) s += x.value()[i] * x.value()[i];
    return finish(Array::scalar(s * inv), {x},
                  [x, inv](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      const double g = 2.0 * nd.grad[0] * inv;
                      for (int64_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g * x.value()[i];
                  },
                  "mean_sq");
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
    require_2d(x.value(), "l2_normalize_rows");
    const int64_t n = x.value().dim(0), d = x.value().dim(1);
    Array v({n, d});
    Array inv_norm({n});
    for (int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < d; ++j) s += x.value().at(i, j) * x.value().at(i, j);
        const double r = std::max(std::sqrt(s), eps);
        inv_norm[i] = 1.0 / r;
        for (int64_t j = 0; j < d; ++j) v.at(i, j) = x.value().at(i, j) * inv_norm[i];
    }
    Array saved = v;
    return finish(std::move(v), {x},
                  [x, saved, inv_norm, n, d](Node& nd) {
                      Node* xn = x.node();
                      xn->ensure_grad();
                      for (int64_t i = 0; i < n; ++i) {
                          double dot = 0.0;
                          for (int64_t j = 0; j < d; ++j) dot += nd.grad.at(i, j) * saved.at(i, j);
                          for (int64_t j = 0; j < d; ++j)
                              xn->grad.at(i, j) += inv_norm[i] * (nd.grad.at(i, j) - saved.at(i, j) * dot);
                      }
                  },
                  "l2_normalize_rows");
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
    require_2d(logits.value(), "cross_entropy_rows");
    const int64_t m = logits.value().dim(0), c = logits.value().dim(1);
    if (static_cast<int64_t>(targets.size()) != m)
        throw NumericError("cross_entropy_rows: target count mismatch");
    for (int t : targets)
        if (t < 0 || t >= c) throw NumericError("cross_entropy_rows: target out of range");
    double total = 0.0;
    Array probs({m, c});
    for (int64_t i = 0; i < m; ++i) {
        double mx = logits.value().at(i, 0);
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, logits.value().at(i, j));
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) z += std::exp(logits.value().at(i, j) - mx);
        const double lse = mx + std::log(z);
        total += lse - logits.value().at(i, static_cast<int64_t>(targets[static_cast<size_t>(i)]));
        for (int64_t j = 0; j < c; ++j) probs.at(i, j) = std::exp(logits.value().at(i, j) - lse);
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    return finish(Array::scalar(total * inv_m), {logits},
                  [logits, targets, probs, m, c, inv_m](Node& nd) {
                      Node* ln = logits.node();
                      ln->ensure_grad();
                      const double g = nd.grad[0] * inv_m;
                      for (int64_t i = 0; i < m; ++i)
                          for (int64_t j = 0; j < c; ++j) {
                              double v = probs.at(i, j);
                              if (j == targets[static_cast<size_t>(i)]) v -= 1.0;
                              ln->grad.at(i, j) += g * v;
                          }
                  },
                  "cross_entropy_rows");
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
    const int64_t m = logits.value().size();
    if (static_cast<int64_t>(targets.size()) != m)
        throw NumericError("bce_with_logits: target count mismatch");
    double total = 0.0;
    for (int64_t i = 0; i < m; ++i) {
        const double z = logits.value()[i];
        const double y = targets[static_cast<size_t>(i)];
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    return finish(Array::scalar(total * inv_m), {logits},
                  [logits, targets, m, inv_m](Node& nd) {
                      Node* ln = logits.node();
                      ln->ensure_grad();
                      const double g = nd.grad[0] * inv_m;
                      for (int64_t i = 0; i < m; ++i) {
                          const double z = logits.value()[i];
                          const double s = 1.0 / (1.0 + std::exp(-z));
                          ln->grad[i] += g * (s - targets[static_cast<size_t>(i)]);
                      }
                  },
                  "bce_with_logits");
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw NumericError("dropout: rate must be < 1");
    Array mask(x.value().shape());
    const double keep = 1.0 / (1.0 - rate);
    for (int64_t i = 0; i < mask.size(); ++i) mask[i] = (rng.uniform() >= rate) ? keep : 0.0;
    return mul_const(x, mask);
}

// ---------------------------------------------------------------------------
// Pairwise bias primitives
// ---------------------------------------------------------------------------

Tensor pair_gather(const Tensor& table, int head, const IntMatPtr& buckets, const ByteMatPtr& mask) {
    require_2d(table.value(), "pair_gather");
    const int64_t n = static_cast<int64_t>(mask->size());
    const int64_t nbuckets = table.value().dim(0);
    Array out({n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (!(*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
            const int b = (*buckets)[static_cast<size_t>(i)][static_cast<size_t>(j)];
            if (b < 0 || b >= nbuckets) throw NumericError("pair_gather: bucket out of range");
            out.at(i, j) = table.value().at(b, head);
        }
    return finish(std::move(out), {table},
                  [table, head, buckets, mask, n](Node& nd) {
                      Node* tn = table.node();
                      tn->ensure_grad();
                      const int64_t h = tn->value.dim(1);
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < n; ++j) {
                              if (!(*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
                              const int b = (*buckets)[static_cast<size_t>(i)][static_cast<size_t>(j)];
                              tn->grad[b * h + head] += nd.grad.at(i, j);
                          }
                  },
                  "pair_gather");
}

Tensor pair_fill(const Tensor& scalars, int head, const ByteMatPtr& mask) {
    const int64_t n = static_cast<int64_t>(mask->size());
    Array out({n, n});
    const double s = scalars.value()[head];
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
            if ((*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) out.at(i, j) = s;
    return finish(std::move(out), {scalars},
                  [scalars, head, mask, n](Node& nd) {
                      Node* sn = scalars.node();
                      sn->ensure_grad();
                      double acc = 0.0;
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < n; ++j)
                              if ((*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) acc += nd.grad.at(i, j);
                      sn->grad[head] += acc;
                  },
                  "pair_fill");
}

Tensor edge_path_bias(const Tensor& emb, const Tensor& w, int head, const PairPathsPtr& paths,
                      const ByteMatPtr& mask) {
    require_2d(emb.value(), "edge_path_bias");
    if (w.value().ndim() != 3) throw NumericError("edge_path_bias: w must be [heads, p_max, de]");
    const int64_t n = paths->n;
    const int64_t de = emb.value().dim(1);
    const int64_t p_max = w.value().dim(1);
    if (w.value().dim(2) != de) throw NumericError("edge_path_bias: embedding width mismatch");
    Array out({n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (!(*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
            const int64_t o0 = paths->offsets[static_cast<size_t>(i * n + j)];
            const int64_t o1 = paths->offsets[static_cast<size_t>(i * n + j) + 1];
            const int64_t len = o1 - o0;
            if (len == 0) continue;
            if (len > p_max) throw NumericError("edge_path_bias: path longer than p_max");
            double acc = 0.0;
            for (int64_t p = 0; p < len; ++p) {
                const int ord = paths->orders[static_cast<size_t>(o0 + p)];
                const double* e = emb.value().data() + ord * de;
                const double* wp = w.value().data() + (head * p_max + p) * de;
                for (int64_t k = 0; k < de; ++k) acc += e[k] * wp[k];
            }
            out.at(i, j) = acc / static_cast<double>(len);
        }
    return finish(std::move(out), {emb, w},
                  [emb, w, head, paths, mask, n, de, p_max](Node& nd) {
                      Node* en = emb.node();
                      Node* wn = w.node();
                      if (en->requires_grad) en->ensure_grad();
                      if (wn->requires_grad) wn->ensure_grad();
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < n; ++j) {
                              if (!(*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
                              const int64_t o0 = paths->offsets[static_cast<size_t>(i * n + j)];
                              const int64_t o1 = paths->offsets[static_cast<size_t>(i * n + j) + 1];
                              const int64_t len = o1 - o0;
                              if (len == 0) continue;
                              const double g = nd.grad.at(i, j) / static_cast<double>(len);
                              if (g == 0.0) continue;
                              for (int64_t p = 0; p < len; ++p) {
                                  const int ord = paths->orders[static_cast<size_t>(o0 + p)];
                                  const double* e = emb.value().data() + ord * de;
                                  const double* wp = w.value().data() + (head * p_max + p) * de;
                                  if (en->requires_grad) {
                                      double* ge = en->grad.data() + ord * de;
                                      for (int64_t k = 0; k < de; ++k) ge[k] += g * wp[k];
                                  }
                                  if (wn->requires_grad) {
                                      double* gw = wn->grad.data() + (head * p_max + p) * de;
                                      for (int64_t k = 0; k < de; ++k) gw[k] += g * e[k];
                                  }
                              }
                          }
                  },
                  "edge_path_bias");
}

Tensor gauss_bias(const Tensor& means, const Tensor& widths, const Tensor& proj, int head,
                  const Array& dist, const ByteMatPtr& mask) {
    const int64_t kk = means.value().size();
    if (widths.value().size() != kk) throw NumericError("gauss_bias: widths length mismatch");
    require_2d(proj.value(), "gauss_bias");
    if (proj.value().dim(0) != kk) throw NumericError("gauss_bias: proj rows mismatch");
    const int64_t n = dist.dim(0);
    Array out({n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (!(*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
            const double d = dist.at(i, j);
            double acc = 0.0;
            for (int64_t k = 0; k < kk; ++k) {
                const double s = std::sqrt(widths.value()[k] * widths.value()[k] + 1e-6);
                const double z = (d - means.value()[k]) / s;
                acc += proj.value().at(k, head) * std::exp(-0.5 * z * z);
            }
            out.at(i, j) = acc;
        }
    Array dist_copy = dist;
    return finish(std::move(out), {means, widths, proj},
                  [means, widths, proj, head, dist_copy, mask, n, kk](Node& nd) {
                      Node* mn = means.node();
                      Node* wn = widths.node();
                      Node* pn = proj.node();
                      if (mn->requires_grad) mn->ensure_grad();
                      if (wn->requires_grad) wn->ensure_grad();
                      if (pn->requires_grad) pn->ensure_grad();
                      for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < n; ++j) {
                              if (!(*mask)[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
                              const double g = nd.grad.at(i, j);
                              if (g == 0.0) continue;
                              const double d = dist_copy.at(i, j);
                              for (int64_t k = 0; k < kk; ++k) {
                                  const double wv = widths.value()[k];
                                  const double s = std::sqrt(wv * wv + 1e-6);
                                  const double z = (d - means.value()[k]) / s;
                                  const double e = std::exp(-0.5 * z * z);
                                  const double pv = proj.value().at(k, head);
                                  if (pn->requires_grad) pn->grad.at(k, head) += g * e;
                                  if (mn->requires_grad) mn->grad[k] += g * pv * e * z / s;
                                  if (wn->requires_grad) wn->grad[k] += g * pv * e * z * z / s * (wv / s);
                              }
                          }
                  },
                  "gauss_bias");
}

}  // namespace bit::num
