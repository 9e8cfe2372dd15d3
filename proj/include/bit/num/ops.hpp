#pragma once

#include <cstdint>
#include <vector>

#include "bit/num/rng.hpp"
#include "bit/num/tape.hpp"

namespace bit::num {

// ---------------------------------------------------------------------------
// Plain kernels (no autodiff)
// ---------------------------------------------------------------------------

// c = op(a, b) with optional transposes; a: [m,k] (or [k,m] if ta), b: [k,n]
// (or [n,k] if tb). Row-major, serial, fixed accumulation order.
Array matmul_plain(const Array& a, const Array& b, bool ta = false, bool tb = false);

// Max-subtracted softmax of a vector; masked entries get probability exactly 0.
// Throws NumericError when every entry is masked.
std::vector<double> stable_softmax(const std::vector<double>& logits,
                                   const std::vector<uint8_t>* mask = nullptr);

// ---------------------------------------------------------------------------
// Differentiable ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // x: [n,d], b: [d]
Tensor mul_const(const Tensor& a, const Array& c);    // elementwise by constant

Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

// 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))) — the tanh form, fixed
// constants, so goldens agree across implementations.
Tensor gelu(const Tensor& x);

// Per-row normalization of x: [n,d] with scale gamma and shift beta ([d]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Row-wise masked softmax for x: [n,n_keys]. key_mask[j]==0 excludes key j
// (probability exactly 0). query_mask[i]==0 zeroes row i entirely (the row
// attends to nothing). Masks are static data, not differentiated through.
Tensor softmax_rows(const Tensor& x, const std::vector<uint8_t>* key_mask = nullptr,
                    const std::vector<uint8_t>* query_mask = nullptr);

// Gather rows of `table` ([v,d]) by index; backward scatter-adds.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

Tensor select_rows(const Tensor& x, const std::vector<int>& idx);

// Inverse of select_rows: merge row blocks into an [n,d] matrix. Every target
// row must be covered exactly once across parts.
struct RowPart {
    Tensor rows;                    // [len(idx), d]
    const std::vector<int>* idx;    // target row per source row
};
Tensor merge_rows(const std::vector<RowPart>& parts, int64_t n_rows);

Tensor slice_cols(const Tensor& x, int64_t start, int64_t len);
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mean_sq(const Tensor& x);  // sum of squares / numel

Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

// Mean cross-entropy over rows of `logits` ([m, c]) against integer targets.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets);

// Mean binary cross-entropy with logits ([m] or [m,1]) against 0/1 targets.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

// Inverted-dropout; identity when rate == 0. Mask drawn from `rng`.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// ---------------------------------------------------------------------------
// Pairwise attention-bias primitives. Each returns an [n,n] matrix for one
// attention head; entries outside `mask` are exactly 0. Index matrices, masks
// and paths are static data held by shared_ptr so the backward closures keep
// them alive for the lifetime of the graph.
// ---------------------------------------------------------------------------

using IntMat = std::vector<std::vector<int>>;
using ByteMat = std::vector<std::vector<uint8_t>>;
using IntMatPtr = std::shared_ptr<const IntMat>;
using ByteMatPtr = std::shared_ptr<const ByteMat>;

// bias(i,j) = table[buckets[i][j], head]
Tensor pair_gather(const Tensor& table, int head, const IntMatPtr& buckets, const ByteMatPtr& mask);

// bias(i,j) = scalars[head]
Tensor pair_fill(const Tensor& scalars, int head, const ByteMatPtr& mask);

// Bond paths in CSR form over ordered pairs (row-major i*n+j).
struct PairPaths {
    std::vector<int64_t> offsets;  // n*n + 1
    std::vector<int> orders;       // bond-order index per path position
    int64_t n = 0;
};
using PairPathsPtr = std::shared_ptr<const PairPaths>;

// bias(i,j) = mean_p dot(emb[orders[p]], w[head, p, :]) over the stored path;
// pairs with empty paths contribute 0. emb: [n_orders, de], w: [h, p_max, de].
Tensor edge_path_bias(const Tensor& emb, const Tensor& w, int head, const PairPathsPtr& paths,
                      const ByteMatPtr& mask);

// Gaussian-basis distance bias: bias(i,j) = sum_k proj[k,head] *
// exp(-0.5*((d_ij - means[k]) / s_k)^2), s_k = sqrt(widths[k]^2 + 1e-6).
Tensor gauss_bias(const Tensor& means, const Tensor& widths, const Tensor& proj, int head,
                  const Array& dist, const ByteMatPtr& mask);

}  // namespace bit::num
