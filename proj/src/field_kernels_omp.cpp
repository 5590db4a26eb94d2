#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <vector>

#include "dmarch/field.hpp"
#include "field_detail.hpp"

namespace dmarch::kernels {

namespace {

using detail::NetView;
using Buf = std::vector<double>;

// Number of gradient accumulators; depends only on the batch size so the
// reduction order is the same for every thread count.
constexpr Index kSlabs = 16;

struct Work {
  Index n = 0;
  std::vector<Buf> h, s1, s2, g, del;
  Buf u, v;
  // backward scratch
  std::vector<Buf> abar_b;
  Buf gbar, dbar, hbar, abar, prev;
};

void forward_chunk(const NetView& net, const double* x, Index n, Work& w) {
  const std::size_t nl = net.layers.size();
  w.n = n;
  w.h.resize(nl + 1);
  w.s1.resize(nl);
  w.s2.resize(nl);
  w.h[0].assign(x, x + net.dim * n);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& L = net.layers[l];
    Buf& H = w.h[l + 1];
    H.resize(L.out * n);
    w.s1[l].resize(L.out * n);
    w.s2[l].resize(L.out * n);
    const Buf& P = w.h[l];
    for (Index j = 0; j < n; ++j) {
      double* a = H.data() + j * L.out;
      std::copy(L.b.begin(), L.b.end(), a);
      for (Index k = 0; k < L.in; ++k) {
        const double hk = P[k + j * L.in];
        const double* wc = L.w.data() + k * L.out;
        for (Index i = 0; i < L.out; ++i) a[i] += wc[i] * hk;
      }
      double* d1 = w.s1[l].data() + j * L.out;
      double* d2 = w.s2[l].data() + j * L.out;
      for (Index i = 0; i < L.out; ++i) {
        const ActivationValue av = activate(net.act, a[i]);
        a[i] = av.f;
        d1[i] = av.df;
        d2[i] = av.d2f;
      }
    }
  }

  const Buf& HL = w.h[nl];
  w.u.resize(n);
  for (Index j = 0; j < n; ++j) {
    double acc = net.bo;
    for (Index i = 0; i < net.width; ++i) acc += net.wo[i] * HL[i + j * net.width];
    w.u[j] = acc;
  }

  w.v.assign(net.dim * n, 0.0);
  if (net.mode == FieldMode::gradient) {
    w.g.resize(nl + 1);
    w.del.resize(nl);
    w.g[nl].resize(net.width * n);
    for (Index j = 0; j < n; ++j) std::copy(net.wo.begin(), net.wo.end(), w.g[nl].data() + j * net.width);
    for (std::size_t l = nl; l-- > 0;) {
      const auto& L = net.layers[l];
      Buf& D = w.del[l];
      D.resize(L.out * n);
      for (Index e = 0; e < L.out * n; ++e) D[e] = w.g[l + 1][e] * w.s1[l][e];
      Buf& G = w.g[l];
      G.assign(L.in * n, 0.0);
      for (Index j = 0; j < n; ++j) {
        double* gj = G.data() + j * L.in;
        for (Index i = 0; i < L.out; ++i) {
          const double di = D[i + j * L.out];
          const double* wti = L.wt.data() + i * L.in;
          for (Index k = 0; k < L.in; ++k) gj[k] += wti[k] * di;
        }
      }
    }
    w.v = w.g[0];
  } else {
    for (Index j = 0; j < n; ++j) {
      double* vj = w.v.data() + j * net.dim;
      std::copy(net.bv.begin(), net.bv.end(), vj);
      for (Index k = 0; k < net.width; ++k) {
        const double hk = HL[k + j * net.width];
        const double* wc = net.wv.data() + k * net.dim;
        for (Index d = 0; d < net.dim; ++d) vj[d] += wc[d] * hk;
      }
      for (Index d = 0; d < net.dim; ++d) vj[d] *= net.scale;
    }
  }
}

// Accumulates W += A * B^T for A (rows x n) and B (cols x n), column by column.
void add_outer(double* W, const double* A, const double* B, Index rows, Index cols, Index n, double s = 1.0) {
  for (Index k = 0; k < cols; ++k) {
    double* wk = W + k * rows;
    for (Index j = 0; j < n; ++j) {
      const double c = s * B[k + j * cols];
      const double* aj = A + j * rows;
      for (Index i = 0; i < rows; ++i) wk[i] += aj[i] * c;
    }
  }
}

// Y = M * X for M (rows x cols, column-major) and X (cols x n).
void matmul(double* Y, const double* M, const double* X, Index rows, Index cols, Index n, double s = 1.0) {
  for (Index j = 0; j < n; ++j) {
    double* yj = Y + j * rows;
    for (Index k = 0; k < cols; ++k) {
      const double c = s * X[k + j * cols];
      const double* mk = M + k * rows;
      for (Index i = 0; i < rows; ++i) yj[i] += mk[i] * c;
    }
  }
}

void backward_chunk(const NetView& net, Work& w, const double* ubar, const double* vbar, double* grad) {
  const std::size_t nl = net.layers.size();
  const Index n = w.n;
  const Buf& HL = w.h[nl];
  w.abar_b.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) w.abar_b[l].assign(net.layers[l].out * n, 0.0);
  w.hbar.assign(net.width * n, 0.0);

  if (net.mode == FieldMode::gradient) {
    w.gbar.assign(vbar, vbar + net.dim * n);
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& L = net.layers[l];
      add_outer(grad + L.w_off, w.del[l].data(), w.gbar.data(), L.out, L.in, n);
      w.dbar.assign(L.out * n, 0.0);
      matmul(w.dbar.data(), L.w.data(), w.gbar.data(), L.out, L.in, n);
      w.gbar.resize(L.out * n);
      for (Index e = 0; e < L.out * n; ++e) {
        w.gbar[e] = w.dbar[e] * w.s1[l][e];
        w.abar_b[l][e] = w.dbar[e] * w.g[l + 1][e] * w.s2[l][e];
      }
    }
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < net.width; ++i) grad[net.wo_off + i] += w.gbar[i + j * net.width];
  } else {
    add_outer(grad + net.wv_off, vbar, HL.data(), net.dim, net.width, n, net.scale);
    for (Index j = 0; j < n; ++j)
      for (Index d = 0; d < net.dim; ++d) grad[net.bv_off + d] += net.scale * vbar[d + j * net.dim];
    matmul(w.hbar.data(), net.wvt.data(), vbar, net.width, net.dim, n, net.scale);
  }

  for (Index j = 0; j < n; ++j) {
    const double uj = ubar[j];
    const double* hj = HL.data() + j * net.width;
    double* hb = w.hbar.data() + j * net.width;
    for (Index i = 0; i < net.width; ++i) {
      grad[net.wo_off + i] += uj * hj[i];
      hb[i] += uj * net.wo[i];
    }
    grad[net.bo_off] += uj;
  }

  for (std::size_t l = nl; l-- > 0;) {
    const auto& L = net.layers[l];
    w.abar.resize(L.out * n);
    for (Index e = 0; e < L.out * n; ++e) w.abar[e] = w.hbar[e] * w.s1[l][e] + w.abar_b[l][e];
    add_outer(grad + L.w_off, w.abar.data(), w.h[l].data(), L.out, L.in, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < L.out; ++i) grad[L.b_off + i] += w.abar[i + j * L.out];
    if (l > 0) {
      w.prev.assign(L.in * n, 0.0);
      matmul(w.prev.data(), L.wt.data(), w.abar.data(), L.in, L.out, n);
      std::swap(w.hbar, w.prev);
    }
  }
}

bool finite(const double* p, Index n) {
  for (Index i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace

BatchOutput eval_omp(const FieldModel& model, const Mat& x) {
  detail::check_input(model, x);
  const NetView& net = model.net();
  const Index n = x.cols();
  BatchOutput out{Vec(n), Mat(x.rows(), n)};
  const Index chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel
  {
    Work w;
#pragma omp for schedule(static)
    for (Index c = 0; c < chunks; ++c) {
      const Index j0 = c * kChunk;
      const Index m = std::min(kChunk, n - j0);
      forward_chunk(net, x.col(j0).data(), m, w);
      std::copy(w.u.begin(), w.u.end(), out.u.data() + j0);
      std::copy(w.v.begin(), w.v.end(), out.v.col(j0).data());
    }
  }
  return out;
}

LossGradients loss_gradients_omp(const FieldModel& model, const Mat& x, const PointLoss& loss) {
  detail::check_input(model, x);
  const Index n = x.cols();
  if (loss.size() != n) throw ShapeError("loss size does not match batch size");
  const NetView& net = model.net();
  const Index chunks = (n + kChunk - 1) / kChunk;
  const Index slabs = std::min(chunks, kSlabs);
  std::vector<Buf> acc(static_cast<std::size_t>(slabs));
  Buf values(static_cast<std::size_t>(chunks), 0.0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(slabs));

#pragma omp parallel
  {
    Work w;
    Buf ubar, vbar;
#pragma omp for schedule(dynamic, 1)
    for (Index s = 0; s < slabs; ++s) {
      try {
        Buf& g = acc[s];
        g.assign(net.total, 0.0);
        const Index c0 = s * chunks / slabs;
        const Index c1 = (s + 1) * chunks / slabs;
        for (Index c = c0; c < c1; ++c) {
          const Index j0 = c * kChunk;
          const Index m = std::min(kChunk, n - j0);
          forward_chunk(net, x.col(j0).data(), m, w);
          ubar.assign(m, 0.0);
          vbar.assign(net.dim * m, 0.0);
          double value = 0.0;
          for (Index j = 0; j < m; ++j) {
            const double* vj = w.v.data() + j * net.dim;
            if (!std::isfinite(w.u[j]) || !finite(vj, net.dim)) {
              throw NumericError(loss.name() + ": non-finite field output at point " + std::to_string(j0 + j));
            }
            double* vb = vbar.data() + j * net.dim;
            const double t = loss.term(j0 + j, w.u[j], vj, ubar[j], vb);
            if (!std::isfinite(t) || !std::isfinite(ubar[j]) || !finite(vb, net.dim)) {
              throw NumericError(loss.name() + ": non-finite term at point " + std::to_string(j0 + j));
            }
            value += t;
          }
          values[c] = value;
          backward_chunk(net, w, ubar.data(), vbar.data(), g.data());
        }
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  LossGradients res{0.0, Vec::Zero(net.total)};
  for (double v : values) res.value += v;
  for (const Buf& g : acc)
    for (Index p = 0; p < net.total; ++p) res.grad(p) += g[p];
  if (!res.grad.allFinite()) throw NumericError(loss.name() + ": non-finite parameter gradient");
  return res;
}

}  // namespace dmarch::kernels
