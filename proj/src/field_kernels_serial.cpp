#include <cmath>
#include <string>
#include <vector>

#include "dmarch/field.hpp"
#include "field_detail.hpp"

namespace dmarch::kernels {

namespace {

using detail::NetView;
using Buf = std::vector<double>;

struct PointState {
  std::vector<Buf> h;    // h[0] = x, h[l] = sigma(a_l)
  std::vector<Buf> d1;   // sigma'(a_l), index l-1
  std::vector<Buf> d2;   // sigma''(a_l), index l-1
  std::vector<Buf> g;    // input-gradient chain, g[l] has size of h[l]
  std::vector<Buf> del;  // g[l] * d1, index l-1
  double u = 0.0;
  Buf v;
};

PointState forward(const NetView& net, const double* x) {
  const std::size_t nl = net.layers.size();
  PointState s;
  s.h.resize(nl + 1);
  s.d1.resize(nl);
  s.d2.resize(nl);
  s.h[0].assign(x, x + net.dim);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& L = net.layers[l];
    s.h[l + 1].assign(L.out, 0.0);
    s.d1[l].assign(L.out, 0.0);
    s.d2[l].assign(L.out, 0.0);
    for (Index i = 0; i < L.out; ++i) {
      double a = L.b[i];
      for (Index k = 0; k < L.in; ++k) a += L.w[i + k * L.out] * s.h[l][k];
      const ActivationValue av = activate(net.act, a);
      s.h[l + 1][i] = av.f;
      s.d1[l][i] = av.df;
      s.d2[l][i] = av.d2f;
    }
  }
  s.u = net.bo;
  for (Index i = 0; i < net.width; ++i) s.u += net.wo[i] * s.h[nl][i];

  s.v.assign(net.dim, 0.0);
  if (net.mode == FieldMode::gradient) {
    s.g.resize(nl + 1);
    s.del.resize(nl);
    s.g[nl] = net.wo;
    for (std::size_t l = nl; l-- > 0;) {
      const auto& L = net.layers[l];
      s.del[l].assign(L.out, 0.0);
      for (Index i = 0; i < L.out; ++i) s.del[l][i] = s.g[l + 1][i] * s.d1[l][i];
      s.g[l].assign(L.in, 0.0);
      for (Index k = 0; k < L.in; ++k) {
        double acc = 0.0;
        for (Index i = 0; i < L.out; ++i) acc += L.w[i + k * L.out] * s.del[l][i];
        s.g[l][k] = acc;
      }
    }
    s.v = s.g[0];
  } else {
    for (Index d = 0; d < net.dim; ++d) {
      double acc = net.bv[d];
      for (Index k = 0; k < net.width; ++k) acc += net.wv[d + k * net.dim] * s.h[nl][k];
      s.v[d] = net.scale * acc;
    }
  }
  return s;
}

void backward(const NetView& net, const PointState& s, double ubar, const Buf& vbar, double* grad) {
  const std::size_t nl = net.layers.size();
  std::vector<Buf> abar_b(nl);
  for (std::size_t l = 0; l < nl; ++l) abar_b[l].assign(net.layers[l].out, 0.0);
  Buf hbar(net.width, 0.0);

  if (net.mode == FieldMode::gradient) {
    Buf gbar = vbar;
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& L = net.layers[l];
      Buf dbar(L.out, 0.0);
      for (Index k = 0; k < L.in; ++k) {
        for (Index i = 0; i < L.out; ++i) {
          grad[L.w_off + i + k * L.out] += s.del[l][i] * gbar[k];
          dbar[i] += L.w[i + k * L.out] * gbar[k];
        }
      }
      Buf next(L.out, 0.0);
      for (Index i = 0; i < L.out; ++i) {
        next[i] = dbar[i] * s.d1[l][i];
        abar_b[l][i] = dbar[i] * s.g[l + 1][i] * s.d2[l][i];
      }
      gbar = std::move(next);
    }
    for (Index i = 0; i < net.width; ++i) grad[net.wo_off + i] += gbar[i];
  } else {
    for (Index k = 0; k < net.width; ++k) {
      for (Index d = 0; d < net.dim; ++d) {
        grad[net.wv_off + d + k * net.dim] += net.scale * vbar[d] * s.h[nl][k];
        hbar[k] += net.scale * net.wv[d + k * net.dim] * vbar[d];
      }
    }
    for (Index d = 0; d < net.dim; ++d) grad[net.bv_off + d] += net.scale * vbar[d];
  }

  for (Index i = 0; i < net.width; ++i) {
    grad[net.wo_off + i] += ubar * s.h[nl][i];
    hbar[i] += ubar * net.wo[i];
  }
  grad[net.bo_off] += ubar;

  for (std::size_t l = nl; l-- > 0;) {
    const auto& L = net.layers[l];
    Buf abar(L.out);
    for (Index i = 0; i < L.out; ++i) abar[i] = hbar[i] * s.d1[l][i] + abar_b[l][i];
    Buf prev(L.in, 0.0);
    for (Index k = 0; k < L.in; ++k) {
      for (Index i = 0; i < L.out; ++i) {
        grad[L.w_off + i + k * L.out] += abar[i] * s.h[l][k];
        prev[k] += L.w[i + k * L.out] * abar[i];
      }
    }
    for (Index i = 0; i < L.out; ++i) grad[L.b_off + i] += abar[i];
    hbar = std::move(prev);
  }
}

bool finite(const Buf& b) {
  for (double x : b)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

BatchOutput eval_serial(const FieldModel& model, const Mat& x) {
  detail::check_input(model, x);
  const NetView& net = model.net();
  BatchOutput out{Vec(x.cols()), Mat(x.rows(), x.cols())};
  for (Index j = 0; j < x.cols(); ++j) {
    const PointState s = forward(net, x.col(j).data());
    out.u(j) = s.u;
    for (Index d = 0; d < net.dim; ++d) out.v(d, j) = s.v[d];
  }
  return out;
}

LossGradients loss_gradients_serial(const FieldModel& model, const Mat& x, const PointLoss& loss) {
  detail::check_input(model, x);
  if (loss.size() != x.cols()) throw ShapeError("loss size does not match batch size");
  const NetView& net = model.net();
  LossGradients res{0.0, Vec::Zero(net.total)};
  Buf vbar(net.dim);
  for (Index j = 0; j < x.cols(); ++j) {
    const PointState s = forward(net, x.col(j).data());
    if (!std::isfinite(s.u) || !finite(s.v)) {
      throw NumericError(loss.name() + ": non-finite field output at point " + std::to_string(j));
    }
    double ubar = 0.0;
    const double t = loss.term(j, s.u, s.v.data(), ubar, vbar.data());
    if (!std::isfinite(t) || !std::isfinite(ubar) || !finite(vbar)) {
      throw NumericError(loss.name() + ": non-finite term at point " + std::to_string(j));
    }
    res.value += t;
    backward(net, s, ubar, vbar, res.grad.data());
  }
  if (!res.grad.allFinite()) throw NumericError(loss.name() + ": non-finite parameter gradient");
  return res;
}

}  // namespace dmarch::kernels
