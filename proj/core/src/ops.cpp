#include "groupface/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace groupface {

namespace {

void require_rank2(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() != 2) {
    throw std::invalid_argument(std::string(what) + " must be rank-2, got " +
                                (t.defined() ? to_string(t.shape()) : std::string("undefined")));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
}

}  // namespace

BatchNormState::BatchNormState(std::size_t width) : running_mean({width}, 0.0), running_var({width}, 1.0) {}

Tensor fully_connected(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank2(x, "fully_connected input");
  require_rank2(weight, "fully_connected weight");
  const std::size_t n = x.rows(), in = x.cols(), out = weight.cols();
  if (weight.rows() != in || bias.rank() != 1 || bias.size() != out) {
    throw std::invalid_argument("fully_connected: input " + to_string(x.shape()) + " incompatible with weight " +
                                to_string(weight.shape()) + " and bias " + to_string(bias.shape()));
  }

  Tensor y({n, out});
  auto xv = x.data();
  auto wv = weight.data();
  auto bv = bias.data();
  auto yv = y.data();
  for (std::size_t r = 0; r < n; ++r) {
    double* yrow = &yv[r * out];
    for (std::size_t o = 0; o < out; ++o) yrow[o] = bv[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xv[r * in + i];
      const double* wrow = &wv[i * out];
      for (std::size_t o = 0; o < out; ++o) yrow[o] += xi * wrow[o];
    }
  }

  g.record(y, {x, weight, bias}, [x, weight, bias, y, n, in, out]() mutable {
    auto dy = std::as_const(y).grad();
    auto xv = std::as_const(x).data();
    auto wv = std::as_const(weight).data();
    auto dx = x.grad_buffer();
    auto dw = weight.grad_buffer();
    auto db = bias.grad_buffer();
    for (std::size_t r = 0; r < n; ++r) {
      const double* dyrow = &dy[r * out];
      for (std::size_t o = 0; o < out; ++o) db[o] += dyrow[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double* wrow = &wv[i * out];
        double* dwrow = &dw[i * out];
        const double xi = xv[r * in + i];
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          acc += dyrow[o] * wrow[o];
          dwrow[o] += xi * dyrow[o];
        }
        dx[r * in + i] += acc;
      }
    }
  });
  return y;
}

Tensor batch_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  Mode mode) {
  require_rank2(x, "batch_norm input");
  const std::size_t n = x.rows(), d = x.cols();
  if (gamma.size() != d || beta.size() != d || state.running_mean.size() != d) {
    throw std::invalid_argument("batch_norm: input " + to_string(x.shape()) + " incompatible with gamma " +
                                to_string(gamma.shape()) + ", beta " + to_string(beta.shape()) +
                                " and running stats " + to_string(state.running_mean.shape()));
  }
  if (mode == Mode::train && n < 2) {
    throw std::invalid_argument("batch_norm: train mode needs at least 2 rows, got " + std::to_string(n));
  }

  auto xv = x.data();
  std::vector<double> mean(d, 0.0), inv_std(d, 0.0);
  if (mode == Mode::train) {
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) mean[c] += xv[r * d + c];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = xv[r * d + c] - mean[c];
        var[c] += diff * diff;
      }
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t c = 0; c < d; ++c) {
      var[c] /= static_cast<double>(n);
      inv_std[c] = 1.0 / std::sqrt(var[c] + state.eps);
      rm[c] = state.momentum * rm[c] + (1.0 - state.momentum) * mean[c];
      rv[c] = state.momentum * rv[c] + (1.0 - state.momentum) * var[c];
    }
  } else {
    auto rm = std::as_const(state.running_mean).data();
    auto rv = std::as_const(state.running_var).data();
    for (std::size_t c = 0; c < d; ++c) {
      mean[c] = rm[c];
      inv_std[c] = 1.0 / std::sqrt(rv[c] + state.eps);
    }
  }

  Tensor xhat({n, d});
  Tensor y({n, d});
  auto hv = xhat.data();
  auto yv = y.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const std::size_t k = r * d + c;
      hv[k] = (xv[k] - mean[c]) * inv_std[c];
      yv[k] = gv[c] * hv[k] + bv[c];
    }

  const bool batch_stats = mode == Mode::train;
  g.record(y, {x, gamma, beta}, [x, gamma, beta, y, xhat, inv_std, n, d, batch_stats]() mutable {
    auto dy = std::as_const(y).grad();
    auto hv = std::as_const(xhat).data();
    auto gv = std::as_const(gamma).data();
    auto dx = x.grad_buffer();
    auto dg = gamma.grad_buffer();
    auto db = beta.grad_buffer();
    std::vector<double> sum_dh(d, 0.0), sum_dh_h(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t k = r * d + c;
        dg[c] += dy[k] * hv[k];
        db[c] += dy[k];
        const double dh = dy[k] * gv[c];
        sum_dh[c] += dh;
        sum_dh_h[c] += dh * hv[k];
      }
    const double count = static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t k = r * d + c;
        const double dh = dy[k] * gv[c];
        if (batch_stats) {
          dx[k] += inv_std[c] * (dh - sum_dh[c] / count - hv[k] * sum_dh_h[c] / count);
        } else {
          dx[k] += inv_std[c] * dh;
        }
      }
  });
  return y;
}

Tensor relu(Graph& g, const Tensor& x) {
  Tensor y(x.shape());
  auto xv = x.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  g.record(y, {x}, [x, y]() mutable {
    auto dy = std::as_const(y).grad();
    auto xv = std::as_const(x).data();
    auto dx = x.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xv[i] > 0.0) dx[i] += dy[i];
  });
  return y;
}

Tensor softmax(Graph& g, const Tensor& z) {
  require_rank2(z, "softmax input");
  const std::size_t n = z.rows(), k = z.cols();
  auto zv = z.data();
  for (double value : zv) {
    if (!std::isfinite(value)) throw std::domain_error("softmax: non-finite input");
  }
  Tensor y({n, k});
  auto yv = y.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* zrow = &zv[r * k];
    double* yrow = &yv[r * k];
    const double peak = *std::max_element(zrow, zrow + k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      yrow[c] = std::exp(zrow[c] - peak);
      total += yrow[c];
    }
    for (std::size_t c = 0; c < k; ++c) yrow[c] /= total;
  }
  g.record(y, {z}, [z, y, n, k]() mutable {
    auto dy = std::as_const(y).grad();
    auto yv = std::as_const(y).data();
    auto dz = z.grad_buffer();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += dy[r * k + c] * yv[r * k + c];
      for (std::size_t c = 0; c < k; ++c) dz[r * k + c] += yv[r * k + c] * (dy[r * k + c] - dot);
    }
  });
  return y;
}

Tensor l2_normalize(Graph& g, const Tensor& v) {
  require_rank2(v, "l2_normalize input");
  const std::size_t n = v.rows(), d = v.cols();
  auto vv = v.data();
  std::vector<double> norms(n, 0.0);
  Tensor y({n, d});
  auto yv = y.data();
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += vv[r * d + c] * vv[r * d + c];
    norms[r] = std::sqrt(sq);
    if (!(norms[r] > 0.0)) throw std::domain_error("l2_normalize: row " + std::to_string(r) + " has zero norm");
    for (std::size_t c = 0; c < d; ++c) yv[r * d + c] = vv[r * d + c] / norms[r];
  }
  g.record(y, {v}, [v, y, norms, n, d]() mutable {
    auto dy = std::as_const(y).grad();
    auto yv = std::as_const(y).data();
    auto dv = v.grad_buffer();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += yv[r * d + c] * dy[r * d + c];
      for (std::size_t c = 0; c < d; ++c) dv[r * d + c] += (dy[r * d + c] - yv[r * d + c] * dot) / norms[r];
    }
  });
  return y;
}

Tensor matmul_transposed(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_transposed lhs");
  require_rank2(b, "matmul_transposed rhs");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_transposed: " + to_string(a.shape()) + " times transpose of " +
                                to_string(b.shape()));
  }
  const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
  Tensor c({n, m});
  auto av = a.data();
  auto bv = b.data();
  auto cv = c.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += av[i * d + k] * bv[j * d + k];
      cv[i * m + j] = acc;
    }
  g.record(c, {a, b}, [a, b, c, n, m, d]() mutable {
    auto dc = std::as_const(c).grad();
    auto av = std::as_const(a).data();
    auto bv = std::as_const(b).data();
    auto da = a.grad_buffer();
    auto db = b.grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double gij = dc[i * m + j];
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) {
          da[i * d + k] += gij * bv[j * d + k];
          db[j * d + k] += gij * av[i * d + k];
        }
      }
  });
  return c;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return add_scaled(g, a, b, 1.0); }

Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double factor) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + factor * bv[i];
  g.record(y, {a, b}, [a, b, y, factor]() mutable {
    auto dy = std::as_const(y).grad();
    auto da = a.grad_buffer();
    auto db = b.grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da[i] += dy[i];
      db[i] += factor * dy[i];
    }
  });
  return y;
}

Tensor multiply(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  Tensor y(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
  g.record(y, {a, b}, [a, b, y]() mutable {
    auto dy = std::as_const(y).grad();
    auto av = std::as_const(a).data();
    auto bv = std::as_const(b).data();
    // a and b may alias (x * x); read values before accumulating
    auto da = a.grad_buffer();
    auto db = b.grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double ga = dy[i] * bv[i];
      const double gb = dy[i] * av[i];
      da[i] += ga;
      db[i] += gb;
    }
  });
  return y;
}

Tensor sum(Graph& g, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor y = Tensor::scalar(total);
  g.record(y, {x}, [x, y]() mutable {
    const double dy = std::as_const(y).grad()[0];
    for (auto& dx : x.grad_buffer()) dx += dy;
  });
  return y;
}

Tensor concat_columns(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat lhs");
  require_rank2(b, "concat rhs");
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("concat_columns: row mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
  const std::size_t n = a.rows(), wa = a.cols(), wb = b.cols();
  Tensor y({n, wa + wb});
  auto av = a.data();
  auto bv = b.data();
  auto yv = y.data();
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(&av[r * wa], wa, &yv[r * (wa + wb)]);
    std::copy_n(&bv[r * wb], wb, &yv[r * (wa + wb) + wa]);
  }
  g.record(y, {a, b}, [a, b, y, n, wa, wb]() mutable {
    auto dy = std::as_const(y).grad();
    auto da = a.grad_buffer();
    auto db = b.grad_buffer();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < wa; ++c) da[r * wa + c] += dy[r * (wa + wb) + c];
      for (std::size_t c = 0; c < wb; ++c) db[r * wb + c] += dy[r * (wa + wb) + wa + c];
    }
  });
  return y;
}

}  // namespace groupface
