#include "xcos/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xcos {

using detail::check;

Graph::NodeId Graph::push(Tensor value, std::initializer_list<NodeId> inputs,
                          std::function<void(Graph&, NodeId)> backprop) {
  Node node;
  node.value = std::move(value);
  for (NodeId in : inputs) {
    check(in >= 0 && in < static_cast<NodeId>(nodes_.size()),
          "graph op references unknown node " + std::to_string(in));
    node.needs_grad = node.needs_grad || nodes_[static_cast<size_t>(in)].needs_grad;
  }
  if (node.needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Graph::grad_buf(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.size() == 0) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

Graph::NodeId Graph::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Graph::NodeId Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  Node node;
  node.value = p.value;
  node.needs_grad = true;
  node.bound = &p;
  nodes_.push_back(std::move(node));
  const NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return id;
}

Graph::NodeId Graph::conv2d(NodeId input, NodeId kernel, NodeId bias, int stride, int padding) {
  Tensor out = ops::conv2d(value(input), value(kernel), value(bias), stride, padding);
  return push(std::move(out), {input, kernel, bias},
              [input, kernel, bias, stride, padding](Graph& g, NodeId self) {
                const Tensor& go = g.grad(self);
                Tensor* gi = g.wants_grad(input) ? &g.grad_buf(input) : nullptr;
                Tensor* gk = g.wants_grad(kernel) ? &g.grad_buf(kernel) : nullptr;
                Tensor* gb = g.wants_grad(bias) ? &g.grad_buf(bias) : nullptr;
                ops::conv2d_backward(g.value(input), g.value(kernel), stride, padding, go, gi, gk,
                                     gb);
              });
}

Graph::NodeId Graph::relu(NodeId x) {
  Tensor out = ops::relu(value(x));
  return push(std::move(out), {x}, [x](Graph& g, NodeId self) {
    if (!g.wants_grad(x)) return;
    const Tensor& go = g.grad(self);
    const Tensor& xv = g.value(x);
    Tensor& gx = g.grad_buf(x);
    for (int i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += go[i];
    }
  });
}

Graph::NodeId Graph::l2_normalize(NodeId v, double epsilon) {
  double sq = 0.0;
  const Tensor& vv = value(v);
  for (int i = 0; i < vv.size(); ++i) sq += vv[i] * vv[i];
  const double norm = std::max(std::sqrt(sq), epsilon);
  Tensor out = vv;
  for (int i = 0; i < out.size(); ++i) out[i] /= norm;
  return push(std::move(out), {v}, [v, norm](Graph& g, NodeId self) {
    if (!g.wants_grad(v)) return;
    const Tensor& go = g.grad(self);
    const Tensor& out = g.value(self);
    Tensor& gv = g.grad_buf(v);
    double dot = 0.0;
    for (int i = 0; i < out.size(); ++i) dot += go[i] * out[i];
    for (int i = 0; i < out.size(); ++i) gv[i] += (go[i] - dot * out[i]) / norm;
  });
}

Graph::NodeId Graph::cosine(NodeId u, NodeId v) {
  const Tensor& uv = value(u);
  const Tensor& vv = value(v);
  check(uv.size() == vv.size(), "cosine operands differ in length");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int i = 0; i < uv.size(); ++i) {
    dot += uv[i] * vv[i];
    nu += uv[i] * uv[i];
    nv += vv[i] * vv[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  const bool degenerate = nu < ops::kNormEpsilon || nv < ops::kNormEpsilon;
  const double c = degenerate ? 0.0 : dot / (nu * nv);
  return push(Tensor::scalar(c), {u, v}, [u, v, nu, nv, c, degenerate](Graph& g, NodeId self) {
    if (degenerate) return;  // guarded zero has zero gradient
    const double go = g.grad(self)[0];
    const Tensor& uv = g.value(u);
    const Tensor& vv = g.value(v);
    if (g.wants_grad(u)) {
      Tensor& gu = g.grad_buf(u);
      for (int i = 0; i < uv.size(); ++i) {
        gu[i] += go * (vv[i] / (nu * nv) - c * uv[i] / (nu * nu));
      }
    }
    if (g.wants_grad(v)) {
      Tensor& gv = g.grad_buf(v);
      for (int i = 0; i < vv.size(); ++i) {
        gv[i] += go * (uv[i] / (nu * nv) - c * vv[i] / (nv * nv));
      }
    }
  });
}

Graph::NodeId Graph::softmax_flat(NodeId x) {
  Tensor out = ops::softmax_flat(value(x));
  return push(std::move(out), {x}, [x](Graph& g, NodeId self) {
    if (!g.wants_grad(x)) return;
    const Tensor& go = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& gx = g.grad_buf(x);
    double dot = 0.0;
    for (int i = 0; i < y.size(); ++i) dot += go[i] * y[i];
    for (int i = 0; i < y.size(); ++i) gx[i] += y[i] * (go[i] - dot);
  });
}

Graph::NodeId Graph::concat_channels(NodeId a, NodeId b) {
  Tensor out = ops::concat_channels(value(a), value(b));
  const int a_size = value(a).size();
  return push(std::move(out), {a, b}, [a, b, a_size](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_buf(a);
      for (int i = 0; i < a_size; ++i) ga[i] += go[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buf(b);
      for (int i = 0; i < gb.size(); ++i) gb[i] += go[a_size + i];
    }
  });
}

Graph::NodeId Graph::reshape(NodeId x, std::vector<int> new_shape) {
  Tensor out = value(x).reshaped(std::move(new_shape));
  return push(std::move(out), {x}, [x](Graph& g, NodeId self) {
    if (!g.wants_grad(x)) return;
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buf(x);
    for (int i = 0; i < gx.size(); ++i) gx[i] += go[i];
  });
}

Graph::NodeId Graph::linear(NodeId x, NodeId weight, NodeId bias) {
  Tensor out = ops::linear(value(x), value(weight), value(bias));
  return push(std::move(out), {x, weight, bias}, [x, weight, bias](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    const Tensor& xv = g.value(x);
    const Tensor& w = g.value(weight);
    const int m = w.extent(0);
    const int n = w.extent(1);
    if (g.wants_grad(x)) {
      Tensor& gx = g.grad_buf(x);
      for (int i = 0; i < m; ++i) {
        const double gi = go[i];
        const double* row = w.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) gx[j] += gi * row[j];
      }
    }
    if (g.wants_grad(weight)) {
      Tensor& gw = g.grad_buf(weight);
      for (int i = 0; i < m; ++i) {
        const double gi = go[i];
        double* row = gw.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) row[j] += gi * xv[j];
      }
    }
    if (g.wants_grad(bias)) {
      Tensor& gb = g.grad_buf(bias);
      for (int i = 0; i < m; ++i) gb[i] += go[i];
    }
  });
}

Graph::NodeId Graph::row_cosines(NodeId v, NodeId rows) {
  Tensor out = ops::row_cosines(value(v), value(rows));
  return push(std::move(out), {v, rows}, [v, rows](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    const Tensor& y = g.value(self);
    const Tensor& vv = g.value(v);
    const Tensor& r = g.value(rows);
    const int k = r.extent(0);
    const int n = r.extent(1);
    double nv = 0.0;
    for (int j = 0; j < n; ++j) nv += vv[j] * vv[j];
    nv = std::sqrt(nv);
    if (nv < ops::kNormEpsilon) return;
    Tensor* gv = g.wants_grad(v) ? &g.grad_buf(v) : nullptr;
    Tensor* gr = g.wants_grad(rows) ? &g.grad_buf(rows) : nullptr;
    for (int i = 0; i < k; ++i) {
      const double gi = go[i];
      if (gi == 0.0) continue;
      const double* row = r.data() + static_cast<size_t>(i) * n;
      double nr = 0.0;
      for (int j = 0; j < n; ++j) nr += row[j] * row[j];
      nr = std::sqrt(nr);
      if (nr < ops::kNormEpsilon) continue;
      const double c = y[i];
      if (gv) {
        for (int j = 0; j < n; ++j) {
          (*gv)[j] += gi * (row[j] / (nv * nr) - c * vv[j] / (nv * nv));
        }
      }
      if (gr) {
        double* grow = gr->data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          grow[j] += gi * (vv[j] / (nv * nr) - c * row[j] / (nr * nr));
        }
      }
    }
  });
}

Graph::NodeId Graph::grid_cosine_map(NodeId fa, NodeId fb) {
  Tensor out = ops::grid_cosine_map(value(fa), value(fb));
  return push(std::move(out), {fa, fb}, [fa, fb](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    const Tensor& s = g.value(self);
    const Tensor& a = g.value(fa);
    const Tensor& b = g.value(fb);
    const int c = a.extent(0);
    const int plane = a.extent(1) * a.extent(2);
    Tensor* ga = g.wants_grad(fa) ? &g.grad_buf(fa) : nullptr;
    Tensor* gb = g.wants_grad(fb) ? &g.grad_buf(fb) : nullptr;
    for (int grid = 0; grid < plane; ++grid) {
      const double gi = go[grid];
      if (gi == 0.0) continue;
      double na = 0.0, nb = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        na += a[ch * plane + grid] * a[ch * plane + grid];
        nb += b[ch * plane + grid] * b[ch * plane + grid];
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      if (na < ops::kNormEpsilon || nb < ops::kNormEpsilon) continue;
      const double cval = s[grid];
      for (int ch = 0; ch < c; ++ch) {
        const int idx = ch * plane + grid;
        if (ga) (*ga)[idx] += gi * (b[idx] / (na * nb) - cval * a[idx] / (na * na));
        if (gb) (*gb)[idx] += gi * (a[idx] / (na * nb) - cval * b[idx] / (nb * nb));
      }
    }
  });
}

Graph::NodeId Graph::frobenius_inner(NodeId a, NodeId b) {
  const double v = ops::frobenius_inner(value(a), value(b));
  return push(Tensor::scalar(v), {a, b}, [a, b](Graph& g, NodeId self) {
    const double go = g.grad(self)[0];
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_buf(a);
      for (int i = 0; i < av.size(); ++i) ga[i] += go * bv[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buf(b);
      for (int i = 0; i < bv.size(); ++i) gb[i] += go * av[i];
    }
  });
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "add shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_buf(a);
      for (int i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buf(b);
      for (int i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
  });
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "sub shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return push(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_buf(a);
      for (int i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buf(b);
      for (int i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "mul shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
    const Tensor& go = g.grad(self);
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_buf(a);
      for (int i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_buf(b);
      for (int i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
}

Graph::NodeId Graph::scale(NodeId x, double factor) {
  Tensor out = value(x);
  for (int i = 0; i < out.size(); ++i) out[i] *= factor;
  return push(std::move(out), {x}, [x, factor](Graph& g, NodeId self) {
    if (!g.wants_grad(x)) return;
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad_buf(x);
    for (int i = 0; i < go.size(); ++i) gx[i] += factor * go[i];
  });
}

Graph::NodeId Graph::sum(NodeId x) {
  const Tensor& xv = value(x);
  double acc = 0.0;
  for (int i = 0; i < xv.size(); ++i) acc += xv[i];
  return push(Tensor::scalar(acc), {x}, [x](Graph& g, NodeId self) {
    if (!g.wants_grad(x)) return;
    const double go = g.grad(self)[0];
    Tensor& gx = g.grad_buf(x);
    for (int i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

Graph::NodeId Graph::margin_softmax(NodeId cosines, int label, double scale_s, double margin_m) {
  const Tensor& c = value(cosines);
  const int n = c.size();
  check(label >= 0 && label < n, "margin_softmax label " + std::to_string(label) +
                                     " out of range for " + std::to_string(n) + " classes");
  constexpr double kClamp = 1e-7;
  const double lo = -1.0 + kClamp;
  const double hi = 1.0 - kClamp;

  // Logits: s*cos(theta_j) = s*c_j for j != label; the label logit gets the
  // additive angular margin, cos(theta_y + m) expanded in terms of c_y.
  Tensor logits({n});
  const double cy = std::clamp(c[label], lo, hi);
  const double root = std::sqrt(1.0 - cy * cy);
  for (int j = 0; j < n; ++j) logits[j] = scale_s * c[j];
  logits[label] = scale_s * (cy * std::cos(margin_m) - root * std::sin(margin_m));

  double mx = logits[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, logits[j]);
  double denom = 0.0;
  for (int j = 0; j < n; ++j) denom += std::exp(logits[j] - mx);
  const double loss = std::log(denom) + mx - logits[label];

  Tensor probs({n});
  for (int j = 0; j < n; ++j) probs[j] = std::exp(logits[j] - mx) / denom;

  // d(label logit)/d(c_label); zero when the clamp is active.
  double dlabel = 0.0;
  if (c[label] >= lo && c[label] <= hi) {
    dlabel = scale_s * (std::cos(margin_m) + cy * std::sin(margin_m) / root);
  }

  return push(Tensor::scalar(loss), {cosines},
              [cosines, label, scale_s, probs, dlabel](Graph& g, NodeId self) {
                if (!g.wants_grad(cosines)) return;
                const double go = g.grad(self)[0];
                Tensor& gc = g.grad_buf(cosines);
                for (int j = 0; j < probs.size(); ++j) {
                  const double dz = probs[j] - (j == label ? 1.0 : 0.0);
                  gc[j] += go * dz * (j == label ? dlabel : scale_s);
                }
              });
}

void Graph::backward(NodeId output) {
  check(output >= 0 && output < static_cast<NodeId>(nodes_.size()),
        "backward: unknown node " + std::to_string(output));
  check(nodes_[static_cast<size_t>(output)].value.is_scalar(),
        "backward requires a scalar output, got shape " +
            nodes_[static_cast<size_t>(output)].value.shape_str());

  for (Node& n : nodes_) n.grad = Tensor();
  grad_buf(output).fill(1.0);

  for (NodeId i = output; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.size() == 0) continue;  // not an ancestor of the output
    if (n.backprop) n.backprop(*this, i);
    if (n.bound) {
      Tensor& pg = n.bound->gradient;
      for (int j = 0; j < pg.size(); ++j) pg[j] += n.grad[j];
    }
  }
}

void Graph::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

void sgd_step(const std::vector<Parameter*>& params, double lr) {
  detail::check(lr > 0.0, "sgd_step learning rate must be positive");
  for (Parameter* p : params) {
    for (int i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->gradient[i];
    p->gradient.zero();
  }
}

void zero_gradients(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->gradient.zero();
}

double grad_check(const std::function<double()>& run, const std::vector<Parameter*>& params,
                  double eps) {
  detail::check(eps > 0.0 && eps <= 1e-3, "grad_check eps must be in (0, 1e-3]");
  zero_gradients(params);
  run();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->gradient);

  double max_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (int i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double f_plus = run();
      p->value[i] = orig - eps;
      const double f_minus = run();
      p->value[i] = orig;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_err = std::max(max_err, std::fabs(a - numeric) / denom);
    }
  }
  zero_gradients(params);
  return max_err;
}

}  // namespace xcos
