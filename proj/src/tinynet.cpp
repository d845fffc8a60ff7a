#include "gara/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gara::tinynet {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void affine(const Layer& l, std::span<const double> x, std::vector<double>& z) {
  z.assign(l.out, 0.0);
  for (std::size_t r = 0; r < l.out; ++r) {
    double acc = l.b[r];
    const double* row = l.w.data() + r * l.in;
    for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * x[c];
    z[r] = acc;
  }
}

void activate(Activation act, std::vector<double>& z) {
  if (act == Activation::relu) {
    for (double& v : z) v = std::max(0.0, v);
  }
}

// Loss + gradient accumulation for one sample; returns the squared residual.
double backprop_sample(const Mlp& net, const Sample& s, double scale,
                       std::vector<double>& grad) {
  const std::size_t L = net.layers.size();
  std::vector<std::vector<double>> pre(L);   // pre-activation z per layer
  std::vector<std::vector<double>> act(L + 1);
  act[0].assign(s.first.begin(), s.first.end());
  for (std::size_t k = 0; k < L; ++k) {
    affine(net.layers[k], act[k], pre[k]);
    act[k + 1] = pre[k];
    activate(net.layers[k].act, act[k + 1]);
  }

  const std::vector<double>& out = act[L];
  double sq = 0.0;
  std::vector<double> delta(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = out[i] - s.second[i];
    sq += r * r;
    delta[i] = 2.0 * r * scale;
  }

  // Walk the flat gradient from the back; offsets mirror get_params layout.
  std::size_t offset = grad.size();
  for (std::size_t k = L; k-- > 0;) {
    const Layer& l = net.layers[k];
    offset -= l.out * l.in + l.out;
    if (l.act == Activation::relu) {
      for (std::size_t r = 0; r < l.out; ++r) {
        if (pre[k][r] <= 0.0) delta[r] = 0.0;
      }
    }
    double* gw = grad.data() + offset;
    double* gb = gw + l.out * l.in;
    for (std::size_t r = 0; r < l.out; ++r) {
      const double dz = delta[r];
      gb[r] += dz;
      double* grow = gw + r * l.in;
      const std::vector<double>& a_prev = act[k];
      for (std::size_t c = 0; c < l.in; ++c) grow[c] += dz * a_prev[c];
    }
    if (k > 0) {
      std::vector<double> prev(l.in, 0.0);
      for (std::size_t r = 0; r < l.out; ++r) {
        const double dz = delta[r];
        const double* row = l.w.data() + r * l.in;
        for (std::size_t c = 0; c < l.in; ++c) prev[c] += row[c] * dz;
      }
      delta = std::move(prev);
    }
  }
  return sq;
}

std::size_t param_count(const Mlp& net) {
  std::size_t n = 0;
  for (const Layer& l : net.layers) n += l.out * l.in + l.out;
  return n;
}

}  // namespace

Mlp make_mlp(const std::vector<std::size_t>& dims,
             const std::vector<Activation>& acts, Rng& rng) {
  require(dims.size() >= 2, "make_mlp: need at least one layer");
  require(acts.size() == dims.size() - 1, "make_mlp: one activation per layer");
  Mlp net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer l;
    l.in = dims[k];
    l.out = dims[k + 1];
    l.act = acts[k];
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    l.w.resize(l.out * l.in);
    for (double& v : l.w) v = rng.uniform(-bound, bound);
    l.b.assign(l.out, 0.0);
    net.layers.push_back(std::move(l));
  }
  return net;
}

std::vector<double> forward(const Mlp& net, std::span<const double> x) {
  require(x.size() == net.input_dim(), "forward: input dimension mismatch");
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (const Layer& l : net.layers) {
    affine(l, cur, next);
    activate(l.act, next);
    cur = next;
  }
  return cur;
}

double mse_loss(const Mlp& net, std::span<const Sample> batch) {
  require(!batch.empty(), "mse_loss: empty batch");
  double total = 0.0;
  for (const Sample& s : batch) {
    const std::vector<double> out = forward(net, s.first);
    require(out.size() == s.second.size(), "mse_loss: target dimension mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double r = out[i] - s.second[i];
      total += r * r;
    }
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> get_params(const Mlp& net) {
  std::vector<double> p;
  p.reserve(param_count(net));
  for (const Layer& l : net.layers) {
    p.insert(p.end(), l.w.begin(), l.w.end());
    p.insert(p.end(), l.b.begin(), l.b.end());
  }
  return p;
}

void set_params(Mlp& net, std::span<const double> params) {
  require(params.size() == param_count(net), "set_params: size mismatch");
  std::size_t off = 0;
  for (Layer& l : net.layers) {
    std::copy_n(params.begin() + off, l.w.size(), l.w.begin());
    off += l.w.size();
    std::copy_n(params.begin() + off, l.b.size(), l.b.begin());
    off += l.b.size();
  }
}

std::vector<double> mse_gradient(const Mlp& net, std::span<const Sample> batch) {
  require(!batch.empty(), "mse_gradient: empty batch");
  std::vector<double> grad(param_count(net), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const Sample& s : batch) {
    require(s.first.size() == net.input_dim() && s.second.size() == net.output_dim(),
            "mse_gradient: dimension mismatch");
    backprop_sample(net, s, scale, grad);
  }
  return grad;
}

double train_batch(Mlp& net, std::span<const Sample> batch, double lr) {
  require(!batch.empty(), "train_batch: empty batch");
  std::vector<double> grad(param_count(net), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Sample& s : batch) {
    require(s.first.size() == net.input_dim() && s.second.size() == net.output_dim(),
            "train_batch: dimension mismatch");
    loss += backprop_sample(net, s, scale, grad);
  }
  loss *= scale;

  std::size_t off = 0;
  for (Layer& l : net.layers) {
    for (double& v : l.w) v -= lr * grad[off++];
    for (double& v : l.b) v -= lr * grad[off++];
  }
  return loss;
}

IntervalVector interval_forward(const Mlp& net, const IntervalVector& box) {
  require(box.lo.size() == box.hi.size(), "interval_forward: ragged box");
  require(box.lo.size() == net.input_dim(), "interval_forward: dimension mismatch");
  for (std::size_t i = 0; i < box.lo.size(); ++i) {
    require(box.lo[i] <= box.hi[i], "interval_forward: lo > hi");
  }

  IntervalVector cur = box;
  for (const Layer& l : net.layers) {
    IntervalVector next;
    next.lo.assign(l.out, 0.0);
    next.hi.assign(l.out, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      double lo = l.b[r], hi = l.b[r];
      const double* row = l.w.data() + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) {
        const double w = row[c];
        if (w >= 0.0) {
          lo += w * cur.lo[c];
          hi += w * cur.hi[c];
        } else {
          lo += w * cur.hi[c];
          hi += w * cur.lo[c];
        }
      }
      if (l.act == Activation::relu) {
        lo = std::max(0.0, lo);
        hi = std::max(0.0, hi);
      }
      next.lo[r] = lo;
      next.hi[r] = hi;
    }
    cur = std::move(next);
  }
  return cur;
}

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : net.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t r = 0; r < l.out; ++r) {
      w.push_back(std::vector<double>(l.w.begin() + r * l.in,
                                      l.w.begin() + (r + 1) * l.in));
    }
    layers.push_back({{"w", w},
                      {"b", l.b},
                      {"act", l.act == Activation::relu ? "relu" : "linear"}});
  }
  return nlohmann::json{{"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  for (const auto& lj : j.at("layers")) {
    Layer l;
    const auto& w = lj.at("w");
    l.out = w.size();
    require(l.out > 0, "mlp json: empty layer");
    l.in = w[0].size();
    for (const auto& row : w) {
      const auto r = row.get<std::vector<double>>();
      require(r.size() == l.in, "mlp json: ragged weight matrix");
      l.w.insert(l.w.end(), r.begin(), r.end());
    }
    l.b = lj.at("b").get<std::vector<double>>();
    require(l.b.size() == l.out, "mlp json: bias size mismatch");
    const std::string act = lj.at("act").get<std::string>();
    require(act == "relu" || act == "linear", "mlp json: unknown activation");
    l.act = act == "relu" ? Activation::relu : Activation::linear;
    net.layers.push_back(std::move(l));
  }
  require(!net.layers.empty(), "mlp json: no layers");
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    require(net.layers[k].out == net.layers[k + 1].in,
            "mlp json: layer dimensions disagree");
  }
  return net;
}

}  // namespace gara::tinynet
