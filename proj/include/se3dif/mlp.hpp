#pragma once

// Small dense softplus network with hand-written derivatives. Besides the
// usual reverse pass we need d/dtheta of directional input derivatives
// (forward tangent followed by a reverse sweep over the doubled graph) for
// denoising score matching, which rules out naive numeric differentiation.

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "se3dif/rng.hpp"

namespace se3dif {

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

// softplus between layers, linear output
struct Mlp {
  std::vector<DenseLayer> layers;

  int in_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().weight.rows()); }
};

// weights N(0, 1/fan_in), zero bias
inline Mlp make_mlp(Rng& rng, const std::vector<int>& widths) {
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.weight.resize(widths[l + 1], widths[l]);
    double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    for (int r = 0; r < layer.weight.rows(); ++r)
      for (int c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = scale * rng.normal();
    layer.bias = Eigen::VectorXd::Zero(widths[l + 1]);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void add_scaled(const MlpGrads& other, double s) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      weight[l] += s * other.weight[l];
      bias[l] += s * other.bias[l];
    }
  }
};

inline MlpGrads make_zero_grads(const Mlp& mlp) {
  MlpGrads g;
  for (const auto& layer : mlp.layers) {
    g.weight.emplace_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.emplace_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

// Batched caches; columns are samples.
struct MlpCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;  // pre-activations per layer
  std::vector<Eigen::MatrixXd> act;  // post-activation per layer (last layer: linear output)
};

inline const Eigen::MatrixXd& mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x,
                                          MlpCache& cache) {
  std::size_t n_layers = mlp.layers.size();
  cache.input = x;
  cache.pre.resize(n_layers);
  cache.act.resize(n_layers);
  const Eigen::MatrixXd* cur = &cache.input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    cache.pre[l].noalias() = mlp.layers[l].weight * (*cur);
    cache.pre[l].colwise() += mlp.layers[l].bias;
    if (l + 1 < n_layers)
      cache.act[l] = cache.pre[l].unaryExpr([](double v) { return softplus(v); });
    else
      cache.act[l] = cache.pre[l];
    cur = &cache.act[l];
  }
  return cache.act.back();
}

// Reverse sweep. dout has the output shape; returns dL/dinput and accumulates
// parameter gradients when grads is non-null.
inline Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpCache& cache,
                                    const Eigen::MatrixXd& dout, MlpGrads* grads) {
  int n_layers = static_cast<int>(mlp.layers.size());
  Eigen::MatrixXd da = dout;
  for (int l = n_layers - 1; l >= 0; --l) {
    Eigen::MatrixXd ds;
    if (l == n_layers - 1)
      ds = std::move(da);
    else
      ds = da.cwiseProduct(cache.pre[l].unaryExpr([](double v) { return sigmoid(v); }));
    const Eigen::MatrixXd& prev = l == 0 ? cache.input : cache.act[l - 1];
    if (grads) {
      grads->weight[l].noalias() += ds * prev.transpose();
      grads->bias[l] += ds.rowwise().sum();
    }
    da.noalias() = mlp.layers[l].weight.transpose() * ds;
  }
  return da;
}

struct MlpTangent {
  Eigen::MatrixXd dinput;
  std::vector<Eigen::MatrixXd> dpre;
  std::vector<Eigen::MatrixXd> dact;
};

// Forward-mode sweep: pushes an input tangent xdot through the net linearized
// at the primal point held in cache. Returns the output tangent.
inline const Eigen::MatrixXd& mlp_forward_tangent(const Mlp& mlp, const MlpCache& cache,
                                                  const Eigen::MatrixXd& xdot,
                                                  MlpTangent& tan) {
  std::size_t n_layers = mlp.layers.size();
  tan.dinput = xdot;
  tan.dpre.resize(n_layers);
  tan.dact.resize(n_layers);
  const Eigen::MatrixXd* cur = &tan.dinput;
  for (std::size_t l = 0; l < n_layers; ++l) {
    tan.dpre[l].noalias() = mlp.layers[l].weight * (*cur);
    if (l + 1 < n_layers) {
      Eigen::MatrixXd sig = cache.pre[l].unaryExpr([](double v) { return sigmoid(v); });
      tan.dact[l] = sig.cwiseProduct(tan.dpre[l]);
    } else {
      tan.dact[l] = tan.dpre[l];
    }
    cur = &tan.dact[l];
  }
  return tan.dact.back();
}

// Reverse sweep over the (primal, tangent) pair: given upstream gradients on
// the primal output and on the tangent output, accumulates exact parameter
// gradients (including the curvature term through softplus'') and returns the
// gradients on the primal input.
inline Eigen::MatrixXd mlp_backward_over_tangent(const Mlp& mlp, const MlpCache& cache,
                                                 const MlpTangent& tan,
                                                 const Eigen::MatrixXd& dout_primal,
                                                 const Eigen::MatrixXd& dout_tangent,
                                                 MlpGrads* grads) {
  int n_layers = static_cast<int>(mlp.layers.size());
  Eigen::MatrixXd ga = dout_primal;  // grad wrt layer output
  Eigen::MatrixXd gt = dout_tangent;  // grad wrt layer output tangent
  for (int l = n_layers - 1; l >= 0; --l) {
    Eigen::MatrixXd gs, gst;
    if (l == n_layers - 1) {
      gs = std::move(ga);
      gst = std::move(gt);
    } else {
      Eigen::MatrixXd sig = cache.pre[l].unaryExpr([](double v) { return sigmoid(v); });
      // a = softplus(s), adot = sigmoid(s) .* sdot
      gs = ga.cwiseProduct(sig) +
           gt.cwiseProduct(sig).cwiseProduct((1.0 - sig.array()).matrix()).cwiseProduct(tan.dpre[l]);
      gst = gt.cwiseProduct(sig);
    }
    const Eigen::MatrixXd& prev = l == 0 ? cache.input : cache.act[l - 1];
    const Eigen::MatrixXd& prev_tan = l == 0 ? tan.dinput : tan.dact[l - 1];
    if (grads) {
      grads->weight[l].noalias() += gs * prev.transpose();
      grads->weight[l].noalias() += gst * prev_tan.transpose();
      grads->bias[l] += gs.rowwise().sum();
    }
    ga.noalias() = mlp.layers[l].weight.transpose() * gs;
    gt.noalias() = mlp.layers[l].weight.transpose() * gst;
  }
  return ga;
}

}  // namespace se3dif
