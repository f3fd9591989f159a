// Copyright 2026 The unifl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "unifl/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "unifl/error.hpp"

namespace unifl::nn {

// ---------------------------------------------------------------------------
// Tensor helpers

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

void Tensor::accumulate(const Tensor& other) {
  require_shape(shape_, other.shape_, "accumulate");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void require_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": shape " + a.str() + " vs " + b.str());
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("concat: batch/spatial mismatch " + sa.str() + " vs " + sb.str());
  Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t plane = static_cast<std::size_t>(sa.h) * static_cast<std::size_t>(sa.w);
  for (int n = 0; n < sa.n; ++n) {
    auto dst = out.data().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * (sa.c + sb.c) * plane);
    auto srca = a.data().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * sa.c * plane);
    auto srcb = b.data().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * sb.c * plane);
    dst = std::copy(srca, srca + static_cast<std::ptrdiff_t>(sa.c * plane), dst);
    std::copy(srcb, srcb + static_cast<std::ptrdiff_t>(sb.c * plane), dst);
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
  const Shape s = x.shape();
  if (begin < 0 || end > s.c || begin > end) throw ShapeError("slice_channels: bad range");
  Tensor out({s.n, end - begin, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = begin; c < end; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c - begin, h, w) = x.at(n, c, h, w);
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

Parameter& ParameterStore::add(const std::string& name, Shape shape, double fill, bool trainable) {
  if (find(name)) throw Error("duplicate parameter name '" + name + "'");
  params_.push_back({name, Tensor(shape, fill), Tensor(shape), trainable, false});
  return params_.back();
}

Parameter& ParameterStore::add_uniform(const std::string& name, Shape shape, double bound) {
  Parameter& p = add(name, shape);
  for (auto& v : p.value.data()) v = bound * (2.0 * (static_cast<double>(rng_() >> 11) * 0x1.0p-53) - 1.0);
  return p;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (p.trainable) out.push_back(&p);
  return out;
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterStore::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& p : params_)
    if (p.name.rfind(prefix, 0) == 0) p.frozen = frozen;
}

// ---------------------------------------------------------------------------
// Tape core

std::vector<int> Tape::decide(std::vector<int> computed) {
  if (!pattern_) return computed;
  if (pattern_->mode == KinkPattern::Mode::Record) {
    pattern_->decisions.push_back(computed);
    return computed;
  }
  if (pattern_->cursor >= pattern_->decisions.size() || pattern_->decisions[pattern_->cursor].size() != computed.size())
    throw Error("kink pattern replay does not match the recorded pass");
  return pattern_->decisions[pattern_->cursor++];
}

Tape::Var Tape::push(Tensor value, bool needs_grad, std::function<void()> pullback) {
  nodes_.push_back({std::move(value), Tensor(), needs_grad, nullptr, std::move(pullback)});
  return {static_cast<int>(nodes_.size() - 1)};
}

Tape::Var Tape::input(Tensor value, bool requires_grad) { return push(std::move(value), requires_grad); }

Tape::Var Tape::param(Parameter& p) {
  const bool needs = p.trainable && !p.frozen;
  Var v = push(p.value, needs);
  nodes_.back().param = &p;
  return v;
}

void Tape::backward(Var out, const Tensor& seed) {
  require_shape(val(out).shape(), seed.shape(), "backward seed");
  for (auto& n : nodes_)
    if (n.needs_grad) n.grad = Tensor(n.value.shape());
  if (!needs(out)) return;
  g(out) = seed;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.pullback) n.pullback();
    if (n.param) n.param->grad.accumulate(n.grad);
  }
}

namespace {

inline bool any_needs(std::initializer_list<bool> flags) {
  for (bool f : flags)
    if (f) return true;
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

Tape::Var Tape::conv2d(Var x, Var weight, const Var* bias, int stride, int pad, int groups) {
  const Shape xs = shape(x), ws = shape(weight);
  if (groups < 1 || xs.c % groups || ws.n % groups || ws.c != xs.c / groups || ws.h != ws.w)
    throw ShapeError("conv2d: input " + xs.str() + " incompatible with weight " + ws.str());
  if (bias && !(shape(*bias) == Shape{1, ws.n, 1, 1})) throw ShapeError("conv2d: bias shape");
  const int k = ws.h;
  const int ho = (xs.h + 2 * pad - k) / stride + 1, wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeError("conv2d: output would be empty for input " + xs.str());
  const int cig = ws.c, cog = ws.n / groups;

  Tensor y({xs.n, ws.n, ho, wo});
  const Tensor& X = val(x);
  const Tensor& Wt = val(weight);
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < ws.n; ++co) {
      const int g0 = (co / cog) * cig;
      const double b = bias ? val(*bias)[static_cast<std::size_t>(co)] : 0.0;
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          double acc = b;
          for (int ci = 0; ci < cig; ++ci)
            for (int kh = 0; kh < k; ++kh) {
              const int ih = oh * stride - pad + kh;
              if (ih < 0 || ih >= xs.h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int iw = ow * stride - pad + kw;
                if (iw < 0 || iw >= xs.w) continue;
                acc += Wt.at(co, ci, kh, kw) * X.at(n, g0 + ci, ih, iw);
              }
            }
          y.at(n, co, oh, ow) = acc;
        }
    }

  const bool nb = bias && needs(*bias);
  const bool need = any_needs({needs(x), needs(weight), nb});
  const int out = static_cast<int>(nodes_.size());
  const Var bv = bias ? *bias : Var{};
  return push(std::move(y), need, [=, this] {
    const Tensor& G = g({out});
    const Tensor& Xv = val(x);
    const Tensor& Wv = val(weight);
    const bool nx = needs(x), nw = needs(weight);
    for (int n = 0; n < xs.n; ++n)
      for (int co = 0; co < ws.n; ++co) {
        const int g0 = (co / cog) * cig;
        for (int oh = 0; oh < ho; ++oh)
          for (int ow = 0; ow < wo; ++ow) {
            const double gy = G.at(n, co, oh, ow);
            if (gy == 0.0) continue;
            if (nb) g(bv)[static_cast<std::size_t>(co)] += gy;
            for (int ci = 0; ci < cig; ++ci)
              for (int kh = 0; kh < k; ++kh) {
                const int ih = oh * stride - pad + kh;
                if (ih < 0 || ih >= xs.h) continue;
                for (int kw = 0; kw < k; ++kw) {
                  const int iw = ow * stride - pad + kw;
                  if (iw < 0 || iw >= xs.w) continue;
                  if (nw) g(weight).at(co, ci, kh, kw) += gy * Xv.at(n, g0 + ci, ih, iw);
                  if (nx) g(x).at(n, g0 + ci, ih, iw) += gy * Wv.at(co, ci, kh, kw);
                }
              }
          }
      }
  });
}

// ---------------------------------------------------------------------------
// Normalization

Tape::Var Tape::batch_norm(Var x, Var gamma, Var beta, Parameter& running_mean, Parameter& running_var,
                           bool training, double momentum, double eps) {
  const Shape s = shape(x);
  const Shape cs{1, s.c, 1, 1};
  require_shape(shape(gamma), cs, "batch_norm gamma");
  require_shape(shape(beta), cs, "batch_norm beta");
  const double m = static_cast<double>(s.n) * s.h * s.w;
  const Tensor& X = val(x);

  std::vector<double> mean(static_cast<std::size_t>(s.c)), invstd(static_cast<std::size_t>(s.c));
  for (int c = 0; c < s.c; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    double mu, var;
    if (training) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) sum += X.at(n, c, h, w);
      mu = sum / m;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) {
            const double d = X.at(n, c, h, w) - mu;
            sq += d * d;
          }
      var = sq / m;
      const double unbiased = m > 1 ? sq / (m - 1) : var;
      running_mean.value[ci] = (1 - momentum) * running_mean.value[ci] + momentum * mu;
      running_var.value[ci] = (1 - momentum) * running_var.value[ci] + momentum * unbiased;
    } else {
      mu = running_mean.value[ci];
      var = running_var.value[ci];
    }
    mean[ci] = mu;
    invstd[ci] = 1.0 / std::sqrt(var + eps);
  }

  Tensor xhat(s), y(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
          const double xh = (X.at(n, c, h, w) - mean[ci]) * invstd[ci];
          xhat.at(n, c, h, w) = xh;
          y.at(n, c, h, w) = val(gamma)[ci] * xh + val(beta)[ci];
        }
    }

  const int out = static_cast<int>(nodes_.size());
  const bool need = any_needs({needs(x), needs(gamma), needs(beta)});
  auto saved = std::make_shared<Tensor>(std::move(xhat));
  return push(std::move(y), need, [=, this] {
    const Tensor& G = g({out});
    const Tensor& XH = *saved;
    for (int c = 0; c < s.c; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      double sum_g = 0.0, sum_gx = 0.0;
      for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) {
            sum_g += G.at(n, c, h, w);
            sum_gx += G.at(n, c, h, w) * XH.at(n, c, h, w);
          }
      if (needs(gamma)) g(gamma)[ci] += sum_gx;
      if (needs(beta)) g(beta)[ci] += sum_g;
      if (!needs(x)) continue;
      const double gam = val(gamma)[ci];
      for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) {
            const double gy = G.at(n, c, h, w);
            double dx;
            if (training)
              dx = gam * invstd[ci] * (gy - sum_g / m - XH.at(n, c, h, w) * sum_gx / m);
            else
              dx = gam * invstd[ci] * gy;
            g(x).at(n, c, h, w) += dx;
          }
    }
  });
}

Tape::Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Shape s = shape(x);
  const Shape cs{1, s.c, 1, 1};
  require_shape(shape(gamma), cs, "layer_norm gamma");
  require_shape(shape(beta), cs, "layer_norm beta");
  const Tensor& X = val(x);
  Tensor xhat(s), y(s);
  const std::size_t positions = static_cast<std::size_t>(s.n) * s.h * s.w;
  std::vector<double> invstd(positions);
  for (int n = 0; n < s.n; ++n)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w) {
        double mu = 0.0;
        for (int c = 0; c < s.c; ++c) mu += X.at(n, c, h, w);
        mu /= s.c;
        double var = 0.0;
        for (int c = 0; c < s.c; ++c) {
          const double d = X.at(n, c, h, w) - mu;
          var += d * d;
        }
        var /= s.c;
        const double is = 1.0 / std::sqrt(var + eps);
        invstd[(static_cast<std::size_t>(n) * s.h + h) * s.w + w] = is;
        for (int c = 0; c < s.c; ++c) {
          const double xh = (X.at(n, c, h, w) - mu) * is;
          xhat.at(n, c, h, w) = xh;
          y.at(n, c, h, w) = val(gamma)[static_cast<std::size_t>(c)] * xh + val(beta)[static_cast<std::size_t>(c)];
        }
      }
  const int out = static_cast<int>(nodes_.size());
  const bool need = any_needs({needs(x), needs(gamma), needs(beta)});
  auto saved = std::make_shared<Tensor>(std::move(xhat));
  auto saved_is = std::make_shared<std::vector<double>>(std::move(invstd));
  return push(std::move(y), need, [=, this] {
    const Tensor& G = g({out});
    const Tensor& XH = *saved;
    const double cn = s.c;
    for (int n = 0; n < s.n; ++n)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (int c = 0; c < s.c; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            const double gy = G.at(n, c, h, w);
            if (needs(gamma)) g(gamma)[ci] += gy * XH.at(n, c, h, w);
            if (needs(beta)) g(beta)[ci] += gy;
            const double d = gy * val(gamma)[ci];
            sum_d += d;
            sum_dx += d * XH.at(n, c, h, w);
          }
          if (!needs(x)) continue;
          const double is = (*saved_is)[(static_cast<std::size_t>(n) * s.h + h) * s.w + w];
          for (int c = 0; c < s.c; ++c) {
            const double d = G.at(n, c, h, w) * val(gamma)[static_cast<std::size_t>(c)];
            g(x).at(n, c, h, w) += is * (d - sum_d / cn - XH.at(n, c, h, w) * sum_dx / cn);
          }
        }
  });
}

// ---------------------------------------------------------------------------
// Pointwise

Tape::Var Tape::relu(Var x) {
  const Tensor& X = val(x);
  std::vector<int> active(X.numel());
  for (std::size_t i = 0; i < X.numel(); ++i) active[i] = X[i] > 0.0;
  auto mask = std::make_shared<std::vector<int>>(decide(std::move(active)));
  Tensor y(X.shape());
  for (std::size_t i = 0; i < X.numel(); ++i) y[i] = (*mask)[i] ? X[i] : 0.0;
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& G = g({out});
    for (std::size_t i = 0; i < G.numel(); ++i)
      if ((*mask)[i]) g(x)[i] += G[i];
  });
}

Tape::Var Tape::gelu(Var x) {
  Tensor y = val(x);
  for (auto& v : y.data()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& X = val(x);
    const Tensor& G = g({out});
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < X.numel(); ++i) {
      const double v = X[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      g(x)[i] += G[i] * (cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v));
    }
  });
}

Tape::Var Tape::sigmoid(Var x) {
  Tensor y = val(x);
  for (auto& v : y.data()) v = 1.0 / (1.0 + std::exp(-v));
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& Y = val({out});
    const Tensor& G = g({out});
    for (std::size_t i = 0; i < Y.numel(); ++i) g(x)[i] += G[i] * Y[i] * (1.0 - Y[i]);
  });
}

Tape::Var Tape::add(Var a, Var b) {
  require_shape(shape(a), shape(b), "add");
  Tensor y = val(a);
  y.accumulate(val(b));
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(a) || needs(b), [=, this] {
    const Tensor& G = g({out});
    if (needs(a)) g(a).accumulate(G);
    if (needs(b)) g(b).accumulate(G);
  });
}

Tape::Var Tape::scale_channels(Var x, Var gate) {
  const Shape s = shape(x);
  require_shape(shape(gate), Shape{s.n, s.c, 1, 1}, "scale_channels gate");
  Tensor y(s);
  const Tensor& X = val(x);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const double k = val(gate).at(n, c, 0, 0);
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) y.at(n, c, h, w) = X.at(n, c, h, w) * k;
    }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x) || needs(gate), [=, this] {
    const Tensor& G = g({out});
    const Tensor& Xv = val(x);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const double k = val(gate).at(n, c, 0, 0);
        double acc = 0.0;
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) {
            const double gy = G.at(n, c, h, w);
            acc += gy * Xv.at(n, c, h, w);
            if (needs(x)) g(x).at(n, c, h, w) += gy * k;
          }
        if (needs(gate)) g(gate).at(n, c, 0, 0) += acc;
      }
  });
}

// ---------------------------------------------------------------------------
// Pooling and resizing

Tape::Var Tape::global_avg_pool(Var x) {
  const Shape s = shape(x);
  const double area = static_cast<double>(s.h) * s.w;
  Tensor y({s.n, s.c, 1, 1});
  const Tensor& X = val(x);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double sum = 0.0;
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) sum += X.at(n, c, h, w);
      y.at(n, c, 0, 0) = sum / area;
    }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& G = g({out});
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const double gy = G.at(n, c, 0, 0) / area;
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) g(x).at(n, c, h, w) += gy;
      }
  });
}

Tape::Var Tape::global_max_pool(Var x) {
  const Shape s = shape(x);
  const Tensor& X = val(x);
  std::vector<int> argmax(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      int best = 0;
      for (int i = 1; i < s.h * s.w; ++i)
        if (X.at(n, c, i / s.w, i % s.w) > X.at(n, c, best / s.w, best % s.w)) best = i;
      argmax[static_cast<std::size_t>(n) * s.c + c] = best;
    }
  auto where = std::make_shared<std::vector<int>>(decide(std::move(argmax)));
  Tensor y({s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const int i = (*where)[static_cast<std::size_t>(n) * s.c + c];
      y.at(n, c, 0, 0) = X.at(n, c, i / s.w, i % s.w);
    }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& G = g({out});
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const int i = (*where)[static_cast<std::size_t>(n) * s.c + c];
        g(x).at(n, c, i / s.w, i % s.w) += G.at(n, c, 0, 0);
      }
  });
}

Tape::Var Tape::avg_pool(Var x, int k) {
  const Shape s = shape(x);
  if (k < 1 || s.h % k || s.w % k) throw ShapeError("avg_pool: " + s.str() + " not divisible by " + std::to_string(k));
  if (k == 1) return x;
  const Shape os{s.n, s.c, s.h / k, s.w / k};
  const double area = static_cast<double>(k) * k;
  Tensor y(os);
  const Tensor& X = val(x);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) y.at(n, c, h / k, w / k) += X.at(n, c, h, w) / area;
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& G = g({out});
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w) g(x).at(n, c, h, w) += G.at(n, c, h / k, w / k) / area;
  });
}

Tape::Var Tape::concat(Var a, Var b) {
  Tensor y = concat_channels(val(a), val(b));
  const int ca = shape(a).c, cb = shape(b).c;
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(a) || needs(b), [=, this] {
    const Tensor& G = g({out});
    if (needs(a)) g(a).accumulate(slice_channels(G, 0, ca));
    if (needs(b)) g(b).accumulate(slice_channels(G, ca, ca + cb));
  });
}

Tape::Var Tape::attention(Var q, Var k, Var v, int heads) {
  const Shape qs = shape(q), ks = shape(k);
  require_shape(ks, shape(v), "attention k/v");
  if (qs.n != ks.n || qs.c != ks.c || heads < 1 || qs.c % heads)
    throw ShapeError("attention: q " + qs.str() + " vs k " + ks.str());
  const int lq = qs.h * qs.w, lk = ks.h * ks.w, d = qs.c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  // Row-major views: element (channel c, token t) lives at c * L + t within a sample.
  auto weights = std::make_shared<std::vector<double>>(static_cast<std::size_t>(qs.n) * heads * lq * lk);
  Tensor y(qs);
  const auto& Q = val(q).data();
  const auto& K = val(k).data();
  const auto& V = val(v).data();
  const std::span<double> Y = y.data();
  for (int n = 0; n < qs.n; ++n)
    for (int hd = 0; hd < heads; ++hd) {
      const std::size_t qb = (static_cast<std::size_t>(n) * qs.c + static_cast<std::size_t>(hd) * d) * lq;
      const std::size_t kb = (static_cast<std::size_t>(n) * ks.c + static_cast<std::size_t>(hd) * d) * lk;
      double* a0 = weights->data() + (static_cast<std::size_t>(n) * heads + hd) * lq * lk;
      for (int i = 0; i < lq; ++i) {
        double* a = a0 + static_cast<std::size_t>(i) * lk;
        double mx = -1e300;
        for (int j = 0; j < lk; ++j) {
          double s = 0.0;
          for (int c = 0; c < d; ++c) s += Q[qb + static_cast<std::size_t>(c) * lq + i] * K[kb + static_cast<std::size_t>(c) * lk + j];
          a[j] = s * scale;
          mx = std::max(mx, a[j]);
        }
        double z = 0.0;
        for (int j = 0; j < lk; ++j) z += (a[j] = std::exp(a[j] - mx));
        for (int j = 0; j < lk; ++j) a[j] /= z;
        for (int c = 0; c < d; ++c) {
          double acc = 0.0;
          for (int j = 0; j < lk; ++j) acc += a[j] * V[kb + static_cast<std::size_t>(c) * lk + j];
          Y[qb + static_cast<std::size_t>(c) * lq + i] = acc;
        }
      }
    }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), any_needs({needs(q), needs(k), needs(v)}), [=, this] {
    const auto& G = g({out}).data();
    const auto& Qv = val(q).data();
    const auto& Kv = val(k).data();
    const auto& Vv = val(v).data();
    std::vector<double> da(static_cast<std::size_t>(lk));
    for (int n = 0; n < qs.n; ++n)
      for (int hd = 0; hd < heads; ++hd) {
        const std::size_t qb = (static_cast<std::size_t>(n) * qs.c + static_cast<std::size_t>(hd) * d) * lq;
        const std::size_t kb = (static_cast<std::size_t>(n) * ks.c + static_cast<std::size_t>(hd) * d) * lk;
        const double* a0 = weights->data() + (static_cast<std::size_t>(n) * heads + hd) * lq * lk;
        for (int i = 0; i < lq; ++i) {
          const double* a = a0 + static_cast<std::size_t>(i) * lk;
          double dot = 0.0;
          for (int j = 0; j < lk; ++j) {
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
              const double gy = G[qb + static_cast<std::size_t>(c) * lq + i];
              s += gy * Vv[kb + static_cast<std::size_t>(c) * lk + j];
              if (needs(v)) g(v).data()[kb + static_cast<std::size_t>(c) * lk + j] += a[j] * gy;
            }
            da[static_cast<std::size_t>(j)] = s;
            dot += a[j] * s;
          }
          for (int j = 0; j < lk; ++j) {
            const double ds = a[j] * (da[static_cast<std::size_t>(j)] - dot) * scale;
            for (int c = 0; c < d; ++c) {
              const std::size_t qi = qb + static_cast<std::size_t>(c) * lq + i;
              const std::size_t kj = kb + static_cast<std::size_t>(c) * lk + j;
              if (needs(q)) g(q).data()[qi] += ds * Kv[kj];
              if (needs(k)) g(k).data()[kj] += ds * Qv[qi];
            }
          }
        }
      }
  });
}

Tape::Var Tape::upsample_bilinear(Var x, int out_h, int out_w) {
  const Shape s = shape(x);
  if (out_h == s.h && out_w == s.w) return x;
  struct Tap {
    int i0, i1;
    double l;
  };
  auto taps = [](int in, int outn) {
    std::vector<Tap> t(static_cast<std::size_t>(outn));
    const double r = static_cast<double>(in) / outn;
    for (int o = 0; o < outn; ++o) {
      double src = std::max(0.0, (o + 0.5) * r - 0.5);
      int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
      int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return t;
  };
  auto th = std::make_shared<std::vector<Tap>>(taps(s.h, out_h));
  auto tw = std::make_shared<std::vector<Tap>>(taps(s.w, out_w));
  Tensor y({s.n, s.c, out_h, out_w});
  const Tensor& X = val(x);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oh = 0; oh < out_h; ++oh) {
        const Tap& a = (*th)[static_cast<std::size_t>(oh)];
        for (int ow = 0; ow < out_w; ++ow) {
          const Tap& b = (*tw)[static_cast<std::size_t>(ow)];
          y.at(n, c, oh, ow) = (1 - a.l) * ((1 - b.l) * X.at(n, c, a.i0, b.i0) + b.l * X.at(n, c, a.i0, b.i1)) +
                               a.l * ((1 - b.l) * X.at(n, c, a.i1, b.i0) + b.l * X.at(n, c, a.i1, b.i1));
        }
      }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [=, this] {
    const Tensor& G = g({out});
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int oh = 0; oh < out_h; ++oh) {
          const Tap& a = (*th)[static_cast<std::size_t>(oh)];
          for (int ow = 0; ow < out_w; ++ow) {
            const Tap& b = (*tw)[static_cast<std::size_t>(ow)];
            const double gy = G.at(n, c, oh, ow);
            g(x).at(n, c, a.i0, b.i0) += gy * (1 - a.l) * (1 - b.l);
            g(x).at(n, c, a.i0, b.i1) += gy * (1 - a.l) * b.l;
            g(x).at(n, c, a.i1, b.i0) += gy * a.l * (1 - b.l);
            g(x).at(n, c, a.i1, b.i1) += gy * a.l * b.l;
          }
        }
  });
}

}  // namespace unifl::nn
