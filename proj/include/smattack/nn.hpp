#ifndef SMATTACK_NN_HPP
#define SMATTACK_NN_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "smattack/tech.hpp"

namespace smattack {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Layer topology of the hybrid vector/image scoring network. The default
/// values are the full-size configuration; the presets shrink it for tests
/// and desk-scale training runs.
struct NetworkConfig {
  int feature_len = 27;
  int m = 3;                 // FEOL metal layers (2m bit-planes per scale)
  int num_scales = 3;
  int image_px = 99;
  std::array<int, 4> conv_channels{16, 32, 64, 128};
  int conv_per_group = 3;
  int vec_width = 128;       // fc1 out, vector ResNet width
  int vec_blocks = 4;
  int fc3_out = 256;
  int embed = 128;           // fc4 out, per-image embedding
  int merge_width = 128;     // fc5 out, merged ResNet width
  int merge_blocks = 3;
  int fc6_out = 32;
  bool two_class = false;    // fc7 emits (s-, s+) pairs instead of one score

  int in_channels() const { return 2 * m * num_scales; }
  int fc7_out() const { return two_class ? 2 : 1; }

  /// Spatial sizes per conv group: 3x3 stride-3 max pool (ceil) in between.
  std::array<int, 4> group_sizes() const {
    std::array<int, 4> s{};
    s[0] = image_px;
    for (int g = 1; g < 4; ++g) s[g] = (s[g - 1] + 2) / 3;
    return s;
  }

  static NetworkConfig full() { return NetworkConfig{}; }

  /// Desk-scale preset: same topology, smaller images and widths.
  static NetworkConfig small_preset() {
    NetworkConfig c;
    c.image_px = 15;
    c.conv_channels = {8, 16, 32, 64};
    c.vec_width = 64;
    c.fc3_out = 128;
    c.embed = 64;
    c.merge_width = 64;
    c.fc6_out = 16;
    return c;
  }

  /// Gradient-check preset: 9x9 images, 8-wide layers.
  static NetworkConfig reduced() {
    NetworkConfig c;
    c.m = 1;
    c.feature_len = 6;
    c.image_px = 9;
    c.conv_channels = {4, 4, 8, 8};
    c.vec_width = 8;
    c.vec_blocks = 2;
    c.fc3_out = 16;
    c.embed = 8;
    c.merge_width = 8;
    c.merge_blocks = 2;
    c.fc6_out = 4;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <class Real>
struct LinearLayer {
  int in = 0, out = 0;
  std::vector<Real> w;  // out x in, row-major
  std::vector<Real> b;  // out

  void resize(int in_, int out_) {
    in = in_;
    out = out_;
    w.assign(static_cast<std::size_t>(in) * out, Real(0));
    b.assign(out, Real(0));
  }
};

template <class Real>
struct ConvLayer {
  int cin = 0, cout = 0;
  std::vector<Real> w;  // cout x (cin*9), row-major
  std::vector<Real> b;  // cout

  void resize(int cin_, int cout_) {
    cin = cin_;
    cout = cout_;
    w.assign(static_cast<std::size_t>(cout) * cin * 9, Real(0));
    b.assign(cout, Real(0));
  }
};

template <class Real>
struct ModelParams {
  LinearLayer<Real> fc1;
  std::vector<std::array<LinearLayer<Real>, 3>> res_vec;
  std::vector<std::vector<ConvLayer<Real>>> conv;  // 4 groups
  LinearLayer<Real> fc3, fc4, fc5_image, fc5_merged;
  std::vector<std::array<LinearLayer<Real>, 3>> res_merged;
  LinearLayer<Real> fc6, fc7;

  void resize(const NetworkConfig& c) {
    fc1.resize(c.feature_len, c.vec_width);
    res_vec.assign(c.vec_blocks, {});
    for (auto& blk : res_vec)
      for (auto& l : blk) l.resize(c.vec_width, c.vec_width);
    conv.assign(4, {});
    int cin = c.in_channels();
    for (int g = 0; g < 4; ++g) {
      conv[g].resize(c.conv_per_group);
      for (int k = 0; k < c.conv_per_group; ++k) {
        conv[g][k].resize(cin, c.conv_channels[g]);
        cin = c.conv_channels[g];
      }
    }
    fc3.resize(c.conv_channels[3], c.fc3_out);
    fc4.resize(c.fc3_out, c.embed);
    fc5_image.resize(2 * c.embed, c.embed);
    fc5_merged.resize(c.vec_width + c.embed, c.merge_width);
    res_merged.assign(c.merge_blocks, {});
    for (auto& blk : res_merged)
      for (auto& l : blk) l.resize(c.merge_width, c.merge_width);
    fc6.resize(c.merge_width, c.fc6_out);
    fc7.resize(c.fc6_out, c.fc7_out());
  }

  /// Enumerates all parameter tensors in serialization order.
  template <class Fn>
  void visit(Fn&& fn) {
    auto lin = [&](const std::string& name, LinearLayer<Real>& l) {
      fn(name + ".w", l.w);
      fn(name + ".b", l.b);
    };
    lin("fc1", fc1);
    for (std::size_t i = 0; i < res_vec.size(); ++i)
      for (int j = 0; j < 3; ++j)
        lin("res_vec" + std::to_string(i) + "." + std::to_string(j), res_vec[i][j]);
    for (std::size_t g = 0; g < conv.size(); ++g)
      for (std::size_t k = 0; k < conv[g].size(); ++k) {
        const std::string name =
            "conv" + std::to_string(g + 1) + "." + std::to_string(k);
        fn(name + ".w", conv[g][k].w);
        fn(name + ".b", conv[g][k].b);
      }
    lin("fc3", fc3);
    lin("fc4", fc4);
    lin("fc5_image", fc5_image);
    lin("fc5_merged", fc5_merged);
    for (std::size_t i = 0; i < res_merged.size(); ++i)
      for (int j = 0; j < 3; ++j)
        lin("res_merged" + std::to_string(i) + "." + std::to_string(j), res_merged[i][j]);
    lin("fc6", fc6);
    lin("fc7", fc7);
  }

  std::size_t scalar_count() {
    std::size_t n = 0;
    visit([&](const std::string&, std::vector<Real>& t) { n += t.size(); });
    return n;
  }
};

// ---------------------------------------------------------------------------
// Elementary ops
// ---------------------------------------------------------------------------

inline constexpr double kLReluSlope = 0.01;

template <class Real>
Real lrelu(Real x) {
  return x > Real(0) ? x : Real(kLReluSlope) * x;
}

/// Gradient from the input value: 1 for x > 0, 0.01 otherwise (0.01 at 0).
template <class Real>
Real lrelu_grad(Real x) {
  return x > Real(0) ? Real(1) : Real(kLReluSlope);
}

namespace nn_detail {

template <class Real>
void lrelu_inplace(std::vector<Real>& v) {
  for (Real& x : v) x = lrelu(x);
}

/// Multiplies dy by the activation gradient derived from the stored
/// post-activation output (sign of output equals sign of input).
template <class Real>
void lrelu_backward(const std::vector<Real>& out, std::vector<Real>& dy) {
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > Real(0))) dy[i] *= Real(kLReluSlope);
}

// C[M,N] = A[M,K] * B[N,K]^T  (+ bias per column when bias != nullptr)
template <class Real>
void matmul_nt(const Real* a, const Real* b, Real* c, int M, int N, int K,
               const Real* bias) {
  for (int m = 0; m < M; ++m) {
    const Real* ar = a + static_cast<std::size_t>(m) * K;
    Real* cr = c + static_cast<std::size_t>(m) * N;
    for (int n = 0; n < N; ++n) {
      const Real* br = b + static_cast<std::size_t>(n) * K;
      Real sum = bias ? bias[n] : Real(0);
      for (int k = 0; k < K; ++k) sum += ar[k] * br[k];
      cr[n] = sum;
    }
  }
}

// C[M,N] += A[M,K] * B[K,N]
template <class Real>
void matmul_nn_acc(const Real* a, const Real* b, Real* c, int M, int N, int K) {
  for (int m = 0; m < M; ++m) {
    Real* cr = c + static_cast<std::size_t>(m) * N;
    const Real* ar = a + static_cast<std::size_t>(m) * K;
    for (int k = 0; k < K; ++k) {
      const Real av = ar[k];
      if (av == Real(0)) continue;
      const Real* br = b + static_cast<std::size_t>(k) * N;
      for (int n = 0; n < N; ++n) cr[n] += av * br[n];
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <class Real>
void matmul_tn_acc(const Real* a, const Real* b, Real* c, int M, int N, int K) {
  for (int k = 0; k < K; ++k) {
    const Real* ar = a + static_cast<std::size_t>(k) * M;
    const Real* br = b + static_cast<std::size_t>(k) * N;
    for (int m = 0; m < M; ++m) {
      const Real av = ar[m];
      if (av == Real(0)) continue;
      Real* cr = c + static_cast<std::size_t>(m) * N;
      for (int n = 0; n < N; ++n) cr[n] += av * br[n];
    }
  }
}

template <class Real>
void linear_forward(const std::vector<Real>& x, int rows, const LinearLayer<Real>& l,
                    std::vector<Real>& y) {
  y.assign(static_cast<std::size_t>(rows) * l.out, Real(0));
  matmul_nt(x.data(), l.w.data(), y.data(), rows, l.out, l.in, l.b.data());
}

/// dx = dy W; dW += dy^T x; db += column sums of dy.
template <class Real>
void linear_backward(const std::vector<Real>& x, int rows, const LinearLayer<Real>& l,
                     const std::vector<Real>& dy, LinearLayer<Real>& grad,
                     std::vector<Real>* dx) {
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < l.out; ++o) grad.b[o] += dy[static_cast<std::size_t>(r) * l.out + o];
  matmul_tn_acc(dy.data(), x.data(), grad.w.data(), l.out, l.in, rows);
  if (dx) {
    dx->assign(static_cast<std::size_t>(rows) * l.in, Real(0));
    matmul_nn_acc(dy.data(), l.w.data(), dx->data(), rows, l.in, l.out);
  }
}

/// 3x3 same-padding im2col: col[(h*W+w), (c*9 + 3*dh + dw)].
template <class Real>
void im2col3(const std::vector<Real>& in, int C, int H, int W, std::vector<Real>& col) {
  col.assign(static_cast<std::size_t>(H) * W * C * 9, Real(0));
  const int K = C * 9;
  for (int c = 0; c < C; ++c) {
    const Real* plane = in.data() + static_cast<std::size_t>(c) * H * W;
    for (int dh = 0; dh < 3; ++dh) {
      for (int dw = 0; dw < 3; ++dw) {
        const int kk = c * 9 + dh * 3 + dw;
        for (int h = 0; h < H; ++h) {
          const int sh = h + dh - 1;
          if (sh < 0 || sh >= H) continue;
          Real* dst = col.data() + static_cast<std::size_t>(h) * W * K + kk;
          const Real* src = plane + static_cast<std::size_t>(sh) * W + (dw - 1);
          const int w0 = std::max(0, 1 - dw);
          const int w1 = std::min(W, W + 1 - dw);
          for (int w = w0; w < w1; ++w) dst[static_cast<std::size_t>(w) * K] = src[w];
        }
      }
    }
  }
}

template <class Real>
void conv3_forward(const std::vector<Real>& in, int H, int W, const ConvLayer<Real>& l,
                   std::vector<Real>& out, std::vector<Real>& col) {
  im2col3(in, l.cin, H, W, col);
  const int HW = H * W;
  // out is CHW: compute (HW x cout) then transpose into planes
  std::vector<Real> tmp(static_cast<std::size_t>(HW) * l.cout);
  matmul_nt(col.data(), l.w.data(), tmp.data(), HW, l.cout, l.cin * 9, l.b.data());
  out.assign(static_cast<std::size_t>(l.cout) * HW, Real(0));
  for (int p = 0; p < HW; ++p)
    for (int o = 0; o < l.cout; ++o)
      out[static_cast<std::size_t>(o) * HW + p] = tmp[static_cast<std::size_t>(p) * l.cout + o];
}

template <class Real>
void conv3_backward(const std::vector<Real>& in, int H, int W, const ConvLayer<Real>& l,
                    const std::vector<Real>& dout, ConvLayer<Real>& grad,
                    std::vector<Real>* din, std::vector<Real>& col) {
  const int HW = H * W;
  const int K = l.cin * 9;
  for (int o = 0; o < l.cout; ++o) {
    Real s = 0;
    const Real* d = dout.data() + static_cast<std::size_t>(o) * HW;
    for (int p = 0; p < HW; ++p) s += d[p];
    grad.b[o] += s;
  }
  im2col3(in, l.cin, H, W, col);
  // dW[o, k] += sum_p dout[o, p] * col[p, k]
  std::vector<Real> dt(static_cast<std::size_t>(HW) * l.cout);
  for (int p = 0; p < HW; ++p)
    for (int o = 0; o < l.cout; ++o)
      dt[static_cast<std::size_t>(p) * l.cout + o] = dout[static_cast<std::size_t>(o) * HW + p];
  matmul_tn_acc(dt.data(), col.data(), grad.w.data(), l.cout, K, HW);
  if (!din) return;
  // dcol[p, k] = dt[p, :] * W[:, k], then scatter back (col2im)
  std::vector<Real> dcol(static_cast<std::size_t>(HW) * K, Real(0));
  matmul_nn_acc(dt.data(), l.w.data(), dcol.data(), HW, K, l.cout);
  din->assign(static_cast<std::size_t>(l.cin) * HW, Real(0));
  for (int c = 0; c < l.cin; ++c) {
    Real* plane = din->data() + static_cast<std::size_t>(c) * HW;
    for (int dh = 0; dh < 3; ++dh)
      for (int dw = 0; dw < 3; ++dw) {
        const int kk = c * 9 + dh * 3 + dw;
        for (int h = 0; h < H; ++h) {
          const int sh = h + dh - 1;
          if (sh < 0 || sh >= H) continue;
          const Real* src = dcol.data() + static_cast<std::size_t>(h) * W * K + kk;
          Real* dst = plane + static_cast<std::size_t>(sh) * W + (dw - 1);
          const int w0 = std::max(0, 1 - dw);
          const int w1 = std::min(W, W + 1 - dw);
          for (int w = w0; w < w1; ++w) dst[w] += src[static_cast<std::size_t>(w) * K];
        }
      }
  }
}

/// 3x3 stride-3 max pool, ceiling mode (11 -> 4). Records argmax indices.
template <class Real>
void maxpool3_forward(const std::vector<Real>& in, int C, int H, int W,
                      std::vector<Real>& out, std::vector<int>& idx) {
  const int Ho = (H + 2) / 3, Wo = (W + 2) / 3;
  out.assign(static_cast<std::size_t>(C) * Ho * Wo, Real(0));
  idx.assign(out.size(), 0);
  for (int c = 0; c < C; ++c) {
    const Real* plane = in.data() + static_cast<std::size_t>(c) * H * W;
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo) {
        Real best = -std::numeric_limits<Real>::infinity();
        int best_i = -1;
        for (int h = ho * 3; h < std::min(H, ho * 3 + 3); ++h)
          for (int w = wo * 3; w < std::min(W, wo * 3 + 3); ++w) {
            const int i = h * W + w;
            if (plane[i] > best) {
              best = plane[i];
              best_i = i;
            }
          }
        const std::size_t oi = (static_cast<std::size_t>(c) * Ho + ho) * Wo + wo;
        out[oi] = best;
        idx[oi] = c * H * W + best_i;
      }
  }
}

template <class Real>
void maxpool3_backward(const std::vector<int>& idx, const std::vector<Real>& dout,
                       std::size_t in_size, std::vector<Real>& din) {
  din.assign(in_size, Real(0));
  for (std::size_t i = 0; i < dout.size(); ++i) din[idx[i]] += dout[i];
}

}  // namespace nn_detail

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Softmax regression loss: -log softmax(s)_t, max-shift stabilized.
/// Gradient is softmax(s) - onehot(t); its components sum to zero.
template <class Real>
std::pair<Real, std::vector<Real>> softmax_regression_loss(const std::vector<Real>& s,
                                                           int t) {
  const int n = static_cast<int>(s.size());
  if (t < 0 || t >= n) throw InternalError("softmax_regression_loss: bad true index");
  Real mx = s[0];
  for (Real v : s) mx = std::max(mx, v);
  Real z = 0;
  std::vector<Real> grad(s.size());
  for (int j = 0; j < n; ++j) {
    grad[j] = std::exp(s[j] - mx);
    z += grad[j];
  }
  for (Real& g : grad) g /= z;
  const Real loss = std::log(z) - (s[t] - mx);
  grad[t] -= Real(1);
  return {loss, std::move(grad)};
}

/// Two-class classification loss over (s-, s+) score pairs, averaged over
/// the group. Gradients satisfy dl/ds+ = -dl/ds- exactly.
template <class Real>
std::pair<Real, std::vector<std::array<Real, 2>>> two_class_loss(
    const std::vector<std::array<Real, 2>>& s, int t) {
  const int n = static_cast<int>(s.size());
  if (t < 0 || t >= n) throw InternalError("two_class_loss: bad true index");
  Real loss = 0;
  std::vector<std::array<Real, 2>> grad(s.size());
  for (int j = 0; j < n; ++j) {
    const Real sm = s[j][0], sp = s[j][1];
    // p = P(connection) = sigmoid(s+ - s-)
    const Real d = sp - sm;
    const Real p = d >= 0 ? Real(1) / (Real(1) + std::exp(-d))
                          : std::exp(d) / (Real(1) + std::exp(d));
    auto log_sig = [](Real x) {  // log sigmoid(x), stable
      return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    };
    if (j == t) {
      loss -= log_sig(d);
      grad[j][1] = -(Real(1) - p) / Real(n);
    } else {
      loss -= log_sig(-d);
      grad[j][1] = p / Real(n);
    }
    grad[j][0] = -grad[j][1];
  }
  return {loss / Real(n), std::move(grad)};
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// One training/inference sample: a candidate group with n feature vectors,
/// n source image-plane stacks and one shared sink stack.
template <class Real>
struct GroupInput {
  int n = 0;
  std::vector<Real> vec;            // n x feature_len
  std::vector<Real> sink_planes;    // C x H x W
  std::vector<Real> source_planes;  // n x (C x H x W)
};

template <class Real>
struct ImageCache {
  std::vector<std::vector<Real>> conv_out;  // post-activation per conv layer
  std::vector<std::vector<Real>> pool_out;  // per pool
  std::vector<std::vector<int>> pool_idx;
  std::vector<Real> gap;       // conv_channels[3]
  std::vector<Real> fc3_out;   // post-activation
  std::vector<Real> embed;     // fc4 post-activation
};

template <class Real>
struct GroupCache {
  ImageCache<Real> sink;
  std::vector<ImageCache<Real>> sources;
  std::vector<Real> fc1_out;                      // n x vec_width
  std::vector<std::array<std::vector<Real>, 3>> res_vec_inner;
  std::vector<std::vector<Real>> res_vec_out;     // per block
  std::vector<Real> concat_img;                   // n x 2*embed
  std::vector<Real> fc5_image_out;                // n x embed
  std::vector<Real> concat_merged;                // n x (vec_width + embed)
  std::vector<Real> fc5_merged_out;               // n x merge_width
  std::vector<std::array<std::vector<Real>, 3>> res_merged_inner;
  std::vector<std::vector<Real>> res_merged_out;
  std::vector<Real> fc6_out;                      // n x fc6_out
  std::vector<Real> scores;                       // n x fc7_out
  std::vector<std::array<int, 4>> conv_shapes;    // (images, H, W, C) per group
};

template <class Real>
class Network {
 public:
  explicit Network(NetworkConfig cfg) : cfg_(cfg) { params_.resize(cfg); }

  const NetworkConfig& config() const { return cfg_; }
  ModelParams<Real>& params() { return params_; }
  const ModelParams<Real>& params() const { return params_; }

  /// Kaiming-uniform initialization scaled for LReLU, seeded.
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double gain = std::sqrt(2.0 / (1.0 + kLReluSlope * kLReluSlope));
    params_.visit([&](const std::string& name, std::vector<Real>& t) {
      if (name.ends_with(".b")) {
        std::fill(t.begin(), t.end(), Real(0));
        return;
      }
      // fan-in = columns of the weight matrix
      std::size_t fan_in = 0;
      find_fan_in(name, fan_in);
      const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Real& v : t) v = static_cast<Real>(dist(rng));
    });
  }

  std::vector<Real> score(const GroupInput<Real>& in) const {
    GroupCache<Real> cache;
    forward(in, cache);
    return cache.scores;
  }

  void forward(const GroupInput<Real>& in, GroupCache<Real>& cache) const {
    const int n = in.n;
    if (n < 1) throw InternalError("forward: empty group");
    if (static_cast<int>(in.vec.size()) != n * cfg_.feature_len)
      throw InternalError("forward: feature matrix shape mismatch at fc1");

    // Image part: shared tower, sink processed once.
    image_forward(in.sink_planes, cache.sink, &cache.conv_shapes, n);
    cache.sources.resize(n);
    const std::size_t img_size = in.sink_planes.size();
    for (int j = 0; j < n; ++j) {
      std::vector<Real> planes(in.source_planes.begin() + j * img_size,
                               in.source_planes.begin() + (j + 1) * img_size);
      image_forward(planes, cache.sources[j], nullptr, n);
    }
    cache.concat_img.resize(static_cast<std::size_t>(n) * 2 * cfg_.embed);
    for (int j = 0; j < n; ++j) {
      std::copy(cache.sink.embed.begin(), cache.sink.embed.end(),
                cache.concat_img.begin() + static_cast<std::size_t>(j) * 2 * cfg_.embed);
      std::copy(cache.sources[j].embed.begin(), cache.sources[j].embed.end(),
                cache.concat_img.begin() + static_cast<std::size_t>(j) * 2 * cfg_.embed +
                    cfg_.embed);
    }
    nn_detail::linear_forward(cache.concat_img, n, params_.fc5_image, cache.fc5_image_out);
    nn_detail::lrelu_inplace(cache.fc5_image_out);

    // Vector part.
    nn_detail::linear_forward(in.vec, n, params_.fc1, cache.fc1_out);
    nn_detail::lrelu_inplace(cache.fc1_out);
    res_forward(cache.fc1_out, n, params_.res_vec, cache.res_vec_inner, cache.res_vec_out);
    const std::vector<Real>& vec_out =
        cache.res_vec_out.empty() ? cache.fc1_out : cache.res_vec_out.back();

    // Merged part.
    const int cw = cfg_.vec_width + cfg_.embed;
    cache.concat_merged.resize(static_cast<std::size_t>(n) * cw);
    for (int j = 0; j < n; ++j) {
      std::copy(vec_out.begin() + static_cast<std::size_t>(j) * cfg_.vec_width,
                vec_out.begin() + static_cast<std::size_t>(j + 1) * cfg_.vec_width,
                cache.concat_merged.begin() + static_cast<std::size_t>(j) * cw);
      std::copy(cache.fc5_image_out.begin() + static_cast<std::size_t>(j) * cfg_.embed,
                cache.fc5_image_out.begin() + static_cast<std::size_t>(j + 1) * cfg_.embed,
                cache.concat_merged.begin() + static_cast<std::size_t>(j) * cw +
                    cfg_.vec_width);
    }
    nn_detail::linear_forward(cache.concat_merged, n, params_.fc5_merged,
                              cache.fc5_merged_out);
    nn_detail::lrelu_inplace(cache.fc5_merged_out);
    res_forward(cache.fc5_merged_out, n, params_.res_merged, cache.res_merged_inner,
                cache.res_merged_out);
    const std::vector<Real>& merged_out =
        cache.res_merged_out.empty() ? cache.fc5_merged_out : cache.res_merged_out.back();
    nn_detail::linear_forward(merged_out, n, params_.fc6, cache.fc6_out);
    nn_detail::lrelu_inplace(cache.fc6_out);
    nn_detail::linear_forward(cache.fc6_out, n, params_.fc7, cache.scores);
  }

  /// Accumulates parameter gradients for one group given dloss/dscores.
  void backward(const GroupInput<Real>& in, const GroupCache<Real>& cache,
                const std::vector<Real>& dscores, ModelParams<Real>& grads) const {
    const int n = in.n;
    std::vector<Real> d_fc6(cache.fc6_out.size());
    {
      std::vector<Real> ds = dscores;
      nn_detail::linear_backward(cache.fc6_out, n, params_.fc7, ds, grads.fc7, &d_fc6);
    }
    nn_detail::lrelu_backward(cache.fc6_out, d_fc6);
    const std::vector<Real>& merged_out =
        cache.res_merged_out.empty() ? cache.fc5_merged_out : cache.res_merged_out.back();
    std::vector<Real> d_merged;
    nn_detail::linear_backward(merged_out, n, params_.fc6, d_fc6, grads.fc6, &d_merged);
    res_backward(cache.fc5_merged_out, n, params_.res_merged, cache.res_merged_inner,
                 cache.res_merged_out, grads.res_merged, d_merged);
    nn_detail::lrelu_backward(cache.fc5_merged_out, d_merged);
    std::vector<Real> d_concat_merged;
    nn_detail::linear_backward(cache.concat_merged, n, params_.fc5_merged, d_merged,
                               grads.fc5_merged, &d_concat_merged);

    // Split merged concat gradient into vector-path and image-path parts.
    const int cw = cfg_.vec_width + cfg_.embed;
    std::vector<Real> d_vec(static_cast<std::size_t>(n) * cfg_.vec_width);
    std::vector<Real> d_img(static_cast<std::size_t>(n) * cfg_.embed);
    for (int j = 0; j < n; ++j) {
      std::copy(d_concat_merged.begin() + static_cast<std::size_t>(j) * cw,
                d_concat_merged.begin() + static_cast<std::size_t>(j) * cw + cfg_.vec_width,
                d_vec.begin() + static_cast<std::size_t>(j) * cfg_.vec_width);
      std::copy(d_concat_merged.begin() + static_cast<std::size_t>(j) * cw + cfg_.vec_width,
                d_concat_merged.begin() + static_cast<std::size_t>(j + 1) * cw,
                d_img.begin() + static_cast<std::size_t>(j) * cfg_.embed);
    }

    // Vector part.
    res_backward(cache.fc1_out, n, params_.res_vec, cache.res_vec_inner,
                 cache.res_vec_out, grads.res_vec, d_vec);
    nn_detail::lrelu_backward(cache.fc1_out, d_vec);
    nn_detail::linear_backward<Real>(in.vec, n, params_.fc1, d_vec, grads.fc1, nullptr);

    // Image part.
    nn_detail::lrelu_backward(cache.fc5_image_out, d_img);
    std::vector<Real> d_concat_img;
    nn_detail::linear_backward(cache.concat_img, n, params_.fc5_image, d_img,
                               grads.fc5_image, &d_concat_img);
    std::vector<Real> d_sink_embed(cfg_.embed, Real(0));
    const std::size_t img_size = in.sink_planes.size();
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < cfg_.embed; ++i)
        d_sink_embed[i] += d_concat_img[static_cast<std::size_t>(j) * 2 * cfg_.embed + i];
      std::vector<Real> d_src_embed(
          d_concat_img.begin() + static_cast<std::size_t>(j) * 2 * cfg_.embed + cfg_.embed,
          d_concat_img.begin() + static_cast<std::size_t>(j + 1) * 2 * cfg_.embed);
      std::vector<Real> planes(in.source_planes.begin() + j * img_size,
                               in.source_planes.begin() + (j + 1) * img_size);
      image_backward(planes, cache.sources[j], d_src_embed, grads);
    }
    image_backward(in.sink_planes, cache.sink, d_sink_embed, grads);
  }

 private:
  // weight rows = fan-out (bias length), so fan-in = weight size / bias size
  void find_fan_in(const std::string& name, std::size_t& fan_in) {
    const std::string base = name.substr(0, name.size() - 2);
    std::size_t out = 0, wsize = 0;
    params_.visit([&](const std::string& n, std::vector<Real>& t) {
      if (n == base + ".b") out = t.size();
      if (n == base + ".w") wsize = t.size();
    });
    fan_in = out ? wsize / out : wsize;
  }

  void image_forward(const std::vector<Real>& planes, ImageCache<Real>& c,
                     std::vector<std::array<int, 4>>* shapes, int n) const {
    const auto sizes = cfg_.group_sizes();
    std::vector<Real> col;
    const std::vector<Real>* cur = &planes;
    c.conv_out.clear();
    c.pool_out.clear();
    c.pool_idx.clear();
    int ci = 0;
    for (int g = 0; g < 4; ++g) {
      const int H = sizes[g];
      for (int k = 0; k < cfg_.conv_per_group; ++k, ++ci) {
        std::vector<Real> out;
        nn_detail::conv3_forward(*cur, H, H, params_.conv[g][k], out, col);
        nn_detail::lrelu_inplace(out);
        c.conv_out.push_back(std::move(out));
        cur = &c.conv_out.back();
      }
      if (shapes) shapes->push_back({n + 1, H, H, cfg_.conv_channels[g]});
      if (g < 3) {
        std::vector<Real> pooled;
        std::vector<int> idx;
        nn_detail::maxpool3_forward(*cur, cfg_.conv_channels[g], H, H, pooled, idx);
        c.pool_out.push_back(std::move(pooled));
        c.pool_idx.push_back(std::move(idx));
        cur = &c.pool_out.back();
      }
    }
    // global average pool over the last group's spatial grid
    const int Hl = sizes[3], C = cfg_.conv_channels[3];
    c.gap.assign(C, Real(0));
    for (int ch = 0; ch < C; ++ch) {
      Real s = 0;
      const Real* plane = cur->data() + static_cast<std::size_t>(ch) * Hl * Hl;
      for (int i = 0; i < Hl * Hl; ++i) s += plane[i];
      c.gap[ch] = s / Real(Hl * Hl);
    }
    nn_detail::linear_forward(c.gap, 1, params_.fc3, c.fc3_out);
    nn_detail::lrelu_inplace(c.fc3_out);
    nn_detail::linear_forward(c.fc3_out, 1, params_.fc4, c.embed);
    nn_detail::lrelu_inplace(c.embed);
  }

  void image_backward(const std::vector<Real>& planes, const ImageCache<Real>& c,
                      std::vector<Real> d_embed, ModelParams<Real>& grads) const {
    const auto sizes = cfg_.group_sizes();
    nn_detail::lrelu_backward(c.embed, d_embed);
    std::vector<Real> d_fc3;
    nn_detail::linear_backward(c.fc3_out, 1, params_.fc4, d_embed, grads.fc4, &d_fc3);
    nn_detail::lrelu_backward(c.fc3_out, d_fc3);
    std::vector<Real> d_gap;
    nn_detail::linear_backward(c.gap, 1, params_.fc3, d_fc3, grads.fc3, &d_gap);

    const int Hl = sizes[3], C = cfg_.conv_channels[3];
    std::vector<Real> d_cur(static_cast<std::size_t>(C) * Hl * Hl);
    for (int ch = 0; ch < C; ++ch)
      for (int i = 0; i < Hl * Hl; ++i)
        d_cur[static_cast<std::size_t>(ch) * Hl * Hl + i] = d_gap[ch] / Real(Hl * Hl);

    std::vector<Real> col;
    int ci = 4 * cfg_.conv_per_group - 1;
    for (int g = 3; g >= 0; --g) {
      const int H = sizes[g];
      for (int k = cfg_.conv_per_group - 1; k >= 0; --k, --ci) {
        nn_detail::lrelu_backward(c.conv_out[ci], d_cur);
        const std::vector<Real>& input =
            k > 0 ? c.conv_out[ci - 1] : (g == 0 ? planes : c.pool_out[g - 1]);
        std::vector<Real> d_in;
        const bool need_din = !(g == 0 && k == 0);
        nn_detail::conv3_backward(input, H, H, params_.conv[g][k], d_cur, grads.conv[g][k],
                                  need_din ? &d_in : nullptr, col);
        d_cur = std::move(d_in);
      }
      if (g > 0) {
        const int Hp = sizes[g - 1];
        std::vector<Real> d_unpooled;
        nn_detail::maxpool3_backward(
            c.pool_idx[g - 1], d_cur,
            static_cast<std::size_t>(cfg_.conv_channels[g - 1]) * Hp * Hp, d_unpooled);
        d_cur = std::move(d_unpooled);
      }
    }
  }

  static void res_forward(const std::vector<Real>& input, int n,
                          const std::vector<std::array<LinearLayer<Real>, 3>>& blocks,
                          std::vector<std::array<std::vector<Real>, 3>>& inner,
                          std::vector<std::vector<Real>>& outs) {
    inner.assign(blocks.size(), {});
    outs.assign(blocks.size(), {});
    const std::vector<Real>* h = &input;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::vector<Real>* t = h;
      for (int j = 0; j < 3; ++j) {
        nn_detail::linear_forward(*t, n, blocks[b][j], inner[b][j]);
        nn_detail::lrelu_inplace(inner[b][j]);
        t = &inner[b][j];
      }
      outs[b].resize(h->size());
      for (std::size_t i = 0; i < h->size(); ++i) outs[b][i] = (*h)[i] + (*t)[i];
      h = &outs[b];
    }
  }

  /// In/out: d is the gradient at the last block's output; on return it is
  /// the gradient at the chain input.
  static void res_backward(const std::vector<Real>& input, int n,
                           const std::vector<std::array<LinearLayer<Real>, 3>>& blocks,
                           const std::vector<std::array<std::vector<Real>, 3>>& inner,
                           const std::vector<std::vector<Real>>& outs,
                           std::vector<std::array<LinearLayer<Real>, 3>>& grads,
                           std::vector<Real>& d) {
    for (int b = static_cast<int>(blocks.size()) - 1; b >= 0; --b) {
      const std::vector<Real>& h = b > 0 ? outs[b - 1] : input;
      std::vector<Real> dt = d;  // gradient into the inner stack
      for (int j = 2; j >= 0; --j) {
        nn_detail::lrelu_backward(inner[b][j], dt);
        const std::vector<Real>& lin_in = j > 0 ? inner[b][j - 1] : h;
        std::vector<Real> dprev;
        nn_detail::linear_backward(lin_in, n, blocks[b][j], dt, grads[b][j], &dprev);
        dt = std::move(dprev);
      }
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dt[i];
    }
  }

  NetworkConfig cfg_;
  ModelParams<Real> params_;
};

}  // namespace smattack

#endif
