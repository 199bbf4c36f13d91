#include "csrnet/ops.hpp"

#include <stdexcept>
#include <string>

namespace csrnet::nn {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

// Range of output positions o for which o*stride + k - padding lies in
// [0, extent).
struct ValidRange {
  std::size_t begin;
  std::size_t end;
};

ValidRange valid_outputs(std::size_t extent, std::size_t out_extent,
                         std::size_t k, const Conv2dOptions& opt) {
  const auto s = static_cast<std::ptrdiff_t>(opt.stride);
  const auto offset = static_cast<std::ptrdiff_t>(k) -
                      static_cast<std::ptrdiff_t>(opt.padding);
  // smallest o with o*s + offset >= 0
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
  // largest o with o*s + offset <= extent - 1
  std::ptrdiff_t last = static_cast<std::ptrdiff_t>(extent) - 1 - offset;
  std::ptrdiff_t hi = last < 0 ? -1 : last / s;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent) - 1);
  if (hi < lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1};
}

template <typename T>
void check_conv_shapes(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                       const Conv2dOptions& options) {
  require(input.rank() == 3, "conv2d input must be C x H x W, got " +
                                 to_string(input.shape()));
  require(weight.rank() == 4, "conv2d weight must be C_out x C_in x k x k, got " +
                                  to_string(weight.shape()));
  require(weight.dim(1) == input.dim(0),
          "conv2d weight expects " + std::to_string(weight.dim(1)) +
              " input channels, input has " + std::to_string(input.dim(0)));
  require(weight.dim(2) == weight.dim(3), "conv2d kernel must be square, got " +
                                              to_string(weight.shape()));
  require(options.stride >= 1, "conv2d stride must be positive");
}

}  // namespace

std::size_t conv_output_extent(std::size_t input, std::size_t kernel,
                               const Conv2dOptions& options) {
  require(options.stride >= 1, "conv2d stride must be positive");
  const std::size_t padded = input + 2 * options.padding;
  if (padded < kernel) {
    throw std::invalid_argument("conv2d output would be empty: input extent " +
                                std::to_string(input) + " with kernel " +
                                std::to_string(kernel) + " and padding " +
                                std::to_string(options.padding));
  }
  return (padded - kernel) / options.stride + 1;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias,
                              const Conv2dOptions& options) {
  check_conv_shapes(input, weight, options);
  const std::size_t c_out = weight.dim(0);
  const std::size_t c_in = input.dim(0);
  const std::size_t k = weight.dim(2);
  require(bias.rank() == 1 && bias.dim(0) == c_out,
          "conv2d bias must have " + std::to_string(c_out) + " entries, got " +
              to_string(bias.shape()));
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t oh = conv_output_extent(h, k, options);
  const std::size_t ow = conv_output_extent(w, k, options);
  const std::size_t s = options.stride;

  BasicTensor<T> out({c_out, oh, ow});
  T* dst = out.raw();
  const T* src = input.raw();
  const T* wt = weight.raw();

  if (k == 1 && s == 1 && options.padding == 0) {
    // Per-pixel matrix-vector product.
    const std::size_t pixels = h * w;
    for (std::size_t co = 0; co < c_out; ++co) {
      T* o = dst + co * pixels;
      std::fill(o, o + pixels, bias[co]);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const T coef = wt[co * c_in + ci];
        const T* in = src + ci * pixels;
        for (std::size_t p = 0; p < pixels; ++p) o[p] += coef * in[p];
      }
    }
    return out;
  }

  for (std::size_t co = 0; co < c_out; ++co) {
    T* o = dst + co * oh * ow;
    std::fill(o, o + oh * ow, bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* in = src + ci * h * w;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const ValidRange rows = valid_outputs(h, oh, ky, options);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const ValidRange cols = valid_outputs(w, ow, kx, options);
          const T coef = wt[((co * c_in + ci) * k + ky) * k + kx];
          for (std::size_t oy = rows.begin; oy < rows.end; ++oy) {
            const std::size_t iy = oy * s + ky - options.padding;
            const T* in_row = in + iy * w;
            T* out_row = o + oy * ow;
            for (std::size_t ox = cols.begin; ox < cols.end; ++ox) {
              out_row[ox] += coef * in_row[ox * s + kx - options.padding];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input,
                             const BasicTensor<T>& weight,
                             const Conv2dOptions& options,
                             const BasicTensor<T>& upstream,
                             bool want_input_grad) {
  check_conv_shapes(input, weight, options);
  const std::size_t c_out = weight.dim(0);
  const std::size_t c_in = input.dim(0);
  const std::size_t k = weight.dim(2);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t oh = conv_output_extent(h, k, options);
  const std::size_t ow = conv_output_extent(w, k, options);
  const std::size_t s = options.stride;
  require(upstream.shape() == Shape{c_out, oh, ow},
          "conv2d upstream gradient must be " + to_string({c_out, oh, ow}) +
              ", got " + to_string(upstream.shape()));

  ConvGrads<T> grads{BasicTensor<T>(weight.shape()), BasicTensor<T>({c_out}),
                     {}};
  if (want_input_grad) grads.input = BasicTensor<T>(input.shape());

  const T* up = upstream.raw();
  const T* src = input.raw();
  const T* wt = weight.raw();
  T* gw = grads.weight.raw();
  T* gi = want_input_grad ? grads.input.raw() : nullptr;

  for (std::size_t co = 0; co < c_out; ++co) {
    T acc{0};
    const T* u = up + co * oh * ow;
    for (std::size_t p = 0; p < oh * ow; ++p) acc += u[p];
    grads.bias[co] = acc;
  }

  for (std::size_t co = 0; co < c_out; ++co) {
    const T* u = up + co * oh * ow;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* in = src + ci * h * w;
      T* gin = gi ? gi + ci * h * w : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const ValidRange rows = valid_outputs(h, oh, ky, options);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const ValidRange cols = valid_outputs(w, ow, kx, options);
          const std::size_t widx = ((co * c_in + ci) * k + ky) * k + kx;
          const T coef = wt[widx];
          T acc{0};
          for (std::size_t oy = rows.begin; oy < rows.end; ++oy) {
            const std::size_t iy = oy * s + ky - options.padding;
            const T* in_row = in + iy * w;
            const T* u_row = u + oy * ow;
            for (std::size_t ox = cols.begin; ox < cols.end; ++ox) {
              acc += u_row[ox] * in_row[ox * s + kx - options.padding];
            }
            if (gin) {
              T* gin_row = gin + iy * w;
              for (std::size_t ox = cols.begin; ox < cols.end; ++ox) {
                gin_row[ox * s + kx - options.padding] += coef * u_row[ox];
              }
            }
          }
          gw[widx] = acc;
        }
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input,
                             const BasicTensor<T>& upstream) {
  require(input.shape() == upstream.shape(),
          "relu_backward shape mismatch: " + to_string(input.shape()) + " vs " +
              to_string(upstream.shape()));
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T{0} ? upstream[i] : T{0};
  }
  return out;
}

template <typename T>
BasicTensor<T> global_average_pool(const BasicTensor<T>& input) {
  require(input.rank() == 3, "global_average_pool expects C x H x W, got " +
                                 to_string(input.shape()));
  const std::size_t c = input.dim(0);
  const std::size_t pixels = input.dim(1) * input.dim(2);
  BasicTensor<T> out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    T acc{0};
    const T* p = input.raw() + ch * pixels;
    for (std::size_t i = 0; i < pixels; ++i) acc += p[i];
    out[ch] = acc / static_cast<T>(pixels);
  }
  return out;
}

template <typename T>
BasicTensor<T> global_average_pool_backward(const Shape& input_shape,
                                            const BasicTensor<T>& upstream) {
  require(input_shape.size() == 3,
          "global_average_pool_backward expects a C x H x W input shape");
  require(upstream.rank() == 1 && upstream.dim(0) == input_shape[0],
          "global_average_pool_backward upstream must have " +
              std::to_string(input_shape[0]) + " entries");
  const std::size_t pixels = input_shape[1] * input_shape[2];
  BasicTensor<T> out(input_shape);
  for (std::size_t ch = 0; ch < input_shape[0]; ++ch) {
    const T g = upstream[ch] / static_cast<T>(pixels);
    std::fill(out.raw() + ch * pixels, out.raw() + (ch + 1) * pixels, g);
  }
  return out;
}

template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input,
                               const BasicTensor<T>& weight,
                               const BasicTensor<T>& bias) {
  require(input.rank() == 1, "fully_connected input must be a vector");
  require(weight.rank() == 2 && weight.dim(1) == input.dim(0),
          "fully_connected weight " + to_string(weight.shape()) +
              " incompatible with input of length " +
              std::to_string(input.dim(0)));
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  require(bias.rank() == 1 && bias.dim(0) == m,
          "fully_connected bias must have " + std::to_string(m) + " entries");
  BasicTensor<T> out({m});
  for (std::size_t r = 0; r < m; ++r) {
    T acc = bias[r];
    const T* row = weight.raw() + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * input[c];
    out[r] = acc;
  }
  return out;
}

template <typename T>
LinearGrads<T> fully_connected_backward(const BasicTensor<T>& input,
                                        const BasicTensor<T>& weight,
                                        const BasicTensor<T>& upstream) {
  require(weight.rank() == 2 && input.rank() == 1 &&
              weight.dim(1) == input.dim(0),
          "fully_connected_backward shape mismatch");
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  require(upstream.rank() == 1 && upstream.dim(0) == m,
          "fully_connected_backward upstream must have " + std::to_string(m) +
              " entries");
  LinearGrads<T> grads{BasicTensor<T>(weight.shape()), upstream,
                       BasicTensor<T>({n})};
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = weight.raw() + r * n;
    T* grow = grads.weight.raw() + r * n;
    for (std::size_t c = 0; c < n; ++c) {
      grow[c] = upstream[r] * input[c];
      grads.input[c] += upstream[r] * row[c];
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> gfm(const BasicTensor<T>& feature, const BasicTensor<T>& gamma,
                   const BasicTensor<T>& beta) {
  require(feature.rank() == 3, "gfm feature must be C x H x W, got " +
                                   to_string(feature.shape()));
  const std::size_t c = feature.dim(0);
  require(gamma.rank() == 1 && gamma.dim(0) == c,
          "gfm gamma must have " + std::to_string(c) + " entries, got " +
              to_string(gamma.shape()));
  require(beta.rank() == 1 && beta.dim(0) == c,
          "gfm beta must have " + std::to_string(c) + " entries, got " +
              to_string(beta.shape()));
  const std::size_t pixels = feature.dim(1) * feature.dim(2);
  BasicTensor<T> out(feature.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T g = gamma[ch];
    const T b = beta[ch];
    const T* in = feature.raw() + ch * pixels;
    T* o = out.raw() + ch * pixels;
    for (std::size_t i = 0; i < pixels; ++i) o[i] = g * in[i] + b;
  }
  return out;
}

template <typename T>
GfmGrads<T> gfm_backward(const BasicTensor<T>& feature,
                         const BasicTensor<T>& gamma,
                         const BasicTensor<T>& upstream) {
  require(feature.shape() == upstream.shape(),
          "gfm_backward shape mismatch: " + to_string(feature.shape()) + " vs " +
              to_string(upstream.shape()));
  const std::size_t c = feature.dim(0);
  require(gamma.rank() == 1 && gamma.dim(0) == c,
          "gfm_backward gamma must have " + std::to_string(c) + " entries");
  const std::size_t pixels = feature.dim(1) * feature.dim(2);
  GfmGrads<T> grads{BasicTensor<T>(feature.shape()), BasicTensor<T>({c}),
                    BasicTensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T g = gamma[ch];
    const T* in = feature.raw() + ch * pixels;
    const T* u = upstream.raw() + ch * pixels;
    T* gf = grads.feature.raw() + ch * pixels;
    T dg{0};
    T db{0};
    for (std::size_t i = 0; i < pixels; ++i) {
      gf[i] = g * u[i];
      dg += u[i] * in[i];
      db += u[i];
    }
    grads.gamma[ch] = dg;
    grads.beta[ch] = db;
  }
  return grads;
}

#define CSRNET_INSTANTIATE_OPS(T)                                              \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&,                \
                                         const BasicTensor<T>&,                \
                                         const BasicTensor<T>&,                \
                                         const Conv2dOptions&);                \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&,                 \
                                        const Conv2dOptions&,                  \
                                        const BasicTensor<T>&, bool);          \
  template BasicTensor<T> relu(const BasicTensor<T>&);                         \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&);                \
  template BasicTensor<T> global_average_pool(const BasicTensor<T>&);          \
  template BasicTensor<T> global_average_pool_backward(const Shape&,           \
                                                       const BasicTensor<T>&); \
  template BasicTensor<T> fully_connected(const BasicTensor<T>&,               \
                                          const BasicTensor<T>&,               \
                                          const BasicTensor<T>&);              \
  template LinearGrads<T> fully_connected_backward(const BasicTensor<T>&,      \
                                                   const BasicTensor<T>&,      \
                                                   const BasicTensor<T>&);     \
  template BasicTensor<T> gfm(const BasicTensor<T>&, const BasicTensor<T>&,    \
                              const BasicTensor<T>&);                          \
  template GfmGrads<T> gfm_backward(const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&);

CSRNET_INSTANTIATE_OPS(float)
CSRNET_INSTANTIATE_OPS(double)

#undef CSRNET_INSTANTIATE_OPS

}  // namespace csrnet::nn
