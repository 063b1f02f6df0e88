#pragma once

#include <cmath>

#include "spotter/common.hpp"
#include "spotter/parallel.hpp"

// Batched dense kernels. Parallelism is always over independent output
// slots and every accumulation runs in ascending index order, so results
// are bit-identical across thread counts and match the serial references
// in ref_kernels.hpp exactly.

namespace spotter::kernels {

// y[n x out] = x[n x in] * W^T + b, with W stored [out x in] row-major.
template <typename T>
void affine_forward(const T* x, i64 n, int in, const T* w, const T* b, int out,
                    T* y) {
  par::parallel_for(n * out, [&](i64 idx) {
    i64 s = idx / out;
    int o = static_cast<int>(idx % out);
    const T* xs = x + s * in;
    const T* wo = w + static_cast<i64>(o) * in;
    T acc = b != nullptr ? b[o] : T(0);
    for (int i = 0; i < in; ++i) acc += wo[i] * xs[i];
    y[s * out + o] = acc;
  });
}

// gx[n x in] = gy[n x out] * W
template <typename T>
void affine_backward_input(const T* gy, i64 n, int in, const T* w, int out,
                           T* gx) {
  par::parallel_for(n * in, [&](i64 idx) {
    i64 s = idx / in;
    int i = static_cast<int>(idx % in);
    const T* gys = gy + s * out;
    T acc = T(0);
    for (int o = 0; o < out; ++o) acc += gys[o] * w[static_cast<i64>(o) * in + i];
    gx[s * in + i] = acc;
  });
}

// gW[out x in] += gy^T * x ; gb[out] += column sums of gy.
// Each weight slot owns its own sample loop, keeping the reduction order
// fixed regardless of parallelism.
template <typename T>
void affine_backward_params(const T* x, const T* gy, i64 n, int in, int out,
                            T* gw, T* gb) {
  par::parallel_for(out, [&](i64 o) {
    T* gwo = gw + o * in;
    for (i64 s = 0; s < n; ++s) {
      const T g = gy[s * out + o];
      if (g == T(0)) continue;
      const T* xs = x + s * in;
      for (int i = 0; i < in; ++i) gwo[i] += g * xs[i];
    }
    T acc = T(0);
    for (i64 s = 0; s < n; ++s) acc += gy[s * out + o];
    gb[o] += acc;
  });
}

template <typename T>
void tanh_forward(const T* x, i64 count, T* y) {
  par::parallel_for(count, [&](i64 i) { y[i] = std::tanh(x[i]); });
}

// gx = gy * (1 - y^2), where y is the tanh output.
template <typename T>
void tanh_backward(const T* y, const T* gy, i64 count, T* gx) {
  par::parallel_for(count, [&](i64 i) { gx[i] = gy[i] * (T(1) - y[i] * y[i]); });
}

// 3x3 convolution, stride 1, zero padding 1. x is [n][cin][h][w],
// y is [n][cout][h][w], kernel K is [cout][cin][3][3].
template <typename T>
void conv3x3_forward(const T* x, i64 n, int cin, int h, int w, const T* k,
                     const T* b, int cout, T* y) {
  const i64 plane = static_cast<i64>(h) * w;
  par::parallel_for(n * cout, [&](i64 idx) {
    i64 s = idx / cout;
    int co = static_cast<int>(idx % cout);
    const T* xs = x + s * cin * plane;
    T* ys = y + (s * cout + co) * plane;
    const T* kc = k + static_cast<i64>(co) * cin * 9;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        T acc = b != nullptr ? b[co] : T(0);
        for (int ci = 0; ci < cin; ++ci) {
          const T* xp = xs + ci * plane;
          const T* kp = kc + ci * 9;
          for (int dr = -1; dr <= 1; ++dr) {
            int rr = r + dr;
            if (rr < 0 || rr >= h) continue;
            for (int dc = -1; dc <= 1; ++dc) {
              int cc = c + dc;
              if (cc < 0 || cc >= w) continue;
              acc += kp[(dr + 1) * 3 + (dc + 1)] * xp[rr * w + cc];
            }
          }
        }
        ys[r * w + c] = acc;
      }
    }
  });
}

template <typename T>
void conv3x3_backward_input(const T* gy, i64 n, int cin, int h, int w,
                            const T* k, int cout, T* gx) {
  const i64 plane = static_cast<i64>(h) * w;
  par::parallel_for(n * cin, [&](i64 idx) {
    i64 s = idx / cin;
    int ci = static_cast<int>(idx % cin);
    const T* gys = gy + s * cout * plane;
    T* gxp = gx + (s * cin + ci) * plane;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        T acc = T(0);
        for (int co = 0; co < cout; ++co) {
          const T* gyp = gys + co * plane;
          const T* kp = k + (static_cast<i64>(co) * cin + ci) * 9;
          // gx(r,c) gathers from outputs (r - dr, c - dc) with weight (dr+1, dc+1)
          for (int dr = -1; dr <= 1; ++dr) {
            int ro = r - dr;
            if (ro < 0 || ro >= h) continue;
            for (int dc = -1; dc <= 1; ++dc) {
              int co2 = c - dc;
              if (co2 < 0 || co2 >= w) continue;
              acc += kp[(dr + 1) * 3 + (dc + 1)] * gyp[ro * w + co2];
            }
          }
        }
        gxp[r * w + c] = acc;
      }
    }
  });
}

template <typename T>
void conv3x3_backward_params(const T* x, const T* gy, i64 n, int cin, int h,
                             int w, int cout, T* gk, T* gb) {
  const i64 plane = static_cast<i64>(h) * w;
  par::parallel_for(cout, [&](i64 co) {
    T* gkc = gk + co * cin * 9;
    T bacc = T(0);
    for (i64 s = 0; s < n; ++s) {
      const T* gyp = gy + (s * cout + co) * plane;
      const T* xs = x + s * cin * plane;
      for (int ci = 0; ci < cin; ++ci) {
        const T* xp = xs + ci * plane;
        T* gkp = gkc + ci * 9;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            T acc = T(0);
            for (int r = 0; r < h; ++r) {
              int rr = r + dr;
              if (rr < 0 || rr >= h) continue;
              for (int c = 0; c < w; ++c) {
                int cc = c + dc;
                if (cc < 0 || cc >= w) continue;
                acc += gyp[r * w + c] * xp[rr * w + cc];
              }
            }
            gkp[(dr + 1) * 3 + (dc + 1)] += acc;
          }
        }
      }
      for (i64 i = 0; i < plane; ++i) bacc += gyp[i];
    }
    gb[co] += bacc;
  });
}

// 2x2 average pooling, stride 2. h and w must be even.
template <typename T>
void avgpool2_forward(const T* x, i64 n, int c, int h, int w, T* y) {
  const int ho = h / 2, wo = w / 2;
  par::parallel_for(n * c, [&](i64 idx) {
    const T* xp = x + idx * h * w;
    T* yp = y + idx * ho * wo;
    for (int r = 0; r < ho; ++r) {
      for (int q = 0; q < wo; ++q) {
        yp[r * wo + q] = (xp[(2 * r) * w + 2 * q] + xp[(2 * r) * w + 2 * q + 1] +
                          xp[(2 * r + 1) * w + 2 * q] +
                          xp[(2 * r + 1) * w + 2 * q + 1]) /
                         T(4);
      }
    }
  });
}

template <typename T>
void avgpool2_backward(const T* gy, i64 n, int c, int h, int w, T* gx) {
  const int ho = h / 2, wo = w / 2;
  par::parallel_for(n * c, [&](i64 idx) {
    const T* gyp = gy + idx * ho * wo;
    T* gxp = gx + idx * h * w;
    for (int r = 0; r < ho; ++r) {
      for (int q = 0; q < wo; ++q) {
        const T g = gyp[r * wo + q] / T(4);
        gxp[(2 * r) * w + 2 * q] = g;
        gxp[(2 * r) * w + 2 * q + 1] = g;
        gxp[(2 * r + 1) * w + 2 * q] = g;
        gxp[(2 * r + 1) * w + 2 * q + 1] = g;
      }
    }
  });
}

// Sums per-slot values in ascending order; the one reduction primitive the
// batched code is allowed to use.
template <typename T>
double ordered_sum(std::span<const T> values) {
  double acc = 0.0;
  for (const T& v : values) acc += static_cast<double>(v);
  return acc;
}

}  // namespace spotter::kernels
