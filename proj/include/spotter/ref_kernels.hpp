#pragma once

#include <cmath>

#include "spotter/common.hpp"

// Naive single-threaded textbook implementations of the kernels, kept as an
// independent oracle for the parallel versions and as the baseline side of
// the benchmark. Loop nests accumulate in the same ascending order as the
// kernels so comparisons can demand exact equality.

namespace spotter::ref {

template <typename T>
void affine_forward(const T* x, i64 n, int in, const T* w, const T* b, int out,
                    T* y) {
  for (i64 s = 0; s < n; ++s) {
    for (int o = 0; o < out; ++o) {
      T acc = b != nullptr ? b[o] : T(0);
      for (int i = 0; i < in; ++i) acc += w[static_cast<i64>(o) * in + i] * x[s * in + i];
      y[s * out + o] = acc;
    }
  }
}

template <typename T>
void affine_backward_input(const T* gy, i64 n, int in, const T* w, int out,
                           T* gx) {
  for (i64 s = 0; s < n; ++s) {
    for (int i = 0; i < in; ++i) {
      T acc = T(0);
      for (int o = 0; o < out; ++o)
        acc += gy[s * out + o] * w[static_cast<i64>(o) * in + i];
      gx[s * in + i] = acc;
    }
  }
}

template <typename T>
void affine_backward_params(const T* x, const T* gy, i64 n, int in, int out,
                            T* gw, T* gb) {
  for (int o = 0; o < out; ++o) {
    for (i64 s = 0; s < n; ++s) {
      const T g = gy[s * out + o];
      if (g == T(0)) continue;
      for (int i = 0; i < in; ++i) gw[static_cast<i64>(o) * in + i] += g * x[s * in + i];
    }
    T acc = T(0);
    for (i64 s = 0; s < n; ++s) acc += gy[s * out + o];
    gb[o] += acc;
  }
}

template <typename T>
void tanh_forward(const T* x, i64 count, T* y) {
  for (i64 i = 0; i < count; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void conv3x3_forward(const T* x, i64 n, int cin, int h, int w, const T* k,
                     const T* b, int cout, T* y) {
  const i64 plane = static_cast<i64>(h) * w;
  for (i64 s = 0; s < n; ++s) {
    for (int co = 0; co < cout; ++co) {
      T* ys = y + (s * cout + co) * plane;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          T acc = b != nullptr ? b[co] : T(0);
          for (int ci = 0; ci < cin; ++ci) {
            for (int dr = -1; dr <= 1; ++dr) {
              int rr = r + dr;
              if (rr < 0 || rr >= h) continue;
              for (int dc = -1; dc <= 1; ++dc) {
                int cc = c + dc;
                if (cc < 0 || cc >= w) continue;
                acc += k[((static_cast<i64>(co) * cin + ci) * 9) +
                         (dr + 1) * 3 + (dc + 1)] *
                       x[(s * cin + ci) * plane + rr * w + cc];
              }
            }
          }
          ys[r * w + c] = acc;
        }
      }
    }
  }
}

}  // namespace spotter::ref
