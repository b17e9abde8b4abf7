#include <algorithm>
#include <cmath>
#include <string>

#include "gait/error.hpp"
#include "gait/optflow/flow.hpp"

namespace gait::optflow {

Frame::Frame(std::size_t w, std::size_t h, std::vector<float> data) : width(w), height(h), pixels(std::move(data)) {
  if (pixels.size() != w * h) throw InputError("frame: data length does not match width x height");
}

void validate_frame(const Frame& f, const char* what) {
  if (f.width < kMinFrameSide || f.height < kMinFrameSide) {
    throw InputError(std::string(what) + ": frame " + std::to_string(f.width) + "x" + std::to_string(f.height) +
                     " smaller than " + std::to_string(kMinFrameSide) + " px");
  }
  if (f.pixels.size() != f.width * f.height) throw InputError(std::string(what) + ": frame data length mismatch");
}

void FlowConfig::validate() const {
  if (levels == 0) throw ConfigError("flow: levels must be >= 1");
  if (!(pyramid_scale > 0 && pyramid_scale < 1)) throw ConfigError("flow: pyramid_scale must be in (0, 1)");
  if (window == 0 || window % 2 == 0) throw ConfigError("flow: window must be odd");
  if (iterations == 0) throw ConfigError("flow: iterations must be >= 1");
  if (poly_n == 0 || !(poly_sigma > 0)) throw ConfigError("flow: poly_n >= 1 and poly_sigma > 0 required");
}

namespace {

using Plane = std::vector<double>;

struct Image {
  long w = 0, h = 0;
  Plane px;
  double at(long x, long y) const { return px[y * w + x]; }
};

void blur_axis(const Plane& in, Plane& out, long w, long h, const std::vector<double>& k, bool horizontal) {
  const long r = static_cast<long>(k.size() / 2);
#pragma omp parallel for schedule(static)
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double s = 0;
      for (long t = -r; t <= r; ++t) {
        const long xx = horizontal ? std::clamp(x + t, 0L, w - 1) : x;
        const long yy = horizontal ? y : std::clamp(y + t, 0L, h - 1);
        s += k[t + r] * in[yy * w + xx];
      }
      out[y * w + x] = s;
    }
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0) return img;
  const long ksize = std::lround(sigma * 5) | 1;
  const long r = ksize / 2;
  std::vector<double> k(ksize);
  double sum = 0;
  for (long i = 0; i < ksize; ++i) {
    k[i] = std::exp(-double((i - r) * (i - r)) / (2 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  Plane tmp(img.px.size());
  Image out{img.w, img.h, Plane(img.px.size())};
  blur_axis(img.px, tmp, img.w, img.h, k, true);
  blur_axis(tmp, out.px, img.w, img.h, k, false);
  return out;
}

// Bilinear sample with replicated borders; (x, y) in pixel coordinates.
double sample(const Plane& p, long w, long h, double x, double y) {
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const long x0 = std::min(static_cast<long>(x), w - 1), y0 = std::min(static_cast<long>(y), h - 1);
  const long x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
         fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
}

// Pixel-centre aligned bilinear resize.
Plane resize(const Plane& in, long w, long h, long nw, long nh) {
  Plane out(nw * nh);
  const double sx = double(w) / nw, sy = double(h) / nh;
#pragma omp parallel for schedule(static)
  for (long y = 0; y < nh; ++y)
    for (long x = 0; x < nw; ++x) out[y * nw + x] = sample(in, w, h, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

void box_blur(Plane& p, long w, long h, long window) {
  std::vector<double> k(window, 1.0 / double(window));
  Plane tmp(p.size());
  blur_axis(p, tmp, w, h, k, true);
  blur_axis(tmp, p, w, h, k, false);
}

// Per-pixel normal equations G d = h (G symmetric: g11, g12, g22) of the
// displacement constraint A d = delta_b, given the current estimate d.
struct Matrices {
  Plane g11, g12, g22, h1, h2;
  explicit Matrices(std::size_t n) : g11(n), g12(n), g22(n), h1(n), h2(n) {}
};

void update_matrices(const PolyExpansion& r1, const PolyExpansion& r2, const Plane& u, const Plane& v,
                     Matrices& m) {
  const long w = static_cast<long>(r1.width), h = static_cast<long>(r1.height);
  const std::size_t plane = r1.width * r1.height;
#pragma omp parallel for schedule(static)
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const long i = y * w + x;
      const double dx = u[i], dy = v[i];
      const double fx = x + dx, fy = y + dy;
      if (fx < 0 || fy < 0 || fx > double(w - 1) || fy > double(h - 1)) {
        m.g11[i] = m.g12[i] = m.g22[i] = m.h1[i] = m.h2[i] = 0;
        continue;
      }
      double c2[6] = {0, 0, 0, 0, 0, 0};
      for (int k = 1; k < 6; ++k) {
        const double* base = r2.coeff.data() + k * plane;
        const long x0 = std::min(static_cast<long>(fx), w - 1), y0 = std::min(static_cast<long>(fy), h - 1);
        const long x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        const double ax = fx - x0, ay = fy - y0;
        c2[k] = (1 - ay) * ((1 - ax) * base[y0 * w + x0] + ax * base[y0 * w + x1]) +
                ay * ((1 - ax) * base[y1 * w + x0] + ax * base[y1 * w + x1]);
      }
      const double a11 = 0.5 * (r1.coeff[3 * plane + i] + c2[3]);
      const double a22 = 0.5 * (r1.coeff[4 * plane + i] + c2[4]);
      const double a12 = 0.25 * (r1.coeff[5 * plane + i] + c2[5]);
      const double bx = -0.5 * (c2[1] - r1.coeff[1 * plane + i]) + a11 * dx + a12 * dy;
      const double by = -0.5 * (c2[2] - r1.coeff[2 * plane + i]) + a12 * dx + a22 * dy;
      m.g11[i] = a11 * a11 + a12 * a12;
      m.g12[i] = a12 * (a11 + a22);
      m.g22[i] = a12 * a12 + a22 * a22;
      m.h1[i] = a11 * bx + a12 * by;
      m.h2[i] = a12 * bx + a22 * by;
    }
}

void solve(const Matrices& m, Plane& u, Plane& v) {
  const long n = static_cast<long>(u.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const double det = m.g11[i] * m.g22[i] - m.g12[i] * m.g12[i] + 1e-3;
    u[i] = (m.g22[i] * m.h1[i] - m.g12[i] * m.h2[i]) / det;
    v[i] = (m.g11[i] * m.h2[i] - m.g12[i] * m.h1[i]) / det;
  }
}

}  // namespace

FlowMap farneback_flow(const Frame& prev, const Frame& next, const FlowConfig& cfg) {
  cfg.validate();
  validate_frame(prev, "flow prev");
  validate_frame(next, "flow next");
  if (prev.width != next.width || prev.height != next.height) {
    throw InputError("flow: frame sizes differ (" + std::to_string(prev.width) + "x" + std::to_string(prev.height) +
                     " vs " + std::to_string(next.width) + "x" + std::to_string(next.height) + ")");
  }
  const long W = static_cast<long>(prev.width), H = static_cast<long>(prev.height);
  Image img1{W, H, Plane(prev.pixels.begin(), prev.pixels.end())};
  Image img2{W, H, Plane(next.pixels.begin(), next.pixels.end())};
  for (auto* img : {&img1, &img2})
    for (auto& p : img->px) p *= 255.0;

  // coarsest usable level first
  std::size_t levels = 1;
  for (std::size_t k = 1; k < cfg.levels; ++k) {
    const double s = std::pow(cfg.pyramid_scale, double(k));
    if (std::lround(W * s) < long(kMinFrameSide) || std::lround(H * s) < long(kMinFrameSide)) break;
    levels = k + 1;
  }

  Plane u, v;
  long pw = 0, ph = 0;
  for (std::size_t k = levels; k-- > 0;) {
    const double s = std::pow(cfg.pyramid_scale, double(k));
    const long lw = k ? std::lround(W * s) : W, lh = k ? std::lround(H * s) : H;
    if (u.empty()) {
      u.assign(lw * lh, 0.0);
      v.assign(lw * lh, 0.0);
    } else {
      u = resize(u, pw, ph, lw, lh);
      v = resize(v, pw, ph, lw, lh);
      for (auto& x : u) x /= cfg.pyramid_scale;
      for (auto& x : v) x /= cfg.pyramid_scale;
    }
    pw = lw;
    ph = lh;

    Plane l1 = img1.px, l2 = img2.px;
    if (k) {
      const double sigma = (1.0 / s - 1.0) * 0.5;
      l1 = resize(gaussian_blur(img1, sigma).px, W, H, lw, lh);
      l2 = resize(gaussian_blur(img2, sigma).px, W, H, lw, lh);
    }
    const auto r1 = poly_expand(l1, lw, lh, cfg.poly_n, cfg.poly_sigma);
    const auto r2 = poly_expand(l2, lw, lh, cfg.poly_n, cfg.poly_sigma);
    Matrices m(lw * lh);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      update_matrices(r1, r2, u, v, m);
      for (auto* p : {&m.g11, &m.g12, &m.g22, &m.h1, &m.h2}) box_blur(*p, lw, lh, long(cfg.window));
      solve(m, u, v);
    }
  }

  FlowMap out;
  out.width = prev.width;
  out.height = prev.height;
  out.u.assign(u.begin(), u.end());
  out.v.assign(v.begin(), v.end());
  return out;
}

std::array<std::uint8_t, 3> encode_vector(double u, double v, double clip) {
  auto axis = [clip](double d) {
    const double c = std::clamp(d, -clip, clip);
    return static_cast<std::uint8_t>(std::lround(255.0 * (c + clip) / (2.0 * clip)));
  };
  const double cap = clip * std::sqrt(2.0);
  const double mag = std::min(std::hypot(u, v), cap);
  return {axis(u), axis(v), static_cast<std::uint8_t>(std::lround(255.0 * mag / cap))};
}

FlowMap encode_flow(FlowMap flow, double clip) {
  if (!(clip > 0)) throw ConfigError("encode_flow: clip must be > 0");
  const std::size_t plane = flow.width * flow.height;
  if (flow.u.size() != plane || flow.v.size() != plane) throw InputError("encode_flow: flow size mismatch");
  flow.encoded.assign(3 * plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i])) throw NumericError("encode_flow: non-finite flow");
    const auto e = encode_vector(flow.u[i], flow.v[i], clip);
    for (std::size_t c = 0; c < 3; ++c) flow.encoded[c * plane + i] = e[c];
  }
  return flow;
}

}  // namespace gait::optflow
