#include "hsplat/objective.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hsplat {

namespace {

constexpr int kLevels = 3;

void require_same_shape(const Image& a, const Image& b) {
  require(a.same_shape(b), "images must have identical dimensions");
}

void require_same_shape(const std::vector<Image>& a, const std::vector<Image>& b) {
  require(a.size() == b.size(), "image sets must have the same number of views");
  require(!a.empty(), "image sets must not be empty");
  for (size_t i = 0; i < a.size(); ++i) require_same_shape(a[i], b[i]);
}

double sum_sq_diff(const Image& a, const Image& b) {
  double s = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s;
}

// 2x2 area-mean downsample with edge-clamped taps; halves each dimension
// (rounding up), preserves constants exactly.
Image down2(const Image& in) {
  const int h2 = (in.height + 1) / 2;
  const int w2 = (in.width + 1) / 2;
  Image out(h2, w2);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            s += in.at(std::min(2 * y + i, in.height - 1),
                       std::min(2 * x + j, in.width - 1), c);
        out.at(y, x, c) = 0.25 * s;
      }
  return out;
}

// Adjoint of down2: scatter each output gradient to its four (clamped) taps.
void down2_adjoint(const Image& g_out, Image& g_in) {
  for (int y = 0; y < g_out.height; ++y)
    for (int x = 0; x < g_out.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double g = 0.25 * g_out.at(y, x, c);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            g_in.at(std::min(2 * y + i, g_in.height - 1),
                    std::min(2 * x + j, g_in.width - 1), c) += g;
      }
}

// Band 0: intensity; 1: centered x gradient; 2: centered y gradient;
// 3: 5-point Laplacian. Indices clamp at the border so constants map to zero
// in bands 1-3.
Image band(const Image& in, int which) {
  if (which == 0) return in;
  Image out(in.height, in.width);
  const int H = in.height, W = in.width;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, W - 1);
      const int yu = std::max(y - 1, 0), yd = std::min(y + 1, H - 1);
      for (int c = 0; c < 3; ++c) {
        double v = 0;
        if (which == 1) v = 0.5 * (in.at(y, xr, c) - in.at(y, xl, c));
        else if (which == 2) v = 0.5 * (in.at(yd, x, c) - in.at(yu, x, c));
        else
          v = in.at(y, xl, c) + in.at(y, xr, c) + in.at(yu, x, c) + in.at(yd, x, c) -
              4.0 * in.at(y, x, c);
        out.at(y, x, c) = v;
      }
    }
  return out;
}

// Adjoint of band(): scatter g through the same clamped stencils.
void band_adjoint(const Image& g, int which, Image& out) {
  const int H = g.height, W = g.width;
  if (which == 0) {
    for (size_t i = 0; i < g.data.size(); ++i) out.data[i] += g.data[i];
    return;
  }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, W - 1);
      const int yu = std::max(y - 1, 0), yd = std::min(y + 1, H - 1);
      for (int c = 0; c < 3; ++c) {
        const double v = g.at(y, x, c);
        if (v == 0.0) continue;
        if (which == 1) {
          out.at(y, xr, c) += 0.5 * v;
          out.at(y, xl, c) -= 0.5 * v;
        } else if (which == 2) {
          out.at(yd, x, c) += 0.5 * v;
          out.at(yu, x, c) -= 0.5 * v;
        } else {
          out.at(y, xl, c) += v;
          out.at(y, xr, c) += v;
          out.at(yu, x, c) += v;
          out.at(yd, x, c) += v;
          out.at(y, x, c) -= 4.0 * v;
        }
      }
    }
}

double perceptual_one(const Image& a, const Image& b) {
  Image pa = a, pb = b;
  double total = 0;
  for (int level = 0; level < kLevels; ++level) {
    if (level > 0) {
      pa = down2(pa);
      pb = down2(pb);
    }
    double level_sum = 0;
    for (int which = 0; which < 4; ++which) {
      const Image ba = band(pa, which);
      const Image bb = band(pb, which);
      level_sum += sum_sq_diff(ba, bb) / static_cast<double>(ba.size());
    }
    total += 0.25 * level_sum;
  }
  return total / kLevels;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

} // namespace

void LossWeights::validate() const {
  require(lambda_p >= 0 && lambda_i >= 0, "loss weights must be nonnegative");
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b);
  return sum_sq_diff(a, b) / static_cast<double>(a.size());
}

double mse(const std::vector<Image>& a, const std::vector<Image>& b) {
  require_same_shape(a, b);
  double s = 0;
  size_t n = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    s += sum_sq_diff(a[i], b[i]);
    n += a[i].size();
  }
  return s / static_cast<double>(n);
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m <= 0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / m));
}

double perceptual_proxy(const Image& a, const Image& b) {
  require_same_shape(a, b);
  return perceptual_one(a, b);
}

double perceptual_proxy(const std::vector<Image>& a, const std::vector<Image>& b) {
  require_same_shape(a, b);
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += perceptual_one(a[i], b[i]);
  return s / static_cast<double>(a.size());
}

double id_loss(const std::vector<Image>& views, const Image& reference, const Embedder& e) {
  require(!views.empty(), "identity loss needs at least one view");
  const std::vector<double> ref = e.embed(reference);
  double sum_cos = 0;
  for (const Image& v : views) sum_cos += cosine(e.embed(v), ref);
  return 1.0 - sum_cos / static_cast<double>(views.size());
}

double csim(const Image& a, const Image& b, const Embedder& e) {
  return cosine(e.embed(a), e.embed(b));
}

LossBreakdown total_loss(const std::vector<Image>& rendered,
                         const std::vector<Image>& references, const Embedder& e,
                         const LossWeights& w) {
  w.validate();
  require_same_shape(rendered, references);
  LossBreakdown out;
  out.mse = mse(rendered, references);
  out.perceptual = perceptual_proxy(rendered, references);
  out.id = id_loss(rendered, references[0], e);
  out.total = out.mse + w.lambda_p * out.perceptual + w.lambda_i * out.id;
  return out;
}

Image mse_grad(const Image& a, const Image& b, int num_views) {
  require_same_shape(a, b);
  require(num_views >= 1, "view count must be positive");
  Image g(a.height, a.width);
  const double scale = 2.0 / (static_cast<double>(a.size()) * num_views);
  for (size_t i = 0; i < a.data.size(); ++i) g.data[i] = scale * (a.data[i] - b.data[i]);
  return g;
}

Image perceptual_grad(const Image& a, const Image& b, int num_views) {
  require_same_shape(a, b);
  require(num_views >= 1, "view count must be positive");

  std::vector<Image> pa{a}, pb{b};
  for (int level = 1; level < kLevels; ++level) {
    pa.push_back(down2(pa.back()));
    pb.push_back(down2(pb.back()));
  }

  // Per-level gradient from the four bands, then cascade through down2.
  std::vector<Image> gp;
  for (int level = 0; level < kLevels; ++level) {
    Image g(pa[level].height, pa[level].width);
    const double factor =
        2.0 / (static_cast<double>(kLevels) * 4.0 * pa[level].size() * num_views);
    for (int which = 0; which < 4; ++which) {
      const Image ba = band(pa[level], which);
      const Image bb = band(pb[level], which);
      Image diff(ba.height, ba.width);
      for (size_t i = 0; i < diff.data.size(); ++i)
        diff.data[i] = factor * (ba.data[i] - bb.data[i]);
      band_adjoint(diff, which, g);
    }
    gp.push_back(std::move(g));
  }
  for (int level = kLevels - 1; level >= 1; --level) down2_adjoint(gp[level], gp[level - 1]);
  return std::move(gp[0]);
}

namespace {
constexpr int kEmbedBase = 32;
constexpr int kEmbedInputDim = 32 * 32 + 16 * 16 + 8 * 8 + 1; // pyramid + bias
} // namespace

PyramidEmbedder::PyramidEmbedder() {
  Rng rng(kProjectionSeed);
  projection_.resize(static_cast<size_t>(kDim) * kEmbedInputDim);
  for (double& v : projection_) v = rng.normal();
}

std::vector<double> PyramidEmbedder::embed(const Image& img) const {
  require(img.height >= 1 && img.width >= 1, "cannot embed an empty image");
  Image small = resize_bilinear(img, kEmbedBase, kEmbedBase);

  std::vector<double> features;
  features.reserve(kEmbedInputDim);
  Image level = std::move(small);
  for (int l = 0; l < 3; ++l) {
    if (l > 0) level = down2(level);
    const std::vector<double> gray = to_grayscale(level);
    features.insert(features.end(), gray.begin(), gray.end());
  }
  features.push_back(1.0);
  require(static_cast<int>(features.size()) == kEmbedInputDim,
          "embedder feature stack has unexpected size");

  std::vector<double> out(kDim);
  double norm_sq = 0;
  for (int r = 0; r < kDim; ++r) {
    const double* row = projection_.data() + static_cast<size_t>(r) * kEmbedInputDim;
    double s = 0;
    for (int c = 0; c < kEmbedInputDim; ++c) s += row[c] * features[c];
    out[r] = s;
    norm_sq += s * s;
  }
  require(norm_sq > 0, "embedding collapsed to the zero vector");
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : out) v *= inv;
  return out;
}

} // namespace hsplat
