#pragma once

#include "hsplat/image.hpp"

#include <memory>
#include <vector>

namespace hsplat {

/// Maps an image to a unit-norm feature vector of fixed dimension.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(const Image& img) const = 0;
};

/// Default deterministic embedder: grayscale 32x32 resample, three pyramid
/// levels (32/16/8) flattened with a bias term, then a fixed seeded Gaussian
/// projection to 256 dimensions, unit-normalized. A stand-in for a real face
/// network with the same interface.
class PyramidEmbedder : public Embedder {
 public:
  static constexpr int kDim = 256;
  static constexpr uint64_t kProjectionSeed = 7321;

  PyramidEmbedder();
  int dim() const override { return kDim; }
  std::vector<double> embed(const Image& img) const override;

 private:
  std::vector<double> projection_; // kDim x kInputDim, row-major
};

struct LossWeights {
  double lambda_p = 1.0;
  double lambda_i = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double mse = 0;
  double perceptual = 0;
  double id = 0;
  double total = 0;
};

double mse(const Image& a, const Image& b);
double mse(const std::vector<Image>& a, const std::vector<Image>& b);

/// 10*log10(1/mse), capped at 100 dB (the reported value for identical images).
double psnr(const Image& a, const Image& b);

/// Multi-scale structural distance: per pyramid level (3 levels, 2x2 area-mean
/// downsampling) the mean squared difference of four bands — intensity,
/// centered x/y gradients, and a 5-point Laplacian — averaged over bands,
/// levels, and views. A lightweight stand-in for a learned perceptual metric.
double perceptual_proxy(const Image& a, const Image& b);
double perceptual_proxy(const std::vector<Image>& a, const std::vector<Image>& b);

/// 1 - mean cosine between each view's embedding and the reference embedding.
double id_loss(const std::vector<Image>& views, const Image& reference, const Embedder& e);

/// Cosine similarity of the two images' embeddings.
double csim(const Image& a, const Image& b, const Embedder& e);

/// mse + lambda_p * perceptual + lambda_i * id, with the identity term
/// comparing every rendered view against references[0].
LossBreakdown total_loss(const std::vector<Image>& rendered,
                         const std::vector<Image>& references, const Embedder& e,
                         const LossWeights& w);

/// d(mse over a num_views set)/d(a's pixels) for one view pair of the set.
Image mse_grad(const Image& a, const Image& b, int num_views);

/// Exact adjoint of perceptual_proxy for one view pair of a num_views set.
Image perceptual_grad(const Image& a, const Image& b, int num_views);

} // namespace hsplat
