#pragma once

// Compute kernels for the engine. Every kernel exists twice: `serial` runs the plain loop nest and
// `parallel` distributes independent work units (samples or output channels) over OpenMP threads.
// Both drive the same per-unit body, so their results are bit-identical for any thread count.

#include <cstddef>
#include <span>

namespace evocnn::kernels {

/// Geometry of a same-padded 2-D convolution over a batch.
struct ConvGeometry {
    std::size_t batch = 0;
    std::size_t in_c = 0, in_h = 0, in_w = 0;
    std::size_t out_c = 0, out_h = 0, out_w = 0;
    std::size_t k_h = 0, k_w = 0;
    std::size_t stride = 1;
    std::size_t pad_h = 0, pad_w = 0;

    static ConvGeometry make(std::size_t batch, std::size_t in_c, std::size_t in_h, std::size_t in_w,
                             std::size_t out_c, std::size_t k_h, std::size_t k_w, std::size_t stride);
    std::size_t input_size() const { return batch * in_c * in_h * in_w; }
    std::size_t output_size() const { return batch * out_c * out_h * out_w; }
    std::size_t weight_size() const { return out_c * in_c * k_h * k_w; }
};

struct PoolGeometry {
    std::size_t batch = 0, channels = 0;
    std::size_t in_h = 0, in_w = 0;
    std::size_t pool_h = 0, pool_w = 0;
    std::size_t out_h = 0, out_w = 0;

    static PoolGeometry make(std::size_t batch, std::size_t channels, std::size_t in_h, std::size_t in_w,
                             std::size_t pool_h, std::size_t pool_w);
};

struct DenseGeometry {
    std::size_t batch = 0, in_features = 0, units = 0;
};

// conv_forward writes the pre-activation (bias included). maxpool_forward stores, per output cell,
// the flat input index of the first maximum of its window. The *_backward_params kernels overwrite
// their outputs with gradients summed over the batch.
namespace serial {
void conv_forward(const ConvGeometry& g, std::span<const double> input,
                  std::span<const double> weights, std::span<const double> bias,
                  std::span<double> out);
void conv_backward_input(const ConvGeometry& g, std::span<const double> grad_pre,
                         std::span<const double> weights, std::span<double> grad_in);
void conv_backward_params(const ConvGeometry& g, std::span<const double> grad_pre,
                          std::span<const double> input, std::span<double> grad_w,
                          std::span<double> grad_b);
void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> out, std::span<std::size_t> argmax);
void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> out);
void dense_backward_input(const DenseGeometry& g, std::span<const double> grad_out,
                          std::span<const double> weights, std::span<double> grad_in);
void dense_backward_params(const DenseGeometry& g, std::span<const double> grad_out,
                           std::span<const double> input, std::span<double> grad_w,
                           std::span<double> grad_b);
}  // namespace serial

namespace parallel {
void conv_forward(const ConvGeometry& g, std::span<const double> input,
                  std::span<const double> weights, std::span<const double> bias,
                  std::span<double> out);
void conv_backward_input(const ConvGeometry& g, std::span<const double> grad_pre,
                         std::span<const double> weights, std::span<double> grad_in);
void conv_backward_params(const ConvGeometry& g, std::span<const double> grad_pre,
                          std::span<const double> input, std::span<double> grad_w,
                          std::span<double> grad_b);
void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> out, std::span<std::size_t> argmax);
void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> out);
void dense_backward_input(const DenseGeometry& g, std::span<const double> grad_out,
                          std::span<const double> weights, std::span<double> grad_in);
void dense_backward_params(const DenseGeometry& g, std::span<const double> grad_out,
                           std::span<const double> input, std::span<double> grad_w,
                           std::span<double> grad_b);
}  // namespace parallel


/// Number of OpenMP threads the parallel kernels use; 0 restores the runtime default.
void set_thread_count(int threads);
int thread_count();

}  // namespace evocnn::kernels
