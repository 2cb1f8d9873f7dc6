#pragma once

// Fully-connected network mapping a channel matrix to a unitary modulation matrix.
//
//   flatten(H) -> FC(8N) -> GELU -> FC(4N) -> GELU -> FC(4N) -> GELU -> FC(2N^2)
//              -> N x N complex matrix -> Q factor of its QR decomposition
//
// Gradients are exact reverse mode. Complex quantities are differentiated by
// treating real and imaginary parts as independent reals; a complex gradient
// G stands for dL/dRe + j dL/dIm.

#include "uwa/numerics.hpp"
#include "uwa/objective.hpp"
#include "uwa/rng.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace uwa {

double gelu(double x);
double gelu_grad(double x);

inline constexpr std::size_t kLayerCount = 4;

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;  // out x in, row-major
    std::size_t bias_offset = 0;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// All parameters live in one flat vector so optimizers and checkpoints can treat
// them uniformly. Also used as the gradient container.
class NetworkWeights {
public:
    NetworkWeights() = default;
    // Zero-initialized parameters for N subcarriers and an N_g guard.
    NetworkWeights(std::size_t subcarriers, std::size_t guard);

    // Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    static NetworkWeights initialize(std::size_t subcarriers, std::size_t guard, Rng& rng);

    std::size_t subcarriers() const noexcept { return n_; }
    std::size_t guard() const noexcept { return guard_; }
    std::size_t input_size() const noexcept { return layers_[0].in; }
    std::size_t output_size() const noexcept { return layers_[kLayerCount - 1].out; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    const LayerShape& layer(std::size_t l) const { return layers_.at(l); }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> weight(std::size_t l);
    std::span<const double> weight(std::size_t l) const;
    std::span<double> bias(std::size_t l);
    std::span<const double> bias(std::size_t l) const;

    bool all_finite() const;
    void set_zero();

    friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;

private:
    std::size_t n_ = 0;
    std::size_t guard_ = 0;
    std::array<LayerShape, kLayerCount> layers_{};
    std::vector<double> params_;
};

// Intermediate values kept for the backward pass.
struct ForwardTape {
    std::vector<double> input;                   // flattened channel: real parts then imaginary parts
    std::array<std::vector<double>, 3> pre;      // hidden pre-activations
    std::array<std::vector<double>, 3> act;      // GELU outputs
    std::vector<double> output;                  // 2 N^2 linear outputs
    QrFactors qr;                                // of the reassembled output
};

// Real vector of length 2 (N + N_g) N: Re(H) row-major, then Im(H) row-major.
std::vector<double> flatten_channel(const ComplexMatrix& h);

// Inverse of the output reshaping: first N^2 values are real parts, last N^2 imaginary, row-major.
ComplexMatrix reassemble_output(std::span<const double> output, std::size_t n);

// Pre-QR matrix for a channel.
ComplexMatrix forward_raw(const NetworkWeights& w, const ComplexMatrix& h, ForwardTape* tape = nullptr);

// Throws InvalidArgument on a shape mismatch and NumericalError if the pre-QR matrix is rank deficient.
ModulationMatrix forward(const NetworkWeights& w, const ComplexMatrix& h, ForwardTape* tape = nullptr);

// Backward through the QR head: given dL/dQ for A = QR (R with positive real diagonal), returns dL/dA.
ComplexMatrix qr_backward(const QrFactors& qr, const ComplexMatrix& grad_q);

// Per-sample backward results. delta[l] is dL/d(pre-activation) of layer l.
struct SampleTrace {
    ForwardTape tape;
    std::array<std::vector<double>, kLayerCount> delta;
};

// Backpropagates dL/dF through the QR head and the FC stack, filling trace.delta.
void backward(const NetworkWeights& w, const ComplexMatrix& grad_f, SampleTrace& trace);

// grad += sum over traces (in order) of the per-sample weight and bias gradients.
// Rows of each layer are processed in parallel; the per-row sum order is fixed, so the
// result does not depend on the thread count.
void accumulate_gradients(std::span<const SampleTrace* const> traces, NetworkWeights& grad);

namespace reference {

void accumulate_gradients(std::span<const SampleTrace* const> traces, NetworkWeights& grad);

}  // namespace reference

// A training channel with its modulation-independent LMMSE core precomputed.
struct ChannelSample {
    ComplexMatrix h;
    ComplexMatrix core;  // sigma2 (H^H H + sigma2 I)^{-1}
};

ChannelSample prepare_channel(ComplexMatrix h, double sigma2);

struct FairnessValue {
    double f = 0.0;
    std::vector<double> grad_e;  // df/de_k, including the dependence of the target on e
};

FairnessValue fairness_with_gradient(const MseProfile& e, TargetRule rule);

struct PairLoss {
    double loss = 0.0;
    double f1 = 0.0;
    double f2 = 0.0;
    double q = 0.0;
};

struct PairTrace {
    PairLoss terms;
    SampleTrace first;
    SampleTrace second;
};

struct LossSettings {
    double lambda = 0.005;
    TargetRule target = TargetRule::EqualShare;
};

// Loss of one Siamese pair, forward only.
PairLoss pair_loss(const NetworkWeights& w, const ChannelSample& a, const ChannelSample& b, const LossSettings& s);

// Forward and backward for one pair; weight gradients are left in the traces.
PairTrace pair_forward_backward(const NetworkWeights& w, const ChannelSample& a, const ChannelSample& b,
                                const LossSettings& s);

// Loss of one pair and its exact gradient with respect to every parameter.
struct LossAndGradient {
    PairLoss terms;
    NetworkWeights grad;
};

LossAndGradient loss_and_gradient(const NetworkWeights& w, const ChannelSample& a, const ChannelSample& b,
                                  const LossSettings& s);

}  // namespace uwa
