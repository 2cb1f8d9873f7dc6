#include "uwa/network.hpp"

#include "uwa/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace uwa {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// Four partial sums; the order is fixed, so results are reproducible.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

void dense_forward(std::span<const double> weight, std::span<const double> bias, std::span<const double> x,
                   std::vector<double>& y) {
    const std::size_t in = x.size(), out = bias.size();
    y.resize(out);
    for (std::size_t i = 0; i < out; ++i) y[i] = bias[i] + dot(weight.data() + i * in, x.data(), in);
}

// x_grad = W^T y_grad
void dense_backward_input(std::span<const double> weight, std::span<const double> y_grad, std::size_t in,
                          std::vector<double>& x_grad) {
    x_grad.assign(in, 0.0);
    for (std::size_t i = 0; i < y_grad.size(); ++i) {
        const double g = y_grad[i];
        const double* row = weight.data() + i * in;
        for (std::size_t j = 0; j < in; ++j) x_grad[j] += g * row[j];
    }
}

const std::vector<double>& layer_input(const ForwardTape& tape, std::size_t l) {
    return l == 0 ? tape.input : tape.act[l - 1];
}

void accumulate_layer_rows(std::span<const SampleTrace* const> traces, std::size_t l, NetworkWeights& grad,
                           std::size_t row_begin, std::size_t row_end) {
    // Traces outer so each layer input is reused across the row block; every entry
    // still sums the traces in order.
    const auto& shape = grad.layer(l);
    auto weight = grad.weight(l);
    auto bias = grad.bias(l);
    for (const SampleTrace* t : traces) {
        const double* a = layer_input(t->tape, l).data();
        const auto& delta = t->delta[l];
        for (std::size_t i = row_begin; i < row_end; ++i) {
            const double d = delta[i];
            if (d == 0.0) continue;
            bias[i] += d;
            double* row = weight.data() + i * shape.in;
            for (std::size_t j = 0; j < shape.in; ++j) row[j] += d * a[j];
        }
    }
}

constexpr std::size_t kRowBlock = 16;

}  // namespace

double gelu(double x) { return x * normal_cdf(x); }

double gelu_grad(double x) { return normal_cdf(x) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x); }

NetworkWeights::NetworkWeights(std::size_t subcarriers, std::size_t guard) : n_(subcarriers), guard_(guard) {
    if (subcarriers < 2) throw InvalidArgument("NetworkWeights: N must be >= 2");
    const std::size_t n = subcarriers;
    const std::array<std::size_t, kLayerCount + 1> widths{2 * (n + guard) * n, 8 * n, 4 * n, 4 * n, 2 * n * n};
    std::size_t offset = 0;
    for (std::size_t l = 0; l < kLayerCount; ++l) {
        auto& s = layers_[l];
        s.in = widths[l];
        s.out = widths[l + 1];
        s.weight_offset = offset;
        offset += s.in * s.out;
        s.bias_offset = offset;
        offset += s.out;
    }
    params_.assign(offset, 0.0);
}

NetworkWeights NetworkWeights::initialize(std::size_t subcarriers, std::size_t guard, Rng& rng) {
    NetworkWeights w(subcarriers, guard);
    for (std::size_t l = 0; l < kLayerCount; ++l) {
        const auto& s = w.layers_[l];
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        for (auto& v : w.weight(l)) v = rng.uniform(-bound, bound);
    }
    return w;
}

std::span<double> NetworkWeights::weight(std::size_t l) {
    const auto& s = layers_.at(l);
    return {params_.data() + s.weight_offset, s.in * s.out};
}

std::span<const double> NetworkWeights::weight(std::size_t l) const {
    const auto& s = layers_.at(l);
    return {params_.data() + s.weight_offset, s.in * s.out};
}

std::span<double> NetworkWeights::bias(std::size_t l) {
    const auto& s = layers_.at(l);
    return {params_.data() + s.bias_offset, s.out};
}

std::span<const double> NetworkWeights::bias(std::size_t l) const {
    const auto& s = layers_.at(l);
    return {params_.data() + s.bias_offset, s.out};
}

bool NetworkWeights::all_finite() const {
    for (double v : params_)
        if (!std::isfinite(v)) return false;
    return true;
}

void NetworkWeights::set_zero() { std::fill(params_.begin(), params_.end(), 0.0); }

std::vector<double> flatten_channel(const ComplexMatrix& h) {
    const auto data = h.data();
    std::vector<double> out(2 * data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[i] = data[i].real();
        out[data.size() + i] = data[i].imag();
    }
    return out;
}

ComplexMatrix reassemble_output(std::span<const double> output, std::size_t n) {
    const std::size_t nn = n * n;
    if (output.size() != 2 * nn) throw InvalidArgument("reassemble_output: expected 2 N^2 values");
    std::vector<cplx> entries(nn);
    for (std::size_t i = 0; i < nn; ++i) entries[i] = {output[i], output[nn + i]};
    return ComplexMatrix(n, n, std::move(entries));
}

ComplexMatrix forward_raw(const NetworkWeights& w, const ComplexMatrix& h, ForwardTape* tape) {
    const std::size_t n = w.subcarriers();
    if (h.cols() != n || h.rows() != n + w.guard()) {
        throw InvalidArgument("forward: channel is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                              ", network expects " + std::to_string(n + w.guard()) + "x" + std::to_string(n));
    }
    ForwardTape local;
    ForwardTape& t = tape ? *tape : local;
    t.input = flatten_channel(h);
    const std::vector<double>* x = &t.input;
    for (std::size_t l = 0; l < 3; ++l) {
        dense_forward(w.weight(l), w.bias(l), *x, t.pre[l]);
        t.act[l].resize(t.pre[l].size());
        for (std::size_t i = 0; i < t.pre[l].size(); ++i) t.act[l][i] = gelu(t.pre[l][i]);
        x = &t.act[l];
    }
    dense_forward(w.weight(3), w.bias(3), *x, t.output);
    return reassemble_output(t.output, n);
}

ModulationMatrix forward(const NetworkWeights& w, const ComplexMatrix& h, ForwardTape* tape) {
    ComplexMatrix raw = forward_raw(w, h, tape);
    QrFactors qr = householder_qr(raw);
    ModulationMatrix f(qr.q);
    if (tape) tape->qr = std::move(qr);
    return f;
}

ComplexMatrix qr_backward(const QrFactors& qr, const ComplexMatrix& grad_q) {
    // With dQ = Q Omega (Omega skew-Hermitian) and dR_kk real:
    //   dL/dA = Q [ tril_-1(B - B^H) + j Im diag(B) ] R^{-H},  B = Q^H dL/dQ.
    const auto& q = qr.q;
    const std::size_t n = q.rows();
    const ComplexMatrix b = adjoint_matmul(q, grad_q);
    ComplexMatrix x(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, i) = cplx(0.0, b(i, i).imag());
        for (std::size_t j = 0; j < i; ++j) x(i, j) = b(i, j) - std::conj(b(j, i));
    }
    return solve_right_upper_adjoint(qr.r, matmul(q, x));
}

void backward(const NetworkWeights& w, const ComplexMatrix& grad_f, SampleTrace& trace) {
    const auto& tape = trace.tape;
    const std::size_t nn = w.subcarriers() * w.subcarriers();
    const ComplexMatrix grad_raw = qr_backward(tape.qr, grad_f);

    auto& d_out = trace.delta[3];
    d_out.resize(2 * nn);
    const auto g = grad_raw.data();
    for (std::size_t i = 0; i < nn; ++i) {
        d_out[i] = g[i].real();
        d_out[nn + i] = g[i].imag();
    }
    for (std::size_t l = 3; l > 0; --l) {
        auto& d = trace.delta[l - 1];
        dense_backward_input(w.weight(l), trace.delta[l], w.layer(l).in, d);
        const auto& pre = tape.pre[l - 1];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= gelu_grad(pre[i]);
    }
}

void accumulate_gradients(std::span<const SampleTrace* const> traces, NetworkWeights& grad) {
    for (std::size_t l = 0; l < kLayerCount; ++l) {
        const std::size_t rows = grad.layer(l).out;
        const std::size_t blocks = (rows + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < blocks; ++b)
            accumulate_layer_rows(traces, l, grad, b * kRowBlock, std::min(rows, (b + 1) * kRowBlock));
    }
}

namespace reference {

void accumulate_gradients(std::span<const SampleTrace* const> traces, NetworkWeights& grad) {
    for (std::size_t l = 0; l < kLayerCount; ++l) accumulate_layer_rows(traces, l, grad, 0, grad.layer(l).out);
}

}  // namespace reference

ChannelSample prepare_channel(ComplexMatrix h, double sigma2) {
    ComplexMatrix core = scaled_core_inverse(h, sigma2);
    return {std::move(h), std::move(core)};
}

FairnessValue fairness_with_gradient(const MseProfile& e, TargetRule rule) {
    const std::size_t n = e.e.size();
    const MseProfile target = optimal_profile(e, rule);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = e.e[k] - target.e[k];
        num += d * d;
        den += target.e[k] * target.e[k];
    }
    if (!(den > 0.0)) throw InvalidArgument("fairness: target profile has zero norm");
    FairnessValue out;
    out.f = num / den;
    out.grad_e.resize(n);
    double target_grad_sum = 0.0;  // sum_k df/dt_k
    for (std::size_t k = 0; k < n; ++k) {
        const double d = e.e[k] - target.e[k];
        out.grad_e[k] = 2.0 * d / den;
        target_grad_sum += (-2.0 * d - 2.0 * out.f * target.e[k]) / den;
    }
    // Every target entry is the same function of total = sum(e).
    const double dt_dtotal =
        rule == TargetRule::EqualShare ? 1.0 / static_cast<double>(n) : -1.0 / (e.total * e.total);
    for (auto& gk : out.grad_e) gk += target_grad_sum * dt_dtotal;
    return out;
}

namespace {

struct SideEval {
    ModulationMatrix f;
    FairnessValue fairness;
};

MseProfile profile_of(const ChannelSample& c, const ComplexMatrix& f) {
    // e_k = Re(f_k^H K f_k) without forming the full congruence.
    const ComplexMatrix kf = matmul(c.core, f);
    const std::size_t n = f.cols();
    MseProfile p;
    p.e.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t r = 0; r < f.rows(); ++r) s += (std::conj(f(r, k)) * kf(r, k)).real();
        p.e[k] = s;
        p.total += s;
    }
    return p;
}

void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("loss: lambda must lie in [0, 1]");
}

// dL/dF for one side: (lambda / 2) * 2 K F diag(df/de) + (1 - lambda) * 2 (F - F_other) / N.
ComplexMatrix side_gradient(const ChannelSample& c, const ComplexMatrix& f, const ComplexMatrix& other,
                            const FairnessValue& fv, double lambda) {
    const std::size_t n = f.rows();
    ComplexMatrix g = matmul(c.core, f);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < n; ++k) g(r, k) *= lambda * fv.grad_e[k];
    const double qscale = 2.0 * (1.0 - lambda) / static_cast<double>(n);
    for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] += qscale * (f.data()[i] - other.data()[i]);
    return g;
}

}  // namespace

PairLoss pair_loss(const NetworkWeights& w, const ChannelSample& a, const ChannelSample& b, const LossSettings& s) {
    check_lambda(s.lambda);
    const ModulationMatrix f1 = forward(w, a.h);
    const ModulationMatrix f2 = forward(w, b.h);
    PairLoss out;
    out.f1 = fairness_with_gradient(profile_of(a, f1.matrix()), s.target).f;
    out.f2 = fairness_with_gradient(profile_of(b, f2.matrix()), s.target).f;
    out.q = siamese_distance(f1, f2);
    out.loss = siamese_loss(out.f1, out.f2, out.q, s.lambda);
    return out;
}

PairTrace pair_forward_backward(const NetworkWeights& w, const ChannelSample& a, const ChannelSample& b,
                                const LossSettings& s) {
    check_lambda(s.lambda);
    PairTrace t;
    const ModulationMatrix f1 = forward(w, a.h, &t.first.tape);
    const ModulationMatrix f2 = forward(w, b.h, &t.second.tape);
    const FairnessValue fv1 = fairness_with_gradient(profile_of(a, f1.matrix()), s.target);
    const FairnessValue fv2 = fairness_with_gradient(profile_of(b, f2.matrix()), s.target);
    t.terms.f1 = fv1.f;
    t.terms.f2 = fv2.f;
    t.terms.q = siamese_distance(f1, f2);
    t.terms.loss = siamese_loss(t.terms.f1, t.terms.f2, t.terms.q, s.lambda);

    backward(w, side_gradient(a, f1.matrix(), f2.matrix(), fv1, s.lambda), t.first);
    backward(w, side_gradient(b, f2.matrix(), f1.matrix(), fv2, s.lambda), t.second);
    return t;
}

LossAndGradient loss_and_gradient(const NetworkWeights& w, const ChannelSample& a, const ChannelSample& b,
                                  const LossSettings& s) {
    const PairTrace t = pair_forward_backward(w, a, b, s);
    LossAndGradient out{t.terms, NetworkWeights(w.subcarriers(), w.guard())};
    const std::array<const SampleTrace*, 2> traces{&t.first, &t.second};
    accumulate_gradients(traces, out.grad);
    return out;
}

}  // namespace uwa
