#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bal/tensor.hpp"

namespace bal {

enum class Activation : std::uint8_t {
    identity = 0,
    relu = 1,
    leaky_relu = 2,
    tanh = 3,
    sigmoid = 4,
};

const char* activation_name(Activation a);

struct DenseLayer {
    Tensor2 weight;            // in x out
    std::vector<double> bias;  // out
    Activation act = Activation::identity;
};

// Plain fully connected network. Reconstructing from (widths, acts, seed) is
// bit-identical, which the checkpoint format and the determinism tests rely on.
struct DenseNet {
    std::vector<DenseLayer> layers;
    std::uint64_t seed = 0;

    std::size_t input_width() const { return layers.empty() ? 0 : layers.front().weight.rows; }
    std::size_t output_width() const { return layers.empty() ? 0 : layers.back().weight.cols; }
};

// widths = {in, h1, ..., out}; acts has widths.size()-1 entries.
// Weights start uniform in +-sqrt(6/(fan_in+fan_out)), biases at zero.
DenseNet make_dense_net(std::span<const std::size_t> widths,
                        std::span<const Activation> acts, std::uint64_t seed);

struct ForwardTrace {
    std::vector<Tensor2> inputs; // inputs[l] = input of layer l (inputs[0] = x)
    std::vector<Tensor2> pre;    // pre-activation of layer l
    Tensor2 output;              // post-activation of the last layer

    bool valid() const { return !inputs.empty(); }
};

Tensor2 forward(const DenseNet& net, const Tensor2& x);
ForwardTrace forward_traced(const DenseNet& net, const Tensor2& x);

struct NetGradients {
    std::vector<Tensor2> dweight;
    std::vector<std::vector<double>> dbias;
    Tensor2 dinput;
};

// out_grad = dLoss/d(output), same shape as trace.output. Returns gradients of
// the scalar loss w.r.t. every parameter and w.r.t. the network input.
NetGradients backward(const DenseNet& net, const ForwardTrace& trace, const Tensor2& out_grad);

void accumulate(NetGradients& acc, const NetGradients& g);
NetGradients zero_gradients(const DenseNet& net);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<Tensor2> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    std::int64_t step = 0;
};

AdamState make_adam(const DenseNet& net, AdamConfig cfg);
void adam_step(DenseNet& net, const NetGradients& grads, AdamState& state);

// Checkpoint format, little-endian:
//   magic "BALNET1\0", u32 layer count,
//   per layer: u32 in, u32 out, u8 activation id, f64 weights row-major, f64 biases,
//   u64 seed.
std::string serialize_net(const DenseNet& net);
DenseNet deserialize_net(const std::string& bytes, const std::string& origin = "<memory>");
void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path);

} // namespace bal
