#include "bal/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "bal/error.hpp"
#include "bal/rng.hpp"

namespace bal {

namespace {

constexpr double kLeakySlope = 0.01;
constexpr char kNetMagic[8] = {'B', 'A', 'L', 'N', 'E', 'T', '1', '\0'};

double activate(Activation a, double x) {
    switch (a) {
    case Activation::identity:   return x;
    case Activation::relu:       return x > 0.0 ? x : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
    case Activation::tanh:       return std::tanh(x);
    case Activation::sigmoid:    return 1.0 / (1.0 + std::exp(-x));
    }
    fail_state("unknown activation");
}

// Derivative as a function of the pre-activation value.
double activate_grad(Activation a, double pre) {
    switch (a) {
    case Activation::identity:   return 1.0;
    case Activation::relu:       return pre > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return pre > 0.0 ? 1.0 : kLeakySlope;
    case Activation::tanh: {
        const double t = std::tanh(pre);
        return 1.0 - t * t;
    }
    case Activation::sigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-pre));
        return s * (1.0 - s);
    }
    }
    fail_state("unknown activation");
}

template <typename T>
void put_raw(std::string& out, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, std::size_t& pos, const std::string& origin) {
    if (pos + sizeof(T) > in.size())
        fail_data("truncated checkpoint: " + origin);
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::identity:   return "identity";
    case Activation::relu:       return "relu";
    case Activation::leaky_relu: return "leaky-relu";
    case Activation::tanh:       return "tanh";
    case Activation::sigmoid:    return "sigmoid";
    }
    return "?";
}

DenseNet make_dense_net(std::span<const std::size_t> widths,
                        std::span<const Activation> acts, std::uint64_t seed) {
    if (widths.size() < 2) fail_config("make_dense_net: need at least input and output widths");
    if (acts.size() != widths.size() - 1)
        fail_config("make_dense_net: one activation per layer required");
    DenseNet net;
    net.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
        if (fan_in == 0 || fan_out == 0) fail_config("make_dense_net: zero layer width");
        layer.weight = Tensor2(fan_in, fan_out);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
        layer.bias.assign(fan_out, 0.0);
        layer.act = acts[l];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Tensor2 forward(const DenseNet& net, const Tensor2& x) {
    if (net.layers.empty()) fail_state("forward: empty net");
    if (x.cols != net.input_width())
        fail_shape("forward: input width " + std::to_string(x.cols) + " != net input " +
                   std::to_string(net.input_width()));
    Tensor2 cur = x;
    for (const DenseLayer& layer : net.layers) {
        Tensor2 pre = matmul(cur, layer.weight);
        add_row_vector(pre, layer.bias);
        for (double& v : pre.data) v = activate(layer.act, v);
        cur = std::move(pre);
    }
    if (!all_finite(cur)) fail_numeric("forward: non-finite output");
    return cur;
}

ForwardTrace forward_traced(const DenseNet& net, const Tensor2& x) {
    if (net.layers.empty()) fail_state("forward: empty net");
    if (x.cols != net.input_width())
        fail_shape("forward: input width " + std::to_string(x.cols) + " != net input " +
                   std::to_string(net.input_width()));
    ForwardTrace trace;
    trace.inputs.reserve(net.layers.size());
    trace.pre.reserve(net.layers.size());
    Tensor2 cur = x;
    for (const DenseLayer& layer : net.layers) {
        trace.inputs.push_back(cur);
        Tensor2 pre = matmul(cur, layer.weight);
        add_row_vector(pre, layer.bias);
        trace.pre.push_back(pre);
        for (double& v : pre.data) v = activate(layer.act, v);
        cur = std::move(pre);
    }
    if (!all_finite(cur)) fail_numeric("forward: non-finite output");
    trace.output = std::move(cur);
    return trace;
}

NetGradients backward(const DenseNet& net, const ForwardTrace& trace, const Tensor2& out_grad) {
    if (!trace.valid()) fail_state("backward: forward cache missing");
    if (trace.inputs.size() != net.layers.size())
        fail_state("backward: cache does not match net");
    if (!out_grad.same_shape(trace.output))
        fail_shape("backward: out_grad shape mismatch");

    NetGradients grads;
    grads.dweight.resize(net.layers.size());
    grads.dbias.resize(net.layers.size());

    Tensor2 delta = out_grad;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const DenseLayer& layer = net.layers[l];
        const Tensor2& pre = trace.pre[l];
        // delta through the activation
        for (std::size_t i = 0; i < delta.data.size(); ++i)
            delta.data[i] *= activate_grad(layer.act, pre.data[i]);
        grads.dweight[l] = matmul_tn(trace.inputs[l], delta);
        std::vector<double> db(layer.bias.size(), 0.0);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* di = delta.data.data() + i * delta.cols;
            for (std::size_t j = 0; j < delta.cols; ++j) db[j] += di[j];
        }
        grads.dbias[l] = std::move(db);
        delta = matmul_nt(delta, layer.weight);
    }
    grads.dinput = std::move(delta);
    return grads;
}

void accumulate(NetGradients& acc, const NetGradients& g) {
    if (acc.dweight.size() != g.dweight.size()) fail_shape("accumulate: layer count mismatch");
    for (std::size_t l = 0; l < g.dweight.size(); ++l) {
        for (std::size_t i = 0; i < g.dweight[l].data.size(); ++i)
            acc.dweight[l].data[i] += g.dweight[l].data[i];
        for (std::size_t i = 0; i < g.dbias[l].size(); ++i)
            acc.dbias[l][i] += g.dbias[l][i];
    }
}

NetGradients zero_gradients(const DenseNet& net) {
    NetGradients g;
    for (const DenseLayer& layer : net.layers) {
        g.dweight.emplace_back(layer.weight.rows, layer.weight.cols);
        g.dbias.emplace_back(layer.bias.size(), 0.0);
    }
    return g;
}

AdamState make_adam(const DenseNet& net, AdamConfig cfg) {
    AdamState st;
    st.cfg = cfg;
    for (const DenseLayer& layer : net.layers) {
        st.m_w.emplace_back(layer.weight.rows, layer.weight.cols);
        st.v_w.emplace_back(layer.weight.rows, layer.weight.cols);
        st.m_b.emplace_back(layer.bias.size(), 0.0);
        st.v_b.emplace_back(layer.bias.size(), 0.0);
    }
    return st;
}

namespace {

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 const AdamConfig& cfg, double bc1, double bc2, std::int64_t step) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        if (!std::isfinite(g))
            fail_numeric("adam step " + std::to_string(step) + ": non-finite gradient");
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

} // namespace

void adam_step(DenseNet& net, const NetGradients& grads, AdamState& state) {
    if (grads.dweight.size() != net.layers.size())
        fail_shape("adam_step: gradient layer count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        if (!grads.dweight[l].same_shape(layer.weight) ||
            grads.dbias[l].size() != layer.bias.size())
            fail_shape("adam_step: gradient shape mismatch at layer " + std::to_string(l));
        adam_update(layer.weight.data, grads.dweight[l].data, state.m_w[l].data,
                    state.v_w[l].data, state.cfg, bc1, bc2, state.step);
        adam_update(layer.bias, grads.dbias[l], state.m_b[l], state.v_b[l],
                    state.cfg, bc1, bc2, state.step);
    }
}

std::string serialize_net(const DenseNet& net) {
    std::string out;
    out.append(kNetMagic, sizeof(kNetMagic));
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const DenseLayer& layer : net.layers) {
        put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.rows));
        put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.cols));
        put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(layer.act));
        for (double w : layer.weight.data) put_raw(out, w);
        for (double b : layer.bias) put_raw(out, b);
    }
    put_raw<std::uint64_t>(out, net.seed);
    return out;
}

DenseNet deserialize_net(const std::string& bytes, const std::string& origin) {
    std::size_t pos = 0;
    if (bytes.size() < sizeof(kNetMagic) ||
        std::memcmp(bytes.data(), kNetMagic, sizeof(kNetMagic)) != 0)
        fail_data("bad net checkpoint magic: " + origin);
    pos += sizeof(kNetMagic);
    const auto layer_count = get_raw<std::uint32_t>(bytes, pos, origin);
    DenseNet net;
    std::size_t prev_out = 0;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const auto in = get_raw<std::uint32_t>(bytes, pos, origin);
        const auto out = get_raw<std::uint32_t>(bytes, pos, origin);
        const auto act_id = get_raw<std::uint8_t>(bytes, pos, origin);
        if (act_id > static_cast<std::uint8_t>(Activation::sigmoid))
            fail_data("bad activation id in checkpoint: " + origin);
        if (l > 0 && in != prev_out)
            fail_data("checkpoint layer dimensions do not chain: " + origin);
        prev_out = out;
        DenseLayer layer;
        layer.weight = Tensor2(in, out);
        layer.act = static_cast<Activation>(act_id);
        for (double& w : layer.weight.data) w = get_raw<double>(bytes, pos, origin);
        layer.bias.resize(out);
        for (double& b : layer.bias) b = get_raw<double>(bytes, pos, origin);
        if (!all_finite(layer.weight) || !all_finite(layer.bias))
            fail_data("non-finite parameters in checkpoint: " + origin);
        net.layers.push_back(std::move(layer));
    }
    net.seed = get_raw<std::uint64_t>(bytes, pos, origin);
    if (pos != bytes.size()) fail_data("trailing bytes in checkpoint: " + origin);
    return net;
}

void save_net(const DenseNet& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    const std::string bytes = serialize_net(net);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail_data("write failed: " + path);
}

DenseNet load_net(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_net(bytes, path);
}

} // namespace bal
