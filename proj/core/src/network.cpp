#include "mig/network.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "mig/error.hpp"
#include "mig/rng.hpp"

namespace mig {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using Vector = Eigen::VectorXd;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstVectorMap = Eigen::Map<const Vector>;
using MatrixMap = Eigen::Map<Matrix>;
using VectorMap = Eigen::Map<Vector>;

int NetworkShape::layer_inputs(int layer) const {
    if (layer == 0)
        return input_dim();
    if (skip_layer > 0 && layer == skip_layer)
        return hidden_width + input_dim();
    return hidden_width;
}

int NetworkShape::layer_outputs(int layer) const {
    return layer == hidden_layers ? outputs : hidden_width;
}

std::size_t NetworkShape::parameter_count() const {
    std::size_t n = 0;
    for (int k = 0; k < layer_count(); ++k)
        n += static_cast<std::size_t>(layer_outputs(k)) * (layer_inputs(k) + 1);
    return n;
}

void NetworkShape::validate() const {
    if (labels < 1 || latent_dim < 0 || hidden_width < 1 || hidden_layers < 1 || outputs < 1)
        throw ContractViolation("network shape: widths must be positive");
    if (skip_layer < 0 || skip_layer >= hidden_layers)
        throw ContractViolation("network shape: skip layer must be in [0, hidden_layers)");
}

Network::Network(const NetworkShape &shape) : shape_(shape) {
    shape_.validate();
    std::size_t offset = 0;
    for (int k = 0; k < shape_.layer_count(); ++k) {
        offsets_.push_back(offset);
        offset += static_cast<std::size_t>(shape_.layer_outputs(k)) * (shape_.layer_inputs(k) + 1);
    }
    params_.assign(offset, 0.0);
}

std::size_t Network::bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(shape_.layer_outputs(layer)) * shape_.layer_inputs(layer);
}

Network Network::kaiming(const NetworkShape &shape, std::uint64_t seed) {
    Network net(shape);
    Rng rng(seed);
    for (int k = 0; k < shape.layer_count(); ++k) {
        double stddev = std::sqrt(2.0 / shape.layer_inputs(k));
        std::size_t count = static_cast<std::size_t>(shape.layer_outputs(k)) * shape.layer_inputs(k);
        double *w = net.params_.data() + net.offsets_[k];
        for (std::size_t i = 0; i < count; ++i)
            w[i] = stddev * rng.normal();
    }
    return net;
}

void Gradients::clear() {
    std::fill(parameters.begin(), parameters.end(), 0.0);
    std::fill(latent.begin(), latent.end(), 0.0);
    std::fill(points.begin(), points.end(), Vec2{});
}

struct ForwardCache::Impl {
    const Network *net = nullptr;
    std::uint64_t generation = 0;
    int label = 0;
    Vector condition;              // [one-hot, latent]
    Matrix inputs;                 // 2 x N
    std::vector<Matrix> activations;  // per hidden layer, width x N
    bool valid = false;
};

ForwardCache::ForwardCache() : impl_(std::make_unique<Impl>()) {}
ForwardCache::~ForwardCache() = default;
ForwardCache::ForwardCache(ForwardCache &&) noexcept = default;
ForwardCache &ForwardCache::operator=(ForwardCache &&) noexcept = default;

namespace {

struct LayerView {
    ConstMatrixMap weights;
    ConstVectorMap bias;
};

LayerView layer_view(const Network &net, int k) {
    const auto &shape = net.shape();
    const double *base = net.parameters().data();
    return {ConstMatrixMap(base + net.weight_offset(k), shape.layer_outputs(k), shape.layer_inputs(k)),
            ConstVectorMap(base + net.bias_offset(k), shape.layer_outputs(k))};
}

void leaky_relu(Matrix &m) {
    m = m.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Vector make_condition(const NetworkShape &shape, const Conditioning &cond) {
    if (cond.label < 0 || cond.label >= shape.labels)
        throw ContractViolation("label index outside the network's alphabet");
    if (static_cast<int>(cond.latent.size()) != shape.latent_dim)
        throw ContractViolation("latent code size does not match the network");
    Vector c = Vector::Zero(shape.labels + shape.latent_dim);
    c[cond.label] = 1.0;
    for (int i = 0; i < shape.latent_dim; ++i)
        c[shape.labels + i] = cond.latent[i];
    return c;
}

} // namespace

std::vector<double> forward(const Network &net, const Conditioning &cond, std::span<const Vec2> points,
                            ForwardCache *cache) {
    const auto &shape = net.shape();
    const int n = static_cast<int>(points.size());
    const int hidden = shape.hidden_width;
    const int cdim = shape.labels + shape.latent_dim;
    Vector c = make_condition(shape, cond);

    Matrix x(2, n);
    for (int i = 0; i < n; ++i) {
        x(0, i) = points[i].x;
        x(1, i) = points[i].y;
    }

    std::vector<Matrix> acts;
    if (cache)
        acts.reserve(shape.hidden_layers);
    Matrix a;
    for (int k = 0; k < shape.hidden_layers; ++k) {
        LayerView L = layer_view(net, k);
        int lead = (k == 0) ? 0 : hidden;
        bool takes_input = (k == 0) || (shape.skip_layer > 0 && k == shape.skip_layer);
        Matrix z;
        if (takes_input) {
            Vector bias = L.bias + L.weights.middleCols(lead + 2, cdim) * c;
            z.noalias() = L.weights.middleCols(lead, 2) * x;
            if (lead > 0)
                z.noalias() += L.weights.leftCols(lead) * a;
            z.colwise() += bias;
        } else {
            z.noalias() = L.weights * a;
            z.colwise() += L.bias;
        }
        leaky_relu(z);
        if (cache) {
            acts.push_back(z);
            a = acts.back();
        } else {
            a = std::move(z);
        }
    }
    LayerView out = layer_view(net, shape.hidden_layers);
    // Row by row, so every output channel is computed the same way wherever it sits.
    Matrix y(shape.outputs, n);
    for (int r = 0; r < shape.outputs; ++r)
        y.row(r).noalias() = out.weights.row(r) * a;
    y.colwise() += out.bias;

    if (cache) {
        auto &impl = cache->impl();
        impl.net = &net;
        impl.generation = net.generation();
        impl.label = cond.label;
        impl.condition = std::move(c);
        impl.inputs = std::move(x);
        impl.activations = std::move(acts);
        impl.valid = true;
    }
    return std::vector<double>(y.data(), y.data() + y.size());
}

std::vector<double> forward(const Network &net, const Conditioning &cond, Vec2 point) {
    return forward(net, cond, std::span<const Vec2>(&point, 1));
}

void backward(const Network &net, const ForwardCache &cache, std::span<const double> upstream, Gradients &grads) {
    const auto &impl = cache.impl();
    if (!impl.valid || impl.net != &net || impl.generation != net.generation())
        throw ContractViolation("backward: forward cache is stale or from another network");
    const auto &shape = net.shape();
    const int n = static_cast<int>(impl.inputs.cols());
    const int hidden = shape.hidden_width;
    const int cdim = shape.labels + shape.latent_dim;
    if (upstream.size() != static_cast<std::size_t>(n) * shape.outputs)
        throw ContractViolation("backward: upstream gradient has the wrong size");
    const bool want_params = !grads.parameters.empty();
    if ((want_params && grads.parameters.size() != shape.parameter_count()) ||
        grads.latent.size() != static_cast<std::size_t>(shape.latent_dim))
        throw ContractViolation("backward: gradient buffers do not match the network");
    const bool want_points = grads.points.size() == static_cast<std::size_t>(n);

    double *g = grads.parameters.data();
    auto grad_weights = [&](int k) {
        return MatrixMap(g + net.weight_offset(k), shape.layer_outputs(k), shape.layer_inputs(k));
    };
    auto grad_bias = [&](int k) { return VectorMap(g + net.bias_offset(k), shape.layer_outputs(k)); };

    ConstMatrixMap dy(upstream.data(), shape.outputs, n);
    const int last = shape.hidden_layers;
    if (want_params) {
        grad_weights(last).noalias() += dy * impl.activations[last - 1].transpose();
        grad_bias(last) += dy.rowwise().sum();
    }
    Matrix da = layer_view(net, last).weights.transpose() * dy;
    Vector dcond = Vector::Zero(cdim);
    Matrix dx = want_points ? Matrix::Zero(2, n) : Matrix();

    for (int k = last - 1; k >= 0; --k) {
        const Matrix &act = impl.activations[k];
        Matrix dz = da.binaryExpr(act, [](double d, double a) { return a > 0.0 ? d : kLeakySlope * d; });
        LayerView L = layer_view(net, k);
        Vector row_sum = dz.rowwise().sum();
        int lead = (k == 0) ? 0 : hidden;
        bool takes_input = (k == 0) || (shape.skip_layer > 0 && k == shape.skip_layer);
        if (want_params) {
            auto gw = grad_weights(k);
            grad_bias(k) += row_sum;
            if (takes_input) {
                gw.middleCols(lead, 2).noalias() += dz * impl.inputs.transpose();
                gw.middleCols(lead + 2, cdim).noalias() += row_sum * impl.condition.transpose();
                if (lead > 0)
                    gw.leftCols(lead).noalias() += dz * impl.activations[k - 1].transpose();
            } else {
                gw.noalias() += dz * impl.activations[k - 1].transpose();
            }
        }
        if (takes_input) {
            dcond.noalias() += L.weights.middleCols(lead + 2, cdim).transpose() * row_sum;
            if (want_points)
                dx.noalias() += L.weights.middleCols(lead, 2).transpose() * dz;
            if (lead > 0)
                da = L.weights.leftCols(lead).transpose() * dz;
        } else {
            da = L.weights.transpose() * dz;
        }
    }

    for (int i = 0; i < shape.latent_dim; ++i)
        grads.latent[i] += dcond[shape.labels + i];
    if (want_points)
        for (int i = 0; i < n; ++i)
            grads.points[i] += Vec2{dx(0, i), dx(1, i)};
}

LatentTable LatentTable::random(int dim, int count, double stddev, std::uint64_t seed) {
    LatentTable t(dim, count);
    Rng rng(seed);
    for (double &v : t.codes)
        v = stddev * rng.normal();
    return t;
}

std::vector<double> LatentTable::mean() const {
    std::vector<double> m(static_cast<std::size_t>(dim), 0.0);
    if (count == 0)
        return m;
    for (int f = 0; f < count; ++f)
        for (int i = 0; i < dim; ++i)
            m[i] += codes[static_cast<std::size_t>(f) * dim + i];
    for (double &v : m)
        v /= count;
    return m;
}

void adam_step(AdamState &state, std::span<double> params, std::span<const double> grads, std::string_view tensor) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw ContractViolation("adam_step: shape mismatch for " + std::string(tensor));
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw NumericalError("non-finite gradient in " + std::string(tensor) + " at index " + std::to_string(i));
    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        double mhat = state.m[i] / c1;
        double vhat = state.v[i] / c2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

void adam_step_latent(LatentTable &table, AdamState &state, int family, std::span<const double> grads) {
    if (table.frozen)
        return;
    adam_step(state, table.code(family), grads, "latent[" + std::to_string(family) + "]");
}

} // namespace mig
