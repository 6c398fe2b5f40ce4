#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mig/vec2.hpp"

namespace mig {

/// Layer widths of the implicit MLP.
///
/// Input is [x, y, one-hot label, latent code]. Hidden layers use LeakyReLU(0.01); the input is
/// concatenated onto the activations feeding hidden layer `skip_layer` (0-based, 0 disables);
/// the output head is linear.
struct NetworkShape {
    int labels = 52;
    int latent_dim = 128;
    int hidden_width = 384;
    int hidden_layers = 8;
    int skip_layer = 3;
    int outputs = 3;

    int input_dim() const { return 2 + labels + latent_dim; }
    int layer_count() const { return hidden_layers + 1; }
    int layer_inputs(int layer) const;
    int layer_outputs(int layer) const;
    std::size_t parameter_count() const;
    /// Throws ContractViolation when the widths are inconsistent.
    void validate() const;

    bool operator==(const NetworkShape &) const = default;
};

inline constexpr double kLeakySlope = 0.01;

/// Flat parameter storage: per layer a column-major weight matrix (outputs x inputs), then its bias.
class Network {
public:
    Network() = default;
    explicit Network(const NetworkShape &shape);  // all zeros

    /// Kaiming fan-in normal weights, zero biases.
    static Network kaiming(const NetworkShape &shape, std::uint64_t seed);

    const NetworkShape &shape() const { return shape_; }
    std::span<const double> parameters() const { return params_; }
    /// Mutable access invalidates forward caches taken before it.
    std::span<double> mutable_parameters() {
        ++generation_;
        return params_;
    }
    std::uint64_t generation() const { return generation_; }

    std::size_t weight_offset(int layer) const { return offsets_[layer]; }
    std::size_t bias_offset(int layer) const;

private:
    NetworkShape shape_;
    std::vector<double> params_;
    std::vector<std::size_t> offsets_;
    std::uint64_t generation_ = 0;
};

/// Per-glyph conditioning shared by a batch of points.
struct Conditioning {
    int label = 0;
    std::span<const double> latent;
};

/// Activations retained by forward() for a later backward().
class ForwardCache {
public:
    ForwardCache();
    ~ForwardCache();
    ForwardCache(ForwardCache &&) noexcept;
    ForwardCache &operator=(ForwardCache &&) noexcept;

    struct Impl;
    Impl &impl() { return *impl_; }
    const Impl &impl() const { return *impl_; }

private:
    std::unique_ptr<Impl> impl_;
};

/// Gradients accumulated by backward().
struct Gradients {
    std::vector<double> parameters;
    std::vector<double> latent;
    std::vector<Vec2> points;

    Gradients() = default;
    explicit Gradients(const NetworkShape &shape)
        : parameters(shape.parameter_count(), 0.0), latent(static_cast<std::size_t>(shape.latent_dim), 0.0) {}
    void clear();
};

/// Evaluates all points under one conditioning. Result is point-major: out[i * outputs + c].
/// Pass a cache to enable backward().
std::vector<double> forward(const Network &net, const Conditioning &cond, std::span<const Vec2> points,
                            ForwardCache *cache = nullptr);

/// Single-point convenience wrapper.
std::vector<double> forward(const Network &net, const Conditioning &cond, Vec2 point);

/// Accumulates d(sum_i upstream_i . out_i)/d(theta, z, p) into `grads`.
/// `upstream` has the layout of forward()'s result. Parameter gradients are skipped when
/// grads.parameters is empty; point gradients are written only when grads.points is sized to the batch.
void backward(const Network &net, const ForwardCache &cache, std::span<const double> upstream, Gradients &grads);

/// One learned code per font family.
struct LatentTable {
    int dim = 128;
    int count = 0;
    std::vector<double> codes;  // count x dim, row-major
    bool frozen = false;

    LatentTable() = default;
    LatentTable(int dim_, int count_) : dim(dim_), count(count_), codes(static_cast<std::size_t>(dim_) * count_, 0.0) {}
    /// Codes drawn from N(0, stddev^2).
    static LatentTable random(int dim, int count, double stddev, std::uint64_t seed);

    std::span<const double> code(int family) const { return {codes.data() + static_cast<std::size_t>(family) * dim, static_cast<std::size_t>(dim)}; }
    std::span<double> code(int family) { return {codes.data() + static_cast<std::size_t>(family) * dim, static_cast<std::size_t>(dim)}; }
    std::vector<double> mean() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    AdamState(std::size_t size, double learning_rate) : m(size, 0.0), v(size, 0.0), lr(learning_rate) {}
};

/// Bias-corrected ADAM update. Throws NumericalError naming `tensor` on a non-finite gradient.
void adam_step(AdamState &state, std::span<double> params, std::span<const double> grads, std::string_view tensor);

/// Updates one family's code unless the table is frozen (then a no-op).
void adam_step_latent(LatentTable &table, AdamState &state, int family, std::span<const double> grads);

} // namespace mig
