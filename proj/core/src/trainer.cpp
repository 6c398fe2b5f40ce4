#include "mig/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mig/geometry.hpp"
#include "mig/rng.hpp"

namespace mig {

double WarmupSchedule::gamma(int epoch) const {
    if (!enabled || anneal_epochs <= 0 || epoch >= anneal_epochs)
        return gamma_end;
    double f = static_cast<double>(std::max(epoch, 0)) / anneal_epochs;
    return std::exp(std::log(gamma_start) + (std::log(gamma_end) - std::log(gamma_start)) * f);
}

TrainComposer WarmupSchedule::composer(int epoch) const {
    if (enabled && epoch < anneal_epochs)
        return TrainComposer::Mean;
    return TrainComposer::MedianPair;
}

WarmupSchedule TrainConfig::schedule() const {
    WarmupSchedule s;
    s.enabled = warmup;
    s.gamma_start = warmup_gamma_start;
    s.gamma_end = gamma_end();
    s.anneal_epochs = anneal_epochs < 0 ? epochs / 2 : anneal_epochs;
    return s;
}

NetworkShape TrainConfig::network_shape(int labels) const {
    NetworkShape s;
    s.labels = labels;
    s.latent_dim = latent_dim;
    s.hidden_width = hidden_width;
    s.hidden_layers = hidden_layers;
    s.skip_layer = skip_layer;
    s.outputs = channels;
    return s;
}

double loss_global(std::span<const double> composed, std::span<const double> targets) {
    if (composed.size() != targets.size())
        throw ContractViolation("loss_global: size mismatch");
    if (composed.empty())
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < composed.size(); ++i) {
        double e = composed[i] - targets[i];
        sum += e * e;
    }
    return sum / static_cast<double>(composed.size());
}

double loss_eikonal(std::span<const Vec2> gradients) {
    if (gradients.empty())
        return 0.0;
    double sum = 0.0;
    for (Vec2 g : gradients) {
        double norm = g.length();
        if (norm < 1.0)
            sum += 1.0 - norm;
    }
    return sum / static_cast<double>(gradients.size());
}

namespace {

void check_finite(double value, const char *term) {
    if (!std::isfinite(value))
        throw NumericalError(std::string("non-finite ") + term + " loss");
}

} // namespace

LossTerms evaluate_loss(const Network &net, std::span<const double> latent, int label, const SampleSet &samples,
                        std::span<const CornerTemplate> templates, const LossContext &ctx, Gradients *grads) {
    const auto &shape = net.shape();
    const int channels = shape.outputs;
    const bool sdf = ctx.supervision == Supervision::Sdf;
    const std::size_t n = samples.samples.size();
    const bool use_eikonal = sdf && ctx.weights.eikonal > 0.0 && !ctx.eikonal_indices.empty();
    const bool use_corner = ctx.weights.corner > 0.0 && channels == 3 && samples.corner_count > 0;
    const std::size_t stencil = use_eikonal ? ctx.eikonal_indices.size() : 0;
    const double h = ctx.eikonal_step;

    std::vector<Vec2> points;
    points.reserve(n + 4 * stencil);
    for (const auto &s : samples.samples)
        points.push_back(s.position);
    for (std::size_t e = 0; e < stencil; ++e) {
        Vec2 p = samples.samples.at(ctx.eikonal_indices[e]).position;
        points.push_back(p + Vec2{h, 0.0});
        points.push_back(p - Vec2{h, 0.0});
        points.push_back(p + Vec2{0.0, h});
        points.push_back(p - Vec2{0.0, h});
    }

    ForwardCache cache;
    std::vector<double> out = forward(net, {label, latent}, points, grads ? &cache : nullptr);
    std::vector<double> upstream(grads ? out.size() : 0, 0.0);

    // Per-channel opacity and its derivative with respect to the raw output.
    std::vector<double> opacity(n * channels), slope(n * channels);
    for (std::size_t i = 0; i < n * channels; ++i) {
        if (sdf) {
            opacity[i] = kernel(out[i], ctx.gamma);
            slope[i] = kernel_derivative(out[i], ctx.gamma);
        } else {
            opacity[i] = out[i];
            slope[i] = 1.0;
        }
    }

    LossTerms terms;
    if (n > 0) {
        double sum = 0.0;
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            Composed c = compose_train(std::span<const double>(opacity.data() + i * channels, channels), ctx.composer);
            double e = c.value - samples.samples[i].target;
            sum += e * e;
            if (grads)
                for (int k = 0; k < channels; ++k)
                    upstream[i * channels + k] += 2.0 * e * inv * c.grad[k] * slope[i * channels + k];
        }
        terms.global = sum * inv;
    }
    check_finite(terms.global, "global");

    if (use_corner) {
        std::vector<std::vector<std::size_t>> members(templates.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto &s = samples.samples[i];
            if (s.kind == SampleKind::Corner)
                members.at(s.corner_ref).push_back(i);
        }
        struct Part {
            CornerLoss loss;
            const std::vector<std::size_t> *index;
        };
        std::vector<Part> parts;
        int supervised = 0;
        double sum = 0.0;
        for (std::size_t t = 0; t < templates.size(); ++t) {
            if (members[t].empty())
                continue;
            std::vector<std::array<double, 3>> pred(templates[t].points.size());
            for (std::size_t idx : members[t]) {
                int w = samples.samples[idx].window_index;
                for (int k = 0; k < 3; ++k)
                    pred.at(w)[k] = opacity[idx * 3 + k];
            }
            CornerLoss cl = corner_loss(pred, templates[t]);
            supervised += cl.supervised_points;
            sum += cl.sum;
            parts.push_back({std::move(cl), &members[t]});
        }
        if (supervised > 0) {
            terms.local = sum / supervised;
            if (grads) {
                for (const auto &part : parts) {
                    // corner_loss normalizes per template; renormalize to the pooled point count.
                    double scale = ctx.weights.corner * static_cast<double>(part.loss.supervised_points) / supervised;
                    for (std::size_t idx : *part.index) {
                        int w = samples.samples[idx].window_index;
                        for (int k = 0; k < 3; ++k)
                            upstream[idx * 3 + k] += scale * part.loss.gradient[w][k] * slope[idx * 3 + k];
                    }
                }
            }
        }
    }
    check_finite(terms.local, "corner");

    if (use_eikonal) {
        double sum = 0.0;
        const double inv = 1.0 / static_cast<double>(stencil * channels);
        for (std::size_t e = 0; e < stencil; ++e) {
            std::size_t base = (n + 4 * e) * channels;
            for (int k = 0; k < channels; ++k) {
                double gx = (out[base + k] - out[base + channels + k]) / (2.0 * h);
                double gy = (out[base + 2 * channels + k] - out[base + 3 * channels + k]) / (2.0 * h);
                double norm = std::hypot(gx, gy);
                if (norm >= 1.0)
                    continue;
                sum += 1.0 - norm;
                if (grads && norm > 0.0) {
                    double w = ctx.weights.eikonal * inv / (2.0 * h * norm);
                    upstream[base + k] += -w * gx;
                    upstream[base + channels + k] += w * gx;
                    upstream[base + 2 * channels + k] += -w * gy;
                    upstream[base + 3 * channels + k] += w * gy;
                }
            }
        }
        terms.grad = sum * inv;
    }
    check_finite(terms.grad, "eikonal");

    double norm2 = 0.0;
    for (double v : latent)
        norm2 += v * v;
    terms.latent_norm = std::sqrt(norm2);
    check_finite(terms.latent_norm, "latent");

    terms.total = terms.global + ctx.weights.corner * terms.local + ctx.weights.eikonal * terms.grad +
                  ctx.weights.latent * terms.latent_norm;

    if (grads) {
        backward(net, cache, upstream, *grads);
        if (terms.latent_norm > 0.0 && ctx.weights.latent > 0.0)
            for (std::size_t i = 0; i < latent.size(); ++i)
                grads->latent[i] += ctx.weights.latent * latent[i] / terms.latent_norm;
    }
    return terms;
}

namespace {

// Cached per-glyph training data; rebuilt whenever gamma changes.
struct GlyphData {
    const TrainingGlyph *glyph = nullptr;
    Image sdf;
    double max_sdf = 0.0;
    double min_sdf = 0.0;
    std::vector<CornerTemplate> templates;
    double gamma = -1.0;
    SampleSet samples;
};

void refresh(GlyphData &data, std::size_t index, double gamma, const TrainConfig &config) {
    if (data.gamma == gamma)
        return;
    data.gamma = gamma;
    Image raster = apply_kernel(data.sdf, gamma);
    for (auto &t : data.templates)
        retarget(t, gamma);
    SamplingConfig sc;
    sc.gamma = gamma;
    sc.homogeneous_ratio = config.homogeneous_ratio;
    sc.min_homogeneous = config.min_homogeneous;
    sc.seed = derive_seed(config.seed, index, std::bit_cast<std::uint64_t>(gamma));
    // Skip strata the raster shows to be empty, so rejection sampling does not spin at large gamma.
    std::vector<Contour> none;
    bool inside_possible = data.max_sdf > gamma;
    bool outside_possible = data.min_sdf < -gamma;
    if (!inside_possible || !outside_possible) {
        SamplingConfig restricted = sc;
        restricted.homogeneous_ratio = 0.0;
        restricted.min_homogeneous = 0;
        data.samples = sample_glyph(data.glyph->contours, raster, data.templates, restricted);
        if (outside_possible || inside_possible) {
            // Fill the feasible side only.
            Rng rng(sc.seed);
            int want = std::max(static_cast<int>(std::lround(sc.homogeneous_ratio * data.samples.edge_count)),
                                sc.min_homogeneous);
            long attempts = 0;
            int got = 0;
            while (got < want && attempts < 50L * want) {
                ++attempts;
                Vec2 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
                double d = glyph_sdf(p, data.glyph->contours);
                if (std::abs(d) <= gamma || (d > 0.0) != inside_possible)
                    continue;
                data.samples.samples.push_back({p, SampleKind::Homogeneous, d > 0.0 ? 1.0 : 0.0, -1, -1});
                ++got;
            }
            data.samples.homogeneous_count = got;
        }
        return;
    }
    data.samples = sample_glyph(data.glyph->contours, raster, data.templates, sc);
}

std::vector<int> choose_subset(std::size_t n, int count, Rng &rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (count < 0 || static_cast<std::size_t>(count) >= n)
        return idx;
    for (int i = 0; i < count; ++i)
        std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(count);
    return idx;
}

} // namespace

TrainResult train(const std::vector<TrainingGlyph> &glyphs, const TrainConfig &config, const TrainOptions &options) {
    if (glyphs.empty())
        throw ConfigError("training requires a non-empty dataset");
    if (config.channels != 1 && config.channels != 3)
        throw ConfigError("field channels must be 1 or 3");
    const int labels = static_cast<int>(options.alphabet.size());
    const int families = static_cast<int>(options.families.size());
    for (const auto &g : glyphs) {
        if (g.label < 0 || g.label >= labels)
            throw ConfigError("glyph label outside the alphabet");
        if (g.family < 0 || g.family >= families)
            throw ConfigError("glyph family index outside the family list");
    }
    const NetworkShape shape = config.network_shape(labels);
    shape.validate();

    Checkpoint state;
    if (options.resume) {
        state = *options.resume;
        if (!(state.network.shape() == shape))
            throw ConfigError("resume checkpoint network shape does not match the configuration");
        if (state.latents.count != families)
            throw ConfigError("resume checkpoint family count does not match the dataset");
    } else {
        state.network = Network::kaiming(shape, derive_seed(config.seed, 1));
        state.latents = LatentTable::random(config.latent_dim, families, config.latent_init_stddev,
                                            derive_seed(config.seed, 2));
        state.network_adam = AdamState(shape.parameter_count(), config.lr);
        state.latent_adam.assign(static_cast<std::size_t>(families), AdamState(config.latent_dim, config.lr));
        state.epoch = 0;
    }
    state.families = options.families;
    state.alphabet = options.alphabet.to_string();
    state.config_json = options.config_json;

    std::vector<GlyphData> data(glyphs.size());
    const int width = config.train_width;
    for (std::size_t i = 0; i < glyphs.size(); ++i) {
        data[i].glyph = &glyphs[i];
        data[i].sdf = sdf_grid(glyphs[i].contours, width);
        auto [lo, hi] = std::minmax_element(data[i].sdf.values.begin(), data[i].sdf.values.end());
        data[i].min_sdf = *lo;
        data[i].max_sdf = *hi;
        for (const auto &c : detect_corners(glyphs[i].contours, config.corner_threshold))
            data[i].templates.push_back(build_template(c, width, config.gamma_end()));
    }

    const WarmupSchedule schedule = config.schedule();
    TrainResult result;
    Gradients grads(shape);
    std::vector<double> latent_grad(static_cast<std::size_t>(config.latent_dim));

    for (int epoch = state.epoch; epoch < config.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        if (config.freeze_epoch >= 0 && epoch >= config.freeze_epoch)
            state.latents.frozen = true;
        const double gamma = schedule.gamma(epoch);
        LossContext ctx;
        ctx.gamma = gamma;
        ctx.composer = config.channels == 3 ? schedule.composer(epoch) : TrainComposer::MedianPair;
        ctx.supervision = config.supervision;
        ctx.weights = config.weights;
        ctx.eikonal_step = 1.0 / (2.0 * width);
        if (config.supervision == Supervision::Pixel)
            ctx.weights.eikonal = 0.0;

        Checkpoint last_good = state;
        std::vector<std::size_t> order(glyphs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(config.seed, 3, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        EpochLog row;
        row.epoch = epoch;
        row.gamma = gamma;
        try {
            for (std::size_t step = 0; step < order.size(); ++step) {
                std::size_t gi = order[step];
                GlyphData &gd = data[gi];
                refresh(gd, gi, gamma, config);
                Rng subset_rng(derive_seed(config.seed, 4, static_cast<std::uint64_t>(epoch) * glyphs.size() + step));
                ctx.eikonal_indices = ctx.weights.eikonal > 0.0
                                          ? choose_subset(gd.samples.samples.size(), config.eikonal_samples, subset_rng)
                                          : std::vector<int>{};

                const int family = gd.glyph->family;
                std::vector<double> z(state.latents.code(family).begin(), state.latents.code(family).end());
                grads.clear();
                LossTerms terms = evaluate_loss(state.network, z, gd.glyph->label, gd.samples, gd.templates, ctx, &grads);
                adam_step(state.network_adam, state.network.mutable_parameters(), grads.parameters, "network");
                adam_step_latent(state.latents, state.latent_adam[family], family, grads.latent);

                row.loss_total += terms.total;
                row.loss_global += terms.global;
                row.loss_local += terms.local;
                row.loss_grad += terms.grad;
            }
        } catch (const NumericalError &e) {
            last_good.epoch = epoch;
            throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(),
                                   std::move(last_good));
        }
        double inv = 1.0 / static_cast<double>(glyphs.size());
        row.loss_total *= inv;
        row.loss_global *= inv;
        row.loss_local *= inv;
        row.loss_grad *= inv;
        for (int f = 0; f < families; ++f) {
            double s = 0.0;
            for (double v : state.latents.code(f))
                s += v * v;
            row.latent_norm += std::sqrt(s);
        }
        row.latent_norm /= std::max(families, 1);
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        state.epoch = epoch + 1;
        result.log.push_back(row);
        if (options.on_epoch)
            options.on_epoch(row);
    }
    if (config.freeze_epoch >= 0 && state.epoch >= config.freeze_epoch)
        state.latents.frozen = true;
    result.checkpoint = std::move(state);
    return result;
}

std::string format_log_csv(std::span<const EpochLog> log, bool include_timing, bool header) {
    std::string out;
    if (header)
        out += "epoch,gamma,loss_total,loss_global,loss_local,loss_grad,latent_norm,wall_ms\n";
    char buf[512];
    for (const auto &r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.gamma,
                      r.loss_total, r.loss_global, r.loss_local, r.loss_grad, r.latent_norm,
                      include_timing ? r.wall_ms : 0.0);
        out += buf;
    }
    return out;
}

FitResult fit_latent(const Network &net, const LatentTable &table, const Image &target, int label,
                     const Image *ignore, const FitConfig &config) {
    const auto &shape = net.shape();
    if (label < 0 || label >= shape.labels)
        throw ConfigError("fit_latent: label " + std::to_string(label) + " is outside the alphabet");
    if (ignore && (ignore->width != target.width || ignore->height != target.height))
        throw ConfigError("fit_latent: mask dimensions do not match the target");

    SampleSet samples;
    for (int i = 0; i < target.height; ++i)
        for (int j = 0; j < target.width; ++j) {
            if (ignore && ignore->at(i, j) >= 0.5)
                continue;
            FieldSample s;
            s.position = {pixel_center(j, target.width), pixel_center(i, target.height)};
            s.target = std::clamp(target.at(i, j), 0.0, 1.0);
            samples.samples.push_back(s);
        }
    samples.edge_count = static_cast<int>(samples.samples.size());

    LossContext ctx;
    ctx.gamma = aa_range(config.aa_k, target.width);
    ctx.composer = TrainComposer::MedianPair;
    ctx.supervision = config.supervision;
    ctx.weights = {0.0, 0.0, config.latent_weight};

    FitResult result;
    result.latent = table.mean();
    AdamState adam(result.latent.size(), config.lr);
    Gradients grads;
    grads.latent.assign(result.latent.size(), 0.0);
    for (int step = 0; step < config.steps; ++step) {
        std::fill(grads.latent.begin(), grads.latent.end(), 0.0);
        LossTerms terms = evaluate_loss(net, result.latent, label, samples, {}, ctx, &grads);
        result.loss.push_back(terms.total);
        adam_step(adam, result.latent, grads.latent, "latent");
    }
    return result;
}

} // namespace mig
