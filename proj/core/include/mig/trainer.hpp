#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mig/checkpoint.hpp"
#include "mig/error.hpp"
#include "mig/field.hpp"
#include "mig/glyph.hpp"
#include "mig/network.hpp"
#include "mig/sampling.hpp"
#include "mig/templates.hpp"

namespace mig {

/// Weights of the corner, Eikonal and latent-norm terms relative to the global loss.
struct LossWeights {
    double corner = 1.0;
    double eikonal = 0.01;
    double latent = 1e-4;
};

/// `Sdf`: channels are distances passed through the kernel. `Pixel`: channels are opacities.
enum class Supervision { Sdf, Pixel };

/// Anti-alias range annealing: log-linear from gamma_start to gamma_end over anneal_epochs,
/// with the mean composer while annealing and the median-pair composer afterwards.
struct WarmupSchedule {
    bool enabled = true;
    double gamma_start = 1.0;
    double gamma_end = 4.0 / 64.0;
    int anneal_epochs = 1000;

    double gamma(int epoch) const;
    TrainComposer composer(int epoch) const;
};

struct TrainConfig {
    int channels = 3;
    double aa_k = 4.0;
    int train_width = 64;
    int epochs = 2000;
    int freeze_epoch = -1;  // latent table frozen from this epoch on; negative disables
    std::uint64_t seed = 0;
    double lr = 1e-3;
    LossWeights weights;
    bool warmup = true;
    double warmup_gamma_start = 1.0;
    int anneal_epochs = -1;  // negative: half of `epochs`
    Supervision supervision = Supervision::Sdf;
    double homogeneous_ratio = 0.25;
    int min_homogeneous = 64;
    int eikonal_samples = 512;  // per step, drawn from the glyph's samples
    double corner_threshold = 3.0;
    double latent_init_stddev = 0.01;
    int hidden_width = 384;
    int hidden_layers = 8;
    int skip_layer = 3;
    int latent_dim = 128;

    double gamma_end() const { return aa_k / train_width; }
    WarmupSchedule schedule() const;
    NetworkShape network_shape(int labels) const;
};

/// Per-step loss context shared by all terms.
struct LossContext {
    double gamma = 4.0 / 64.0;
    TrainComposer composer = TrainComposer::MedianPair;
    Supervision supervision = Supervision::Sdf;
    LossWeights weights;
    double eikonal_step = 1.0 / 128.0;  // central-difference step h
    std::vector<int> eikonal_indices;   // samples carrying the Eikonal term
};

struct LossTerms {
    double total = 0.0;
    double global = 0.0;
    double local = 0.0;
    double grad = 0.0;
    double latent_norm = 0.0;  // ||z||_2 (unweighted)
};

/// Mean squared error between composed predictions and targets.
double loss_global(std::span<const double> composed, std::span<const double> targets);

/// One-sided Eikonal penalty: mean of (1 - |g|) over gradients with |g| < 1, zero otherwise.
/// `gradients` holds one spatial gradient per (sample, channel).
double loss_eikonal(std::span<const Vec2> gradients);

/// total = global + a * local + b * grad + c * ||z||. When `grads` is non-null the exact
/// gradient with respect to the network parameters and the latent code is accumulated into it.
/// Throws NumericalError naming the offending term on non-finite values.
LossTerms evaluate_loss(const Network &net, std::span<const double> latent, int label, const SampleSet &samples,
                        std::span<const CornerTemplate> templates, const LossContext &ctx, Gradients *grads);

struct TrainingGlyph {
    std::vector<Contour> contours;  // normalized
    int label = 0;
    int family = 0;
};

struct EpochLog {
    int epoch = 0;
    double gamma = 0.0;
    double loss_total = 0.0;
    double loss_global = 0.0;
    double loss_local = 0.0;
    double loss_grad = 0.0;
    double latent_norm = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
};

/// Raised on NaN/Inf during training; carries the state from the end of the last finite epoch.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string &message, Checkpoint last_good)
        : NumericalError(message), last_good_(std::move(last_good)) {}
    const Checkpoint &last_good() const { return last_good_; }

private:
    Checkpoint last_good_;
};

struct TrainOptions {
    std::vector<std::string> families;
    Alphabet alphabet;
    std::string config_json;             // echoed into the checkpoint
    std::optional<Checkpoint> resume;    // continue from this state
    std::function<void(const EpochLog &)> on_epoch;
};

/// Auto-decoder training over all glyphs: anneal gamma, refresh rasters/templates/samples when it
/// changes, then one ADAM step per glyph in a seeded shuffled order each epoch.
TrainResult train(const std::vector<TrainingGlyph> &glyphs, const TrainConfig &config, const TrainOptions &options);

/// CSV with columns epoch,gamma,loss_total,loss_global,loss_local,loss_grad,latent_norm,wall_ms.
/// Without timing the wall_ms column is written as 0 so reruns are byte-identical.
std::string format_log_csv(std::span<const EpochLog> log, bool include_timing, bool header = true);

struct FitConfig {
    int steps = 500;
    double lr = 1e-2;
    double latent_weight = 1e-4;
    double aa_k = 4.0;
    Supervision supervision = Supervision::Sdf;
};

struct FitResult {
    std::vector<double> latent;
    std::vector<double> loss;  // per step
};

/// Fits a latent code to a target raster with the network frozen. Pixels where `ignore` >= 0.5
/// contribute neither loss nor gradient. The code starts at the latent-table mean.
FitResult fit_latent(const Network &net, const LatentTable &table, const Image &target, int label,
                     const Image *ignore, const FitConfig &config);

} // namespace mig
