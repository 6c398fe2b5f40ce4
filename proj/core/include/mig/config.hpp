#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mig/trainer.hpp"

namespace mig {

/// Environment variable naming the default configuration file.
inline constexpr const char *kConfigEnv = "MIG_CONFIG";

/// Run configuration. JSON layout and defaults:
///
///   {
///     "dataset": {"manifest": "",                 // JSON manifest of {family, label, file}
///                 "alphabet": "A..Za..z"},         // label symbols in label order
///     "field":   {"n": 3, "aa_k": 4, "train_width": 64},
///     "train":   {"epochs": 2000, "freeze_epoch": -1, "seed": 0, "lr": 0.001,
///                 "weights": {"corner": 1, "eikonal": 0.01, "latent": 0.0001},
///                 "warmup": true, "warmup_gamma_start": 1, "anneal_epochs": -1,
///                 "supervision": "sdf",            // or "pixel"
///                 "homogeneous_ratio": 0.25, "min_homogeneous": 64, "eikonal_samples": 512,
///                 "corner_threshold": 3, "latent_init_stddev": 0.01,
///                 "hidden_width": 384, "hidden_layers": 8, "skip_layer": 3, "latent_dim": 128},
///     "eval":    {"resolutions": [128, 256, 512, 1024]},
///     "paths":   {"output_dir": "out"}
///   }
///
/// Every key is optional; unknown keys are rejected.
struct RunConfig {
    std::filesystem::path manifest;
    std::string alphabet;
    TrainConfig train;
    std::vector<int> resolutions{128, 256, 512, 1024};
    std::filesystem::path output_dir = "out";

    Alphabet make_alphabet() const;
};

/// Throws ConfigError naming the offending key. Relative dataset paths resolve against `base`.
RunConfig parse_run_config(const std::string &text, const std::string &what = "config",
                           const std::filesystem::path &base = {});
RunConfig load_run_config(const std::filesystem::path &path);

/// Canonical JSON (every key, fixed order); parse_run_config(to_json(c)) == c.
std::string to_json(const RunConfig &config);

/// $MIG_CONFIG when set and non-empty.
std::optional<std::filesystem::path> default_config_path();

} // namespace mig
