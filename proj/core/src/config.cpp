#include "mig/config.hpp"

#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

#include "mig/error.hpp"
#include "mig/grid_io.hpp"

namespace mig {

using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json &node, std::string path, const std::string &what) : node_(node), path_(std::move(path)), what_(what) {
        if (!node_.is_object())
            fail(path_, "must be an object");
    }

    // Rejects keys that no get() call asked for.
    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions())
            return;
        for (const auto &[key, _] : node_.items())
            if (!known_.count(key))
                fail(join(key), "unknown key");
    }

    template <typename T>
    void get(const char *key, T &out) {
        known_.insert(key);
        auto it = node_.find(key);
        if (it == node_.end())
            return;
        try {
            out = it->template get<T>();
        } catch (const json::exception &) {
            fail(join(key), "has the wrong type");
        }
    }

    const json *section(const char *key) {
        known_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    std::string join(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void fail(const std::string &key, const std::string &msg) const {
        throw ConfigError(what_ + ": " + (key.empty() ? "document" : key) + " " + msg);
    }

private:
    const json &node_;
    std::string path_;
    const std::string &what_;
    std::set<std::string> known_;
};

} // namespace

Alphabet RunConfig::make_alphabet() const {
    return alphabet.empty() ? Alphabet::latin52() : Alphabet::from_string(alphabet);
}

RunConfig parse_run_config(const std::string &text, const std::string &what, const std::filesystem::path &base) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(what + ": invalid JSON: " + e.what());
    }
    RunConfig c;
    TrainConfig &t = c.train;
    std::string manifest, output_dir = c.output_dir.string();
    {
        Reader root(doc, "", what);
        if (const json *s = root.section("dataset")) {
            Reader r(*s, "dataset", what);
            r.get("manifest", manifest);
            r.get("alphabet", c.alphabet);
        }
        if (const json *s = root.section("field")) {
            Reader r(*s, "field", what);
            r.get("n", t.channels);
            r.get("aa_k", t.aa_k);
            r.get("train_width", t.train_width);
        }
        if (const json *s = root.section("train")) {
            Reader r(*s, "train", what);
            r.get("epochs", t.epochs);
            r.get("freeze_epoch", t.freeze_epoch);
            r.get("seed", t.seed);
            r.get("lr", t.lr);
            if (const json *w = r.section("weights")) {
                Reader rw(*w, "train.weights", what);
                rw.get("corner", t.weights.corner);
                rw.get("eikonal", t.weights.eikonal);
                rw.get("latent", t.weights.latent);
            }
            r.get("warmup", t.warmup);
            r.get("warmup_gamma_start", t.warmup_gamma_start);
            r.get("anneal_epochs", t.anneal_epochs);
            std::string sup = t.supervision == Supervision::Pixel ? "pixel" : "sdf";
            r.get("supervision", sup);
            if (sup == "sdf")
                t.supervision = Supervision::Sdf;
            else if (sup == "pixel")
                t.supervision = Supervision::Pixel;
            else
                r.fail("train.supervision", "must be \"sdf\" or \"pixel\"");
            r.get("homogeneous_ratio", t.homogeneous_ratio);
            r.get("min_homogeneous", t.min_homogeneous);
            r.get("eikonal_samples", t.eikonal_samples);
            r.get("corner_threshold", t.corner_threshold);
            r.get("latent_init_stddev", t.latent_init_stddev);
            r.get("hidden_width", t.hidden_width);
            r.get("hidden_layers", t.hidden_layers);
            r.get("skip_layer", t.skip_layer);
            r.get("latent_dim", t.latent_dim);
        }
        if (const json *s = root.section("eval")) {
            Reader r(*s, "eval", what);
            r.get("resolutions", c.resolutions);
        }
        if (const json *s = root.section("paths")) {
            Reader r(*s, "paths", what);
            r.get("output_dir", output_dir);
        }
    }
    if (t.channels != 1 && t.channels != 3)
        throw ConfigError(what + ": field.n must be 1 or 3");
    if (t.aa_k <= 0.0)
        throw ConfigError(what + ": field.aa_k must be positive");
    if (t.train_width < 8)
        throw ConfigError(what + ": field.train_width must be at least 8");
    if (t.epochs < 0)
        throw ConfigError(what + ": train.epochs must be non-negative");
    if (t.lr <= 0.0)
        throw ConfigError(what + ": train.lr must be positive");
    if (t.homogeneous_ratio < 0.0)
        throw ConfigError(what + ": train.homogeneous_ratio must be non-negative");
    if (t.warmup_gamma_start <= 0.0)
        throw ConfigError(what + ": train.warmup_gamma_start must be positive");
    for (int r : c.resolutions)
        if (r < 8)
            throw ConfigError(what + ": eval.resolutions entries must be at least 8");
    try {
        t.network_shape(1).validate();
    } catch (const ContractViolation &e) {
        throw ConfigError(what + ": " + e.what());
    }
    if (!manifest.empty()) {
        c.manifest = manifest;
        if (c.manifest.is_relative() && !base.empty())
            c.manifest = base / c.manifest;
    }
    c.output_dir = output_dir;
    return c;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    auto bytes = read_file_bytes(path);
    return parse_run_config(std::string(bytes.begin(), bytes.end()), path.string(), path.parent_path());
}

std::string to_json(const RunConfig &c) {
    const TrainConfig &t = c.train;
    json doc = json::object();
    doc["dataset"] = {{"manifest", c.manifest.string()}, {"alphabet", c.alphabet}};
    doc["field"] = {{"n", t.channels}, {"aa_k", t.aa_k}, {"train_width", t.train_width}};
    doc["train"] = {{"epochs", t.epochs},
                    {"freeze_epoch", t.freeze_epoch},
                    {"seed", t.seed},
                    {"lr", t.lr},
                    {"weights", {{"corner", t.weights.corner}, {"eikonal", t.weights.eikonal}, {"latent", t.weights.latent}}},
                    {"warmup", t.warmup},
                    {"warmup_gamma_start", t.warmup_gamma_start},
                    {"anneal_epochs", t.anneal_epochs},
                    {"supervision", t.supervision == Supervision::Pixel ? "pixel" : "sdf"},
                    {"homogeneous_ratio", t.homogeneous_ratio},
                    {"min_homogeneous", t.min_homogeneous},
                    {"eikonal_samples", t.eikonal_samples},
                    {"corner_threshold", t.corner_threshold},
                    {"latent_init_stddev", t.latent_init_stddev},
                    {"hidden_width", t.hidden_width},
                    {"hidden_layers", t.hidden_layers},
                    {"skip_layer", t.skip_layer},
                    {"latent_dim", t.latent_dim}};
    doc["eval"] = {{"resolutions", c.resolutions}};
    doc["paths"] = {{"output_dir", c.output_dir.string()}};
    return doc.dump(2);
}

std::optional<std::filesystem::path> default_config_path() {
    const char *env = std::getenv(kConfigEnv);
    if (!env || !*env)
        return std::nullopt;
    return std::filesystem::path(env);
}

} // namespace mig
