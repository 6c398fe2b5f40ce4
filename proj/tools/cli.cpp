#include "cli.hpp"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mig/checkpoint.hpp"
#include "mig/config.hpp"
#include "mig/error.hpp"
#include "mig/geometry.hpp"
#include "mig/glyph.hpp"
#include "mig/grid_io.hpp"
#include "mig/render.hpp"
#include "mig/rng.hpp"
#include "mig/sampling.hpp"
#include "mig/templates.hpp"
#include "mig/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mig::cli {

namespace {

struct Common {
    std::string config;
    std::string output_dir;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config, "Run configuration (JSON); defaults to $MIG_CONFIG");
    cmd->add_option("--output-dir", c.output_dir, "Overrides paths.output_dir");
    cmd->add_option("--threads", c.threads, "Worker threads; 1 forces the bit-reproducible mode")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "Overrides train.seed");
}

RunConfig resolve_config(const Common &c, const std::string &embedded = {}) {
    RunConfig cfg;
    if (!c.config.empty())
        cfg = load_run_config(c.config);
    else if (auto env = default_config_path())
        cfg = load_run_config(*env);
    else if (!embedded.empty())
        cfg = parse_run_config(embedded, "checkpoint configuration");
    if (!c.output_dir.empty())
        cfg.output_dir = c.output_dir;
    if (c.seed)
        cfg.train.seed = *c.seed;
    return cfg;
}

void write_text(const fs::path &path, const std::string &text) {
    write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct Dataset {
    Manifest manifest;
    Alphabet alphabet;
    std::vector<TrainingGlyph> glyphs;
};

Dataset load_dataset(const RunConfig &cfg) {
    if (cfg.manifest.empty())
        throw ConfigError("dataset.manifest is not set");
    Dataset d;
    d.alphabet = cfg.make_alphabet();
    d.manifest = load_manifest(cfg.manifest, d.alphabet);
    for (const auto &e : d.manifest.entries) {
        TrainingGlyph g;
        try {
            g.contours = normalize(load_glyph_file(e.file));
        } catch (const DegenerateInputError &ex) {
            throw DegenerateInputError(e.file.string() + " (" + e.family + "/" + d.alphabet.symbol(e.label) +
                                       "): " + ex.what());
        }
        g.label = e.label;
        g.family = e.family_index;
        d.glyphs.push_back(std::move(g));
    }
    return d;
}

std::string glyph_dir(const std::string &family, int label) {
    return family + "/" + std::to_string(label);
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

json template_json(const CornerTemplate &t) {
    return {{"position", vec_json(t.corner.position)},
            {"tangent_in", vec_json(t.corner.tangent_in)},
            {"tangent_out", vec_json(t.corner.tangent_out)},
            {"interior_angle", t.corner.interior_angle},
            {"convex", t.corner.convex},
            {"contour", t.corner.contour},
            {"segment", t.corner.segment},
            {"size", t.size},
            {"spacing", t.spacing},
            {"gamma", t.gamma},
            {"normals", json::array({vec_json(t.normals[0]), vec_json(t.normals[1])})},
            {"points", t.points.size()},
            {"clipped", t.clipped}};
}

int cmd_prepare(const Common &common, std::ostream &out) {
    RunConfig cfg = resolve_config(common);
    Dataset data = load_dataset(cfg);
    const TrainConfig &t = cfg.train;
    const int width = t.train_width;
    const double gamma = t.gamma_end();
    fs::path root = cfg.output_dir / "prepared";
    fs::path index_path = root / "index.json";
    json index = json::object();
    if (fs::exists(index_path)) {
        auto bytes = read_file_bytes(index_path);
        index = json::parse(bytes.begin(), bytes.end(), nullptr, false);
        if (index.is_discarded() || !index.is_object())
            index = json::object();
    }
    std::ostringstream params;
    params << width << '|' << t.aa_k << '|' << t.corner_threshold << '|' << t.homogeneous_ratio << '|'
           << t.min_homogeneous << '|' << t.seed;

    int rebuilt = 0;
    for (std::size_t i = 0; i < data.glyphs.size(); ++i) {
        const auto &entry = data.manifest.entries[i];
        const auto &glyph = data.glyphs[i];
        auto bytes = read_file_bytes(entry.file);
        std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
        h = fnv1a(params.str() + "|" + std::to_string(i), h);
        std::string key = glyph_dir(entry.family, entry.label);
        fs::path dir = root / key;
        if (index.contains(key) && index[key] == hex(h) && fs::exists(dir / "samples.json"))
            continue;

        std::vector<CornerTemplate> templates;
        try {
            for (const auto &c : detect_corners(glyph.contours, t.corner_threshold))
                templates.push_back(build_template(c, width, gamma));
        } catch (const Error &ex) {
            throw DegenerateInputError(entry.file.string() + " (" + key + "): " + ex.what());
        }
        Image sdf = sdf_grid(glyph.contours, width, common.threads);
        Image raster = apply_kernel(sdf, gamma);
        SamplingConfig sc;
        sc.gamma = gamma;
        sc.homogeneous_ratio = t.homogeneous_ratio;
        sc.min_homogeneous = t.min_homogeneous;
        sc.seed = derive_seed(t.seed, i, std::bit_cast<std::uint64_t>(gamma));
        SampleSet samples = sample_glyph(glyph.contours, raster, templates, sc);

        write_pgm(dir / "raster.pgm", raster);
        write_grid(dir / "sdf.migf", FloatGrid::from_images({sdf}));
        json tj = json::array();
        for (const auto &tm : templates)
            tj.push_back(template_json(tm));
        write_text(dir / "templates.json", tj.dump(2));
        json sj = {{"seed", samples.seed},
                   {"gamma", gamma},
                   {"edge", samples.edge_count},
                   {"corner", samples.corner_count},
                   {"homogeneous", samples.homogeneous_count},
                   {"total", samples.samples.size()}};
        write_text(dir / "samples.json", sj.dump(2));
        index[key] = hex(h);
        ++rebuilt;
    }
    write_text(index_path, index.dump(2));
    write_text(cfg.output_dir / "config.json", to_json(cfg));
    out << data.glyphs.size() << " glyphs, " << rebuilt << " rebuilt\n";
    return kOk;
}

int cmd_train(const Common &common, const std::string &resume, const std::string &mode, int epochs,
              std::ostream &out, std::ostream &err) {
    RunConfig cfg = resolve_config(common);
    if (mode == "n1") {
        cfg.train.channels = 1;
        cfg.train.supervision = Supervision::Sdf;
    } else if (mode == "n3") {
        cfg.train.channels = 3;
        cfg.train.supervision = Supervision::Sdf;
    } else if (mode == "pixel") {
        cfg.train.channels = 3;
        cfg.train.supervision = Supervision::Pixel;
    } else if (!mode.empty()) {
        throw ConfigError("--mode must be n1, n3 or pixel");
    }
    if (epochs >= 0)
        cfg.train.epochs = epochs;
    Dataset data = load_dataset(cfg);

    TrainOptions options;
    options.families = data.manifest.families;
    options.alphabet = data.alphabet;
    options.config_json = to_json(cfg);
    if (!resume.empty())
        options.resume = load_checkpoint(resume, cfg.train.network_shape(static_cast<int>(data.alphabet.size())));

    const bool timing = common.threads != 1;
    fs::path log_path = cfg.output_dir / "train_log.csv";
    fs::path ckpt_path = cfg.output_dir / "checkpoint.migc";
    write_text(cfg.output_dir / "config.json", options.config_json);

    auto write_log = [&](const std::vector<EpochLog> &rows) {
        std::string text;
        if (!resume.empty() && fs::exists(log_path)) {
            auto old = read_file_bytes(log_path);
            text.assign(old.begin(), old.end());
            text += format_log_csv(rows, timing, false);
        } else {
            json compact = json::parse(options.config_json);
            text = "# config " + compact.dump() + "\n" + format_log_csv(rows, timing, true);
        }
        write_text(log_path, text);
    };

    std::vector<EpochLog> rows;
    options.on_epoch = [&](const EpochLog &row) { rows.push_back(row); };
    try {
        TrainResult result = train(data.glyphs, cfg.train, options);
        save_checkpoint(ckpt_path, result.checkpoint);
        write_log(result.log);
        const EpochLog *last = result.log.empty() ? nullptr : &result.log.back();
        out << "trained " << data.glyphs.size() << " glyphs to epoch " << result.checkpoint.epoch;
        if (last)
            out << ", loss " << last->loss_total;
        out << "\ncheckpoint: " << ckpt_path.string() << "\n";
        return kOk;
    } catch (const TrainingDiverged &e) {
        fs::path good = cfg.output_dir / "checkpoint.last_good.migc";
        save_checkpoint(good, e.last_good());
        write_log(rows);
        err << "error: " << e.what() << "\nlast finite state saved to " << good.string() << "\n";
        return kNumerical;
    }
}

struct Model {
    Checkpoint ckpt;
    RunConfig cfg;
    Alphabet alphabet;
};

Model load_model(const Common &common, const std::string &path) {
    if (path.empty())
        throw ConfigError("--checkpoint is required");
    Model m;
    m.ckpt = load_checkpoint(path);
    RunConfig embedded = m.ckpt.config_json.empty() ? RunConfig{}
                                                    : parse_run_config(m.ckpt.config_json, "checkpoint configuration");
    m.cfg = resolve_config(common, m.ckpt.config_json);
    // Field parameters always come from the trained model.
    m.cfg.train = embedded.train;
    if (!common.config.empty() || default_config_path()) {
        RunConfig given = resolve_config(common);
        m.cfg.output_dir = given.output_dir;
        m.cfg.manifest = given.manifest;
        m.cfg.resolutions = given.resolutions;
    }
    m.alphabet = Alphabet::from_string(m.ckpt.alphabet);
    return m;
}

int family_index(const Model &m, const std::string &name) {
    auto it = std::find(m.ckpt.families.begin(), m.ckpt.families.end(), name);
    if (it == m.ckpt.families.end())
        throw ConfigError("unknown family '" + name + "'");
    return static_cast<int>(it - m.ckpt.families.begin());
}

int label_index(const Model &m, const std::string &symbol) {
    auto idx = m.alphabet.index_of(symbol);
    if (!idx)
        throw ConfigError("unknown label '" + symbol + "'");
    return *idx;
}

RenderOptions render_options(const Model &m, int threads, bool keep_channels) {
    RenderOptions o;
    o.aa_k = m.cfg.train.aa_k;
    o.supervision = m.cfg.train.supervision;
    o.threads = threads;
    o.keep_channels = keep_channels;
    return o;
}

Render render_with(const Model &m, std::span<const double> z, int label, int res, const std::string &method,
                   const RenderOptions &o) {
    if (method == "implicit")
        return render_implicit(m.ckpt.network, z, label, res, o);
    if (method == "bilateral") {
        RenderOptions grid_opts = o;
        grid_opts.keep_channels = true;
        Render base = render_implicit(m.ckpt.network, z, label, m.cfg.train.train_width, grid_opts);
        return render_bilateral(base.channels, res, o);
    }
    throw ConfigError("--method must be implicit or bilateral");
}

int cmd_render(const Common &common, const std::string &ckpt, const std::string &family, const std::string &label,
               std::vector<int> res, const std::string &method, bool channels, std::ostream &out) {
    Model m = load_model(common, ckpt);
    int f = family_index(m, family);
    int l = label_index(m, label);
    if (res.empty())
        res = m.cfg.resolutions;
    fs::path dir = m.cfg.output_dir / "render" / (family + "_" + std::to_string(l));
    RenderOptions o = render_options(m, common.threads, channels);
    for (int w : res) {
        if (w < 8)
            throw ConfigError("--res values must be at least 8");
        Render r = render_with(m, m.ckpt.latents.code(f), l, w, method, o);
        std::string stem = method + "_" + std::to_string(w);
        write_pgm(dir / (stem + ".pgm"), r.image);
        write_text(dir / (stem + "_contours.json"), contours_to_json(extract_zero_level(r.median)));
        if (channels) {
            write_grid(dir / (stem + "_channels.migf"), r.channels);
            double gamma = aa_range(o.aa_k, w);
            for (int c = 0; c < r.channels.channels; ++c) {
                Image ch = r.channels.channel(c);
                Image shown = o.supervision == Supervision::Pixel ? ch : apply_kernel(ch, gamma);
                write_pgm(dir / (stem + "_ch" + std::to_string(c) + ".pgm"), shown);
            }
        }
        out << (dir / (stem + ".pgm")).string() << "\n";
    }
    return kOk;
}

int cmd_interpolate(const Common &common, const std::string &ckpt, const std::string &fa, const std::string &fb,
                    const std::string &label, int steps, int res, std::ostream &out) {
    if (steps < 2)
        throw ConfigError("--steps must be at least 2");
    if (res < 8)
        throw ConfigError("--res must be at least 8");
    Model m = load_model(common, ckpt);
    int a = family_index(m, fa), b = family_index(m, fb), l = label_index(m, label);
    auto za = m.ckpt.latents.code(a), zb = m.ckpt.latents.code(b);
    fs::path dir = m.cfg.output_dir / "interpolate" / (fa + "_" + fb + "_" + std::to_string(l));
    std::vector<double> z(za.size());
    for (int k = 0; k < steps; ++k) {
        double t = static_cast<double>(k) / (steps - 1);
        for (std::size_t i = 0; i < z.size(); ++i)
            z[i] = (1.0 - t) * za[i] + t * zb[i];
        Render r = render_implicit(m.ckpt.network, z, l, res, render_options(m, common.threads, false));
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d.pgm", k);
        write_pgm(dir / name, r.image);
        out << (dir / name).string() << "\n";
    }
    return kOk;
}

int cmd_fit(const Common &common, const std::string &ckpt, const std::string &target, const std::string &label,
            const std::string &mask, int steps, int res, std::ostream &out) {
    Model m = load_model(common, ckpt);
    int l = label_index(m, label);
    Image img = read_pgm(target);
    std::optional<Image> ignore;
    if (!mask.empty()) {
        ignore = read_pgm(mask);
        if (ignore->width != img.width || ignore->height != img.height)
            throw ConfigError("mask " + mask + " is " + std::to_string(ignore->width) + "x" +
                              std::to_string(ignore->height) + " but the target is " + std::to_string(img.width) +
                              "x" + std::to_string(img.height));
    }
    FitConfig fc;
    fc.steps = steps;
    fc.aa_k = m.cfg.train.aa_k;
    fc.supervision = m.cfg.train.supervision;
    fc.latent_weight = m.cfg.train.weights.latent;
    FitResult fit = fit_latent(m.ckpt.network, m.ckpt.latents, img, l, ignore ? &*ignore : nullptr, fc);

    fs::path dir = m.cfg.output_dir / "fit";
    json lj = {{"label", label}, {"latent", fit.latent}, {"final_loss", fit.loss.empty() ? 0.0 : fit.loss.back()}};
    write_text(dir / "latent.json", lj.dump(2));
    RenderOptions o = render_options(m, common.threads, false);
    if (img.width == img.height) {
        Render self = render_implicit(m.ckpt.network, fit.latent, l, img.width, o);
        Image keep(img.width, img.height, 1.0);
        if (ignore)
            for (std::size_t k = 0; k < keep.values.size(); ++k)
                keep.values[k] = ignore->values[k] >= 0.5 ? 0.0 : 1.0;
        out << "fit s-IoU (unmasked): " << masked_metrics(self.image, img, keep).siou << "\n";
    }
    for (std::size_t k = 0; k < m.alphabet.size(); ++k) {
        Render r = render_implicit(m.ckpt.network, fit.latent, static_cast<int>(k), res, o);
        write_pgm(dir / (std::to_string(k) + ".pgm"), r.image);
    }
    out << "wrote " << m.alphabet.size() << " completed glyphs to " << dir.string() << "\n";
    return kOk;
}

int cmd_eval(const Common &common, const std::string &ckpt, std::vector<int> res, std::ostream &out) {
    Model m = load_model(common, ckpt);
    if (m.cfg.manifest.empty())
        throw ConfigError("eval needs dataset.manifest (pass --config)");
    if (res.empty())
        res = m.cfg.resolutions;
    Alphabet alphabet = m.alphabet;
    Manifest manifest = load_manifest(m.cfg.manifest, alphabet);
    const TrainConfig &t = m.cfg.train;
    RenderOptions o = render_options(m, common.threads, false);

    struct Acc {
        double mse = 0, siou = 0, c_mse = 0, c_siou = 0, lap = 0;
        int n = 0, corners = 0;
    };
    std::string table = "method,res,mse,siou,c_mse,c_siou,laplacian\n";
    for (const std::string method : {"implicit", "bilateral"}) {
        for (int w : res) {
            Acc acc;
            for (const auto &e : manifest.entries) {
                int f = family_index(m, e.family);
                auto contours = normalize(load_glyph_file(e.file));
                std::vector<CornerTemplate> templates;
                for (const auto &c : detect_corners(contours, t.corner_threshold))
                    templates.push_back(build_template(c, t.train_width, t.gamma_end()));
                Image truth = rasterize_ground_truth(contours, w, aa_range(t.aa_k, w), common.threads);
                Render r = render_with(m, m.ckpt.latents.code(f), e.label, w, method, o);
                acc.mse += mse(r.image, truth);
                acc.siou += soft_iou(r.image, truth);
                acc.lap += laplacian_smoothness(r.median);
                RegionMetrics cm = corner_region_metrics(r.image, truth, templates);
                if (cm.has_corners) {
                    acc.c_mse += cm.mse;
                    acc.c_siou += cm.siou;
                    ++acc.corners;
                }
                ++acc.n;
            }
            char row[256];
            if (acc.n == 0)
                continue;
            if (acc.corners > 0)
                std::snprintf(row, sizeof(row), "%s,%d,%.8g,%.8g,%.8g,%.8g,%.8g\n", method.c_str(), w, acc.mse / acc.n,
                              acc.siou / acc.n, acc.c_mse / acc.corners, acc.c_siou / acc.corners, acc.lap / acc.n);
            else
                std::snprintf(row, sizeof(row), "%s,%d,%.8g,%.8g,none,none,%.8g\n", method.c_str(), w,
                              acc.mse / acc.n, acc.siou / acc.n, acc.lap / acc.n);
            table += row;
        }
    }
    write_text(m.cfg.output_dir / "eval.csv", table);
    out << table;
    return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Multi-implicit neural glyph fields", "mig"};
    app.require_subcommand(1);
    Common common;

    auto *prepare = app.add_subcommand("prepare", "Rasterize, detect corners and sample every glyph");
    add_common(prepare, common);

    std::string resume, mode;
    int epochs = -1;
    auto *train_cmd = app.add_subcommand("train", "Train the auto-decoder");
    add_common(train_cmd, common);
    train_cmd->add_option("--resume", resume, "Continue from this checkpoint");
    train_cmd->add_option("--mode", mode, "n1 | n3 | pixel");
    train_cmd->add_option("--epochs", epochs, "Overrides train.epochs");

    std::string ckpt, family, label, method = "implicit";
    std::vector<int> res;
    bool channels = false;
    auto *render_cmd = app.add_subcommand("render", "Render one glyph at several resolutions");
    add_common(render_cmd, common);
    render_cmd->add_option("--checkpoint", ckpt)->required();
    render_cmd->add_option("--family", family)->required();
    render_cmd->add_option("--label", label)->required();
    render_cmd->add_option("--res", res, "Output widths (comma separated)")->delimiter(',');
    render_cmd->add_option("--method", method, "implicit | bilateral");
    render_cmd->add_flag("--channels", channels, "Also write per-channel images and grids");

    std::string fa, fb;
    int steps = 5, single_res = 128;
    auto *interp = app.add_subcommand("interpolate", "Render a latent interpolation between two families");
    add_common(interp, common);
    interp->add_option("--checkpoint", ckpt)->required();
    interp->add_option("--family-a", fa)->required();
    interp->add_option("--family-b", fb)->required();
    interp->add_option("--label", label)->required();
    interp->add_option("--steps", steps, "Number of frames (>= 2)");
    interp->add_option("--res", single_res, "Frame width");

    std::string target, mask;
    int fit_steps = 500;
    auto *fit = app.add_subcommand("fit", "Fit a latent code to an image and render every label with it");
    add_common(fit, common);
    fit->add_option("--checkpoint", ckpt)->required();
    fit->add_option("--target", target, "PGM image")->required();
    fit->add_option("--label", label)->required();
    fit->add_option("--mask", mask, "PGM; pixels >= 0.5 are ignored");
    fit->add_option("--steps", fit_steps);
    fit->add_option("--res", single_res, "Width of the completed renders");

    auto *eval = app.add_subcommand("eval", "MSE and s-IoU per resolution against analytic rasters");
    add_common(eval, common);
    eval->add_option("--checkpoint", ckpt)->required();
    eval->add_option("--res", res, "Widths (comma separated)")->delimiter(',');

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*prepare)
            return cmd_prepare(common, out);
        if (*train_cmd)
            return cmd_train(common, resume, mode, epochs, out, err);
        if (*render_cmd)
            return cmd_render(common, ckpt, family, label, res, method, channels, out);
        if (*interp)
            return cmd_interpolate(common, ckpt, fa, fb, label, steps, single_res, out);
        if (*fit)
            return cmd_fit(common, ckpt, target, label, mask, fit_steps, single_res, out);
        if (*eval)
            return cmd_eval(common, ckpt, res, out);
    } catch (const NumericalError &e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const IoError &e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error &e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

} // namespace mig::cli
