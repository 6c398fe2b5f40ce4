#include "mig/render.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <tuple>
#include <cstdio>
#include <map>

#include "mig/error.hpp"
#include "mig/parallel.hpp"

namespace mig {

namespace {

constexpr std::size_t kChunk = 4096;

double compose_pixel(std::span<const double> channels, double gamma, Supervision mode) {
    double m = compose_median(channels);
    if (mode == Supervision::Pixel)
        return std::clamp(m, 0.0, 1.0);
    return kernel(m, gamma);
}

void check_width(int width) {
    if (width < 1)
        throw ContractViolation("render width must be positive");
}

} // namespace

Render render_implicit(const Network &net, std::span<const double> latent, int label, int width,
                       const RenderOptions &options) {
    check_width(width);
    const int channels = net.shape().outputs;
    const double gamma = aa_range(options.aa_k, width);
    const std::size_t total = static_cast<std::size_t>(width) * width;
    Render r;
    r.image = Image(width, width);
    r.median = Image(width, width);
    if (options.keep_channels)
        r.channels = FloatGrid(channels, width, width);
    const std::size_t chunks = (total + kChunk - 1) / kChunk;
    parallel_for(chunks, options.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<Vec2> pts;
        for (std::size_t c = begin; c < end; ++c) {
            std::size_t lo = c * kChunk, hi = std::min(total, lo + kChunk);
            pts.clear();
            for (std::size_t k = lo; k < hi; ++k) {
                int i = static_cast<int>(k / width), j = static_cast<int>(k % width);
                pts.push_back({pixel_center(j, width), pixel_center(i, width)});
            }
            std::vector<double> out = forward(net, {label, latent}, pts);
            for (std::size_t k = lo; k < hi; ++k) {
                std::span<const double> ch(out.data() + (k - lo) * channels, channels);
                r.median.values[k] = compose_median(ch);
                r.image.values[k] = compose_pixel(ch, gamma, options.supervision);
                if (options.keep_channels)
                    for (int q = 0; q < channels; ++q)
                        r.channels.data[q * total + k] = static_cast<float>(ch[q]);
            }
        }
    });
    return r;
}

Render render_bilateral(const FloatGrid &grid, int width, const RenderOptions &options) {
    check_width(width);
    if (grid.channels < 1 || grid.width < 1 || grid.height < 1)
        throw ContractViolation("render_bilateral: empty grid");
    const int channels = grid.channels;
    const double gamma = aa_range(options.aa_k, width);
    Render r;
    r.image = Image(width, width);
    r.median = Image(width, width);
    if (options.keep_channels)
        r.channels = FloatGrid(channels, width, width);

    // Source coordinate of each output pixel center along one axis, clamped to the node range.
    auto source = [&](int index, int n) {
        double u = (pixel_center(index, width) + 1.0) * 0.5 * n - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(n - 1));
        int i0 = std::min(static_cast<int>(std::floor(u)), n - 1);
        int i1 = std::min(i0 + 1, n - 1);
        return std::tuple<int, int, double>{i0, i1, u - i0};
    };

    parallel_for(static_cast<std::size_t>(width), options.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> ch(channels);
        for (std::size_t row = begin; row < end; ++row) {
            auto [y0, y1, fy] = source(static_cast<int>(row), grid.height);
            for (int col = 0; col < width; ++col) {
                auto [x0, x1, fx] = source(col, grid.width);
                for (int q = 0; q < channels; ++q) {
                    double top = (1.0 - fx) * grid.at(q, y0, x0) + fx * grid.at(q, y0, x1);
                    double bottom = (1.0 - fx) * grid.at(q, y1, x0) + fx * grid.at(q, y1, x1);
                    ch[q] = (1.0 - fy) * top + fy * bottom;
                    if (options.keep_channels)
                        r.channels.at(q, static_cast<int>(row), col) = static_cast<float>(ch[q]);
                }
                r.median.at(static_cast<int>(row), col) = compose_median(ch);
                r.image.at(static_cast<int>(row), col) = compose_pixel(ch, gamma, options.supervision);
            }
        }
    });
    return r;
}

namespace {

void check_same(const Image &a, const Image &b, const char *what) {
    if (a.width != b.width || a.height != b.height || a.values.size() != b.values.size())
        throw ContractViolation(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
}

} // namespace

double mse(const Image &a, const Image &b) {
    check_same(a, b, "mse");
    if (a.values.empty())
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.values.size());
}

double soft_iou(const Image &a, const Image &b) {
    check_same(a, b, "soft_iou");
    double inter = 0.0, uni = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        inter += a.values[i] * b.values[i];
        uni += std::clamp(a.values[i] + b.values[i], 0.0, 1.0);
    }
    if (uni == 0.0)
        return 1.0;
    return inter / uni;
}

Image corner_region_mask(std::span<const CornerTemplate> templates, int width) {
    Image mask(width, width);
    for (const auto &t : templates) {
        double half = 0.5 * t.size * t.spacing;
        Vec2 c = t.corner.position;
        for (int i = 0; i < width; ++i) {
            double y = pixel_center(i, width);
            if (std::abs(y - c.y) > half)
                continue;
            for (int j = 0; j < width; ++j)
                if (std::abs(pixel_center(j, width) - c.x) <= half)
                    mask.at(i, j) = 1.0;
        }
    }
    return mask;
}

RegionMetrics masked_metrics(const Image &a, const Image &b, const Image &mask) {
    check_same(a, b, "masked_metrics");
    check_same(a, mask, "masked_metrics mask");
    RegionMetrics m;
    double sq = 0.0, inter = 0.0, uni = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (mask.values[i] < 0.5)
            continue;
        ++m.pixels;
        double d = a.values[i] - b.values[i];
        sq += d * d;
        inter += a.values[i] * b.values[i];
        uni += std::clamp(a.values[i] + b.values[i], 0.0, 1.0);
    }
    if (m.pixels == 0)
        return m;
    m.has_corners = true;
    m.mse = sq / m.pixels;
    m.siou = uni == 0.0 ? 1.0 : inter / uni;
    return m;
}

RegionMetrics corner_region_metrics(const Image &a, const Image &b, std::span<const CornerTemplate> templates) {
    check_same(a, b, "corner_region_metrics");
    if (a.width != a.height)
        throw ContractViolation("corner_region_metrics: images must be square");
    return masked_metrics(a, b, corner_region_mask(templates, a.width));
}

std::vector<Polyline> extract_zero_level(const Image &grid) {
    const int H = grid.height + 2, W = grid.width + 2;
    std::vector<Polyline> result;
    if (grid.width < 1 || grid.height < 1)
        return result;
    // Padded copy; pad value is negative so the outside ring is always "outside".
    std::vector<double> v(static_cast<std::size_t>(H) * W, -1.0);
    for (int i = 0; i < grid.height; ++i)
        for (int j = 0; j < grid.width; ++j) {
            double g = grid.at(i, j);
            if (!std::isfinite(g))
                throw ContractViolation("extract_zero_level: grid contains a non-finite value");
            v[static_cast<std::size_t>(i + 1) * W + (j + 1)] = g;
        }
    // A grid without a sign change has no zero level; padding alone would draw its frame.
    bool any_in = false, any_out = false;
    for (double g : grid.values)
        (g > 0.0 ? any_in : any_out) = true;
    if (!any_in || !any_out)
        return result;
    auto val = [&](int i, int j) { return v[static_cast<std::size_t>(i) * W + j]; };
    auto in = [&](int i, int j) { return val(i, j) > 0.0; };
    auto coord = [&](int i, int j) {
        return Vec2{pixel_center(j - 1, grid.width), pixel_center(i - 1, grid.height)};
    };
    // Edge id: horizontal (i,j)-(i,j+1) -> 2k, vertical (i,j)-(i+1,j) -> 2k+1 with k = i*W + j.
    auto edge_point = [&](std::size_t id) {
        std::size_t k = id / 2;
        int i = static_cast<int>(k / W), j = static_cast<int>(k % W);
        int i2 = (id % 2) ? i + 1 : i, j2 = (id % 2) ? j : j + 1;
        double a = val(i, j), b = val(i2, j2);
        double t = a / (a - b);
        Vec2 p = coord(i, j), q = coord(i2, j2);
        return p + (q - p) * t;
    };

    std::map<std::size_t, std::vector<std::size_t>> adj;
    auto link = [&](std::size_t a, std::size_t b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    for (int i = 0; i + 1 < H; ++i)
        for (int j = 0; j + 1 < W; ++j) {
            bool a = in(i, j), b = in(i, j + 1), c = in(i + 1, j + 1), d = in(i + 1, j);
            std::size_t e0 = 2 * (static_cast<std::size_t>(i) * W + j);
            std::size_t e1 = 2 * (static_cast<std::size_t>(i) * W + j + 1) + 1;
            std::size_t e2 = 2 * (static_cast<std::size_t>(i + 1) * W + j);
            std::size_t e3 = 2 * (static_cast<std::size_t>(i) * W + j) + 1;
            std::vector<std::size_t> cut;
            if (a != b)
                cut.push_back(e0);
            if (b != c)
                cut.push_back(e1);
            if (c != d)
                cut.push_back(e2);
            if (d != a)
                cut.push_back(e3);
            if (cut.size() == 2) {
                link(cut[0], cut[1]);
            } else if (cut.size() == 4) {
                bool center = 0.25 * (val(i, j) + val(i, j + 1) + val(i + 1, j + 1) + val(i + 1, j)) > 0.0;
                if (a != center) {
                    // a and c are isolated from the center.
                    link(e3, e0);
                    link(e1, e2);
                } else {
                    link(e0, e1);
                    link(e2, e3);
                }
            }
        }

    std::map<std::size_t, bool> seen;
    for (const auto &[start, _] : adj) {
        if (seen[start])
            continue;
        Polyline line;
        std::size_t prev = static_cast<std::size_t>(-1), cur = start;
        while (!seen[cur]) {
            seen[cur] = true;
            line.push_back(edge_point(cur));
            const auto &nb = adj.at(cur);
            std::size_t next = nb[0] != prev ? nb[0] : nb[1];
            prev = cur;
            cur = next;
        }
        result.push_back(std::move(line));
    }
    return result;
}

std::string contours_to_json(const std::vector<Polyline> &contours) {
    std::string out = "[";
    char buf[64];
    for (std::size_t c = 0; c < contours.size(); ++c) {
        out += c ? ",[" : "[";
        for (std::size_t k = 0; k < contours[c].size(); ++k) {
            if (k)
                out += ',';
            out += '[';
            auto r = std::to_chars(buf, buf + sizeof(buf), contours[c][k].x);
            out.append(buf, r.ptr);
            out += ',';
            r = std::to_chars(buf, buf + sizeof(buf), contours[c][k].y);
            out.append(buf, r.ptr);
            out += ']';
        }
        out += ']';
    }
    out += "]";
    return out;
}

double laplacian_smoothness(const Image &grid) {
    if (grid.width < 3 || grid.height < 3)
        return 0.0;
    double h = 2.0 / grid.width;
    double sum = 0.0;
    int count = 0;
    for (int i = 1; i + 1 < grid.height; ++i)
        for (int j = 1; j + 1 < grid.width; ++j) {
            double lap = grid.at(i - 1, j) + grid.at(i + 1, j) + grid.at(i, j - 1) + grid.at(i, j + 1) -
                         4.0 * grid.at(i, j);
            sum += std::abs(lap) / (h * h);
            ++count;
        }
    return sum / count;
}

std::vector<unsigned char> encode_pgm(const Image &image) {
    std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(out.size() + image.values.size());
    for (double v : image.values)
        out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return out;
}

Image decode_pgm(const std::vector<unsigned char> &bytes, const std::string &what) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&] {
        skip_space();
        int v = 0;
        auto r = std::from_chars(reinterpret_cast<const char *>(bytes.data()) + pos,
                                 reinterpret_cast<const char *>(bytes.data()) + bytes.size(), v);
        if (r.ec != std::errc())
            throw IoError(what + ": malformed PGM header");
        pos = r.ptr - reinterpret_cast<const char *>(bytes.data());
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw IoError(what + ": not a binary PGM (P5) file");
    pos = 2;
    int w = number(), h = number(), maxval = number();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw IoError(what + ": unsupported PGM dimensions or maxval");
    ++pos;  // single whitespace before the raster
    if (bytes.size() - std::min(pos, bytes.size()) != static_cast<std::size_t>(w) * h)
        throw IoError(what + ": PGM payload size does not match its header");
    Image img(w, h);
    for (std::size_t k = 0; k < img.values.size(); ++k)
        img.values[k] = bytes[pos + k] / static_cast<double>(maxval);
    return img;
}

void write_pgm(const std::filesystem::path &path, const Image &image) {
    write_file_bytes(path, encode_pgm(image));
}

Image read_pgm(const std::filesystem::path &path) {
    return decode_pgm(read_file_bytes(path), path.string());
}

Image downsample2(const Image &image) {
    if (image.width % 2 || image.height % 2)
        throw ContractViolation("downsample2: dimensions must be even");
    Image out(image.width / 2, image.height / 2);
    for (int i = 0; i < out.height; ++i)
        for (int j = 0; j < out.width; ++j)
            out.at(i, j) = 0.25 * (image.at(2 * i, 2 * j) + image.at(2 * i, 2 * j + 1) + image.at(2 * i + 1, 2 * j) +
                                   image.at(2 * i + 1, 2 * j + 1));
    return out;
}

} // namespace mig
