#include "mig/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mig/error.hpp"
#include "mig/geometry.hpp"
#include "mig/rng.hpp"

namespace mig {

SampleSet sample_glyph(std::span<const Contour> contours, const Image &raster,
                       std::span<const CornerTemplate> templates, const SamplingConfig &config) {
    SampleSet set;
    set.seed = config.seed;
    const int w = raster.width, h = raster.height;

    std::vector<unsigned char> marked(raster.size(), 0);
    bool any_band = false;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double v = raster.at(i, j);
            if (!(v > 0.0 && v < 1.0))
                continue;
            any_band = true;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    int r = i + di, c = j + dj;
                    if (r >= 0 && r < h && c >= 0 && c < w)
                        marked[static_cast<std::size_t>(r) * w + c] = 1;
                }
        }
    bool has_outline = false;
    for (const auto &c : contours)
        has_outline = has_outline || !c.segments.empty();
    if (has_outline && !any_band)
        throw ConfigError("raster has no anti-aliased pixels; the anti-alias range is too small for the resolution");

    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (marked[static_cast<std::size_t>(i) * w + j]) {
                FieldSample s;
                s.position = {pixel_center(j, w), pixel_center(i, h)};
                s.kind = SampleKind::Edge;
                s.target = raster.at(i, j);
                set.samples.push_back(s);
            }
    set.edge_count = static_cast<int>(set.samples.size());

    for (std::size_t t = 0; t < templates.size(); ++t)
        for (std::size_t k = 0; k < templates[t].points.size(); ++k) {
            FieldSample s;
            s.position = templates[t].points[k];
            s.kind = SampleKind::Corner;
            s.target = templates[t].composed_target(k);
            s.corner_ref = static_cast<int>(t);
            s.window_index = static_cast<int>(k);
            set.samples.push_back(s);
        }
    set.corner_count = static_cast<int>(set.samples.size()) - set.edge_count;

    int total = std::max(static_cast<int>(std::lround(config.homogeneous_ratio * set.edge_count)),
                         config.min_homogeneous);
    int inside = has_outline ? total / 2 : 0;
    int outside = total - inside;
    Rng rng(config.seed);
    auto draw = [&](bool want_inside, int count) {
        int produced = 0;
        long attempts = 0, limit = 200L * std::max(count, 1);
        while (produced < count && attempts < limit) {
            ++attempts;
            Vec2 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            double d = has_outline ? glyph_sdf(p, contours) : -std::numeric_limits<double>::infinity();
            if (std::abs(d) <= config.gamma || (d > 0.0) != want_inside)
                continue;
            FieldSample s;
            s.position = p;
            s.kind = SampleKind::Homogeneous;
            s.target = want_inside ? 1.0 : 0.0;
            set.samples.push_back(s);
            ++produced;
        }
        return produced;
    };
    int got_inside = draw(true, inside);
    draw(false, outside + (inside - got_inside));
    set.homogeneous_count = static_cast<int>(set.samples.size()) - set.edge_count - set.corner_count;
    return set;
}

} // namespace mig
