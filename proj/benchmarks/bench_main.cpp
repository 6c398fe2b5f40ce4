#include <benchmark/benchmark.h>

#include <vector>

#include "mig/field.hpp"
#include "mig/geometry.hpp"
#include "mig/glyph.hpp"
#include "mig/network.hpp"
#include "mig/render.hpp"
#include "mig/rng.hpp"

using namespace mig;

namespace {

NetworkShape desk_shape(int width) {
    NetworkShape s;
    s.labels = 52;
    s.latent_dim = 128;
    s.hidden_width = width;
    s.hidden_layers = 8;
    s.skip_layer = 3;
    return s;
}

std::vector<Vec2> random_points(int n) {
    Rng rng(1);
    std::vector<Vec2> pts(n);
    for (auto &p : pts)
        p = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return pts;
}

std::vector<Contour> bowl() {
    return normalize(load_glyph_file(std::string(MIG_TEST_DATA) + "/shapes/bowl.path"));
}

void BM_Forward(benchmark::State &state) {
    Network net = Network::kaiming(desk_shape(static_cast<int>(state.range(0))), 1);
    std::vector<double> z(128, 0.01);
    auto pts = random_points(4096);
    for (auto _ : state)
        benchmark::DoNotOptimize(forward(net, {0, z}, pts));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pts.size()));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(384)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State &state) {
    Network net = Network::kaiming(desk_shape(static_cast<int>(state.range(0))), 1);
    std::vector<double> z(128, 0.01);
    auto pts = random_points(4096);
    std::vector<double> upstream(pts.size() * 3, 1e-3);
    Gradients g(net.shape());
    ForwardCache cache;
    for (auto _ : state) {
        forward(net, {0, z}, pts, &cache);
        backward(net, cache, upstream, g);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pts.size()));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(384)->Unit(benchmark::kMillisecond);

void BM_GlyphSdf(benchmark::State &state) {
    auto g = bowl();
    auto pts = random_points(1024);
    for (auto _ : state)
        for (const auto &p : pts)
            benchmark::DoNotOptimize(glyph_sdf(p, g));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pts.size()));
}
BENCHMARK(BM_GlyphSdf)->Unit(benchmark::kMicrosecond);

void BM_RasterizeGroundTruth(benchmark::State &state) {
    auto g = bowl();
    const int w = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(rasterize_ground_truth(g, w, 4.0 / w));
}
BENCHMARK(BM_RasterizeGroundTruth)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_RenderImplicit(benchmark::State &state) {
    Network net = Network::kaiming(desk_shape(64), 1);
    std::vector<double> z(128, 0.01);
    const int w = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(render_implicit(net, z, 0, w));
}
BENCHMARK(BM_RenderImplicit)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_RenderBilateral(benchmark::State &state) {
    Network net = Network::kaiming(desk_shape(64), 1);
    std::vector<double> z(128, 0.01);
    RenderOptions keep;
    keep.keep_channels = true;
    FloatGrid grid = render_implicit(net, z, 0, 64, keep).channels;
    for (auto _ : state)
        benchmark::DoNotOptimize(render_bilateral(grid, 1024));
}
BENCHMARK(BM_RenderBilateral)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
