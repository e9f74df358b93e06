// Serial reference vs OpenMP kernels on a 256x256 frame. Set OMP_NUM_THREADS
// to choose the parallel thread count.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "relit/kernels.hpp"

using namespace relit;
using namespace relit::kernels;

namespace {

constexpr int kSide = 256;
constexpr std::size_t kPixels = static_cast<std::size_t>(kSide) * kSide;

std::vector<Vec3> normals() {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<Vec3> out(kPixels);
    for (Vec3& n : out) n = normalize(Vec3{g(rng), g(rng), std::abs(g(rng)) + 0.2});
    return out;
}

std::vector<double> values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(n);
    for (double& v : out) v = u(rng);
    return out;
}

template <auto Fn>
void irradiance(benchmark::State& state) {
    const auto n = normals();
    const auto w = irradiance_weights(sample_random_lighting(2));
    std::vector<double> out(3 * kPixels);
    for (auto _ : state) {
        Fn(n, w, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kPixels));
}

template <auto Fn>
void specular(benchmark::State& state) {
    const auto n = normals();
    const SpecularDirections dirs = SpecularDirections::fibonacci(static_cast<int>(state.range(0)));
    const auto radiance = direction_radiance(dirs, sample_random_lighting(3));
    std::vector<double> value(3 * kPixels), ds(3 * kPixels);
    std::vector<Vec3> jac(3 * kPixels);
    for (auto _ : state) {
        Fn(dirs, SpecularRequest{n, radiance, 32.0}, SpecularResult{value, jac, ds}, {});
        benchmark::DoNotOptimize(value.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kPixels));
}

template <auto Fn>
void compose(benchmark::State& state) {
    const auto a = values(3 * kPixels, 4), s = values(3 * kPixels, 5), c = values(kPixels, 6),
               sp = values(3 * kPixels, 7);
    std::vector<double> out(3 * kPixels);
    for (auto _ : state) {
        Fn(a, s, c, 1, sp, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kPixels));
}

template <auto Fn>
void blur(benchmark::State& state) {
    const auto img = values(kPixels, 8);
    std::vector<double> out(kPixels);
    for (auto _ : state) {
        Fn(img, kSide, kSide, 8.0, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kPixels));
}

}  // namespace

BENCHMARK(irradiance<serial::irradiance>)->Name("irradiance/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(irradiance<parallel::irradiance>)->Name("irradiance/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(specular<serial::specular>)->Name("specular/serial")->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(specular<parallel::specular>)->Name("specular/parallel")->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(compose<serial::compose>)->Name("compose/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(compose<parallel::compose>)->Name("compose/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(blur<serial::gaussian_blur>)->Name("gaussian_blur/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(blur<parallel::gaussian_blur>)->Name("gaussian_blur/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
