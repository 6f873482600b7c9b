// Kernel benchmark: serial reference vs the OpenMP backend on convolution,
// pooling and resize workloads sized like a small training step. Also
// verifies that both backends produce bit-identical outputs.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vsal/kernels.hpp"
#include "vsal/rng.hpp"

using namespace vsal;
using namespace vsal::kernels;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto start = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto stop = Clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool report(const char* name, double serial_ms, double omp_ms, bool identical) {
    std::printf("%-28s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
                omp_ms, serial_ms / omp_ms, identical ? "bit-identical" : "MISMATCH");
    return identical;
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::atoi(argv[1]);
#ifdef _OPENMP
    std::printf("OpenMP threads: %d, reps: %d\n", omp_get_max_threads(), reps);
#else
    std::printf("built without OpenMP; both columns run the serial path (reps: %d)\n", reps);
#endif

    Rng rng(0);
    bool all_ok = true;

    {
        // conv3d on an encoder-stage-sized tensor
        const auto g = make_conv3d_geom(16, 32, 8, 32, 32, 3, 3, 3, 1, 1, 1, 1, 1, 1);
        const auto in = random_vec(g.in_numel(), rng);
        const auto w = random_vec(g.weight_numel(), rng);
        const auto b = random_vec(g.c_out, rng);
        std::vector<float> out_s(g.out_numel()), out_p(g.out_numel());
        const double ts = time_ms([&] { conv3d_forward_serial(g, in.data(), w.data(), b.data(), out_s.data()); }, reps);
        const double tp = time_ms([&] { conv3d_forward_omp(g, in.data(), w.data(), b.data(), out_p.data()); }, reps);
        all_ok &= report("conv3d forward", ts, tp, out_s == out_p);

        const auto go = random_vec(g.out_numel(), rng);
        std::vector<float> gi_s(g.in_numel()), gi_p(g.in_numel());
        const double bs = time_ms([&] {
            std::fill(gi_s.begin(), gi_s.end(), 0.f);
            conv3d_backward_input_serial(g, go.data(), w.data(), gi_s.data());
        }, reps);
        const double bp = time_ms([&] {
            std::fill(gi_p.begin(), gi_p.end(), 0.f);
            conv3d_backward_input_omp(g, go.data(), w.data(), gi_p.data());
        }, reps);
        all_ok &= report("conv3d backward(input)", bs, bp, gi_s == gi_p);

        std::vector<float> gw_s(g.weight_numel()), gw_p(g.weight_numel());
        const double ws = time_ms([&] {
            std::fill(gw_s.begin(), gw_s.end(), 0.f);
            conv3d_backward_weight_serial(g, in.data(), go.data(), gw_s.data());
        }, reps);
        const double wp = time_ms([&] {
            std::fill(gw_p.begin(), gw_p.end(), 0.f);
            conv3d_backward_weight_omp(g, in.data(), go.data(), gw_p.data());
        }, reps);
        all_ok &= report("conv3d backward(weight)", ws, wp, gw_s == gw_p);
    }

    {
        const auto g = make_pool3d_geom(32, 8, 64, 64, 2, 2, 2, 2, 2, 2);
        const auto in = random_vec(g.in_numel(), rng);
        std::vector<float> out_s(g.out_numel()), out_p(g.out_numel());
        std::vector<std::size_t> am_s(g.out_numel()), am_p(g.out_numel());
        const double ts = time_ms([&] { maxpool3d_forward_serial(g, in.data(), out_s.data(), am_s.data()); }, reps);
        const double tp = time_ms([&] { maxpool3d_forward_omp(g, in.data(), out_p.data(), am_p.data()); }, reps);
        all_ok &= report("maxpool3d forward", ts, tp, out_s == out_p && am_s == am_p);
    }

    {
        Resize3dGeom g;
        g.c = 32;
        g.in_t = 4;
        g.in_h = 32;
        g.in_w = 32;
        g.out_t = 4;
        g.out_h = 64;
        g.out_w = 64;
        const auto in = random_vec(g.in_numel(), rng);
        std::vector<float> out_s(g.out_numel()), out_p(g.out_numel());
        const double ts = time_ms([&] { trilinear_forward_serial(g, in.data(), out_s.data()); }, reps);
        const double tp = time_ms([&] { trilinear_forward_omp(g, in.data(), out_p.data()); }, reps);
        all_ok &= report("trilinear forward", ts, tp, out_s == out_p);
    }

    if (!all_ok) {
        std::printf("backend mismatch detected\n");
        return 1;
    }
    return 0;
}
