// Wall time of the OpenMP sweeps and solve against the serial reference.

#include <chrono>
#include <cstdio>
#include <string>

#include <omp.h>

#include "isingmfg/solver.hpp"
#include "oracles.hpp"

using namespace isingmfg;

namespace {

template <class F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int k = 0; k < reps; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* what, double serial_s, double parallel_s) {
    std::printf("%-16s serial %8.3f s   parallel %8.3f s   speedup %5.2fx\n", what, serial_s, parallel_s,
                serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t nx = argc > 1 ? std::stoul(argv[1]) : 128;
    const std::size_t nt = argc > 2 ? std::stoul(argv[2]) : 200;
    GridGeometry g;
    g.d = 2;
    g.nx = nx;
    g.nt = nt;
    g.T = 1.0;
    g.lambda = 4.0 / nx;
    const auto kernel = InteractionKernel::build(KernelSpec{}, g.lambda, g.spatial());
    const PotentialParams P = params_for(kernel, 1.0 / 0.9);
    std::printf("grid %zu^2 x %zu, %d threads\n", nx, nt, omp_get_max_threads());

    const SpinField s = oracle::smooth_field(g, 1, 0.4);
    const std::vector<double> gv(g.slice_size(), 0.1);
    const std::vector<double> s0(s.slice(0).begin(), s.slice(0).end());
    CostateField p(g);
    row("backward sweep", best_of(3, [&] { p = serial::backward_sweep(s, gv, kernel, P); }),
        best_of(3, [&] { p = backward_sweep(s, gv, kernel, P); }));
    row("forward sweep", best_of(3, [&] { serial::forward_sweep(p, s0, P); }),
        best_of(3, [&] { forward_sweep(p, s0, P); }));

    SolverConfig cfg;
    cfg.max_iters = 20;
    const BoundaryData b{s0, gv};
    row("solve (20 it)", best_of(1, [&] { serial::solve(b, g, kernel, P, cfg); }),
        best_of(1, [&] { solve(b, g, kernel, P, cfg); }));
}
