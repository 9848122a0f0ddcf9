// Compares the serial reference kernels against the OpenMP ones: nodewise
// regressions and Monte-Carlo replications. Verifies the outputs are
// bit-identical while it is at it.

#include <chrono>
#include <cstdio>

#include <omp.h>

#include "heenet/dgp.hpp"
#include "heenet/inference.hpp"
#include "heenet/montecarlo.hpp"

using namespace heenet;

namespace {

template <typename F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", omp_get_max_threads());

    {
        const Index p = 300;
        Matrix G = draw_design(p, p, 42);
        G += 2.0 * Matrix::Identity(p, p);
        const double lambda = benchmark_lambda(static_cast<double>(p));

        NodewiseResult serial, parallel;
        const double t_serial = time_ms([&] { serial = nodewise_inverse_serial(G, lambda); });
        const double t_parallel =
            time_ms([&] { parallel = nodewise_inverse(G, lambda, Exec::parallel); });
        const bool same = serial.theta == parallel.theta && serial.tau2 == parallel.tau2;
        std::printf("nodewise_inverse (p=%ld)\n", static_cast<long>(p));
        std::printf("  serial   %8.1f ms\n", t_serial);
        std::printf("  parallel %8.1f ms  (speedup %.2fx, bit-identical: %s)\n\n", t_parallel,
                    t_serial / t_parallel, same ? "yes" : "NO");
        if (!same) return 1;
    }

    {
        StudyConfig cfg;
        cfg.n = 100;
        cfg.replications = 24;
        cfg.leaders = {0, 1, 2, 3, 4};
        cfg.leader_values = Vector::Constant(5, 0.5);
        cfg.beta0 = Vector::Constant(1, 3.0);
        cfg.tuning.second = StagePolicy::benchmark(2.0);
        cfg.master_seed = 7;

        MCReport serial, parallel;
        cfg.parallel = false;
        const double t_serial = time_ms([&] { serial = run_study(cfg); });
        cfg.parallel = true;
        const double t_parallel = time_ms([&] { parallel = run_study(cfg); });
        const bool same = serial == parallel;
        std::printf("run_study (n=%ld, R=%d, base model)\n", static_cast<long>(cfg.n),
                    cfg.replications);
        std::printf("  serial   %8.1f ms\n", t_serial);
        std::printf("  parallel %8.1f ms  (speedup %.2fx, bit-identical: %s)\n", t_parallel,
                    t_serial / t_parallel, same ? "yes" : "NO");
        if (!same) return 1;
    }
    return 0;
}
