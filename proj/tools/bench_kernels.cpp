// Compares the OpenMP kernels against their serial reference
// implementations: wall time and bit-identity of the results. The parallel
// kernels split work by output row and keep each reduction serial, so the
// outputs must match the serial ones bit for bit on any thread count.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gmemi/linalg.hpp"

namespace {

using namespace gmemi;

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

DenseMatrix random_matrix(std::mt19937_64& g, std::size_t r, std::size_t c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    DenseMatrix m(r, c);
    for (double& v : m.a) v = nd(g);
    return m;
}

Vector random_vector(std::mt19937_64& g, std::size_t n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector x(n);
    for (double& v : x) v = nd(g);
    return x;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        double t0 = now_s();
        f();
        double t1 = now_s();
        if (t1 - t0 < best) best = t1 - t0;
    }
    return best;
}

bool bits_equal(const Vector& a, const Vector& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n = 768;
    int reps = 5;
    try {
        if (argc > 1) n = static_cast<std::size_t>(std::stoul(argv[1]));
        if (argc > 2) reps = std::stoi(argv[2]);
    } catch (const std::exception&) {
        std::printf("usage: %s [size] [reps]\n", argv[0]);
        return 2;
    }

#ifdef _OPENMP
    std::printf("openmp: %d thread(s)\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled at build time\n");
#endif
    std::printf("size: %zu, best of %d reps\n\n", n, reps);

    std::mt19937_64 g(42);
    DenseMatrix a = random_matrix(g, n, n);
    DenseMatrix b = random_matrix(g, n, n);
    Vector x = random_vector(g, n);

    bool all_identical = true;
    std::printf("%-10s %12s %12s %8s %6s\n", "kernel", "serial [s]", "openmp [s]",
                "speedup", "bits");

    {
        Vector ys, yp;
        double ts = time_best_of(reps, [&] { ys = serial::matvec(a, x); });
        double tp = time_best_of(reps, [&] { yp = matvec(a, x); });
        bool same = bits_equal(ys, yp);
        all_identical = all_identical && same;
        std::printf("%-10s %12.6f %12.6f %8.2f %6s\n", "matvec", ts, tp, ts / tp,
                    same ? "same" : "DIFF");
    }
    {
        Vector ys, yp;
        double ts = time_best_of(reps, [&] { ys = serial::matvec_t(a, x); });
        double tp = time_best_of(reps, [&] { yp = matvec_t(a, x); });
        bool same = bits_equal(ys, yp);
        all_identical = all_identical && same;
        std::printf("%-10s %12.6f %12.6f %8.2f %6s\n", "matvec_t", ts, tp, ts / tp,
                    same ? "same" : "DIFF");
    }
    {
        DenseMatrix cs, cp;
        double ts = time_best_of(reps, [&] { cs = serial::matmul(a, b); });
        double tp = time_best_of(reps, [&] { cp = matmul(a, b); });
        bool same = bits_equal(cs.a, cp.a);
        all_identical = all_identical && same;
        std::printf("%-10s %12.6f %12.6f %8.2f %6s\n", "matmul", ts, tp, ts / tp,
                    same ? "same" : "DIFF");
    }
    {
        DenseMatrix cs, cp;
        double ts = time_best_of(reps, [&] { cs = serial::gram(a); });
        double tp = time_best_of(reps, [&] { cp = gram(a); });
        bool same = bits_equal(cs.a, cp.a);
        all_identical = all_identical && same;
        std::printf("%-10s %12.6f %12.6f %8.2f %6s\n", "gram", ts, tp, ts / tp,
                    same ? "same" : "DIFF");
    }

    std::printf("\nresults %s\n", all_identical ? "bit-identical" : "DIVERGED");
    return all_identical ? 0 : 1;
}
