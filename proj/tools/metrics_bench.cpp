// Times the OpenMP metrics kernels against their serial references and
// checks that both routes agree.

#include "redharness/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace redharness;

namespace {

template <typename F>
double time_ms(F&& f, int iterations = 3) {
    double best = 1e30;
    for (int i = 0; i < iterations; ++i) {
        auto start = std::chrono::steady_clock::now();
        f();
        std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
        best = std::min(best, elapsed.count());
    }
    return best;
}

std::vector<std::string> synthetic_corpus(int sentences, int words, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> word(0, 49);
    std::vector<std::string> corpus;
    for (int s = 0; s < sentences; ++s) {
        std::string text;
        for (int w = 0; w < words; ++w) {
            if (w) text += " ";
            text += "w" + std::to_string(word(rng));
        }
        corpus.push_back(text);
    }
    return corpus;
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);

    auto corpus = synthetic_corpus(300, 20, rng);
    volatile double sink = 0;
    double serial = time_ms([&] { sink = metrics::self_bleu_serial(corpus); });
    const double serial_value = metrics::self_bleu_serial(corpus);
    double parallel = time_ms([&] { sink = metrics::self_bleu(corpus); });
    const double parallel_value = metrics::self_bleu(corpus);
    std::printf("self_bleu        n=300x20w  serial %8.2f ms  openmp %8.2f ms  speedup %.2fx  |diff| %.2e\n",
                serial, parallel, serial / parallel, std::fabs(serial_value - parallel_value));

    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<std::vector<double>> vectors(600, std::vector<double>(384));
    for (auto& v : vectors) {
        for (auto& x : v) x = unit(rng);
    }
    serial = time_ms([&] { sink = metrics::mean_pairwise_cosine_distance_serial(vectors); });
    const double cos_serial = metrics::mean_pairwise_cosine_distance_serial(vectors);
    parallel = time_ms([&] { sink = metrics::mean_pairwise_cosine_distance(vectors); });
    const double cos_parallel = metrics::mean_pairwise_cosine_distance(vectors);
    std::printf("cosine_distance  n=600x384d serial %8.2f ms  openmp %8.2f ms  speedup %.2fx  |diff| %.2e\n",
                serial, parallel, serial / parallel, std::fabs(cos_serial - cos_parallel));

    (void)sink;
    return 0;
}
