// Times the parallel kernels against their serial references.
// Usage: das_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "das/kernels.hpp"
#include "das/tensor.hpp"

using namespace das;
using namespace das::kernels;

namespace {

Tensor random(Shape s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

double best_ms(int repeats, const std::function<Tensor()>& f, Tensor& out) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t = std::chrono::steady_clock::now();
    out = f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count());
  }
  return best;
}

void row(const std::string& name, int repeats, const std::function<Tensor()>& fast, const std::function<Tensor()>& ref) {
  Tensor a, b;
  const double t_ref = best_ms(repeats, ref, b);
  set_threads(1);
  const double t_one = best_ms(repeats, fast, a);
  set_threads(max_threads());
  Tensor c;
  const double t_all = best_ms(repeats, fast, c);
  std::printf("%-34s %10.2f %10.2f %10.2f %8.2fx %10.1e %s\n", name.c_str(), t_ref, t_one, t_all, t_ref / t_all,
              max_abs_diff(a, b), max_abs_diff(a, c) == 0.0 ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
  const int threads = max_threads();
  std::printf("threads available: %d, best of %d runs, times in ms\n", threads, repeats);
  std::printf("%-34s %10s %10s %10s %9s %10s %s\n", "kernel", "serial ref", "1 thread", "all", "speedup",
              "max |diff|", "bitwise across threads");

  for (auto [c, hw] : {std::pair{64, 32}, std::pair{128, 16}}) {
    const Tensor x = random({8, static_cast<std::size_t>(c), static_cast<std::size_t>(hw), static_cast<std::size_t>(hw)}, 1);
    const Tensor w = random({static_cast<std::size_t>(c), static_cast<std::size_t>(c), 3, 3}, 2, 0.1);
    row("conv2d 3x3 " + std::to_string(c) + "ch " + std::to_string(hw) + "x" + std::to_string(hw), repeats,
        [&] { return conv2d_forward(x, w, ConvGeometry{1, 1, 1}); },
        [&] { return conv2d_ref(x, KernelWeights{w, 1}, 1, 1); });
  }
  {
    const Tensor x = random({8, 13, 32, 32}, 3);
    const Tensor off = random({8, 18, 32, 32}, 4, 2.0);
    const Tensor mask = random({8, 9, 32, 32}, 5, 0.5);
    const Tensor w = random({64, 13, 3, 3}, 6, 0.1);
    row("deform conv 13->64ch 32x32", repeats, [&] { return deform_conv2d_forward(x, off, mask, w); },
        [&] { return deform_conv2d_ref(x, off, mask, w); });
  }
  {
    const Tensor x = random({8, 64, 32, 32}, 7);
    const Tensor flow = random({8, 2, 32, 32}, 8, 3.0);
    row("grid sample 64ch 32x32", repeats, [&] { return grid_sample_forward(x, flow); },
        [&] { return grid_sample_ref(x, flow); });
  }
  return 0;
}
