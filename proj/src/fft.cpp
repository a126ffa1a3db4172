#include "simr/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "simr/errors.hpp"

namespace simr::fft {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void require_power_of_two(std::size_t h, std::size_t w) {
  if (!is_power_of_two(h) || !is_power_of_two(w)) {
    throw ConfigError("FFT size " + std::to_string(h) + "x" + std::to_string(w) + " is not a power of two");
  }
}

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct Fftw;

template <>
struct Fftw<float> {
  using Plan = fftwf_plan;
  using Complex = fftwf_complex;
  static Plan plan_r2c(int h, int w) {
    std::vector<float> in(static_cast<std::size_t>(h) * w);
    std::vector<std::complex<float>> out(static_cast<std::size_t>(h) * (w / 2 + 1));
    return fftwf_plan_dft_r2c_2d(h, w, in.data(), reinterpret_cast<Complex*>(out.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static Plan plan_c2r(int h, int w) {
    std::vector<std::complex<float>> in(static_cast<std::size_t>(h) * (w / 2 + 1));
    std::vector<float> out(static_cast<std::size_t>(h) * w);
    return fftwf_plan_dft_c2r_2d(h, w, reinterpret_cast<Complex*>(in.data()), out.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void exec_r2c(Plan p, const float* in, std::complex<float>* out) {
    fftwf_execute_dft_r2c(p, const_cast<float*>(in), reinterpret_cast<Complex*>(out));
  }
  static void exec_c2r(Plan p, std::complex<float>* in, float* out) {
    fftwf_execute_dft_c2r(p, reinterpret_cast<Complex*>(in), out);
  }
};

template <>
struct Fftw<double> {
  using Plan = fftw_plan;
  using Complex = fftw_complex;
  static Plan plan_r2c(int h, int w) {
    std::vector<double> in(static_cast<std::size_t>(h) * w);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * (w / 2 + 1));
    return fftw_plan_dft_r2c_2d(h, w, in.data(), reinterpret_cast<Complex*>(out.data()),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static Plan plan_c2r(int h, int w) {
    std::vector<std::complex<double>> in(static_cast<std::size_t>(h) * (w / 2 + 1));
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    return fftw_plan_dft_c2r_2d(h, w, reinterpret_cast<Complex*>(in.data()), out.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void exec_r2c(Plan p, const double* in, std::complex<double>* out) {
    fftw_execute_dft_r2c(p, const_cast<double*>(in), reinterpret_cast<Complex*>(out));
  }
  static void exec_c2r(Plan p, std::complex<double>* in, double* out) {
    fftw_execute_dft_c2r(p, reinterpret_cast<Complex*>(in), out);
  }
};

template <typename T>
typename Fftw<T>::Plan cached_plan(std::size_t h, std::size_t w, bool forward) {
  using Key = std::tuple<std::size_t, std::size_t, bool>;
  static std::map<Key, typename Fftw<T>::Plan> plans;
  std::lock_guard lock(planner_mutex());
  auto key = Key{h, w, forward};
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  auto plan = forward ? Fftw<T>::plan_r2c(static_cast<int>(h), static_cast<int>(w))
                      : Fftw<T>::plan_c2r(static_cast<int>(h), static_cast<int>(w));
  plans.emplace(key, plan);
  return plan;
}

}  // namespace

template <typename T>
void r2c(const T* in, std::size_t h, std::size_t w, std::complex<T>* out) {
  require_power_of_two(h, w);
  Fftw<T>::exec_r2c(cached_plan<T>(h, w, true), in, out);
}

template <typename T>
void c2r(const std::complex<T>* in, std::size_t h, std::size_t w, T* out) {
  require_power_of_two(h, w);
  const std::size_t wh = w / 2 + 1;
  std::vector<std::complex<T>> work(in, in + h * wh);
  // Hermitian projection of the self-conjugate columns; interior columns are
  // implicitly doubled by the c2r transform.
  for (std::size_t col : {std::size_t{0}, wh - 1}) {
    for (std::size_t r = 0; r <= h / 2; ++r) {
      const std::size_t p = (h - r) % h;
      const auto a = in[r * wh + col];
      const auto b = in[p * wh + col];
      const auto sym = (a + std::conj(b)) / T{2};
      work[r * wh + col] = sym;
      work[p * wh + col] = std::conj(sym);
    }
    if (wh == 1) break;
  }
  Fftw<T>::exec_c2r(cached_plan<T>(h, w, false), work.data(), out);
}

template void r2c<float>(const float*, std::size_t, std::size_t, std::complex<float>*);
template void r2c<double>(const double*, std::size_t, std::size_t, std::complex<double>*);
template void c2r<float>(const std::complex<float>*, std::size_t, std::size_t, float*);
template void c2r<double>(const std::complex<double>*, std::size_t, std::size_t, double*);

}  // namespace simr::fft
