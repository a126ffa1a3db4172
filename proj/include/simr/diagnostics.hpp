#pragma once

// Pointwise metrics, radial spectra, POD energy and summary statistics.

#include <cstddef>
#include <string>
#include <vector>

#include "simr/dns.hpp"
#include "simr/tensor.hpp"

namespace simr {

struct MetricsRecord {
  std::size_t sample_index = 0;
  double mse = 0.0;
  double rel_l2 = 0.0;
  double psnr = 0.0;  // dB, +inf when pred == truth
  double ssim = 0.0;
};

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& truth);

/// ||pred - truth||_F / ||truth||_F; UndefinedMetric for a zero truth.
template <typename T>
double rel_l2(const Tensor<T>& pred, const Tensor<T>& truth);

/// 10 log10(MAX^2 / MSE), MAX = max(truth) - min(truth).
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& truth);

/// Mean Gaussian-windowed SSIM on a periodic [H,W] (or [1,H,W]) field.
template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& truth, const SsimOptions& options = {});

template <typename T>
MetricsRecord compute_metrics(const Tensor<T>& pred, const Tensor<T>& truth, std::size_t sample_index,
                              const SsimOptions& options = {});

/// Normalized 1D Gaussian taps of the SSIM window.
std::vector<double> gaussian_window(std::size_t size, double sigma);

struct SpectrumCurve {
  std::vector<int> k;          // shell centers 1..K
  std::vector<double> values;  // one per shell
};

/// Shells [k - 0.5, k + 0.5) from k = 1 up to the grid corner, so the curve
/// carries every nonzero wavenumber.
SpectrumCurve energy_spectrum(const Field2D& omega);
SpectrumCurve enstrophy_spectrum(const Field2D& omega);
/// Per-shell sum of |k|^2 times the modal energy; equals the enstrophy
/// spectrum shell by shell.
SpectrumCurve wavenumber_weighted_energy(const Field2D& omega);

template <typename T>
Field2D to_field(const Tensor<T>& t);

/// Sum over shells k_c < k <= k_max of |log E_pred(k) - log E_true(k)|.
/// Shells where the truth is zero are skipped; pred is floored at 1e-30.
double log_spectrum_error(const SpectrumCurve& pred, const SpectrumCurve& truth, int k_c, int k_max);

struct PODResult {
  std::vector<double> singular_values;  // descending
  std::vector<double> cumulative;       // fraction of sigma^2, ends at 1
  bool degenerate = false;              // zero variance; cumulative is all ones
};

/// POD of N snapshots (each flattened) after subtracting the snapshot mean.
template <typename T>
PODResult pod_cumulative(const std::vector<Tensor<T>>& snapshots);

struct AggregateStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
  double q1 = 0.0, q3 = 0.0;
  double min = 0.0, max = 0.0;
  double upper_fence = 0.0;  // q3 + 1.5 IQR
  std::size_t outliers = 0;  // values above the fence
};

AggregateStats aggregate_stats(const std::vector<double>& values);

/// Linear-interpolation quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q);

/// "model,sample_index,mse,rel_l2,psnr_db,ssim" rows.
std::string metrics_csv(const std::string& model, const std::vector<MetricsRecord>& records);
std::string format_number(double v);

}  // namespace simr
