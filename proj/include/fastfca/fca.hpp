// fca.hpp -- full-rank spatial covariance analysis: EM and MM optimizers for
// the free-SCM model and the direct multichannel Wiener filter.

#pragma once

#include <cstdint>
#include <vector>

#include "fastfca/sigmodel.hpp"

namespace fastfca {

enum class FcaFlavor { em, mm };

struct FcaOptions {
  // Update-order ablation: divide by the freshly updated source power inside
  // the SCM update (default) or by the previous iteration's value.
  bool updated_power_in_scm = true;
};

struct FcaFitResult {
  FcaParams params;
  std::vector<double> nll;  // nll[0] at init, then one entry per sweep
};

// Direct Wiener filter F = h_ijn R_in X_ij^-1.  A singular mixture
// covariance is floored to PD before inversion; *regularized is set when
// that path is taken.
CMat mwf_filter(const FcaParams& params, int i, int j, int n,
                bool* regularized = nullptr);

// One full EM sweep over all frequencies (E-step from the incoming
// parameters, then power and SCM updates).
void fca_em_step(const SampleCovSet& covs, FcaParams& params,
                 const FcaOptions& opts = {});

// One full MM sweep (power update, mixture covariance refresh, then the
// geometric-mean SCM update).
void fca_mm_step(const SampleCovSet& covs, FcaParams& params);

FcaFitResult fca_fit(const SampleCovSet& covs, const FcaParams& init,
                     FcaFlavor flavor, int iters, const FitOptions& fit = {},
                     const FcaOptions& opts = {});

// LMMSE source-image estimates; outputs sum to the mixture.
std::vector<Spectrogram> fca_separate(const Spectrogram& spec,
                                      const FcaParams& params);

// E-step posterior second moments Psi[n][j] at one frequency.
std::vector<std::vector<CMat>> posterior_moments(const SampleCovSet& covs,
                                                 int i,
                                                 const std::vector<CMat>& scm_i,
                                                 const RMat& power_i);

namespace detail {
void fca_em_step_freq(const SampleCovSet& covs, int i,
                      std::vector<CMat>& scm_i, RMat& power_i,
                      const FcaOptions& opts);
void fca_mm_step_freq(const SampleCovSet& covs, int i,
                      std::vector<CMat>& scm_i, RMat& power_i);
}  // namespace detail

}  // namespace fastfca
