// fastfca.hpp -- jointly-diagonalizable spatial covariance estimation:
// iterative-projection updates of the decorrelation matrices interleaved
// with IS-NMF updates (EM or MM flavor) of loadings and activations, the
// decomposed Wiener filter, block-stationary statistics, the
// joint-diagonality cost, and the one-hot-loading ICA mode.

#pragma once

#include <cstdint>
#include <vector>

#include "fastfca/sigmodel.hpp"

namespace fastfca {

enum class LhFlavor { em, mm };

struct FastFcaOptions {
  bool fix_loadings = false;     // ICA mode keeps the one-hot loadings
  bool normalize_scales = true;  // unit-mean activation rows after each sweep
};

struct FastFcaFitResult {
  FastFcaParams params;
  std::vector<double> nll;  // nll[0] at init, then one entry per iteration
};

// Weighted covariance Q_m = (1/J) sum_j Xhat_j / sigma2_mj at frequency i,
// with a tiny diagonal load so it stays PD.
CMat weighted_cov(const SampleCovSet& covs, int i, const RMat& sigma2_row);

// One IP sweep over the columns of W at frequency i: for each m build Q_m
// from the current loading/act variances, solve (W^H Q_m) w_m = e_m and
// normalize so that w_m^H Q_m w_m = 1.  A singular system restarts that
// column from a small seeded perturbation once, then errors.
void ip_update_w(const SampleCovSet& covs, int i, CMat& w,
                 const RMat& loading, const RMat& act,
                 std::uint64_t restart_seed = 0);

// Elementwise source gain G_n = (L_{:,n} H_{n,:}) / (L H); rows are the
// per-channel Wiener gains of the decomposed filter, and the G_n over all n
// sum to one elementwise.
RMat source_gain(const RMat& loading, const RMat& act, int n);

// IS-NMF updates of (L, H) against the decorrelated powers U, applied per
// source with the running factors (EM) or as whole-matrix multiplicative
// steps, L first (MM).  update_loading = false freezes L (ICA mode); eps is
// the additive variance regularizer (the fit drivers pass the data-scale
// epsilon so the updates match the recorded likelihood exactly).
void em_update_lh(const RMat& u, RMat& loading, RMat& act,
                  bool update_loading = true, double eps = 0.0);
void mm_update_lh(const RMat& u, RMat& loading, RMat& act,
                  bool update_loading = true, double eps = 0.0);

FastFcaFitResult fastfca_fit(const SampleCovSet& covs,
                             const FastFcaParams& init, LhFlavor flavor,
                             int iters, const FitOptions& fit = {},
                             const FastFcaOptions& opts = {});

// Decomposed Wiener filter W^-H diag(gains) W^H at one (i, j, n).
CMat fastfca_mwf(const FastFcaParams& params, int i, int j, int n);

// Separation through the three decomposed stages (decorrelate, per-channel
// Wiener gains, projection back) without forming the filter explicitly.
std::vector<Spectrogram> fastfca_separate(const Spectrogram& spec,
                                          const FastFcaParams& params);

// Joint-diagonality cost sum_j alpha_j D_LD(W^H Xhat_j W | ddiag(...)).
// Empty weights mean alpha_j = 1; requires PD transformed covariances.
double ajd_cost(const CMat& w, const SampleCovSet& covs, int i,
                const RVec& weights = RVec());

// Determined-case degenerate mode: loadings frozen at the one-hot identity
// pattern (Lambda_n = e_n e_n^T), only W and the activations update.  These
// parameters intentionally carry exact zeros in the loadings.
FastFcaFitResult ica_mode_fit(const SampleCovSet& covs, int sources,
                              int iters, const std::vector<CMat>& w_init,
                              const FitOptions& fit = {});

// Block-stationary statistics; block_size == 1 reproduces sample_covs.
SampleCovSet piecewise_prepare(const Spectrogram& spec, int block_size);

// R_in = W^-H Lambda_n W^-1.
std::vector<std::vector<CMat>> reconstruct_scms(const FastFcaParams& params);

}  // namespace fastfca
