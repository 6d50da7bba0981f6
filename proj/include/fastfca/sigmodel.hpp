// sigmodel.hpp -- observation statistics and parameter containers shared by
// all estimators, plus the negative log-likelihoods they minimize.
//
// Additive data constants are dropped from both likelihoods (all monotonicity
// checks compare successive values of the same expression).

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "fastfca/stft.hpp"
#include "fastfca/types.hpp"

namespace fastfca {

// Relative positivity floor used by the generic helper below.
constexpr double kPowerFloorRel = 1e-12;

// Additive variance regularizer relative to the constant per-frequency data
// power: model variances enter every computation as sigma^2 = L H + eps.
// The additive form behaves like one fixed extra noise component, so the IP
// and NMF updates stay exact majorization steps for the very objective the
// trace records, while the dynamic range stays bounded on degenerate cells.
constexpr double kVarEpsRel = 1e-8;

// Absolute guard for the per-frequency epsilon on silent bands.
inline double var_eps(double data_power) {
  return std::max(kVarEpsRel * data_power, 1e-300);
}

// Shared knobs for the iterative fit drivers.
struct FitOptions {
  int workers = 1;
  bool record_trace = true;    // benchmark runs disable this
  std::uint64_t seed = 0;      // recovery restarts only
};

// Floors every entry of m from below at rel * mean(m); falls back to a tiny
// absolute floor when the mean vanishes (all-silent slices).
void floor_positive(RMat& m, double rel = kPowerFloorRel);

// Per-(i, j) observation covariances.  block_size == 1 stores the rank-1
// outer products and keeps the raw snapshots for fast weighted accumulation;
// block_size B > 1 stores covariances averaged over B consecutive frames,
// the trailing partial block averaged over its actual length.
struct SampleCovSet {
  int dim = 0, bins = 0, blocks = 0, frames = 0, block_size = 1;
  std::vector<std::vector<CMat>> mats;  // [i][j], dim x dim, Hermitian PSD
  std::vector<CMat> snapshots;          // [i], dim x frames (block_size == 1)
  RVec power_scale;                     // [i], mean per-channel data power
  bool has_snapshots() const { return !snapshots.empty(); }
  // Constant per-frequency power scale all degeneracy guards refer to.
  double power(int i) const;
};

SampleCovSet sample_covs(const Spectrogram& spec, int block_size = 1);

// Free-SCM model: per-frequency spatial covariances R_in (scm[i][n]) and
// source powers h_ijn (power[i] is sources x frames, row n / column j).
struct FcaParams {
  int dim = 0, bins = 0, frames = 0, sources = 0;
  std::vector<std::vector<CMat>> scm;
  std::vector<RMat> power;
  void validate() const;
};

// Jointly-diagonalizable model: decorrelation matrices W_i (columns w_m),
// diagonal loadings as columns of L_i (loading[i], dim x sources) and
// activations H_i (act[i], sources x frames).  R_in = W^-H Lambda_n W^-1.
struct FastFcaParams {
  int dim = 0, bins = 0, frames = 0, sources = 0;
  std::vector<CMat> decorr;
  std::vector<RMat> loading;
  std::vector<RMat> act;
  void validate() const;
};

// Decorrelated-domain statistics at one frequency.
struct DecorrelatedStats {
  RMat powers;    // U(m,j) = w_m^H Xhat_j w_m
  RMat mix_vars;  // sigma^2(m,j) = [L H](m,j) + eps
};

RMat decorrelated_powers(const SampleCovSet& covs, int i, const CMat& w);

DecorrelatedStats decorrelated_stats(const SampleCovSet& covs, int i,
                                     const CMat& w, const RMat& loading,
                                     const RMat& act);

// ln|det W|^2 through an LU factorization; throws NumericalError when W is
// numerically singular.
double log_abs_det2(const CMat& w);

// Expands block-level parameters (fitted on B-frame blocks) to frame level
// by replicating each block's activations over the frames it covers.
FcaParams expand_block_params(const FcaParams& params, int block_size,
                              int frames);
FastFcaParams expand_block_params(const FastFcaParams& params, int block_size,
                                  int frames);

double fca_nll(const SampleCovSet& covs, const FcaParams& params);
double fastfca_nll(const SampleCovSet& covs, const FastFcaParams& params);

// Per-frequency terms; the fit drivers assemble these into per-bin slots so
// parallel reductions stay deterministic.
double fca_nll_freq(const SampleCovSet& covs, int i,
                    const std::vector<CMat>& scm_i, const RMat& power_i);
double fastfca_nll_freq(const SampleCovSet& covs, int i, const CMat& w,
                        const RMat& loading, const RMat& act);

}  // namespace fastfca
