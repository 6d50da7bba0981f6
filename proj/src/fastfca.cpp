#include "fastfca/fastfca.hpp"

#include <cmath>
#include <random>

#include "fastfca/hermitian.hpp"
#include "fastfca/parallel.hpp"

namespace fastfca {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, int i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

CMat weighted_cov(const SampleCovSet& covs, int i, const RMat& sigma2_row) {
  const int m = covs.dim, blocks = covs.blocks;
  CMat q(m, m);
  if (covs.has_snapshots()) {
    CVec inv_s = sigma2_row.transpose().cwiseInverse().cast<Complex>();
    const CMat scaled = covs.snapshots[i] * inv_s.asDiagonal();
    q.noalias() = scaled * covs.snapshots[i].adjoint();
  } else {
    q.setZero();
    for (int j = 0; j < blocks; ++j) q += covs.mats[i][j] / sigma2_row(0, j);
  }
  return symmetrize(q / blocks);
}

void ip_update_w(const SampleCovSet& covs, int i, CMat& w,
                 const RMat& loading, const RMat& act,
                 std::uint64_t restart_seed) {
  const int m = covs.dim;
  std::mt19937_64 rng(mix_seed(restart_seed, i));
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Same regularized variances the likelihood sees, so the sweep optimizes
  // the recorded objective exactly.
  RMat sigma2 = ((loading * act).array() + var_eps(covs.power(i))).matrix();

  for (int col = 0; col < m; ++col) {
    const CMat q = weighted_cov(covs, i, sigma2.row(col));
    CVec e = CVec::Zero(m);
    e(col) = Complex(1, 0);
    for (int attempt = 0;; ++attempt) {
      const CMat a = w.adjoint() * q;
      Eigen::PartialPivLU<CMat> lu(a);
      CVec wm = lu.solve(e);
      const double scale = a.norm() * wm.norm() + 1.0;
      if (wm.allFinite() && (a * wm - e).norm() <= 1e-8 * scale) {
        const double energy = std::real(wm.dot(q * wm));
        if (energy > 0.0 && std::isfinite(energy)) {
          w.col(col) = wm / std::sqrt(energy);
          break;
        }
      }
      if (attempt >= 1)
        throw NumericalError("ip_update_w: singular system for column " +
                             std::to_string(col));
      // Restart the column from a small perturbation and retry once.
      const double mag = 1e-8 * (w.col(col).norm() + 1.0);
      for (int r = 0; r < m; ++r)
        w(r, col) += mag * Complex(gauss(rng), gauss(rng));
    }
  }
}

RMat source_gain(const RMat& loading, const RMat& act, int n) {
  RMat lh = loading * act;
  floor_positive(lh);
  return (loading.col(n) * act.row(n)).cwiseQuotient(lh);
}

void em_update_lh(const RMat& u, RMat& loading, RMat& act,
                  bool update_loading, double eps) {
  const int m = static_cast<int>(u.rows());
  const int frames = static_cast<int>(u.cols());
  const int sources = static_cast<int>(loading.cols());
  for (int n = 0; n < sources; ++n) {
    const RMat lh = ((loading * act).array() + eps).matrix();
    const RMat ln_hn = loading.col(n) * act.row(n);
    const RMat g = ln_hn.cwiseQuotient(lh);
    const RMat phi = g.cwiseProduct(g).cwiseProduct(u) +
                     (RMat::Ones(m, frames) - g).cwiseProduct(ln_hn);
    if (update_loading) {
      loading.col(n) =
          (phi * act.row(n).cwiseInverse().transpose()) / frames;
      loading.col(n) = loading.col(n).cwiseMax(1e-300);
    }
    act.row(n) = (loading.col(n).cwiseInverse().transpose() * phi) / m;
    act.row(n) = act.row(n).cwiseMax(1e-300);
  }
}

void mm_update_lh(const RMat& u, RMat& loading, RMat& act,
                  bool update_loading, double eps) {
  if (update_loading) {
    const RMat lh = ((loading * act).array() + eps).matrix();
    const RMat u_lh2 = u.cwiseQuotient(lh.cwiseProduct(lh));
    const RMat num = u_lh2 * act.transpose();
    const RMat den = (lh.cwiseInverse() * act.transpose()).cwiseMax(1e-300);
    loading = loading.cwiseProduct(num.cwiseQuotient(den).cwiseSqrt());
    loading = loading.cwiseMax(1e-300);
  }
  const RMat lh = ((loading * act).array() + eps).matrix();
  const RMat u_lh2 = u.cwiseQuotient(lh.cwiseProduct(lh));
  const RMat num = loading.transpose() * u_lh2;
  const RMat den = (loading.transpose() * lh.cwiseInverse()).cwiseMax(1e-300);
  act = act.cwiseProduct(num.cwiseQuotient(den).cwiseSqrt());
  act = act.cwiseMax(1e-300);
}

namespace {

// Pins both continuous scale ambiguities without moving the likelihood:
// per source, the activation-row mean is pulled into the loading column;
// per channel, the loading-row mean is pulled into the matching column of W
// (w_m <- d w_m with L row m <- |d|^2 L row m leaves the cost unchanged).
// Left unpinned, the channel direction drifts until the positivity floors
// distort the objective.
void balance_scales(CMat& w, RMat& loading, RMat& act) {
  for (int n = 0; n < act.rows(); ++n) {
    const double mu = act.row(n).mean();
    if (mu > 0.0 && std::isfinite(mu)) {
      act.row(n) /= mu;
      loading.col(n) *= mu;
    }
  }
  for (int m = 0; m < loading.rows(); ++m) {
    const double s = loading.row(m).mean();
    if (s > 0.0 && std::isfinite(s)) {
      loading.row(m) /= s;
      w.col(m) /= std::sqrt(s);
    }
  }
}

}  // namespace

FastFcaFitResult fastfca_fit(const SampleCovSet& covs,
                             const FastFcaParams& init, LhFlavor flavor,
                             int iters, const FitOptions& fit,
                             const FastFcaOptions& opts) {
  if (init.dim != covs.dim || init.bins != covs.bins ||
      init.frames != covs.blocks)
    throw std::invalid_argument("fastfca_fit: init/covariance shape mismatch");
  FastFcaFitResult result;
  result.params = init;
  RMat nll_slots;
  if (fit.record_trace) nll_slots = RMat::Zero(iters + 1, covs.bins);

  parallel_for(covs.bins, fit.workers, [&](int i) {
    CMat& w = result.params.decorr[i];
    RMat& loading = result.params.loading[i];
    RMat& act = result.params.act[i];
    const double nll0 =
        fit.record_trace ? fastfca_nll_freq(covs, i, w, loading, act) : 0.0;
    if (fit.record_trace) nll_slots(0, i) = nll0;
    if (!(covs.power(i) > 0.0)) {
      // Entirely silent band: parameters stay at the init.
      if (fit.record_trace)
        for (int t = 0; t < iters; ++t) nll_slots(t + 1, i) = nll0;
      return;
    }
    const double eps = var_eps(covs.power(i));
    for (int t = 0; t < iters; ++t) {
      ip_update_w(covs, i, w, loading, act, fit.seed + t);
      const RMat u = decorrelated_powers(covs, i, w);
      if (flavor == LhFlavor::em)
        em_update_lh(u, loading, act, !opts.fix_loadings, eps);
      else
        mm_update_lh(u, loading, act, !opts.fix_loadings, eps);
      if (opts.normalize_scales && !opts.fix_loadings)
        balance_scales(w, loading, act);
      if (fit.record_trace)
        nll_slots(t + 1, i) = fastfca_nll_freq(covs, i, w, loading, act);
    }
  });

  if (fit.record_trace) {
    result.nll.resize(iters + 1);
    for (int t = 0; t <= iters; ++t) result.nll[t] = nll_slots.row(t).sum();
  }
  return result;
}

CMat fastfca_mwf(const FastFcaParams& params, int i, int j, int n) {
  const int m = params.dim;
  RVec mix = params.loading[i] * params.act[i].col(j);
  mix = mix.cwiseMax(1e-300);
  CVec gains(m);
  for (int k = 0; k < m; ++k)
    gains(k) = params.loading[i](k, n) * params.act[i](n, j) / mix(k);
  const CMat a = params.decorr[i].adjoint();
  Eigen::PartialPivLU<CMat> lu(a);
  return lu.solve(CMat(gains.asDiagonal() * a));
}

std::vector<Spectrogram> fastfca_separate(const Spectrogram& spec,
                                          const FastFcaParams& params) {
  if (spec.channels != params.dim || spec.bins != params.bins ||
      spec.frames != params.frames)
    throw std::invalid_argument("fastfca_separate: shape mismatch");
  std::vector<Spectrogram> images(
      params.sources,
      Spectrogram::zero(spec.channels, spec.bins, spec.frames));
  for (int i = 0; i < spec.bins; ++i) {
    const CMat a = params.decorr[i].adjoint();
    Eigen::PartialPivLU<CMat> lu(a);
    const CMat y = a * spec.f[i];
    for (int n = 0; n < params.sources; ++n) {
      const RMat g = source_gain(params.loading[i], params.act[i], n);
      images[n].f[i] = lu.solve(CMat(g.cast<Complex>().cwiseProduct(y)));
    }
  }
  return images;
}

double ajd_cost(const CMat& w, const SampleCovSet& covs, int i,
                const RVec& weights) {
  if (weights.size() != 0 && weights.size() != covs.blocks)
    throw std::invalid_argument("ajd_cost: weight count mismatch");
  const int m = covs.dim;
  double acc = 0.0;
  for (int j = 0; j < covs.blocks; ++j) {
    const CMat t = w.adjoint() * covs.mats[i][j] * w;
    CMat d = CMat::Zero(m, m);
    d.diagonal() = t.diagonal();
    const double alpha = weights.size() ? weights(j) : 1.0;
    acc += alpha * logdet_divergence(t, d);
  }
  return acc;
}

FastFcaFitResult ica_mode_fit(const SampleCovSet& covs, int sources,
                              int iters, const std::vector<CMat>& w_init,
                              const FitOptions& fit) {
  if (sources != covs.dim)
    throw std::invalid_argument(
        "ica_mode_fit: requires as many sources as channels");
  if (static_cast<int>(w_init.size()) != covs.bins)
    throw std::invalid_argument("ica_mode_fit: one W per frequency required");
  FastFcaParams params;
  params.dim = covs.dim;
  params.bins = covs.bins;
  params.frames = covs.blocks;
  params.sources = sources;
  params.decorr = w_init;
  for (int i = 0; i < covs.bins; ++i) {
    params.loading.push_back(RMat::Identity(covs.dim, sources));
    RMat u = decorrelated_powers(covs, i, w_init[i]);
    floor_positive(u);
    params.act.push_back(u);
  }
  FastFcaOptions opts;
  opts.fix_loadings = true;
  return fastfca_fit(covs, params, LhFlavor::mm, iters, fit, opts);
}

SampleCovSet piecewise_prepare(const Spectrogram& spec, int block_size) {
  return sample_covs(spec, block_size);
}

std::vector<std::vector<CMat>> reconstruct_scms(const FastFcaParams& params) {
  std::vector<std::vector<CMat>> scms(params.bins);
  for (int i = 0; i < params.bins; ++i) {
    Eigen::PartialPivLU<CMat> lu(params.decorr[i]);
    const CMat winv = lu.inverse();
    for (int n = 0; n < params.sources; ++n) {
      CVec lam = params.loading[i].col(n).cast<Complex>();
      scms[i].push_back(
          CMat(winv.adjoint() * lam.asDiagonal() * winv));
    }
  }
  return scms;
}

}  // namespace fastfca
