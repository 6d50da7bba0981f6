#include "fastfca/fca.hpp"

#include <cmath>

#include "fastfca/hermitian.hpp"
#include "fastfca/parallel.hpp"

namespace fastfca {

namespace {

// Mixture covariance X_j = sum_n h_jn R_n at one (i, j).
CMat mixture_cov(const std::vector<CMat>& scm_i, const RMat& power_i, int j) {
  CMat x = power_i(0, j) * scm_i[0];
  for (int n = 1; n < static_cast<int>(scm_i.size()); ++n)
    x += power_i(n, j) * scm_i[n];
  return x;
}

Eigen::LLT<CMat> mixture_llt(const std::vector<CMat>& scm_i,
                             const RMat& power_i, int j, bool* regularized) {
  CMat x = mixture_cov(scm_i, power_i, j);
  Eigen::LLT<CMat> llt(x);
  if (llt.info() != Eigen::Success) {
    llt.compute(project_pd(x));
    if (llt.info() != Eigen::Success)
      throw NumericalError("fca: mixture covariance cannot be floored to PD");
    if (regularized) *regularized = true;
  }
  return llt;
}

}  // namespace

CMat mwf_filter(const FcaParams& params, int i, int j, int n,
                bool* regularized) {
  Eigen::LLT<CMat> llt =
      mixture_llt(params.scm[i], params.power[i], j, regularized);
  // F = h R X^-1 = (X^-1 h R)^H for Hermitian X and R.
  return llt.solve(CMat(params.power[i](n, j) * params.scm[i][n])).adjoint();
}

std::vector<std::vector<CMat>> posterior_moments(const SampleCovSet& covs,
                                                 int i,
                                                 const std::vector<CMat>& scm_i,
                                                 const RMat& power_i) {
  const int m = covs.dim, blocks = covs.blocks;
  const int sources = static_cast<int>(scm_i.size());
  std::vector<std::vector<CMat>> psi(sources);
  for (auto& row : psi) row.resize(blocks);
  for (int j = 0; j < blocks; ++j) {
    Eigen::LLT<CMat> llt = mixture_llt(scm_i, power_i, j, nullptr);
    for (int n = 0; n < sources; ++n) {
      const CMat hr = power_i(n, j) * scm_i[n];
      const CMat f = llt.solve(hr).adjoint();
      CMat moment;
      if (covs.has_snapshots()) {
        const CVec fx = f * covs.snapshots[i].col(j);
        moment = fx * fx.adjoint() + hr - f * hr;
      } else {
        moment = f * covs.mats[i][j] * f.adjoint() + hr - f * hr;
      }
      psi[n][j] = symmetrize(moment);
      (void)m;
    }
  }
  return psi;
}

namespace detail {

void fca_em_step_freq(const SampleCovSet& covs, int i,
                      std::vector<CMat>& scm_i, RMat& power_i,
                      const FcaOptions& opts) {
  const int m = covs.dim, blocks = covs.blocks;
  const int sources = static_cast<int>(scm_i.size());

  std::vector<Eigen::LLT<CMat>> scm_llt(sources);
  for (int n = 0; n < sources; ++n) {
    scm_llt[n].compute(scm_i[n]);
    if (scm_llt[n].info() != Eigen::Success)
      scm_llt[n].compute(project_pd(scm_i[n]));
  }

  std::vector<CMat> accum(sources, CMat::Zero(m, m));
  RMat new_power(sources, blocks);
  CMat hr(m, m), f(m, m), moment(m, m);
  for (int j = 0; j < blocks; ++j) {
    Eigen::LLT<CMat> llt = mixture_llt(scm_i, power_i, j, nullptr);
    for (int n = 0; n < sources; ++n) {
      hr.noalias() = power_i(n, j) * scm_i[n];
      f = llt.solve(hr).adjoint();
      if (covs.has_snapshots()) {
        const CVec fx = f * covs.snapshots[i].col(j);
        moment.noalias() = fx * fx.adjoint();
      } else {
        moment.noalias() = f * covs.mats[i][j] * f.adjoint();
      }
      moment += hr;
      moment.noalias() -= f * hr;
      moment = symmetrize(moment);
      const double h_new =
          std::real(scm_llt[n].solve(moment).trace()) / m;
      new_power(n, j) = h_new;
      const double denom =
          opts.updated_power_in_scm ? h_new : power_i(n, j);
      accum[n] += moment / std::max(denom, 1e-300);
    }
  }
  for (int n = 0; n < sources; ++n)
    scm_i[n] = project_pd(accum[n] / blocks);
  power_i = new_power.cwiseMax(1e-300);
}

void fca_mm_step_freq(const SampleCovSet& covs, int i,
                      std::vector<CMat>& scm_i, RMat& power_i) {
  const int m = covs.dim, blocks = covs.blocks;
  const int sources = static_cast<int>(scm_i.size());
  const CMat eye = CMat::Identity(m, m);

  // Power update from the current mixture covariances.
  RMat new_power(sources, blocks);
  for (int j = 0; j < blocks; ++j) {
    Eigen::LLT<CMat> llt = mixture_llt(scm_i, power_i, j, nullptr);
    if (covs.has_snapshots()) {
      const CVec u = llt.solve(CVec(covs.snapshots[i].col(j)));
      for (int n = 0; n < sources; ++n) {
        const double num = std::real(u.dot(scm_i[n] * u));
        const double den = std::real(llt.solve(scm_i[n]).trace());
        new_power(n, j) =
            power_i(n, j) * std::sqrt(std::max(num, 0.0) /
                                      std::max(den, 1e-300));
      }
    } else {
      const CMat xinv = llt.solve(eye);
      const CMat xixi = xinv * covs.mats[i][j] * xinv;
      for (int n = 0; n < sources; ++n) {
        const double num = std::real((xixi * scm_i[n]).trace());
        const double den = std::real((xinv * scm_i[n]).trace());
        new_power(n, j) =
            power_i(n, j) * std::sqrt(std::max(num, 0.0) /
                                      std::max(den, 1e-300));
      }
    }
  }
  power_i = new_power.cwiseMax(1e-300);

  // SCM update with the mixture covariance refreshed at the new powers:
  // R_n <- (sum_j h_jn X_j^-1)^-1 # [R_n (sum_j h_jn X_j^-1 Xhat_j X_j^-1) R_n].
  std::vector<CMat> wa(sources, CMat::Zero(m, m));
  std::vector<CMat> wb(sources, CMat::Zero(m, m));
  for (int j = 0; j < blocks; ++j) {
    Eigen::LLT<CMat> llt = mixture_llt(scm_i, power_i, j, nullptr);
    const CMat xinv = llt.solve(eye);
    CMat xixi;
    if (covs.has_snapshots()) {
      const CVec u = xinv * covs.snapshots[i].col(j);
      xixi.noalias() = u * u.adjoint();
    } else {
      xixi = xinv * covs.mats[i][j] * xinv;
    }
    for (int n = 0; n < sources; ++n) {
      wa[n] += power_i(n, j) * xinv;
      wb[n] += power_i(n, j) * xixi;
    }
  }
  for (int n = 0; n < sources; ++n) {
    Eigen::LLT<CMat> llt(symmetrize(wa[n]));
    CMat a_inv;
    if (llt.info() == Eigen::Success) {
      a_inv = symmetrize(llt.solve(eye));
    } else {
      a_inv = project_pd(CMat(symmetrize(wa[n]).inverse()));
    }
    const CMat b = project_pd(scm_i[n] * symmetrize(wb[n]) * scm_i[n]);
    scm_i[n] = project_pd(geometric_mean(a_inv, b));
  }
}

}  // namespace detail

void fca_em_step(const SampleCovSet& covs, FcaParams& params,
                 const FcaOptions& opts) {
  for (int i = 0; i < covs.bins; ++i)
    detail::fca_em_step_freq(covs, i, params.scm[i], params.power[i], opts);
}

void fca_mm_step(const SampleCovSet& covs, FcaParams& params) {
  for (int i = 0; i < covs.bins; ++i)
    detail::fca_mm_step_freq(covs, i, params.scm[i], params.power[i]);
}

FcaFitResult fca_fit(const SampleCovSet& covs, const FcaParams& init,
                     FcaFlavor flavor, int iters, const FitOptions& fit,
                     const FcaOptions& opts) {
  FcaFitResult result;
  result.params = init;
  const int bins = covs.bins;
  RMat nll_slots;
  if (fit.record_trace) nll_slots = RMat::Zero(iters + 1, bins);

  parallel_for(bins, fit.workers, [&](int i) {
    std::vector<CMat>& scm_i = result.params.scm[i];
    RMat& power_i = result.params.power[i];
    const double nll0 =
        fit.record_trace ? fca_nll_freq(covs, i, scm_i, power_i) : 0.0;
    if (fit.record_trace) nll_slots(0, i) = nll0;
    if (!(covs.power(i) > 0.0)) {
      if (fit.record_trace)
        for (int t = 0; t < iters; ++t) nll_slots(t + 1, i) = nll0;
      return;
    }
    for (int t = 0; t < iters; ++t) {
      if (flavor == FcaFlavor::em)
        detail::fca_em_step_freq(covs, i, scm_i, power_i, opts);
      else
        detail::fca_mm_step_freq(covs, i, scm_i, power_i);
      if (fit.record_trace)
        nll_slots(t + 1, i) = fca_nll_freq(covs, i, scm_i, power_i);
    }
  });

  if (fit.record_trace) {
    result.nll.resize(iters + 1);
    for (int t = 0; t <= iters; ++t) result.nll[t] = nll_slots.row(t).sum();
  }
  return result;
}

std::vector<Spectrogram> fca_separate(const Spectrogram& spec,
                                      const FcaParams& params) {
  if (spec.channels != params.dim || spec.bins != params.bins ||
      spec.frames != params.frames)
    throw std::invalid_argument("fca_separate: shape mismatch");
  const int m = spec.channels;
  std::vector<Spectrogram> images(
      params.sources, Spectrogram::zero(m, spec.bins, spec.frames));
  for (int i = 0; i < spec.bins; ++i) {
    for (int j = 0; j < spec.frames; ++j) {
      Eigen::LLT<CMat> llt =
          mixture_llt(params.scm[i], params.power[i], j, nullptr);
      const CVec u = llt.solve(CVec(spec.f[i].col(j)));
      for (int n = 0; n < params.sources; ++n)
        images[n].f[i].col(j) =
            params.power[i](n, j) * (params.scm[i][n] * u);
    }
  }
  return images;
}

}  // namespace fastfca
