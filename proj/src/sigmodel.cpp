#include "fastfca/sigmodel.hpp"

#include <cmath>
#include <stdexcept>

#include "fastfca/hermitian.hpp"

namespace fastfca {

void floor_positive(RMat& m, double rel) {
  if (m.size() == 0) return;
  const double mean = m.mean();
  const double floor = (mean > 0.0) ? rel * mean : 1e-300;
  m = m.cwiseMax(floor);
}

SampleCovSet sample_covs(const Spectrogram& spec, int block_size) {
  if (spec.bins == 0 || spec.frames == 0 || spec.channels == 0)
    throw std::invalid_argument("sample_covs: empty spectrogram");
  if (block_size < 1)
    throw std::invalid_argument("sample_covs: block size must be >= 1");

  SampleCovSet covs;
  covs.dim = spec.channels;
  covs.bins = spec.bins;
  covs.frames = spec.frames;
  covs.block_size = block_size;
  covs.blocks = (spec.frames + block_size - 1) / block_size;
  covs.mats.resize(spec.bins);
  if (block_size == 1) covs.snapshots.resize(spec.bins);

  covs.power_scale = RVec::Zero(spec.bins);
  for (int i = 0; i < spec.bins; ++i) {
    covs.mats[i].resize(covs.blocks);
    double trace_sum = 0.0;
    for (int jb = 0; jb < covs.blocks; ++jb) {
      const int j0 = jb * block_size;
      const int width = std::min(block_size, spec.frames - j0);
      const auto block = spec.f[i].middleCols(j0, width);
      covs.mats[i][jb] = (block * block.adjoint()) / width;
      trace_sum += std::real(covs.mats[i][jb].trace());
    }
    covs.power_scale(i) =
        trace_sum / (static_cast<double>(covs.blocks) * covs.dim);
    if (block_size == 1) covs.snapshots[i] = spec.f[i];
  }
  return covs;
}

double SampleCovSet::power(int i) const {
  if (i < power_scale.size()) return power_scale(i);
  double trace_sum = 0.0;
  for (const CMat& m : mats[i]) trace_sum += std::real(m.trace());
  return trace_sum / (static_cast<double>(blocks) * dim);
}

void FcaParams::validate() const {
  if (static_cast<int>(scm.size()) != bins ||
      static_cast<int>(power.size()) != bins)
    throw std::invalid_argument("FcaParams: bin count mismatch");
  for (int i = 0; i < bins; ++i) {
    if (static_cast<int>(scm[i].size()) != sources)
      throw std::invalid_argument("FcaParams: source count mismatch");
    if (power[i].rows() != sources || power[i].cols() != frames)
      throw std::invalid_argument("FcaParams: power shape mismatch");
    if (!(power[i].minCoeff() > 0.0))
      throw std::invalid_argument("FcaParams: nonpositive source power");
    for (const CMat& r : scm[i])
      if (r.rows() != dim || r.cols() != dim || !is_positive_definite(r))
        throw std::invalid_argument("FcaParams: SCM not Hermitian PD");
  }
}

void FastFcaParams::validate() const {
  if (static_cast<int>(decorr.size()) != bins ||
      static_cast<int>(loading.size()) != bins ||
      static_cast<int>(act.size()) != bins)
    throw std::invalid_argument("FastFcaParams: bin count mismatch");
  for (int i = 0; i < bins; ++i) {
    if (decorr[i].rows() != dim || decorr[i].cols() != dim)
      throw std::invalid_argument("FastFcaParams: decorrelation shape");
    if (!decorr[i].allFinite())
      throw std::invalid_argument("FastFcaParams: non-finite decorrelation");
    log_abs_det2(decorr[i]);  // throws when singular
    if (loading[i].rows() != dim || loading[i].cols() != sources ||
        act[i].rows() != sources || act[i].cols() != frames)
      throw std::invalid_argument("FastFcaParams: loading/act shape");
    if (!(loading[i].minCoeff() > 0.0) || !(act[i].minCoeff() > 0.0))
      throw std::invalid_argument("FastFcaParams: nonpositive loading/act");
  }
}

RMat decorrelated_powers(const SampleCovSet& covs, int i, const CMat& w) {
  RMat u;
  if (covs.has_snapshots()) {
    u = (w.adjoint() * covs.snapshots[i]).cwiseAbs2();
  } else {
    const int m = covs.dim, blocks = covs.blocks;
    u.resize(m, blocks);
    for (int j = 0; j < blocks; ++j) {
      const CMat xw = covs.mats[i][j] * w;
      for (int k = 0; k < m; ++k)
        u(k, j) = std::max(0.0, std::real(w.col(k).dot(xw.col(k))));
    }
  }
  return u;
}

DecorrelatedStats decorrelated_stats(const SampleCovSet& covs, int i,
                                     const CMat& w, const RMat& loading,
                                     const RMat& act) {
  DecorrelatedStats s;
  s.powers = decorrelated_powers(covs, i, w);
  s.mix_vars = (loading * act).array() + var_eps(covs.power(i));
  return s;
}

double log_abs_det2(const CMat& w) {
  Eigen::PartialPivLU<CMat> lu(w);
  const auto diag = lu.matrixLU().diagonal();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    const double a = std::abs(diag(k));
    if (!(a > 0.0) || !std::isfinite(a))
      throw NumericalError("singular decorrelation matrix");
    acc += std::log(a);
  }
  return 2.0 * acc;
}

double fca_nll_freq(const SampleCovSet& covs, int i,
                    const std::vector<CMat>& scm_i, const RMat& power_i) {
  const int m = covs.dim, blocks = covs.blocks;
  const int sources = static_cast<int>(scm_i.size());
  double acc = 0.0;
  CMat x(m, m);
  for (int j = 0; j < blocks; ++j) {
    x.setZero();
    for (int n = 0; n < sources; ++n) x += power_i(n, j) * scm_i[n];
    Eigen::LLT<CMat> llt(x);
    if (llt.info() != Eigen::Success)
      throw NumericalError("fca_nll: mixture covariance not PD");
    acc += 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
    if (covs.has_snapshots()) {
      const CVec xj = covs.snapshots[i].col(j);
      const CVec sol = llt.solve(xj);
      acc += std::real(xj.dot(sol));
    } else {
      acc += std::real(llt.solve(covs.mats[i][j]).trace());
    }
  }
  return acc;
}

double fastfca_nll_freq(const SampleCovSet& covs, int i, const CMat& w,
                        const RMat& loading, const RMat& act) {
  const DecorrelatedStats s = decorrelated_stats(covs, i, w, loading, act);
  const double logdet = log_abs_det2(w);
  return -covs.blocks * logdet +
         (s.powers.array() / s.mix_vars.array()).sum() +
         s.mix_vars.array().log().sum();
}

namespace {

RMat replicate_columns(const RMat& block_cols, int block_size, int frames) {
  RMat out(block_cols.rows(), frames);
  for (int j = 0; j < frames; ++j) {
    const int jb = std::min<int>(j / block_size,
                                 static_cast<int>(block_cols.cols()) - 1);
    out.col(j) = block_cols.col(jb);
  }
  return out;
}

}  // namespace

FcaParams expand_block_params(const FcaParams& params, int block_size,
                              int frames) {
  if (block_size == 1 && frames == params.frames) return params;
  FcaParams out = params;
  out.frames = frames;
  for (int i = 0; i < params.bins; ++i)
    out.power[i] = replicate_columns(params.power[i], block_size, frames);
  return out;
}

FastFcaParams expand_block_params(const FastFcaParams& params, int block_size,
                                  int frames) {
  if (block_size == 1 && frames == params.frames) return params;
  FastFcaParams out = params;
  out.frames = frames;
  for (int i = 0; i < params.bins; ++i)
    out.act[i] = replicate_columns(params.act[i], block_size, frames);
  return out;
}

namespace {

void check_shapes(const SampleCovSet& covs, int dim, int bins, int frames) {
  if (covs.dim != dim || covs.bins != bins || covs.blocks != frames)
    throw std::invalid_argument("nll: covariance/parameter shape mismatch");
}

}  // namespace

double fca_nll(const SampleCovSet& covs, const FcaParams& params) {
  check_shapes(covs, params.dim, params.bins, params.frames);
  double acc = 0.0;
  for (int i = 0; i < covs.bins; ++i)
    acc += fca_nll_freq(covs, i, params.scm[i], params.power[i]);
  return acc;
}

double fastfca_nll(const SampleCovSet& covs, const FastFcaParams& params) {
  check_shapes(covs, params.dim, params.bins, params.frames);
  double acc = 0.0;
  for (int i = 0; i < covs.bins; ++i)
    acc += fastfca_nll_freq(covs, i, params.decorr[i], params.loading[i],
                            params.act[i]);
  return acc;
}

}  // namespace fastfca
