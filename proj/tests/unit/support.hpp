#pragma once

#include <cstdint>
#include <random>

#include "wtdchain/chain_model.hpp"

namespace wtdchain::testing {

// The reference parameter set: V = J = 1, gamma = 0.1, f1 = 1, fL = 0.
inline ChainSpec reference_chain(Eigen::Index sites, double gamma = 0.1) {
  return ChainSpec{build_tight_binding(sites, 1.0, 1.0), gamma, gamma, 1.0, 0.0};
}

// Nothing special about these values; every rate and Fermi factor is generic.
inline ChainSpec generic_chain(Eigen::Index sites) {
  CMatrix h = build_tight_binding(sites, 0.3, 0.8);
  h(0, 1) = Complex(-0.8, 0.25);
  h(1, 0) = std::conj(h(0, 1));
  return ChainSpec{h, 0.37, 0.21, 0.7, 0.2};
}

inline CMatrix random_matrix(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  CMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(d(rng), d(rng));
  }
  return a;
}

// Hermitian with spectrum inside [lo, hi].
inline CMatrix random_covariance(std::mt19937_64& rng, Eigen::Index n, double lo = 0.05,
                                 double hi = 0.95) {
  const CMatrix a = random_matrix(rng, n);
  Eigen::HouseholderQR<CMatrix> qr(a);
  const CMatrix u = qr.householderQ();
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd ev(n);
  for (Eigen::Index k = 0; k < n; ++k) ev(k) = d(rng);
  return u * ev.cast<Complex>().asDiagonal() * u.adjoint();
}

}  // namespace wtdchain::testing
