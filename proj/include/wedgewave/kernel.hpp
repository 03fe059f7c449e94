#ifndef WEDGEWAVE_KERNEL_HPP
#define WEDGEWAVE_KERNEL_HPP

#include "wedgewave/quadrature.hpp"

namespace wedgewave {

// The averaging family h_T(t) = |T|^{-eps} h(|T|^{-eps} (t - T)) with a
// nonnegative, even, unit-integral base profile h.

enum class KernelProfile { gaussian, bump };

inline const char* to_string(KernelProfile p) {
  return p == KernelProfile::gaussian ? "gaussian" : "bump";
}

namespace detail {

inline double bump_normalization() {
  static const double value = [] {
    // integral of exp(-1/(1-u^2)) over (-1, 1)
    return integrate_legendre(
        [](double u) {
          const double d = 1.0 - u * u;
          return d > 0 ? std::exp(-1.0 / d) : 0.0;
        },
        -1.0, 1.0, 513);
  }();
  return 1.0 / value;
}

}  // namespace detail

struct AveragingKernel {
  KernelProfile profile = KernelProfile::gaussian;
  double exponent = 0.5;          // the kernel exponent in (0, 1)
  double center = 8.0;            // T, signed
  double window_halfwidth = 8.0;  // gaussian window, in units of |T|^eps

  void validate() const {
    if (!(exponent > 0.0 && exponent < 1.0))
      throw ConfigError("AveragingKernel: kernel_exponent must lie in (0,1)");
    if (center == 0.0) throw ConfigError("AveragingKernel: T must be nonzero");
    if (!(window_halfwidth > 0.0))
      throw ConfigError("AveragingKernel: window_halfwidth must be positive");
  }

  double scale() const { return std::pow(std::abs(center), exponent); }

  double base(double u) const {
    switch (profile) {
      case KernelProfile::gaussian:
        return std::exp(-0.5 * u * u) / std::sqrt(2.0 * kPi);
      case KernelProfile::bump: {
        const double d = 1.0 - u * u;
        return d > 0 ? detail::bump_normalization() * std::exp(-1.0 / d) : 0.0;
      }
    }
    return 0.0;
  }

  double value(double t) const {
    const double s = scale();
    return base((t - center) / s) / s;
  }

  // |hhat(omega)| of the base profile; for the rescaled family
  // |hhat_T(omega)| = |hhat(|T|^eps omega)|.
  double base_fourier_abs(double omega) const {
    switch (profile) {
      case KernelProfile::gaussian:
        return std::exp(-0.5 * omega * omega);
      case KernelProfile::bump: {
        Complex v = integrate_legendre(
            [this, omega](double u) { return base(u) * std::polar(1.0, omega * u); },
            -1.0, 1.0, 513);
        return std::abs(v);
      }
    }
    return 0.0;
  }

  std::pair<double, double> window() const {
    const double w = (profile == KernelProfile::bump) ? 1.0 : window_halfwidth;
    return {center - w * scale(), center + w * scale()};
  }

  // Mass of h_T outside the quadrature window (zero for the bump profile).
  double tail_mass() const {
    if (profile == KernelProfile::bump) return 0.0;
    return std::erfc(window_halfwidth / kSqrt2);
  }

  double unit_integral_residual(int nodes = 257) const {
    auto [a, b] = window();
    const double integral =
        integrate_legendre([this](double t) { return value(t); }, a, b, nodes);
    return std::abs(integral + tail_mass() - 1.0);
  }
};

}  // namespace wedgewave

#endif  // WEDGEWAVE_KERNEL_HPP
