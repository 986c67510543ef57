#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace dcmstep {

/// Physical constants of the pendulum model. omega0 is always recomputed
/// from (gravity, com_height); it cannot be set independently.
struct ModelParams {
  double com_height;    // [m], constant by model assumption
  double gravity;       // [m/s^2]
  double mass;          // [kg]
  double pelvis_width;  // [m], default lateral foot separation
  double omega0;        // sqrt(g / z0) [1/s]

  ModelParams(double com_height_m, double gravity_mps2, double mass_kg,
              double pelvis_width_m)
      : com_height(com_height_m),
        gravity(gravity_mps2),
        mass(mass_kg),
        pelvis_width(pelvis_width_m),
        omega0(0.0) {
    if (!(com_height > 0.0)) throw std::invalid_argument("com_height must be > 0");
    if (!(gravity > 0.0)) throw std::invalid_argument("gravity must be > 0");
    if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
    if (!(pelvis_width >= 0.0)) throw std::invalid_argument("pelvis_width must be >= 0");
    omega0 = std::sqrt(gravity / com_height);
  }

  /// Human-scale defaults: 0.8 m CoM height, 60 kg, 0.2 m pelvis.
  static ModelParams defaults() { return ModelParams(0.8, 9.81, 60.0, 0.2); }
};

/// Horizontal CoM state. Dynamics are decoupled per axis; all operations
/// below act componentwise on the two axes.
struct ComState {
  Eigen::Vector2d pos{0.0, 0.0};  // [m]
  Eigen::Vector2d vel{0.0, 0.0};  // [m/s]
};

struct Dcm {
  Eigen::Vector2d xi{0.0, 0.0};  // [m]
};

/// Point of contact. Even indices are one foot side, odd the other
/// (convention here: odd = left foot in stance).
struct Footprint {
  Eigen::Vector2d pos{0.0, 0.0};  // [m]
  int index = 0;
};

struct DcmOffset {
  Eigen::Vector2d b{0.0, 0.0};  // [m]
};

inline Dcm dcm_from_state(const ComState& c, const ModelParams& p) {
  return Dcm{c.pos + c.vel / p.omega0};
}

/// DCM under a fixed contact: xi(t) = (xi0 - u0) e^{w0 t} + u0.
inline Dcm propagate_dcm(const Dcm& xi0, const Footprint& u0, double t,
                         const ModelParams& p) {
  const double growth = std::exp(p.omega0 * t);
  return Dcm{(xi0.xi - u0.pos) * growth + u0.pos};
}

/// Closed-form CoM propagation under a fixed contact. The plant is never
/// numerically integrated.
inline ComState propagate_com(const ComState& c0, const Footprint& u0, double t,
                              const ModelParams& p) {
  const double ch = std::cosh(p.omega0 * t);
  const double sh = std::sinh(p.omega0 * t);
  ComState out;
  out.pos = u0.pos + (c0.pos - u0.pos) * ch + (c0.vel / p.omega0) * sh;
  out.vel = (c0.pos - u0.pos) * (p.omega0 * sh) + c0.vel * ch;
  return out;
}

inline DcmOffset dcm_offset(const Dcm& xi, const Footprint& u) {
  return DcmOffset{xi.xi - u.pos};
}

}  // namespace dcmstep
