#pragma once

#include <optional>
#include <string>

#include "bpre/environment.hpp"

namespace bpre {

enum class Regime { strongly_subcritical, intermediate_subcritical, weakly_subcritical };

std::string to_string(Regime r);  // "SS" / "IS" / "WS"

// Which asymptotic case governs k-particle joint survival: the sign of E(m^k log m).
enum class JointSurvivalCase { decaying, boundary, interior };  // < 0, = 0, > 0
std::string to_string(JointSurvivalCase c);  // "i" / "ii" / "iii"

// |E(m log m)| at or below this is classified as intermediate.
inline constexpr double kRegimeTieTolerance = 1e-10;

struct AlphaGamma {
  double alpha;  // argmin over [0,1] of E(m^theta)
  double gamma;  // the minimum
};

struct GammaTilde {
  unsigned k;
  double alpha_tilde;
  double gamma_tilde;
  JointSurvivalCase joint_case;
  double slope_at_k;  // E(m^k log m)
};

struct RegimeReport {
  bool subcritical;
  Regime regime;
  double alpha;
  double gamma;
  double e_log_m;
  double e_m_log_m;
  double e_m;
  std::optional<GammaTilde> k_particle;
};

// Throws NotSubcriticalError when E(log m) >= 0.
RegimeReport classify(const EnvironmentModel& model, std::optional<unsigned> k = std::nullopt);

AlphaGamma solve_alpha(const EnvironmentModel& model);

GammaTilde solve_gamma_tilde(const EnvironmentModel& model, unsigned k);

}  // namespace bpre
