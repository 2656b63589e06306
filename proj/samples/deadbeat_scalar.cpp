// Scalar plant x+ = 0.5 x + u, three noiseless samples, decay rate 0.25.
// Prints the synthesized gain and the closed-loop pole.

#include <cmath>
#include <cstdio>

#include "ddswitch/ddswitch.hpp"

int main() {
  using namespace ddswitch;
  const SystemPair plant{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0)};
  Matrix u(1, 2);
  u << 1.0, -0.5;
  const DataMatrices data = simulate_mode(plant, Vector::Constant(1, 1.0), u);

  const SynthResult r = synth_gain(data, 0.25);
  std::printf("status: %s\n", to_string(r.status));
  if (!r.certificate) return 1;
  const double k = r.certificate->K(0, 0);
  std::printf("K = %.9f  P = %.6g  closed-loop pole = %.3e\n", k, r.certificate->P(0, 0), 0.5 + k);
  return std::abs(0.5 + k) <= 0.5 + 1e-6 ? 0 : 1;
}
