// Box instance in the Euclidean plane: T = P_[0,1]^2, A = I, lambda = 1,
// u = (2, 0.5). The VI solution is the nearest point of the box to u.

#include <cstdio>

#include "vifix/vifix.hpp"

using namespace vifix;

int main() {
  const Space plane(2, 2.0);
  Vec lo(2), hi(2), u(2);
  lo << 0, 0;
  hi << 1, 1;
  u << 2, 0.5;

  Family fam;
  fam.members = {Map::projection(Box{lo, hi})};
  const auto A = AccretiveOperator::scaled_identity(2, 1.0);
  const StepSchedule sched = make_schedule(plane, A, 1.0, ClippedPrototypeRule{0.0});
  const ProblemInstance inst{plane, fam, A, u, sched, false};

  std::printf("lambda = %g  omega = %g  t_max = %g  n0 = %lld\n", sched.lambda, sched.omega, sched.t_max, sched.n0);

  const Vec oracle = projection_oracle(u, ConvexSet{{Box{lo, hi}}});
  const PathResult path = implicit_path(inst, geometric_t_sequence(0.5, 0.5, 20), plane.zero(), 1e-12, 1000000);
  const IterationTrace ex = explicit_iterate(inst, plane.zero(), StopRule{1000000, 0.0});

  std::printf("oracle    (%.12f, %.12f)\n", oracle[0], oracle[1]);
  std::printf("implicit  (%.12f, %.12f)  after %lld solves\n", path.trace.final[0], path.trace.final[1],
              path.trace.steps);
  std::printf("explicit  (%.12f, %.12f)  after %lld steps\n", ex.final[0], ex.final[1], ex.steps);

  const auto probes = probe_generator(fam, plane, ProbeOptions{100, 1});
  const VICertificate cert = vi_residual(inst, ex.final, probes);
  std::printf("vi max residual %.3e over %zu probes, fixed-point residual %.3e\n", cert.max_residual,
              cert.probes.size(), cert.max_fixed_point_residual());
  return cert.certified() ? 0 : 1;
}
