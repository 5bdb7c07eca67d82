// Learns the obstacle weights of one generated environment from simulated
// corrections and prints the normalized cost after every correction.
//
//   learn_one_environment [kernel] [beta]      e.g. learn_one_environment rbf:3 20

#include <cstdio>
#include <string>

#include "lfc/learner.hpp"
#include "lfc/scenario.hpp"
#include "lfc/sim_user.hpp"

int main(int argc, char** argv) {
  const std::string kernel_name = argc > 1 ? argv[1] : "velocity";
  const double beta = argc > 2 ? std::stod(argv[2]) : 20.0;

  const lfc::Environment env = lfc::generate_environment(2, 1, 42);
  const lfc::Reference ref = lfc::make_reference(env, lfc::PlannerConfig{});
  const lfc::PropagationKernel kernel = lfc::make_kernel(lfc::KernelSpec::parse(kernel_name), 40);

  lfc::SimulatedUser user(ref.optimal, lfc::SimUserConfig{});
  const lfc::LearningTrace trace = lfc::run_loop(
      env, kernel, beta, 20, [&](const lfc::Trajectory& planned) { return user(planned); }, {}, &ref);

  std::printf("kernel %s, beta %g, true w = [%g, %g]\n", kernel_name.c_str(), beta, (*env.ground_truth_w)[0], (*env.ground_truth_w)[1]);
  for (const lfc::TraceRecord& r : trace.records) {
    std::printf("%2d  t=%2d  cost %+.4f  w = [%+.3f, %+.3f]\n", r.iteration, r.correction.t, *r.normalized_cost,
                r.w_after[0], r.w_after[1]);
  }
  if (trace.stopped_early()) std::printf("planned trajectory matched the optimum, stopped early\n");
  return 0;
}
