// Checks backpropagation for one small net against central differences and
// prints the worst coordinate per loss.

#include <cstdio>

#include "imba_ids/trainer.hpp"

using namespace imba_ids;

int main() {
  Rng rng(3);
  MlpModel model = MlpModel::initialize(6, {12, 12}, 4, rng);
  for (auto& layer : model.layers)
    for (double& b : layer.bias) b = 0.1 * rng.normal();
  Matrix x(8, 6);
  for (double& v : x.values()) v = rng.normal();
  const LabelVector y = {0, 1, 2, 3, 0, 0, 1, 2};

  LossSpec ce, as;
  as.kind = AttackSharing{10.0};
  for (const auto& [name, spec] : {std::pair{"cross_entropy", ce}, std::pair{"attack_sharing", as}}) {
    const GradCheckResult r = gradient_check(model, spec, x, y);
    std::printf("%-15s max rel err %.2e over %zu coordinates (%zu skipped at kinks)\n", name, r.max_rel_error,
                r.checked, r.skipped);
  }
}
