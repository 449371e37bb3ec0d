// Two bandit games that agree on the covered cells of a two-sample
// dataset: no policy pair has a small duality gap on both.

#include <iostream>

#include "pmvi/evaluation.hpp"
#include "pmvi/games.hpp"
#include "pmvi/value_iteration.hpp"

int main() {
  using namespace pmvi;
  const auto m1 = bandit_r1();
  const auto m2 = bandit_r2();

  Rng rng(1);
  const auto data = collect_predetermined(m1, {{1, 1}, {2, 2}}, rng);
  const auto out = run_pmvi(m1, data);
  const auto on_m1 = suboptimality(m1, out.pi_hat, out.nu_hat);
  const auto on_m2 = suboptimality(m2, out.pi_hat, out.nu_hat);
  std::cout << "gap on M1 " << on_m1.sub << "\ngap on M2 " << on_m2.sub << "\nsum       "
            << on_m1.sub + on_m2.sub << '\n';
}
