"""The finite-state oracles: stationarity, reversibility, irreversibility.

On spaces small enough to enumerate, a kernel's transition matrix can be
computed exactly by summing over every auxiliary draw and accept/reject
branch.  That turns two structural theorems into machine checks:

- the fixed-point equation p T = p holds for every kernel built here;
- a single kernel is reversible, while compositions of kernels can break
  detailed balance without losing stationarity - which is the entire point
  of the persistent constructions.
"""

import numpy as np

from imcmc.diagnostics import check_detailed_balance, check_stationary
from imcmc.suite import finite_cases

cases = {c.name: c for c in finite_cases()}

print(f"{'case':32s} {'states':>6s} {'‖pT−p‖':>10s} {'balance asym':>12s}")
for name in ("mh_2state_metropolis", "hmc_grid", "rmhmc_grid", "mtm_2state_k2",
             "gibbs_random_2x2", "gibbs_systematic_2x2", "persistent_hmc_grid",
             "lifted_3state", "irr_mala_grid", "nrj_bits"):
    case = cases[name]
    Tg = case.check_matrix()
    stat = check_stationary(Tg, case.check_pmf)
    bal = check_detailed_balance(Tg, case.check_pmf)
    marker = "irreversible" if bal.max_asymmetry > 1e-6 else "reversible"
    print(f"{name:32s} {len(case.states):>6d} {stat.residual:>10.2e} "
          f"{bal.max_asymmetry:>12.2e}  {marker}")

print("""
Reading the table: every chain preserves its target to machine precision.
The single kernels (top block) are in detailed balance; the compositions
built from a persistent direction or an ordered sweep show order-one
asymmetry in the probability flow - irreversible on purpose.
""")

# The oracle is discriminating: corrupt the acceptance rule and the
# fixed-point residual jumps ten orders of magnitude.
from imcmc.suite import mutant_case

mut = mutant_case()
resid = check_stationary(mut.check_matrix(), mut.check_pmf)
print(f"mutant kernel (acceptance raised to 1.3): residual {resid.residual:.2e}")
