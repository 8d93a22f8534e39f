"""Assembling a transition kernel from its three parts.

Every kernel in this library is the same machine: conditionals that refresh
auxiliary slots, a deterministic self-inverse map with a log-Jacobian, and
an accept/reject test on the joint density ratio.  This script builds plain
Metropolis-Hastings out of those parts and checks it against a transition
matrix small enough to write down by hand.
"""

import numpy as np

from imcmc.core import run_chain
from imcmc.diagnostics import marginal_matrix, stationary_pmf, transition_matrix
from imcmc.samplers import make_mh
from imcmc.targets import GridDensity, grid_conditional

# A two-state target with weights (2/3, 1/3) and a proposal that always
# offers the other state.  From the heavy state the move is accepted with
# probability 1/2, from the light state always.
grid = GridDensity(np.array([0.0, 1.0]), np.log(np.array([2 / 3, 1 / 3])))
flip = grid_conditional(
    [np.array([0.0]), np.array([1.0])],
    lambda pt: np.array([0.0, 1.0]) if pt.x[0] == 0.0 else np.array([1.0, 0.0]))

kernel = make_mh(grid.density(), flip)
print("kernel:", kernel.name)
print("layout: x block of", kernel.layout.x_dim, "| aux slots", list(kernel.layout.slots))

# The swap involution exchanges the state with the freshly drawn proposal.
point = kernel.layout.point([0.0], [1.0])
prob, proposal = kernel.acceptance(point)
print(f"\nfrom state 0 proposing 1: acceptance {prob:.3f} (expected 0.5)")

# Exact transition matrix over the four joint (state, proposal) pairs,
# then lumped onto the state coordinate.
states = [kernel.layout.point([x], [v]) for x in (0.0, 1.0) for v in (0.0, 1.0)]
T = transition_matrix(kernel, states)
p = stationary_pmf(states, lambda pt: grid.logpdf(pt.x) + flip.logpdf(pt.slot("v"), pt))
Tx, _ = marginal_matrix(T, p, [0, 0, 1, 1])
print("\nexact state-to-state matrix:")
print(Tx)
print("hand computation:            [[0.5 0.5], [1.0 0.0]]")

# Long-run frequencies agree with the target weights.
res = run_chain(kernel, kernel.layout.point([0.0], [1.0]), 100_000, seed=7)
freq = float((res.xs[:, 0] == 0.0).mean())
print(f"\nempirical weight of state 0 over 10^5 steps: {freq:.4f} (target 2/3)")
print(f"acceptance rate: {res.accepted.mean():.3f}")
