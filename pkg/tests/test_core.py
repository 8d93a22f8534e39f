"""Engine-level tests: acceptance rules, stepping, chains, verification hooks."""

import math

import numpy as np
import pytest

from imcmc.core import (
    AcceptanceRule,
    AuxiliaryConditional,
    ImcmcKernel,
    Involution,
    Layout,
    chain_rngs,
    compose,
    log_accept,
    make_rng,
    random_points,
    run_chain,
    verify_involution,
    verify_jacobian,
)
from imcmc.errors import ConfigError, DensityError
from imcmc.maps import LeapfrogConfig, hmc_involution, leapfrog_flow, swap_blocks
from imcmc.samplers import make_mh, normal_momentum
from imcmc.targets import GridDensity, grid_conditional, standard_normal


def test_log_accept_equal_densities():
    assert log_accept(AcceptanceRule.METROPOLIS, -1.0, -1.0, 0.0) == 1.0
    assert log_accept(AcceptanceRule.BARKER, -1.0, -1.0, 0.0) == 0.5


def test_log_accept_two_thirds_ratio():
    # min{1, (1/3)/(2/3)} = 0.5, evaluated directly
    p = log_accept(AcceptanceRule.METROPOLIS, math.log(2 / 3), math.log(1 / 3), 0.0)
    assert abs(p - 0.5) < 1e-15


def test_log_accept_uses_jacobian():
    assert log_accept(AcceptanceRule.METROPOLIS, 0.0, 0.0, -math.log(2.0)) == pytest.approx(0.5)


def test_log_accept_zero_density_proposal_rejected():
    assert log_accept(AcceptanceRule.METROPOLIS, -1.0, -math.inf, 0.0) == 0.0
    assert log_accept(AcceptanceRule.BARKER, -1.0, -math.inf, 0.0) == 0.0


def test_log_accept_nan_raises():
    with pytest.raises(DensityError):
        log_accept(AcceptanceRule.METROPOLIS, math.nan, 0.0, 0.0)


def test_barker_bounded():
    for delta in (-50.0, -1.0, 0.0, 1.0, 50.0):
        p = log_accept(AcceptanceRule.BARKER, 0.0, delta, 0.0)
        assert 0.0 <= p <= 1.0


def test_independence_sampler_always_accepts():
    # auxiliary drawn from the target itself plus a swap: unit ratio
    sn = standard_normal(1)
    cond = AuxiliaryConditional(
        lambda rng, pt: rng.standard_normal(1),
        lambda v, pt: sn.logpdf(np.asarray(v)),
        name="independent")
    kern = make_mh(sn, cond)
    rng = make_rng(0)
    pt = kern.layout.point([0.3], [0.0])
    for _ in range(200):
        out = kern.step(pt, rng)
        assert out.prob == 1.0
        assert out.accepted
        pt = out.point


def test_measure_preserving_involution_always_accepts():
    # flipping the momentum of a symmetric joint leaves the density unchanged
    from imcmc.maps import momentum_flip

    sn = standard_normal(1)
    layout = Layout(x_dim=1, v_dim=1, slots={"v": slice(0, 1)})
    kern = ImcmcKernel(layout, lambda pt: sn.logpdf(pt.x),
                       aux_refresh=[("v", normal_momentum(1))],
                       involution=momentum_flip(slot="v"))
    rng = make_rng(1)
    pt = layout.point([0.5], [0.0])
    for _ in range(100):
        out = kern.step(pt, rng)
        assert out.prob == 1.0
        pt = out.point


def test_two_state_flip_kernel_matrix():
    # hand-enumerated: from the heavy state accept w.p. 1/2, from the light state always
    grid = GridDensity(np.array([0.0, 1.0]), np.log(np.array([2 / 3, 1 / 3])))
    flip = grid_conditional(
        [np.array([0.0]), np.array([1.0])],
        lambda pt: np.array([0.0, 1.0]) if pt.x[0] == 0.0 else np.array([1.0, 0.0]))
    kern = make_mh(grid.density(), flip)

    from imcmc.diagnostics import marginal_matrix, stationary_pmf, transition_matrix

    states = [kern.layout.point([x], [v]) for x in (0.0, 1.0) for v in (0.0, 1.0)]
    T = transition_matrix(kern, states)
    p = stationary_pmf(states, lambda pt: grid.logpdf(pt.x) + flip.logpdf(pt.slot("v"), pt))
    Tx, _ = marginal_matrix(T, p, [0, 0, 1, 1])
    assert np.allclose(Tx, [[0.5, 0.5], [1.0, 0.0]], atol=1e-15)


def test_two_state_chain_frequency():
    grid = GridDensity(np.array([0.0, 1.0]), np.log(np.array([2 / 3, 1 / 3])))
    flip = grid_conditional(
        [np.array([0.0]), np.array([1.0])],
        lambda pt: np.array([0.0, 1.0]) if pt.x[0] == 0.0 else np.array([1.0, 0.0]))
    kern = make_mh(grid.density(), flip)
    res = run_chain(kern, kern.layout.point([0.0], [1.0]), 100000, seed=7)
    assert abs(float((res.xs[:, 0] == 0.0).mean()) - 2 / 3) < 0.01


def test_run_chain_empty_and_reproducible():
    sn = standard_normal(1)
    kern = make_mh(sn, normal_momentum(1))
    init = kern.layout.point([0.0], [0.0])
    empty = run_chain(kern, init, 0, seed=1)
    assert empty.xs.shape == (0, 1)

    a = run_chain(kern, init, 500, seed=42)
    b = run_chain(kern, init, 500, seed=42)
    assert np.array_equal(a.xs, b.xs)
    c = run_chain(kern, init, 500, seed=43)
    assert not np.array_equal(a.xs, c.xs)


def test_run_chain_rejects_bad_init():
    grid = GridDensity(np.array([0.0, 1.0]), np.log(np.array([0.5, 0.5])))
    kern = make_mh(grid.density(), grid_conditional(
        [np.array([0.0]), np.array([1.0])], lambda pt: np.array([0.5, 0.5])))
    with pytest.raises(DensityError):
        run_chain(kern, kern.layout.point([7.0], [0.0]), 10, seed=0)
    with pytest.raises(ConfigError):
        run_chain(kern, kern.layout.point([0.0], [0.0]), -1, seed=0)


def test_chain_rngs_split_deterministically():
    a = chain_rngs(5, 3)
    b = chain_rngs(5, 3)
    for ra, rb in zip(a, b):
        assert ra.random() == rb.random()
    # distinct streams across chains
    c = chain_rngs(5, 2)
    assert c[0].random() != c[1].random()


def test_compose_requires_kernels_and_shared_layout():
    with pytest.raises(ConfigError):
        compose([])
    sn = standard_normal(1)
    k1 = make_mh(sn, normal_momentum(1))
    k2 = make_mh(standard_normal(2), normal_momentum(2))
    with pytest.raises(ConfigError):
        compose([k1, k2])


def test_single_kernel_composition_matches_kernel():
    sn = standard_normal(1)
    kern = make_mh(sn, normal_momentum(1))
    comp = compose([kern])
    init = kern.layout.point([0.2], [0.0])
    a = run_chain(kern, init, 300, seed=3)
    b = run_chain(comp, init, 300, seed=3)
    assert np.array_equal(a.xs, b.xs)


def test_involution_layout_mismatch_is_config_error():
    sn = standard_normal(1)
    layout = Layout(x_dim=1, v_dim=1, slots={"v": slice(0, 1)})

    def bad(zpt):
        return zpt.with_x(np.zeros(2)), 0.0

    kern = ImcmcKernel(layout, lambda pt: sn.logpdf(pt.x),
                       aux_refresh=[("v", normal_momentum(1))],
                       involution=Involution(bad, name="bad"))
    with pytest.raises(ConfigError):
        kern.step(layout.point([0.0], [0.0]), make_rng(0))


def test_verify_involution_swap_exact():
    layout = Layout(x_dim=2, v_dim=2, slots={"v": slice(0, 2)})
    pts = random_points(layout, 50, make_rng(0))
    rep = verify_involution(swap_blocks(slot="v"), pts)
    assert rep.max_displacement == 0.0
    assert rep.passed


def test_verify_involution_rejects_plain_leapfrog():
    # the integrator alone is a shift, not an involution
    sn = standard_normal(1)
    flow = leapfrog_flow(LeapfrogConfig(0.1, 5), sn.grad)
    fake = Involution(lambda z: flow.forward(z), name="not_involutive")
    layout = Layout(x_dim=1, v_dim=1, slots={"v": slice(0, 1)})
    rep = verify_involution(fake, random_points(layout, 20, make_rng(1)))
    assert not rep.passed
    assert rep.max_displacement > 1e-3


def test_verify_involution_hmc_composite():
    sn = standard_normal(1)
    inv = hmc_involution(LeapfrogConfig(0.1, 5), sn.grad)
    layout = Layout(x_dim=1, v_dim=1, slots={"v": slice(0, 1)})
    rep = verify_involution(inv, random_points(layout, 100, make_rng(2)), tol=1e-10)
    assert rep.passed


def test_verify_jacobian_swap():
    layout = Layout(x_dim=2, v_dim=2, slots={"v": slice(0, 2)})
    pt = random_points(layout, 1, make_rng(3))[0]
    rep = verify_jacobian(swap_blocks(slot="v"), pt, tol=1e-6)
    assert rep.reported_logdet == 0.0
    assert rep.passed


def test_random_points_respect_tag_domains():
    layout = Layout(x_dim=1, v_dim=0, tags=("d",), tag_values={"d": (-1, 1)})
    pts = random_points(layout, 40, make_rng(4))
    assert {pt.tag("d") for pt in pts} <= {-1, 1}
