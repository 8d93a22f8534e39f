"""Integrators, flows, combinators, coupling layers, CDF rotation."""

import math

import numpy as np
import pytest

from imcmc.core import Layout, make_rng, random_points, verify_involution, verify_jacobian
from imcmc.errors import ConfigError, FixedPointError
from imcmc.maps import (
    CouplingMap,
    LeapfrogConfig,
    Metric,
    RiemannianHamiltonian,
    additive_coupling,
    affine_coupling,
    affine_x_flow,
    cdf_map,
    constant_metric,
    cycle_flow,
    direction_augment,
    embed,
    hmc_involution,
    identity_flow,
    implicit_hmc_involution,
    implicit_leapfrog,
    implicit_leapfrog_inverse,
    leapfrog,
    leapfrog_inverse,
    mixture_involution,
    momentum_flip,
    swap_blocks,
    swap_slots,
)
from imcmc.targets import mog2, normal_cdf1d, standard_normal

SN1 = standard_normal(1)
LAY1 = Layout(x_dim=1, v_dim=1, slots={"v": slice(0, 1)})
LAY2 = Layout(x_dim=2, v_dim=2, slots={"v": slice(0, 2)})


def hamiltonian(x, v):
    return 0.5 * float(x @ x) + 0.5 * float(v @ v)


def test_leapfrog_config_validation():
    with pytest.raises(ConfigError):
        LeapfrogConfig(0.0, 1)
    with pytest.raises(ConfigError):
        LeapfrogConfig(0.1, 0)


def test_leapfrog_energy_error_small():
    x, v = np.array([0.0]), np.array([1.0])
    x1, v1 = leapfrog(x, v, LeapfrogConfig(0.1, 10), SN1.grad)
    assert abs(hamiltonian(x1, v1) - hamiltonian(x, v)) <= 1e-3


def test_leapfrog_matches_fine_reference():
    # high-resolution integration of the same dynamics over the same time span
    x, v = np.array([0.4]), np.array([-0.8])
    coarse = leapfrog(x, v, LeapfrogConfig(0.1, 10), SN1.grad)
    fine = leapfrog(x, v, LeapfrogConfig(1e-4, 10000), SN1.grad)
    assert np.max(np.abs(np.concatenate(coarse) - np.concatenate(fine))) < 2e-3


def test_leapfrog_energy_scales_quadratically():
    x, v = np.array([0.0]), np.array([1.0])
    d1 = abs(hamiltonian(*leapfrog(x, v, LeapfrogConfig(0.1, 10), SN1.grad))
             - hamiltonian(x, v))
    d2 = abs(hamiltonian(*leapfrog(x, v, LeapfrogConfig(0.05, 20), SN1.grad))
             - hamiltonian(x, v))
    assert 3.0 <= d1 / d2 <= 5.0


def test_leapfrog_inverse_roundtrip():
    x, v = np.array([1.3, -0.2]), np.array([0.5, 0.9])
    g = standard_normal(2).grad
    cfg = LeapfrogConfig(0.2, 7)
    x1, v1 = leapfrog(x, v, cfg, g)
    x0, v0 = leapfrog_inverse(x1, v1, cfg, g)
    assert np.max(np.abs(np.concatenate([x0 - x, v0 - v]))) < 1e-10


def test_leapfrog_volume_preserving():
    inv = hmc_involution(LeapfrogConfig(0.1, 5), SN1.grad)
    pt = LAY1.point([0.7], [-0.4])
    rep = verify_jacobian(inv, pt, tol=1e-6)
    assert rep.passed  # |det J| = 1 against finite differences


def test_flip_and_swap_self_inverse():
    pts = random_points(LAY2, 30, make_rng(0))
    assert verify_involution(momentum_flip(slot="v"), pts).passed
    assert verify_involution(swap_blocks(slot="v"), pts).passed
    flip = momentum_flip(slot="v")
    z = LAY2.point([1.0, 2.0], [0.0, 0.0])
    z1, _ = flip.forward(z)
    assert np.array_equal(z1.v, -z.v)  # v = 0 is a fixed point


def test_swap_slots():
    lay = Layout(x_dim=1, v_dim=2, slots={"a": slice(0, 1), "b": slice(1, 2)})
    z = lay.point([0.0], [1.0, 2.0])
    inv = swap_slots("a", "b")
    z1, ld = inv.forward(z)
    assert ld == 0.0
    assert z1.slot("a")[0] == 2.0 and z1.slot("b")[0] == 1.0


def test_hmc_involution_eps_to_zero_limit():
    # vanishing step: the proposal tends to (x, -v)
    inv = hmc_involution(LeapfrogConfig(1e-8, 1), SN1.grad)
    z = LAY1.point([0.9], [0.4])
    z1, _ = inv.forward(z)
    assert abs(z1.x[0] - 0.9) < 1e-7
    assert abs(z1.v[0] + 0.4) < 1e-7


def test_hmc_involution_on_multimodal_target():
    inv = hmc_involution(LeapfrogConfig(0.1, 5), mog2().grad)
    rep = verify_involution(inv, random_points(LAY2, 100, make_rng(1)), tol=1e-10)
    assert rep.passed


def test_implicit_constant_metric_matches_explicit():
    c = 2.0
    ham = RiemannianHamiltonian(SN1.logpdf, SN1.grad, constant_metric(np.array([[c]])))
    x, v = np.array([0.3]), np.array([0.8])
    cfg = LeapfrogConfig(0.1, 7)
    xi, vi = implicit_leapfrog(x, v, cfg, ham)
    xe, ve = leapfrog(x, v, cfg, SN1.grad, grad_v=lambda w: -w / c)
    assert np.max(np.abs(np.concatenate([xi - xe, vi - ve]))) <= 1e-10


def test_implicit_converges_immediately_for_constant_metric():
    ham = RiemannianHamiltonian(SN1.logpdf, SN1.grad, constant_metric(np.array([[1.5]])))
    x, v = implicit_leapfrog(np.array([0.2]), np.array([-0.5]),
                             LeapfrogConfig(0.1, 1), ham, max_iter=2)
    assert np.all(np.isfinite(x)) and np.all(np.isfinite(v))


def test_implicit_nonconvergence_reports_residual():
    # a huge step makes the fixed-point iteration diverge
    met = Metric(g=lambda x: np.array([[1.0 + x[0] ** 2]]),
                 g_logdet=lambda x: math.log(1.0 + x[0] ** 2),
                 g_grad=lambda x: np.array([[[2.0 * x[0]]]]))
    ham = RiemannianHamiltonian(SN1.logpdf, SN1.grad, met)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(FixedPointError) as err:
            implicit_leapfrog(np.array([3.0]), np.array([5.0]),
                              LeapfrogConfig(40.0, 1), ham, max_iter=10)
    assert err.value.residual > 0.0


def test_implicit_involution_position_dependent_metric():
    met = Metric(g=lambda x: np.array([[1.0 + x[0] ** 2]]),
                 g_logdet=lambda x: math.log(1.0 + x[0] ** 2),
                 g_grad=lambda x: np.array([[[2.0 * x[0]]]]))
    ham = RiemannianHamiltonian(SN1.logpdf, SN1.grad, met)
    inv = implicit_hmc_involution(LeapfrogConfig(0.1, 3), ham)
    rep = verify_involution(inv, random_points(LAY1, 50, make_rng(2)), tol=1e-8)
    assert rep.passed


def test_implicit_inverse_roundtrip():
    met = Metric(g=lambda x: np.array([[1.0 + x[0] ** 2]]),
                 g_logdet=lambda x: math.log(1.0 + x[0] ** 2),
                 g_grad=lambda x: np.array([[[2.0 * x[0]]]]))
    ham = RiemannianHamiltonian(SN1.logpdf, SN1.grad, met)
    cfg = LeapfrogConfig(0.05, 4)
    x, v = np.array([0.6]), np.array([-0.3])
    x1, v1 = implicit_leapfrog(x, v, cfg, ham)
    x0, v0 = implicit_leapfrog_inverse(x1, v1, cfg, ham)
    assert np.max(np.abs(np.concatenate([x0 - x, v0 - v]))) < 1e-8


def test_direction_augment_identity_flow_is_pure_flip():
    lay = Layout(x_dim=1, v_dim=0, tags=("d",), tag_values={"d": (-1, 1)})
    inv = direction_augment(identity_flow())
    z = lay.point([0.4], tags=(1,))
    z1, ld = inv.forward(z)
    assert z1.tag("d") == -1 and ld == 0.0 and z1.x[0] == 0.4


def test_direction_augment_any_bijection_is_involutive():
    flow = affine_x_flow([0.3], [1.7])
    lay = Layout(x_dim=1, v_dim=0, tags=("d",), tag_values={"d": (-1, 1)})
    rep = verify_involution(direction_augment(flow),
                            random_points(lay, 50, make_rng(3)))
    assert rep.passed
    assert rep.max_logdet_asymmetry <= 1e-12


def test_direction_augment_rejects_bad_tag():
    lay = Layout(x_dim=1, v_dim=0, tags=("d",), tag_values={"d": (-1, 1)})
    inv = direction_augment(identity_flow())
    with pytest.raises(ConfigError):
        inv.forward(lay.point([0.0], tags=(0,)))


def test_embed_identity_leaves_involution_unchanged():
    inner = swap_blocks(slot="v")
    emb = embed(identity_flow(), inner)
    z = LAY2.point([1.0, 2.0], [3.0, 4.0])
    a, la = inner.forward(z)
    b, lb = emb.forward(z)
    assert np.array_equal(a.continuous(), b.continuous()) and la == lb


def test_embed_produces_involution_and_tracks_jacobians():
    emb = embed(affine_x_flow([0.5, -1.0], [2.0, 0.5]), swap_blocks(slot="v"))
    pts = random_points(LAY2, 50, make_rng(4))
    rep = verify_involution(emb, pts)
    assert rep.passed
    jac = verify_jacobian(emb, pts[0], tol=1e-5)
    assert jac.passed


def test_mixture_involution_guards_index_mutation():
    lay = Layout(x_dim=1, v_dim=0, tags=("a",), tag_values={"a": (0, 1)})

    def mutator(a):
        from imcmc.core import Involution

        return Involution(lambda z: (z.with_tag("a", 1 - z.tag("a")), 0.0))

    inv = mixture_involution(mutator, "a")
    with pytest.raises(ConfigError):
        inv.forward(lay.point([0.0], tags=(0,)))


def test_coupling_roundtrip_and_volume():
    cm = additive_coupling()
    assert cm.volume_preserving
    z = LAY2.point([0.4, -1.2], [0.9, 0.3])
    z1, ld1 = cm.forward(z)
    z2, ld2 = cm.inverse(z1)
    assert np.max(np.abs(z2.continuous() - z.continuous())) <= 1e-10
    assert ld1 == 0.0 and ld2 == 0.0
    # finite-difference |det| = 1 for the direction-augmented map
    lay = Layout(x_dim=2, v_dim=2, slots={"v": slice(0, 2)},
                 tags=("d",), tag_values={"d": (-1, 1)})
    pt = random_points(lay, 1, make_rng(5))[0]
    assert verify_jacobian(direction_augment(cm), pt, tol=1e-6).passed


def test_affine_coupling_logdet_matches_fd():
    am = affine_coupling()
    assert not am.volume_preserving
    lay = Layout(x_dim=2, v_dim=2, slots={"v": slice(0, 2)},
                 tags=("d",), tag_values={"d": (-1, 1)})
    for pt in random_points(lay, 5, make_rng(6)):
        rep = verify_jacobian(direction_augment(am), pt, tol=1e-5)
        assert rep.passed
        assert abs(rep.reported_logdet) > 0.0  # genuinely non-volume-preserving


def test_coupling_unknown_layer_rejected():
    with pytest.raises(ConfigError):
        CouplingMap([("frobnicate", None)])


def test_cycle_flow():
    flow = cycle_flow([0.0, 1.0, 2.0])
    lay = Layout(x_dim=1, v_dim=0)
    z = lay.point([2.0])
    z1, _ = flow.forward(z)
    assert z1.x[0] == 0.0
    z0, _ = flow.inverse(z)
    assert z0.x[0] == 1.0
    with pytest.raises(ConfigError):
        flow.forward(lay.point([0.5]))


def test_cdf_map_uniform_is_rotation():
    f = cdf_map(lambda x: x, lambda u: u, shift=0.25)
    assert f(0.5) == pytest.approx(0.75)
    assert f(0.9) == pytest.approx(0.15)


def test_cdf_map_normal_value():
    from scipy.special import ndtri

    nc = normal_cdf1d()
    f = cdf_map(nc.cdf, nc.icdf, shift=0.3)
    assert f(0.0) == pytest.approx(float(ndtri(0.8)), abs=1e-12)


def test_cdf_map_clamps_boundaries():
    nc = normal_cdf1d()
    f = cdf_map(nc.cdf, nc.icdf, shift=1e-18)
    # the shift is so small the rotated CDF value would round to the input;
    # the clamp keeps the inverse finite even at extreme inputs
    assert np.isfinite(f(40.0))
