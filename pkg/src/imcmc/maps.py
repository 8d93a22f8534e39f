"""Deterministic maps: integrators, involution combinators, coupling layers.

Everything here is a pure function of the state.  Bijections that are not
self-inverse (`FlowMap`) become involutions either by composition with a flip
(`hmc_involution`), by direction augmentation (`direction_augment`), or by
conjugation (`embed`).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Involution, JointPoint
from .errors import ConfigError, FixedPointError

__all__ = [
    "AffineXFlow",
    "CouplingMap",
    "FlowMap",
    "LeapfrogConfig",
    "Metric",
    "RiemannianHamiltonian",
    "additive_coupling",
    "affine_coupling",
    "affine_x_flow",
    "cdf_map",
    "constant_metric",
    "cycle_flow",
    "direction_augment",
    "embed",
    "hmc_involution",
    "identity_flow",
    "implicit_hmc_involution",
    "implicit_leapfrog",
    "implicit_leapfrog_inverse",
    "iterate_flow",
    "leapfrog",
    "leapfrog_flow",
    "leapfrog_inverse",
    "mixture_involution",
    "momentum_flip",
    "swap_blocks",
    "swap_slots",
    "xblock_flow",
]


# ---------------------------------------------------------------------------
# explicit leapfrog
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class LeapfrogConfig:
    """Step size and step count for the integrators."""

    eps: float
    k: int = 1

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ConfigError("step size must be positive")
        if self.k < 1:
            raise ConfigError("step count must be at least 1")


def _default_grad_v(v: np.ndarray) -> np.ndarray:
    # standard normal momentum: grad of log N(v|0,1) is -v
    return -v


def leapfrog(x: np.ndarray, v: np.ndarray, cfg: LeapfrogConfig,
             grad_x: Callable[[np.ndarray], np.ndarray],
             grad_v: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             ) -> tuple[np.ndarray, np.ndarray]:
    """Half-kick / drift / half-kick update applied ``cfg.k`` times.

    ``grad_x`` is the gradient of the target log-density; ``grad_v`` that of
    the momentum log-density (standard normal when omitted).  The map is
    volume preserving, so no log-Jacobian is returned.
    """
    if grad_v is None:
        grad_v = _default_grad_v
    eps = cfg.eps
    x, v = np.array(x, dtype=float), np.array(v, dtype=float)
    for _ in range(cfg.k):
        g = grad_x(x)
        if not np.all(np.isfinite(g)):
            raise ConfigError("non-finite gradient in leapfrog")
        v = v + 0.5 * eps * g
        x = x - eps * grad_v(v)
        v = v + 0.5 * eps * grad_x(x)
    return x, v


def leapfrog_inverse(x: np.ndarray, v: np.ndarray, cfg: LeapfrogConfig,
                     grad_x, grad_v=None) -> tuple[np.ndarray, np.ndarray]:
    """Time-reversed update; exact inverse of :func:`leapfrog`."""
    if grad_v is None:
        grad_v = _default_grad_v
    eps = cfg.eps
    x, v = np.array(x, dtype=float), np.array(v, dtype=float)
    for _ in range(cfg.k):
        v = v - 0.5 * eps * grad_x(x)
        x = x + eps * grad_v(v)
        v = v - 0.5 * eps * grad_x(x)
    return x, v


# ---------------------------------------------------------------------------
# flows on joint points
# ---------------------------------------------------------------------------

class FlowMap:
    """Bijection on joint points with log-Jacobians for both directions."""

    def __init__(self, fwd: Callable[[JointPoint], tuple[JointPoint, float]],
                 inv: Callable[[JointPoint], tuple[JointPoint, float]],
                 name: str = "flow"):
        self.fwd = fwd
        self.inv = inv
        self.name = name

    def forward(self, point: JointPoint) -> tuple[JointPoint, float]:
        return self.fwd(point)

    def inverse(self, point: JointPoint) -> tuple[JointPoint, float]:
        return self.inv(point)

    def inverted(self) -> "FlowMap":
        """The same bijection with forward and inverse exchanged."""
        return FlowMap(self.inv, self.fwd, name=f"{self.name}^-1")


def identity_flow() -> FlowMap:
    return FlowMap(lambda z: (z, 0.0), lambda z: (z, 0.0), name="identity")


def xblock_flow(fwd_x, inv_x, name: str = "xflow") -> FlowMap:
    """Lift a bijection of the target block (with logdet) to joint points."""

    def fwd(z):
        x, ld = fwd_x(z.x)
        return z.with_x(x), ld

    def inv(z):
        x, ld = inv_x(z.x)
        return z.with_x(x), ld

    return FlowMap(fwd, inv, name=name)


def leapfrog_flow(cfg: LeapfrogConfig, grad_x, grad_v=None,
                  slot: Optional[str] = None, name: str = "leapfrog") -> FlowMap:
    """The integrator as a volume-preserving flow on (x, momentum slot)."""

    def fwd(z):
        x, v = leapfrog(z.x, _read_slot(z, slot), cfg, grad_x, grad_v)
        return _write_slot(z.with_x(x), slot, v), 0.0

    def inv(z):
        x, v = leapfrog_inverse(z.x, _read_slot(z, slot), cfg, grad_x, grad_v)
        return _write_slot(z.with_x(x), slot, v), 0.0

    return FlowMap(fwd, inv, name=name)


def affine_x_flow(shift, scale, name: str = "affine_x") -> "AffineXFlow":
    """Componentwise affine reparameterization of the target block."""
    return AffineXFlow(np.atleast_1d(np.asarray(shift, dtype=float)),
                       np.atleast_1d(np.asarray(scale, dtype=float)), name)


class AffineXFlow(FlowMap):
    """x -> shift + scale * x on the target block; latent gradients derivable."""

    def __init__(self, shift: np.ndarray, scale: np.ndarray, name: str = "affine_x"):
        if np.any(scale == 0.0):
            raise ConfigError("affine scale must be nonzero")
        self.shift = shift
        self.scale = scale
        ld = float(np.sum(np.log(np.abs(scale))))

        def fwd(z):
            return z.with_x(self.shift + self.scale * z.x), ld

        def inv(z):
            return z.with_x((z.x - self.shift) / self.scale), -ld

        super().__init__(fwd, inv, name=name)


def iterate_flow(flow: FlowMap, k: int) -> FlowMap:
    """k-fold composition of a flow with itself."""
    if k < 1:
        raise ConfigError("iteration count must be at least 1")

    def fwd(z):
        total = 0.0
        for _ in range(k):
            z, ld = flow.forward(z)
            total += ld
        return z, total

    def inv(z):
        total = 0.0
        for _ in range(k):
            z, ld = flow.inverse(z)
            total += ld
        return z, total

    return FlowMap(fwd, inv, name=f"{flow.name}^{k}")


def cycle_flow(values: Sequence[float], atol: float = 1e-9) -> FlowMap:
    """Cyclic shift on a finite set of 1-d target-block values."""
    vals = np.asarray(values, dtype=float)

    def locate(x):
        i = int(np.argmin(np.abs(vals - x[0])))
        if abs(vals[i] - x[0]) > atol:
            raise ConfigError("point is not on the cycle")
        return i

    def fwd(z):
        i = locate(z.x)
        return z.with_x(np.array([vals[(i + 1) % len(vals)]])), 0.0

    def inv(z):
        i = locate(z.x)
        return z.with_x(np.array([vals[(i - 1) % len(vals)]])), 0.0

    return FlowMap(fwd, inv, name="cycle")


# ---------------------------------------------------------------------------
# elementary involutions
# ---------------------------------------------------------------------------

def _read_slot(z: JointPoint, slot: Optional[str]) -> np.ndarray:
    return z.v if slot is None else z.slot(slot)


def _write_slot(z: JointPoint, slot: Optional[str], value: np.ndarray) -> JointPoint:
    return z.with_v(value) if slot is None else z.with_slot(slot, value)


def momentum_flip(slot: Optional[str] = None, name: str = "flip") -> Involution:
    """(x, v) -> (x, -v) on the named slot (whole auxiliary block by default)."""

    def fn(z: JointPoint):
        w = _read_slot(z, slot)
        if w.size == 0:
            raise ConfigError("momentum flip needs an auxiliary block")
        return _write_slot(z, slot, -w), 0.0

    return Involution(fn, name=name)


def swap_blocks(slot: Optional[str] = None, name: str = "swap") -> Involution:
    """Exchange the target block with an auxiliary slot of equal dimension."""

    def fn(z: JointPoint):
        w = _read_slot(z, slot)
        if z.layout.x_dim != w.size:
            raise ConfigError("swap needs matching block dimensions")
        return _write_slot(z.with_x(w.copy()), slot, z.x.copy()), 0.0

    return Involution(fn, name=name)


def swap_slots(a: str, b: str, name: str = "swap_slots") -> Involution:
    """Exchange two auxiliary slots of equal dimension."""

    def fn(z: JointPoint):
        va, vb = z.slot(a).copy(), z.slot(b).copy()
        if va.size != vb.size:
            raise ConfigError("slots must have equal dimensions")
        return z.with_slot(a, vb).with_slot(b, va), 0.0

    return Involution(fn, name=name)


def hmc_involution(cfg: LeapfrogConfig, grad_x, grad_v=None,
                   slot: Optional[str] = None) -> Involution:
    """Flip composed with k leapfrog steps; an involution for separable joints."""

    def fn(z: JointPoint):
        x, v = leapfrog(z.x, _read_slot(z, slot), cfg, grad_x, grad_v)
        return _write_slot(z.with_x(x), slot, -v), 0.0

    return Involution(fn, name=f"flip*leapfrog^{cfg.k}")


# ---------------------------------------------------------------------------
# implicit (metric) integrator
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Metric:
    """Position-dependent symmetric positive-definite mass matrix.

    ``g(x)`` returns the matrix, ``g_logdet(x)`` its log-determinant and
    ``g_grad(x)`` the stacked partials ``dG/dx_k`` with shape (d, d, d),
    indexed as ``g_grad(x)[k][i, j] = dG_ij/dx_k``.
    """

    g: Callable[[np.ndarray], np.ndarray]
    g_logdet: Optional[Callable[[np.ndarray], float]] = None
    g_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def logdet(self, x: np.ndarray) -> float:
        if self.g_logdet is not None:
            return float(self.g_logdet(x))
        return float(np.linalg.slogdet(self.g(x))[1])

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.g_grad is not None:
            return np.asarray(self.g_grad(x), dtype=float)
        return np.zeros((x.size, x.size, x.size))


def constant_metric(mat: np.ndarray) -> Metric:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    d = mat.shape[0]
    logdet = float(np.linalg.slogdet(mat)[1])
    return Metric(g=lambda x: mat,
                  g_logdet=lambda x: logdet,
                  g_grad=lambda x: np.zeros((d, d, d)))


class RiemannianHamiltonian:
    """H(x, v) = -log p(x) + 0.5 log|G(x)| + 0.5 v' G(x)^-1 v."""

    def __init__(self, target_logpdf, target_grad, metric: Metric):
        self.logpdf = target_logpdf
        self.target_grad = target_grad
        self.metric = metric

    def value(self, x: np.ndarray, v: np.ndarray) -> float:
        ginv_v = np.linalg.solve(self.metric.g(x), v)
        return (-float(self.logpdf(x)) + 0.5 * self.metric.logdet(x)
                + 0.5 * float(v @ ginv_v))

    def grad_x(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        g = self.metric.g(x)
        ginv = np.linalg.inv(g)
        dg = self.metric.grad(x)
        out = -np.asarray(self.target_grad(x), dtype=float)
        ginv_v = ginv @ v
        for k in range(x.size):
            out[k] += 0.5 * np.trace(ginv @ dg[k])
            out[k] -= 0.5 * float(ginv_v @ dg[k] @ ginv_v)
        return out

    def grad_v(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.metric.g(x), v)


def _fixed_point(update, start: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    z = np.array(start, dtype=float)
    resid = math.inf
    for _ in range(max_iter):
        z_new = update(z)
        if not np.all(np.isfinite(z_new)):
            raise FixedPointError("implicit integrator step diverged", math.inf)
        resid = float(np.max(np.abs(z_new - z), initial=0.0))
        z = z_new
        if resid <= tol:
            return z
    raise FixedPointError("implicit integrator step did not converge", resid)


def implicit_leapfrog(x: np.ndarray, v: np.ndarray, cfg: LeapfrogConfig,
                      ham: RiemannianHamiltonian, tol: float = 1e-12,
                      max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Generalized leapfrog for non-separable Hamiltonians.

    Each step solves two fixed-point equations (implicit half-kick and
    implicit drift) by plain iteration; the scheme is volume preserving and
    time reversible, so composing with a momentum flip gives an involution.
    """
    x, v = np.array(x, dtype=float), np.array(v, dtype=float)
    h = 0.5 * cfg.eps
    for _ in range(cfg.k):
        x0 = x
        v_half = _fixed_point(lambda w: v - h * ham.grad_x(x0, w), v, tol, max_iter)
        x_half = x0 + h * ham.grad_v(x0, v_half)
        x = _fixed_point(lambda y: x_half + h * ham.grad_v(y, v_half), x_half,
                         tol, max_iter)
        v = v_half - h * ham.grad_x(x, v_half)
    return x, v


def implicit_leapfrog_inverse(x: np.ndarray, v: np.ndarray, cfg: LeapfrogConfig,
                              ham: RiemannianHamiltonian, tol: float = 1e-12,
                              max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Inverse step via flip-integrate-flip (the Hamiltonian is even in v)."""
    x, v = implicit_leapfrog(x, -np.asarray(v, dtype=float), cfg, ham, tol, max_iter)
    return x, -v


def implicit_hmc_involution(cfg: LeapfrogConfig, ham: RiemannianHamiltonian,
                            tol: float = 1e-12, max_iter: int = 100) -> Involution:
    def fn(z: JointPoint):
        x, v = implicit_leapfrog(z.x, z.v, cfg, ham, tol, max_iter)
        return z.with_x(x).with_v(-v), 0.0

    return Involution(fn, name=f"flip*implicit_leapfrog^{cfg.k}")


# ---------------------------------------------------------------------------
# involution combinators
# ---------------------------------------------------------------------------

def direction_augment(flow: FlowMap, tag: str = "d") -> Involution:
    """Turn any bijection into an involution on states carrying a direction.

    Moving with d=+1 applies the forward map and lands on d=-1; moving with
    d=-1 applies the inverse and lands on d=+1.
    """

    def fn(z: JointPoint):
        d = z.tag(tag)
        if d == 1:
            z1, ld = flow.forward(z)
        elif d == -1:
            z1, ld = flow.inverse(z)
        else:
            raise ConfigError(f"direction tag must be +1 or -1, got {d}")
        return z1.with_tag(tag, -d), ld

    return Involution(fn, name=f"dir[{flow.name}]")


def embed(flow: FlowMap, inner: Involution) -> Involution:
    """Conjugated involution ``flow^-1 . inner . flow``."""

    def fn(z: JointPoint):
        z1, ld1 = flow.forward(z)
        z2, ld2 = inner.forward(z1)
        z3, ld3 = flow.inverse(z2)
        return z3, ld1 + ld2 + ld3

    return Involution(fn, name=f"embed[{flow.name},{inner.name}]")


def mixture_involution(family: Callable[[int], Involution], tag: str,
                       name: str = "mixture") -> Involution:
    """Involution selected by a discrete tag held fixed by every member."""

    def fn(z: JointPoint):
        a = z.tag(tag)
        z1, ld = family(a).forward(z)
        if z1.tag(tag) != a:
            raise ConfigError("a mixture member mutated its own index tag")
        return z1, ld

    return Involution(fn, name=name)


# ---------------------------------------------------------------------------
# coupling maps
# ---------------------------------------------------------------------------

class CouplingMap(FlowMap):
    """Stack of coupling layers acting on the (x, v) pair.

    Layer kinds:

    - ``("add_x", s)``: x += s(v), volume preserving
    - ``("add_v", s)``: v += s(x), volume preserving
    - ``("scale_x", s)``: x *= exp(s(v)), logdet sum(s(v))
    - ``("scale_v", s)``: v *= exp(s(x)), logdet sum(s(x))
    - ``("swap",)``: exchange the blocks (equal dims)
    - ``("linear", a_x, a_v)``: componentwise rescale of each block

    A map built only from additive, swap, and det-one linear layers is volume
    preserving and reports a zero log-Jacobian everywhere.  The map couples
    the target block with the named auxiliary slot (whole block by default).
    """

    def __init__(self, layers: Sequence[tuple], name: str = "coupling",
                 slot: Optional[str] = None):
        self.slot = slot
        self.layers = tuple(layers)
        vp = True
        for layer in self.layers:
            kind = layer[0]
            if kind in ("scale_x", "scale_v"):
                vp = False
            elif kind == "linear":
                ax, av = (np.asarray(a, dtype=float) for a in layer[1:])
                if abs(np.sum(np.log(np.abs(ax))) + np.sum(np.log(np.abs(av)))) > 1e-12:
                    vp = False
            elif kind not in ("add_x", "add_v", "swap"):
                raise ConfigError(f"unknown coupling layer kind {kind!r}")
        self.volume_preserving = vp
        super().__init__(self._forward, self._inverse, name=name)

    def forward_arrays(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        x, v = x.copy(), v.copy()
        ld = 0.0
        for layer in self.layers:
            kind = layer[0]
            if kind == "add_x":
                x = x + layer[1](v)
            elif kind == "add_v":
                v = v + layer[1](x)
            elif kind == "scale_x":
                s = layer[1](v)
                x = x * np.exp(s)
                ld += float(np.sum(s))
            elif kind == "scale_v":
                s = layer[1](x)
                v = v * np.exp(s)
                ld += float(np.sum(s))
            elif kind == "swap":
                x, v = v, x
            elif kind == "linear":
                ax, av = (np.asarray(a, dtype=float) for a in layer[1:])
                x, v = x * ax, v * av
                ld += float(np.sum(np.log(np.abs(ax))) + np.sum(np.log(np.abs(av))))
        return x, v, ld

    def inverse_arrays(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        x, v = x.copy(), v.copy()
        ld = 0.0
        for layer in reversed(self.layers):
            kind = layer[0]
            if kind == "add_x":
                x = x - layer[1](v)
            elif kind == "add_v":
                v = v - layer[1](x)
            elif kind == "scale_x":
                s = layer[1](v)
                x = x * np.exp(-s)
                ld -= float(np.sum(s))
            elif kind == "scale_v":
                s = layer[1](x)
                v = v * np.exp(-s)
                ld -= float(np.sum(s))
            elif kind == "swap":
                x, v = v, x
            elif kind == "linear":
                ax, av = (np.asarray(a, dtype=float) for a in layer[1:])
                x, v = x / ax, v / av
                ld -= float(np.sum(np.log(np.abs(ax))) + np.sum(np.log(np.abs(av))))
        return x, v, ld

    def _forward(self, z: JointPoint) -> tuple[JointPoint, float]:
        x, v, ld = self.forward_arrays(z.x, _read_slot(z, self.slot))
        return _write_slot(z.with_x(x), self.slot, v), ld

    def _inverse(self, z: JointPoint) -> tuple[JointPoint, float]:
        x, v, ld = self.inverse_arrays(z.x, _read_slot(z, self.slot))
        return _write_slot(z.with_x(x), self.slot, v), ld


def _bounded_cubic(coeffs: Sequence[float], clip: float = 3.0):
    """Smooth odd-ish polynomial shift, clipped through tanh to stay bounded."""
    c = tuple(float(a) for a in coeffs)

    def s(y: np.ndarray) -> np.ndarray:
        t = np.tanh(y / clip)
        return c[0] + c[1] * t + c[2] * t**2 + c[3] * t**3

    return s


def additive_coupling(shift_coeffs_x=(0.0, 0.4, 0.0, -0.1),
                      shift_coeffs_v=(0.0, 0.3, 0.1, 0.0),
                      slot: Optional[str] = None,
                      name: str = "nice") -> CouplingMap:
    """Two additive layers with fixed smooth shifts; volume preserving."""
    return CouplingMap(
        [("add_x", _bounded_cubic(shift_coeffs_x)),
         ("add_v", _bounded_cubic(shift_coeffs_v))],
        name=name, slot=slot)


def affine_coupling(shift_coeffs=(0.0, 0.4, 0.0, -0.1),
                    scale_coeffs=(0.0, 0.15, 0.0, 0.05),
                    slot: Optional[str] = None,
                    name: str = "affine") -> CouplingMap:
    """Additive plus scaling layer; not volume preserving."""
    return CouplingMap(
        [("add_x", _bounded_cubic(shift_coeffs)),
         ("scale_v", _bounded_cubic(scale_coeffs))],
        name=name, slot=slot)


# ---------------------------------------------------------------------------
# CDF rotation map
# ---------------------------------------------------------------------------

DEFAULT_SHIFT = 1.0 / math.sqrt(2.0)


def cdf_map(cdf: Callable[[float], float], icdf: Callable[[float], float],
            shift: float = DEFAULT_SHIFT, clamp: float = 1e-15):
    """Measure-preserving 1-d map: push through the CDF, rotate, pull back.

    The CDF value is clamped into the open unit interval before inversion
    because the inverse CDF diverges at the endpoints.
    """

    def fn(x: float) -> float:
        u = (float(cdf(x)) + shift) % 1.0
        u = min(max(u, clamp), 1.0 - clamp)
        return float(icdf(u))

    return fn
