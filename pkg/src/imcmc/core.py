"""Generic involution-based MCMC engine.

A transition kernel is assembled from three ingredients: conditionals that
refresh auxiliary slots of the state, a deterministic self-inverse map on the
joint state with a log-Jacobian, and an acceptance rule applied to the joint
density ratio.  Compositions of such kernels give irreversible chains while
every component kernel individually preserves the joint target.

The module also ships the self-verification hooks (`verify_involution`,
`verify_jacobian`) used throughout the test oracles.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError, DensityError, EnumerationError

__all__ = [
    "AcceptanceRule",
    "AuxiliaryConditional",
    "ChainResult",
    "DeterministicKernel",
    "ImcmcKernel",
    "Involution",
    "InvolutionReport",
    "JacobianReport",
    "JointPoint",
    "KernelComposition",
    "Layout",
    "LogDensity",
    "TagConditional",
    "chain_rngs",
    "log_accept",
    "make_rng",
    "random_points",
    "run_chain",
    "verify_involution",
    "verify_jacobian",
]


# ---------------------------------------------------------------------------
# state representation
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Layout:
    """Shape contract for the points a kernel operates on.

    The continuous state is split into a target block ``x`` of fixed dimension
    and an auxiliary block ``v`` addressed through named slices.  Discrete
    coordinates (directions, mixture indices, model indices) live in an
    ordered tuple of integer tags.
    """

    x_dim: int
    v_dim: int = 0
    slots: dict[str, slice] = dataclasses.field(default_factory=dict)
    x_slots: dict[str, slice] = dataclasses.field(default_factory=dict)
    tags: tuple[str, ...] = ()
    tag_values: dict[str, tuple[int, ...]] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.x_dim < 0 or self.v_dim < 0:
            raise ConfigError("block dimensions must be non-negative")
        for name, sl in self.slots.items():
            if sl.stop > self.v_dim:
                raise ConfigError(f"slot {name!r} exceeds the v block")
        for name, sl in self.x_slots.items():
            if name in self.slots or sl.stop > self.x_dim:
                raise ConfigError(f"x slot {name!r} is invalid")

    def tag_index(self, name: str) -> int:
        try:
            return self.tags.index(name)
        except ValueError:
            raise ConfigError(f"unknown tag {name!r}") from None

    def point(self, x, v=None, tags=()) -> "JointPoint":
        x = np.asarray(x, dtype=float).reshape(self.x_dim)
        if v is None:
            v = np.zeros(self.v_dim)
        v = np.asarray(v, dtype=float).reshape(self.v_dim)
        tags = tuple(int(t) for t in tags)
        if len(tags) != len(self.tags):
            raise ConfigError("tag count does not match layout")
        return JointPoint(x=x, v=v, tags=tags, layout=self)


@dataclasses.dataclass(frozen=True)
class JointPoint:
    """A point of the joint space: target block, auxiliary block, tags."""

    x: np.ndarray
    v: np.ndarray
    tags: tuple[int, ...]
    layout: Layout

    def slot(self, name: str) -> np.ndarray:
        if name in self.layout.slots:
            return self.v[self.layout.slots[name]]
        return self.x[self.layout.x_slots[name]]

    def tag(self, name: str) -> int:
        return self.tags[self.layout.tag_index(name)]

    def with_x(self, x) -> "JointPoint":
        return dataclasses.replace(self, x=np.asarray(x, dtype=float))

    def with_v(self, v) -> "JointPoint":
        return dataclasses.replace(self, v=np.asarray(v, dtype=float))

    def with_slot(self, name: str, value) -> "JointPoint":
        if name in self.layout.slots:
            v = self.v.copy()
            v[self.layout.slots[name]] = value
            return dataclasses.replace(self, v=v)
        x = self.x.copy()
        x[self.layout.x_slots[name]] = value
        return dataclasses.replace(self, x=x)

    def with_tag(self, name: str, value: int) -> "JointPoint":
        i = self.layout.tag_index(name)
        tags = self.tags[:i] + (int(value),) + self.tags[i + 1:]
        return dataclasses.replace(self, tags=tags)

    def continuous(self) -> np.ndarray:
        """Concatenated continuous coordinates (x block then v block)."""
        return np.concatenate([self.x, self.v])

    def with_continuous(self, z: np.ndarray) -> "JointPoint":
        d = self.layout.x_dim
        return dataclasses.replace(self, x=z[:d].copy(), v=z[d:].copy())

    def close_to(self, other: "JointPoint", atol: float) -> bool:
        if self.tags != other.tags:
            return False
        return (np.max(np.abs(self.x - other.x), initial=0.0) <= atol
                and np.max(np.abs(self.v - other.v), initial=0.0) <= atol)


# ---------------------------------------------------------------------------
# densities and conditionals
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class LogDensity:
    """Unnormalized log-density with an optional analytic gradient."""

    dim: int
    logpdf: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x: np.ndarray) -> float:
        return self.logpdf(x)


class AuxiliaryConditional:
    """Sampler plus log-density for one auxiliary slot.

    ``sample`` draws a new slot value conditioned on the rest of the point,
    ``logpdf`` scores a value against the same conditional, and ``support``
    (optional) enumerates ``(value, probability)`` pairs on finite spaces so
    the exact transition-matrix oracle can integrate the slot out.

    The conditioning point passed to ``logpdf`` has every slot populated;
    implementations must only read the coordinates they declare as parents,
    which keeps the factorization meaningful at both the current and the
    proposed point.
    """

    def __init__(self, sample, logpdf, support=None, name: str = ""):
        self._sample = sample
        self._logpdf = logpdf
        self._support = support
        self.name = name

    def sample(self, rng: np.random.Generator, point: JointPoint):
        return self._sample(rng, point)

    def logpdf(self, value, point: JointPoint) -> float:
        return float(self._logpdf(value, point))

    def support(self, point: JointPoint):
        if self._support is None:
            return None
        return self._support(point)


class TagConditional(AuxiliaryConditional):
    """Conditional over a finite set of integer tag values.

    ``probs`` maps a conditioning point to a probability vector over
    ``values``; the vector must sum to one (checked within 1e-12 at
    enumeration time).
    """

    def __init__(self, values: Sequence[int], probs, name: str = ""):
        self.values = tuple(int(u) for u in values)

        def _sample(rng, point):
            # inverse-CDF draw: exactly one uniform consumed per sample
            p = np.asarray(probs(point), dtype=float)
            u = rng.random() * p.sum()
            acc = 0.0
            for value, pi in zip(self.values, p):
                acc += pi
                if u < acc:
                    return value
            return self.values[-1]

        def _logpdf(value, point):
            p = np.asarray(probs(point), dtype=float)
            pi = p[self.values.index(int(value))]
            return -math.inf if pi <= 0.0 else math.log(pi)

        def _support(point):
            p = np.asarray(probs(point), dtype=float)
            if abs(p.sum() - 1.0) > 1e-12:
                raise EnumerationError(
                    f"tag probabilities for {name!r} sum to {p.sum()!r}, not 1")
            return [(u, float(pi)) for u, pi in zip(self.values, p)]

        super().__init__(_sample, _logpdf, _support, name=name)


def uniform_tag(values: Sequence[int], name: str = "") -> TagConditional:
    values = tuple(values)
    w = np.full(len(values), 1.0 / len(values))
    return TagConditional(values, lambda point: w, name=name)


# ---------------------------------------------------------------------------
# involutions
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Involution:
    """Deterministic self-inverse map on joint points.

    ``fn`` returns the image point together with the log absolute determinant
    of the Jacobian restricted to the continuous blocks; tag permutations are
    volume-free by convention.
    """

    fn: Callable[[JointPoint], tuple[JointPoint, float]]
    name: str = "involution"

    def forward(self, point: JointPoint) -> tuple[JointPoint, float]:
        return self.fn(point)


@dataclasses.dataclass(frozen=True)
class InvolutionReport:
    name: str
    max_displacement: float
    max_logdet_asymmetry: float
    tol: float
    tags_restored: bool

    @property
    def passed(self) -> bool:
        return (self.tags_restored
                and self.max_displacement <= self.tol
                and self.max_logdet_asymmetry <= max(self.tol, 1e-8))


def verify_involution(f: Involution, points: Sequence[JointPoint],
                      tol: float = 1e-10) -> InvolutionReport:
    """Check ``f(f(z)) == z`` and log-Jacobian antisymmetry on test points."""
    max_disp = 0.0
    max_asym = 0.0
    tags_ok = True
    for z in points:
        z1, ld1 = f.forward(z)
        z2, ld2 = f.forward(z1)
        disp = float(np.max(np.abs(z2.continuous() - z.continuous()), initial=0.0))
        max_disp = max(max_disp, disp)
        max_asym = max(max_asym, abs(ld1 + ld2))
        tags_ok = tags_ok and (z2.tags == z.tags)
    return InvolutionReport(f.name, max_disp, max_asym, tol, tags_ok)


@dataclasses.dataclass(frozen=True)
class JacobianReport:
    name: str
    reported_logdet: float
    fd_logdet: float
    tol: float
    condition: float

    @property
    def abs_error(self) -> float:
        return abs(self.reported_logdet - self.fd_logdet)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.fd_logdet) and self.abs_error <= self.tol


def fd_jacobian(f: Involution, point: JointPoint, step: float = 1e-5) -> np.ndarray:
    """Central-finite-difference Jacobian of the continuous blocks of ``f``."""
    z0 = point.continuous()
    n = z0.size
    if n == 0:
        raise ConfigError("finite-difference Jacobian needs continuous blocks")
    jac = np.empty((n, n))
    for j in range(n):
        zp, zm = z0.copy(), z0.copy()
        zp[j] += step
        zm[j] -= step
        fp, _ = f.forward(point.with_continuous(zp))
        fm, _ = f.forward(point.with_continuous(zm))
        jac[:, j] = (fp.continuous() - fm.continuous()) / (2.0 * step)
    return jac


def verify_jacobian(f: Involution, point: JointPoint, tol: float = 1e-5,
                    step: float = 1e-5) -> JacobianReport:
    """Compare the reported log|det J| against a finite-difference estimate."""
    _, reported = f.forward(point)
    jac = fd_jacobian(f, point, step=step)
    sign, fd_logdet = np.linalg.slogdet(jac)
    cond = float(np.linalg.cond(jac))
    if sign == 0.0:
        fd_logdet = math.nan
    return JacobianReport(f.name, float(reported), float(fd_logdet), tol, cond)


# ---------------------------------------------------------------------------
# acceptance rules
# ---------------------------------------------------------------------------

class AcceptanceRule(enum.Enum):
    METROPOLIS = "metropolis"
    BARKER = "barker"


def log_accept(rule: AcceptanceRule, log_p_current: float,
               log_p_proposed: float, logdet: float) -> float:
    """Acceptance probability for a joint-density ratio.

    Metropolis returns ``min(1, exp(log_p_proposed - log_p_current + logdet))``
    and Barker returns ``1 / (1 + exp(log_p_current - log_p_proposed - logdet))``.
    A proposal with zero density is rejected outright.
    """
    if math.isnan(log_p_current) or math.isnan(log_p_proposed) or math.isnan(logdet):
        raise DensityError("NaN encountered in acceptance computation")
    if log_p_proposed == -math.inf:
        return 0.0
    if log_p_current == -math.inf:
        return 1.0
    delta = log_p_proposed - log_p_current + logdet
    if rule is AcceptanceRule.METROPOLIS:
        return 1.0 if delta >= 0.0 else math.exp(delta)
    if rule is AcceptanceRule.BARKER:
        # expit(delta), stable on both sides
        if delta >= 0.0:
            return 1.0 / (1.0 + math.exp(-delta))
        e = math.exp(delta)
        return e / (1.0 + e)
    raise ConfigError(f"unknown acceptance rule {rule!r}")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class StepOutcome:
    point: JointPoint
    accepted: bool
    prob: float


class TransitionKernel:
    """Common protocol: a single stochastic step plus optional enumeration."""

    layout: Layout
    name: str = "kernel"

    def step(self, point: JointPoint, rng: np.random.Generator) -> StepOutcome:
        raise NotImplementedError

    def enumerate_step(self, point: JointPoint) -> list[tuple[JointPoint, float]]:
        raise EnumerationError(f"{self.name} does not support exact enumeration")

    def kernels(self) -> list["TransitionKernel"]:
        return [self]


class ImcmcKernel(TransitionKernel):
    """One accept-reject step: refresh auxiliaries, apply the involution, test.

    Parameters
    ----------
    layout : Layout
    target : callable(JointPoint) -> float
        Log-density of the target block (and tags, where they carry density,
        e.g. a model index).  Auxiliary factors are added by the kernel.
    aux_refresh : sequence of (slot-or-tag name, AuxiliaryConditional)
        Resampled in order before the deterministic move.
    involution : Involution
    rule : AcceptanceRule
    aux_static : sequence of (slot-or-tag name, AuxiliaryConditional)
        Factors of the joint density that this kernel does not refresh but
        whose coordinates its involution may move (e.g. a persistent momentum
        block negated by a flip kernel).
    """

    def __init__(self, layout: Layout, target, aux_refresh=(), involution=None,
                 rule: AcceptanceRule = AcceptanceRule.METROPOLIS,
                 aux_static=(), name: str = "imcmc"):
        if involution is None:
            raise ConfigError("an involution is required")
        self.layout = layout
        self.target = target
        self.aux_refresh = tuple(aux_refresh)
        self.aux_static = tuple(aux_static)
        self.involution = involution
        self.rule = rule
        self.name = name
        for slot, _ in self.aux_refresh + self.aux_static:
            if (slot not in layout.slots and slot not in layout.x_slots
                    and slot not in layout.tags):
                raise ConfigError(f"unknown auxiliary slot {slot!r}")

    # -- density bookkeeping -------------------------------------------------

    def _set(self, point: JointPoint, slot: str, value) -> JointPoint:
        if slot in self.layout.tags:
            return point.with_tag(slot, value)
        return point.with_slot(slot, value)

    def _get(self, point: JointPoint, slot: str):
        if slot in self.layout.tags:
            return point.tag(slot)
        return point.slot(slot)

    def joint_logpdf(self, point: JointPoint) -> float:
        # a None target contributes nothing: factors the involution never
        # moves may be omitted from a kernel's bookkeeping
        total = 0.0 if self.target is None else float(self.target(point))
        for slot, cond in self.aux_refresh + self.aux_static:
            if total == -math.inf:
                break
            total += cond.logpdf(self._get(point, slot), point)
        if math.isnan(total):
            raise DensityError(f"{self.name}: joint log-density is NaN")
        return total

    def refresh(self, point: JointPoint, rng: np.random.Generator) -> JointPoint:
        for slot, cond in self.aux_refresh:
            point = self._set(point, slot, cond.sample(rng, point))
        return point

    def frozen_aux(self) -> "ImcmcKernel":
        """The accept/reject move with auxiliaries held fixed.

        Same joint density, no resampling; this is the part of the kernel
        the joint-space reversibility statement applies to.
        """
        return ImcmcKernel(self.layout, self.target, aux_refresh=(),
                           involution=self.involution, rule=self.rule,
                           aux_static=self.aux_refresh + self.aux_static,
                           name=f"{self.name}_frozen")

    def acceptance(self, point: JointPoint) -> tuple[float, JointPoint]:
        """Acceptance probability of the deterministic move from ``point``."""
        lp = self.joint_logpdf(point)
        proposal, logdet = self.involution.forward(point)
        if (proposal.x.shape != point.x.shape or proposal.v.shape != point.v.shape
                or len(proposal.tags) != len(point.tags)):
            raise ConfigError(f"{self.name}: involution changed the point layout")
        if lp == -math.inf:
            # zero-probability auxiliary draw: reject without evaluating further
            return 0.0, proposal
        lq = self.joint_logpdf(proposal)
        return log_accept(self.rule, lp, lq, logdet), proposal

    # -- stepping ------------------------------------------------------------

    def step(self, point: JointPoint, rng: np.random.Generator) -> StepOutcome:
        point = self.refresh(point, rng)
        prob, proposal = self.acceptance(point)
        u = rng.random()
        if u < prob:
            return StepOutcome(proposal, True, prob)
        return StepOutcome(point, False, prob)

    # -- exact enumeration ---------------------------------------------------

    def _expand(self, point: JointPoint, idx: int) -> Iterator[tuple[JointPoint, float]]:
        if idx == len(self.aux_refresh):
            yield point, 1.0
            return
        slot, cond = self.aux_refresh[idx]
        sup = cond.support(point)
        if sup is None:
            raise EnumerationError(
                f"{self.name}: conditional for slot {slot!r} has no finite support")
        for value, p in sup:
            if p == 0.0:
                continue
            yield from ((pt, p * w)
                        for pt, w in self._expand(self._set(point, slot, value), idx + 1))

    def enumerate_step(self, point: JointPoint) -> list[tuple[JointPoint, float]]:
        out = []
        for refreshed, w in self._expand(point, 0):
            prob, proposal = self.acceptance(refreshed)
            if prob > 0.0:
                out.append((proposal, w * prob))
            if prob < 1.0:
                out.append((refreshed, w * (1.0 - prob)))
        return out


class DeterministicKernel(TransitionKernel):
    """Rejection-free kernel given by a measure-preserving bijection."""

    def __init__(self, layout: Layout, fn, name: str = "deterministic", target=None):
        self.layout = layout
        self.fn = fn
        self.name = name
        self.target = target

    def step(self, point: JointPoint, rng: np.random.Generator) -> StepOutcome:
        return StepOutcome(self.fn(point), True, 1.0)

    def enumerate_step(self, point: JointPoint) -> list[tuple[JointPoint, float]]:
        return [(self.fn(point), 1.0)]


class KernelComposition(TransitionKernel):
    """Ordered application of kernels sharing one layout."""

    def __init__(self, kernels: Sequence[TransitionKernel], name: str = "composition"):
        flat: list[TransitionKernel] = []
        for k in kernels:
            flat.extend(k.kernels())
        if not flat:
            raise ConfigError("a composition needs at least one kernel")
        layout = flat[0].layout
        for k in flat[1:]:
            if (k.layout.x_dim, k.layout.v_dim, k.layout.tags) != (
                    layout.x_dim, layout.v_dim, layout.tags):
                raise ConfigError("kernels in a composition must share one layout")
        self._kernels = flat
        self.layout = layout
        self.name = name

    def kernels(self) -> list[TransitionKernel]:
        return list(self._kernels)

    def step(self, point: JointPoint, rng: np.random.Generator) -> StepOutcome:
        accepted = True
        prob = 1.0
        for k in self._kernels:
            out = k.step(point, rng)
            point = out.point
            accepted = accepted and out.accepted
            prob = min(prob, out.prob)
        return StepOutcome(point, accepted, prob)

    def step_detailed(self, point: JointPoint,
                      rng: np.random.Generator) -> tuple[JointPoint, list[StepOutcome]]:
        outs = []
        for k in self._kernels:
            out = k.step(point, rng)
            outs.append(out)
            point = out.point
        return point, outs


def compose(kernels: Sequence[TransitionKernel], name: str = "composition") -> KernelComposition:
    return KernelComposition(kernels, name=name)


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) from a seed or SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def chain_rngs(master_seed: int, n_chains: int) -> list[np.random.Generator]:
    """Independent per-chain streams split deterministically from one seed."""
    root = np.random.SeedSequence(master_seed)
    return [make_rng(s) for s in root.spawn(n_chains)]


@dataclasses.dataclass
class ChainResult:
    """Recorded trace of a chain: target blocks, accept flags, probabilities."""

    xs: np.ndarray              # (n, x_dim)
    accepted: np.ndarray        # (n, n_kernels) bool
    accept_prob: np.ndarray     # (n, n_kernels)
    tags: Optional[np.ndarray]  # (n, n_tags) int, when recorded
    final: Optional[JointPoint]

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def accepted_all(self) -> np.ndarray:
        """Per-step flag: every sub-kernel proposal accepted."""
        return self.accepted.all(axis=1)


def run_chain(kernel: TransitionKernel, init: JointPoint, n: int,
              seed=None, rng: Optional[np.random.Generator] = None,
              record_tags: bool = False) -> ChainResult:
    """Run ``n`` steps and record the target block after each step.

    The trace is a pure function of ``(kernel, init, n, seed)``; auxiliary
    blocks are recorded only through the optional tag trace.
    """
    if n < 0:
        raise ConfigError("step count must be non-negative")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    kernels = kernel.kernels()
    targets = [k.target for k in kernels if getattr(k, "target", None) is not None]
    if targets and not math.isfinite(targets[0](init)):
        raise DensityError("initial state has non-finite target log-density")

    m = len(kernels)
    xs = np.empty((n, init.layout.x_dim))
    acc = np.empty((n, m), dtype=bool)
    prob = np.empty((n, m))
    tag_trace = np.empty((n, len(init.layout.tags)), dtype=int) if record_tags else None

    point = init
    for i in range(n):
        for j, k in enumerate(kernels):
            out = k.step(point, rng)
            point = out.point
            acc[i, j] = out.accepted
            prob[i, j] = out.prob
        xs[i] = point.x
        if record_tags:
            tag_trace[i] = point.tags
    return ChainResult(xs=xs, accepted=acc, accept_prob=prob,
                       tags=tag_trace, final=point if n > 0 else init)


def random_points(layout: Layout, n: int, rng: np.random.Generator,
                  scale: float = 1.0) -> list[JointPoint]:
    """Layout-valid random points for involution and Jacobian property tests."""
    points = []
    for _ in range(n):
        tags = tuple(int(rng.choice(layout.tag_values.get(t, (0, 1))))
                     for t in layout.tags)
        points.append(layout.point(
            scale * rng.standard_normal(layout.x_dim),
            scale * rng.standard_normal(layout.v_dim),
            tags))
    return points
