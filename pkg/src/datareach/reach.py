"""Reachable-set over-approximation over the data-driven differential inclusion.

One step propagates an interval box through a second-order interval Taylor
expansion whose Jacobians come from Lipschitz bounds and side information;
an a priori rough enclosure (explicit formula or Picard-style fixpoint)
controls the remainder term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DataReachError, NoEnclosure, StepTooLarge
from .intervals import Interval, IVector, imat_vec, inf_norm, meet, tensor_vec
from .knowledge import KnowledgeBase, LipschitzBounds, f_over_iv, G_over_iv, jacobian_extensions


# ---------------------------------------------------------------------------
# admissible control classes
# ---------------------------------------------------------------------------

class ControlClass:
    """Range information about a family of admissible control signals.

    `smoothness` is the number of continuous derivatives the signals have on
    each grid interval (0 selects the first-order reach step).
    """

    smoothness: int = 1

    def eval_point(self, t: float) -> IVector:
        raise NotImplementedError

    def eval_range(self, t0: float, t1: float) -> IVector:
        raise NotImplementedError

    def eval_deriv_range(self, t0: float, t1: float) -> IVector:
        raise NotImplementedError


class ConstantControl(ControlClass):
    """A single constant control value (or box of values)."""

    def __init__(self, u, smoothness: int = 2):
        self.u = u if isinstance(u, IVector) else IVector.point(u)
        self.smoothness = smoothness
        self._zero = IVector.point(np.zeros(len(self.u)))

    def eval_point(self, t):
        return self.u

    def eval_range(self, t0, t1):
        return self.u

    def eval_deriv_range(self, t0, t1):
        return self._zero


class PiecewiseConstantControl(ControlClass):
    """Piecewise-constant signal switching on a uniform grid."""

    def __init__(self, values, dt: float, t0: float = 0.0, smoothness: int = 1):
        self.values = np.asarray(values, dtype=float)
        self.dt = float(dt)
        self.t0 = float(t0)
        self.smoothness = smoothness
        self._zero = IVector.point(np.zeros(self.values.shape[1]))

    def _index(self, t: float) -> int:
        k = int(math.floor((t - self.t0) / self.dt + 1e-12))
        return min(max(k, 0), self.values.shape[0] - 1)

    def eval_point(self, t):
        return IVector.point(self.values[self._index(t)])

    def eval_range(self, t0, t1):
        k0, k1 = self._index(t0), self._index(max(t0, t1 - 1e-12))
        chunk = self.values[k0 : k1 + 1]
        return IVector(chunk.min(axis=0), chunk.max(axis=0))

    def eval_deriv_range(self, t0, t1):
        return self._zero


def _cos_range(phi_lo: float, phi_hi: float) -> Interval:
    if phi_hi - phi_lo >= 2.0 * math.pi:
        return Interval(-1.0, 1.0)
    lo = min(math.cos(phi_lo), math.cos(phi_hi))
    hi = max(math.cos(phi_lo), math.cos(phi_hi))
    two_pi = 2.0 * math.pi
    if math.ceil(phi_lo / two_pi) <= math.floor(phi_hi / two_pi):
        hi = 1.0
    if math.ceil((phi_lo - math.pi) / two_pi) <= math.floor((phi_hi - math.pi) / two_pi):
        lo = -1.0
    return Interval(lo, hi)


def _sin_range(phi_lo: float, phi_hi: float) -> Interval:
    return _cos_range(phi_lo - 0.5 * math.pi, phi_hi - 0.5 * math.pi)


class ConstCosControl(ControlClass):
    """Two-input family: constant speed plus a cosine turning rate.

    u(t) = [v0 + a1, cos(omega (t - t_ref)) + a2] with interval parameters
    a1, a2; point/range/derivative enclosures are analytic.
    """

    smoothness = 2

    def __init__(self, v0: float = 1.0, omega: float = 6.0, t_ref: float = 0.0,
                 a1: Interval = Interval(0.0), a2: Interval = Interval(0.0)):
        self.v0 = float(v0)
        self.omega = float(omega)
        self.t_ref = float(t_ref)
        self.a1 = a1
        self.a2 = a2

    def eval_point(self, t):
        c = math.cos(self.omega * (t - self.t_ref))
        return IVector([self.v0 + self.a1.lo, c + self.a2.lo],
                       [self.v0 + self.a1.hi, c + self.a2.hi])

    def eval_range(self, t0, t1):
        phi0 = self.omega * (t0 - self.t_ref)
        phi1 = self.omega * (t1 - self.t_ref)
        c = _cos_range(min(phi0, phi1), max(phi0, phi1))
        return IVector([self.v0 + self.a1.lo, c.lo + self.a2.lo],
                       [self.v0 + self.a1.hi, c.hi + self.a2.hi])

    def eval_deriv_range(self, t0, t1):
        phi0 = self.omega * (t0 - self.t_ref)
        phi1 = self.omega * (t1 - self.t_ref)
        s = _sin_range(min(phi0, phi1), max(phi0, phi1)) * (-self.omega)
        return IVector([0.0, s.lo], [0.0, s.hi])


# ---------------------------------------------------------------------------
# step size and a priori rough enclosures
# ---------------------------------------------------------------------------

def beta_of(lip: LipschitzBounds, Vabs: np.ndarray) -> float:
    """Lipschitz constant of the closed-loop field for control magnitudes Vabs."""
    Vabs = np.asarray(Vabs, dtype=float)
    if np.any(Vabs < 0):
        raise ValueError("control magnitudes must be nonnegative")
    rows = lip.L_f + lip.L_G @ Vabs
    return float(math.sqrt(float(rows @ rows)))


def max_step_size(lip: LipschitzBounds, U: IVector) -> float:
    """Largest admissible step: callers must pick dt strictly below this."""
    beta_inf = beta_of(lip, U.mag)
    if beta_inf == 0.0:
        return math.inf
    return 1.0 / (math.sqrt(lip.n) * beta_inf)


def rough_enclosure_explicit(
    R: IVector,
    kb: KnowledgeBase,
    V: IVector,
    dt: float,
    lip: Optional[LipschitzBounds] = None,
    h: Optional[IVector] = None,
) -> IVector:
    """Closed-form a priori enclosure, valid whenever sqrt(n) beta dt < 1.

    `h` may pass in a precomputed enclosure of f(R) + G(R) V.
    """
    lip = lip or kb.lip_total
    n = len(R)
    beta = beta_of(lip, V.mag)
    denom = 1.0 - math.sqrt(n) * dt * beta
    if denom <= 0.0:
        raise StepTooLarge(dt, 1.0 / (math.sqrt(n) * beta))
    if h is None:
        h = f_over_iv(R, kb) + imat_vec(G_over_iv(R, kb), V)
    c = dt * inf_norm(h) / denom
    return IVector(R.lo - c, R.hi + c)


def rough_enclosure_fixpoint(
    R: IVector,
    kb: KnowledgeBase,
    V: IVector,
    dt: float,
    inflation: float = 1.05,
    max_enclosure_iters: int = 20,
) -> IVector:
    """Picard-style enclosure: inflate until R + [0,dt] h(S) V lands inside S."""
    span = Interval(0.0, dt)
    S = R
    for _ in range(max_enclosure_iters):
        h = f_over_iv(S, kb) + imat_vec(G_over_iv(S, kb), V)
        T = R + h * span
        if S.encloses(T):
            return S
        S = S.hull(T).widened(inflation)
    raise NoEnclosure(
        f"no a priori enclosure after {max_enclosure_iters} inflation rounds"
    )


def _enclosure(R, kb, V, dt, mode: str) -> IVector:
    """Combined strategy: explicit bound, refined by the fixpoint when it helps."""
    if mode == "fixpoint":
        return rough_enclosure_fixpoint(R, kb, V, dt)
    S = rough_enclosure_explicit(R, kb, V, dt)
    if mode == "explicit":
        return S
    try:
        S_fix = rough_enclosure_fixpoint(R, kb, V, dt)
    except NoEnclosure:
        return S
    return meet(S, S_fix, 1e-12)  # both enclose the flow; crossings are rounding


# ---------------------------------------------------------------------------
# reach step and tube
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReachStepRecord:
    """State box at a grid time plus the enclosure data of the outgoing step.

    `R_next` is the over-approximation propagated to t + dt (equal to R on the
    terminal record, whose S collapses to R as well).
    """

    t: float
    R: IVector
    S: IVector
    beta: float
    alpha_norm: float
    R_next: IVector

    def __post_init__(self):
        if not self.S.encloses(self.R, atol=1e-12):
            raise ValueError("rough enclosure must contain the state box")


@dataclass
class ReachTube:
    grid: List[float]
    steps: List[ReachStepRecord]
    dt: float
    failure: Optional[str] = None

    def __len__(self):
        return len(self.steps)

    def boxes(self):
        """(T+1, n) lo and hi arrays of the tube."""
        lo = np.array([rec.R.lo for rec in self.steps])
        hi = np.array([rec.R.hi for rec in self.steps])
        return lo, hi

    def terminal_width(self) -> np.ndarray:
        return self.steps[-1].R.width


def _queried_step_data(R, kb, ctrl, t, dt, enclosure_mode):
    """Shared evaluation pipeline of one reach step (enclosures + Jacobians)."""
    v_t = ctrl.eval_point(t)
    V = ctrl.eval_range(t, t + dt)
    V1 = ctrl.eval_deriv_range(t, t + dt)
    n = len(R)

    beta = beta_of(kb.lip_total, V.mag)
    if math.sqrt(n) * beta * dt >= 1.0:
        raise StepTooLarge(dt, 1.0 / (math.sqrt(n) * beta))

    fR = f_over_iv(R, kb)
    GR = G_over_iv(R, kb)
    hook = kb.side.algebraic_contractor
    if hook is not None:
        fR, GR, _, _ = hook(R, V, fR, GR, None, None)

    hV = fR + imat_vec(GR, V)
    S = _enclosure(R, kb, V, dt, enclosure_mode)
    fS = f_over_iv(S, kb)
    GS = G_over_iv(S, kb)
    Jf, JG = jacobian_extensions(kb, state_box=S)
    if hook is not None:
        fS, GS, Jf, JG = hook(S, V, fS, GS, Jf, JG)
    return v_t, V, V1, beta, fR, GR, hV, S, fS, GS, Jf, JG


def datareach_step(
    R: IVector,
    kb: KnowledgeBase,
    ctrl: ControlClass,
    t: float,
    dt: float,
    domain: Optional[IVector] = None,
    enclosure_mode: str = "best",
) -> ReachStepRecord:
    """Second-order interval Taylor step over the differential inclusion.

    Requires control signals with at least one derivative on the step; the
    propagated box is intersected with `domain` when one is supplied.
    """
    if ctrl.smoothness < 1:
        raise ValueError("datareach_step needs smoothness >= 1; use datareach_step_c0")
    v_t, V, V1, beta, fR, GR, hV, S, fS, GS, Jf, JG = _queried_step_data(
        R, kb, ctrl, t, dt, enclosure_mode
    )
    half_dt2 = 0.5 * dt * dt
    hx = fR + imat_vec(GR, v_t)
    hS = fS + imat_vec(GS, V)
    M2 = Jf + tensor_vec(JG, V)
    Rn = R + hx * dt + imat_vec(M2, hS) * half_dt2 + imat_vec(GS, V1) * half_dt2
    if domain is not None:
        Rn = Rn.intersect(domain)
    return ReachStepRecord(t, R, S, beta, inf_norm(hV), Rn)


def datareach_step_c0(
    R: IVector,
    kb: KnowledgeBase,
    ctrl: ControlClass,
    t: float,
    dt: float,
    domain: Optional[IVector] = None,
    enclosure_mode: str = "best",
) -> ReachStepRecord:
    """First-order step for merely continuous control families."""
    _, V, _, beta, fR, GR, hV, S, fS, GS, _, _ = _queried_step_data(
        R, kb, ctrl, t, dt, enclosure_mode
    )
    Rn = R + (fS + imat_vec(GS, V)) * dt
    if domain is not None:
        Rn = Rn.intersect(domain)
    return ReachStepRecord(t, R, S, beta, inf_norm(hV), Rn)


def datareach(
    kb: KnowledgeBase,
    x_start: np.ndarray,
    ctrl: ControlClass,
    dt: float,
    T: int,
    t0: float = 0.0,
    domain: Optional[IVector] = None,
    enclosure_mode: str = "best",
) -> ReachTube:
    """Over-approximate the reachable sets at t0 + dt, ..., t0 + T dt.

    The tube starts from the singleton {x_start}.  On the first failing step
    the tube is truncated and the reason recorded in `failure`.
    """
    step_fn = datareach_step_c0 if ctrl.smoothness < 1 else datareach_step
    R = x_start if isinstance(x_start, IVector) else IVector.point(x_start)
    grid = [t0]
    steps: List[ReachStepRecord] = []
    failure = None
    t = t0
    for _ in range(T):
        try:
            rec = step_fn(R, kb, ctrl, t, dt, domain=domain,
                          enclosure_mode=enclosure_mode)
        except DataReachError as exc:
            failure = f"{type(exc).__name__}: {exc}"
            break
        steps.append(rec)
        R = rec.R_next
        t += dt
        grid.append(t)
    steps.append(ReachStepRecord(t, R, R, 0.0, 0.0, R))
    return ReachTube(grid, steps, dt, failure)
