"""First-order solvers for the one-step control relaxations.

`adares` is an accelerated projected-gradient method with adaptive restart
and geometric refinement of the local quadratic-growth estimate; it reaches
eps-optimality without knowing the growth constant.  `solve_idealistic`
wires it to box-constrained QPs, `solve_optimistic` solves the coupled
(u, next-state) QP by accelerated projected gradient on the dual, and
`oracle_boxqp` is an exact active-set enumeration used by the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import AllOrthantsInfeasible
from .intervals import IVector

_L_MIN_SCALE = 1e-12


@dataclass(frozen=True)
class BoxQP:
    """minimize 0.5 u' Qi u + qi' u + pi over a box."""

    Qi: np.ndarray
    qi: np.ndarray
    box: IVector
    pi: float = 0.0

    def __post_init__(self):
        Qi = np.asarray(self.Qi, dtype=float)
        qi = np.asarray(self.qi, dtype=float)
        if Qi.shape != (qi.shape[0], qi.shape[0]):
            raise ValueError("Qi/qi shapes disagree")
        if not np.allclose(Qi, Qi.T, atol=1e-10):
            raise ValueError("Qi must be symmetric")
        Qi = 0.5 * (Qi + Qi.T)
        if Qi.size and float(np.linalg.eigvalsh(Qi).min()) < -1e-8:
            raise ValueError("Qi must be positive semidefinite")
        object.__setattr__(self, "Qi", Qi)
        object.__setattr__(self, "qi", qi)

    @property
    def m(self) -> int:
        return self.qi.shape[0]

    def value(self, u: np.ndarray) -> float:
        return float(0.5 * u @ self.Qi @ u + self.qi @ u + self.pi)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.Qi @ u + self.qi


@dataclass(frozen=True)
class AdaResConfig:
    """Inputs of the adaptive-restart scheme.

    eps: target optimality accuracy; mu0: initial growth estimate; L: gradient
    smoothness constant; y0: start point; max_total_iters: hard stop.
    """

    eps: float
    mu0: float
    L: float
    y0: np.ndarray
    max_total_iters: int = 500_000

    def __post_init__(self):
        if not (self.eps > 0 and self.mu0 > 0 and self.L > 0):
            raise ValueError("eps, mu0 and L must be positive")
        if self.max_total_iters <= 0:
            raise ValueError("max_total_iters must be positive")
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float))


@dataclass
class AdaResResult:
    y: np.ndarray
    iters: int
    mu_estimate: float
    converged: bool
    objective: float
    cycles: int


@dataclass(frozen=True)
class QPOptions:
    """User-facing solver options; smoothness constants are derived per QP."""

    eps: float = 1e-8
    mu0: float = 1.0
    max_total_iters: int = 500_000


def box_project(v: np.ndarray, box: IVector) -> np.ndarray:
    """Componentwise clamp onto a box."""
    return np.minimum(np.maximum(np.asarray(v, dtype=float), box.lo), box.hi)


def _theta_seq(K: int) -> np.ndarray:
    """theta_0..theta_K with theta_{k+1}^2 = (1 - theta_{k+1}) theta_k^2 (positive root)."""
    th = np.empty(K + 1)
    th[0] = 1.0
    for k in range(K):
        t = th[k]
        th[k + 1] = 0.5 * (-t * t + t * math.sqrt(t * t + 4.0))
    return th


def adares(
    grad: Callable[[np.ndarray], np.ndarray],
    objective: Callable[[np.ndarray], float],
    project: Callable[[np.ndarray], np.ndarray],
    cfg: AdaResConfig,
) -> AdaResResult:
    """Accelerated projected gradient with adaptive restart.

    Cycles of K_s = ceil(2 sqrt(e/mu_s) - 1) accelerated steps are repeated
    until either the projected-gradient residual has decayed at the rate the
    current growth estimate mu_s predicts (restart) or the residual certifies
    eps-optimality; mu_s halves after every cycle.  All progress tests use the
    gradient-mapping residual ||P(y - grad(y)/L) - y||, whose smallness under
    quadratic growth bounds the objective gap.
    """
    L, eps = cfg.L, cfg.eps
    y0 = cfg.y0

    def pg(y):
        return project(y - grad(y) / L)

    mu = cfg.mu0
    y_prev_end = y0
    y_start = pg(y0)
    iters = 1  # counts projected / accelerated steps
    best_y = y_start
    best_val = objective(y_start)
    cycles = 0

    while True:
        diff = y_start - y_prev_end
        C = 16.0 / mu * float(diff @ diff)
        K = max(1, math.ceil(2.0 * math.sqrt(math.e / mu) - 1.0))
        thetas = _theta_seq(K)
        rho = thetas[K - 1] ** 2 / mu
        t = 0
        y = y_start
        while True:
            x_cur = y
            z = y
            for k in range(K):
                x_new = project(z - grad(z) / L)
                beta = thetas[k] * (1.0 - thetas[k]) / (thetas[k] ** 2 + thetas[k + 1])
                z = x_new + beta * (x_new - x_cur)
                x_cur = x_new
            iters += K
            y = z
            t += 1
            y_pg = pg(y)
            gap = float(((y_pg - y) ** 2).sum())
            val = objective(y_pg)
            if val < best_val:
                best_val, best_y = val, y_pg
            restart_ok = gap <= C * rho**t
            eps_ok = L * L * gap <= eps * mu / 8.0
            if restart_ok or eps_ok:
                break
            if iters >= cfg.max_total_iters:
                return AdaResResult(best_y, iters, mu, False, best_val, cycles)
        cycles += 1
        iters += 1
        y_start, y_prev_end = y_pg, y
        if eps_ok:
            return AdaResResult(y_start, iters, mu, True, objective(y_start), cycles)
        if iters >= cfg.max_total_iters:
            return AdaResResult(best_y, iters, mu, False, best_val, cycles)
        mu *= 0.5


def smoothness_constant(qp: BoxQP) -> float:
    """L = sqrt(m) ||Qi||_inf, floored so the gradient step stays defined."""
    m = qp.m
    row_sum = float(np.abs(qp.Qi).sum(axis=1).max()) if m else 0.0
    floor = _L_MIN_SCALE * max(1.0, float(np.abs(qp.qi).max(initial=0.0)))
    return max(math.sqrt(m) * row_sum, floor)


def solve_idealistic(
    qp: BoxQP,
    opts: Optional[QPOptions] = None,
    y0: Optional[np.ndarray] = None,
    with_info: bool = False,
):
    """Solve the box-constrained QP with `adares` to eps-optimality."""
    opts = opts or QPOptions()
    start = qp.box.mid if y0 is None else np.asarray(y0, dtype=float)
    cfg = AdaResConfig(
        eps=opts.eps,
        mu0=opts.mu0,
        L=smoothness_constant(qp),
        y0=start,
        max_total_iters=opts.max_total_iters,
    )
    res = adares(qp.gradient, qp.value, lambda v: box_project(v, qp.box), cfg)
    return (res.y, res) if with_info else res.y


# ---------------------------------------------------------------------------
# optimistic relaxation: per-orthant QP in (u, x_next) solved through the dual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrthantQP:
    """One sign-orthant piece of the optimistic problem."""

    A_s_plus: np.ndarray
    A_l_plus: np.ndarray
    A_s_minus: np.ndarray
    A_l_minus: np.ndarray
    Ubox: IVector


@dataclass(frozen=True)
class OptimisticQP:
    orthants: tuple
    cost: "QuadraticCost"
    B: IVector
    X: IVector


@dataclass
class OptimisticInfo:
    orthant: int
    iters: int
    sigma_effect: float
    feasible_orthants: int


def _dual_solve_orthant(cost, B, X, orth: OrthantQP, sigma, eps, max_iters):
    """Accelerated projected gradient on the multipliers of all affine rows.

    The sigma-regularized inner problem in y = (u, x_next) is unconstrained
    and strongly convex, so its minimizer is closed-form; multipliers are
    projected onto the nonnegative orthant.  Returns (u, x, cost, iters) or
    None when the orthant is infeasible.
    """
    m = orth.Ubox.lo.shape[0]
    n = B.lo.shape[0]
    p = m + n
    Iu = np.eye(m)
    Ix = np.eye(n)
    Zu = np.zeros((n, m))

    # rows: lower/upper coupling for both affine models, then u and x boxes
    A = np.vstack(
        [
            np.hstack([orth.A_l_plus, -Ix]),
            np.hstack([-orth.A_s_plus, Ix]),
            np.hstack([orth.A_l_minus, -Ix]),
            np.hstack([-orth.A_s_minus, Ix]),
            np.hstack([Iu, Zu.T]),
            np.hstack([-Iu, Zu.T]),
            np.hstack([Zu, Ix]),
            np.hstack([Zu, -Ix]),
        ]
    )
    b = np.concatenate(
        [-B.lo, B.hi, -B.lo, B.hi,
         orth.Ubox.hi, -orth.Ubox.lo, X.hi, -X.lo]
    )

    M = np.block([[cost.R, cost.S.T], [cost.S, cost.Q]])
    H = 2.0 * M + sigma * np.eye(p)
    h = np.concatenate([cost.r, cost.q])
    Hinv = np.linalg.inv(H)
    scale_b = 1.0 + float(np.abs(b).max(initial=0.0))
    # diagonal preconditioning of the multipliers; the sigma-only regularized
    # inner problem otherwise makes the dual curvature spread by ~1/sigma
    AHAt = A @ Hinv @ A.T
    D = np.sqrt(np.maximum(np.diag(AHAt), 1e-12))
    A = A / D[:, None]
    b = b / D
    AHAt = AHAt / D[:, None] / D[None, :]
    Ld = float(np.linalg.eigvalsh(0.5 * (AHAt + AHAt.T)).max()) + 1e-12

    def primal(lam):
        return -Hinv @ (h + A.T @ lam)

    def dual_value(lam):
        w = h + A.T @ lam
        return float(-0.5 * w @ Hinv @ w - lam @ b)

    Q_diag = np.diag(cost.Q).copy()
    Q_is_diag = np.allclose(cost.Q, np.diag(Q_diag), atol=0.0)

    def feasible_candidate(y):
        """Project the dual's primal into the constraint set (None if impossible).

        With diagonal Q the inner minimization over the next state is exact,
        so candidate values converge as soon as the control part stabilizes.
        """
        u = box_project(y[:m], orth.Ubox)
        x_lo = np.maximum.reduce(
            [B.lo + orth.A_l_plus @ u, B.lo + orth.A_l_minus @ u, X.lo]
        )
        x_hi = np.minimum.reduce(
            [B.hi + orth.A_s_plus @ u, B.hi + orth.A_s_minus @ u, X.hi]
        )
        if float((x_lo - x_hi).max(initial=0.0)) > 1e-7 * scale_b:
            return None
        mid = 0.5 * (x_lo + x_hi)
        x_lo, x_hi = np.minimum(x_lo, mid), np.maximum(x_hi, mid)
        if Q_is_diag:
            lin = 2.0 * cost.S @ u + cost.q
            x = np.where(
                Q_diag > 1e-12,
                np.clip(-lin / np.where(Q_diag > 1e-12, 2.0 * Q_diag, 1.0),
                        x_lo, x_hi),
                np.where(lin > 0.0, x_lo, x_hi),
            )
        else:
            x = np.minimum(np.maximum(y[m:], x_lo), x_hi)
        return u, x

    lam = np.zeros(A.shape[0])
    zlam = lam
    tk = 1.0
    it = 0
    best = None  # (regularized value, u, x)
    best_gap = math.inf
    best_val_seen = math.inf
    last_progress = 0
    while it < max_iters:
        for _ in range(25):
            y = primal(zlam)
            lam_new = np.maximum(0.0, zlam + (A @ y - b) / Ld)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            zlam = lam_new + ((tk - 1.0) / t_new) * (lam_new - lam)
            lam, tk = lam_new, t_new
            it += 1
        y = primal(lam)
        cand = feasible_candidate(y)
        if cand is None:
            continue
        u, x = cand
        val_reg = cost.value(u, x) + 0.5 * sigma * float(u @ u + x @ x)
        if best is None or val_reg < best[0]:
            best = (val_reg, u, x)
        # duality gap of the regularized problem certifies optimality
        gap = best[0] - dual_value(lam)
        if gap <= eps * (1.0 + abs(best[0])):
            break
        if best[0] < best_val_seen - 1e-9 * (1.0 + abs(best[0])):
            best_val_seen, last_progress = best[0], it
        if gap < best_gap:
            best_gap = gap
        if it - last_progress > 2000:
            break  # candidate value stalled; the dual bound trails on flat faces

    if best is None:
        return None
    _, u, x = best
    return u, x, cost.value(u, x), it


def solve_optimistic(
    oqp: OptimisticQP,
    opts: Optional[QPOptions] = None,
    sigma: float = 1e-6,
    with_info: bool = False,
):
    """Solve every sign-orthant subproblem and return the best solution.

    The sigma * I Tikhonov term makes the inner problem strongly convex; its
    effect on the reported cost is bounded by sigma (|u|^2 + |x|^2), returned
    in the info record.
    """
    opts = opts or QPOptions()
    best = None
    best_orth = -1
    feasible = 0
    total_it = 0
    for j, orth in enumerate(oqp.orthants):
        out = _dual_solve_orthant(
            oqp.cost, oqp.B, oqp.X, orth, sigma, 1e-9, max_iters=20000
        )
        if out is None:
            continue
        u, x, val, it = out
        feasible += 1
        total_it += it
        if best is None or val < best[2]:
            best = (u, x, val)
            best_orth = j
    if best is None:
        raise AllOrthantsInfeasible(
            f"all {len(oqp.orthants)} orthant subproblems are infeasible"
        )
    u, x, val = best
    if with_info:
        info = OptimisticInfo(
            orthant=best_orth,
            iters=total_it,
            sigma_effect=sigma * float(u @ u + x @ x),
            feasible_orthants=feasible,
        )
        return u, x, val, info
    return u, x, val


# ---------------------------------------------------------------------------
# exact small-instance oracle
# ---------------------------------------------------------------------------

def oracle_boxqp(qp: BoxQP) -> Tuple[np.ndarray, float]:
    """Exact box-QP solution by enumerating all 3^m active-set patterns.

    Each coordinate is pinned at its lower bound, upper bound, or left free;
    the free block is solved exactly and infeasible or non-stationary patterns
    are discarded.  Exact for convex problems with m <= 6.
    """
    m = qp.m
    if m > 6:
        raise ValueError("oracle limited to m <= 6")
    lo, hi = qp.box.lo, qp.box.hi
    best_u, best_val = None, math.inf
    for pattern in itertools.product((0, 1, 2), repeat=m):
        u = np.where(np.array(pattern) == 1, hi, lo).astype(float)
        free = [l for l in range(m) if pattern[l] == 2]
        if free:
            fixed = [l for l in range(m) if pattern[l] != 2]
            Qff = qp.Qi[np.ix_(free, free)]
            rhs = -(qp.qi[free] + qp.Qi[np.ix_(free, fixed)] @ u[fixed])
            try:
                uf = np.linalg.solve(Qff, rhs)
            except np.linalg.LinAlgError:
                uf, *_ = np.linalg.lstsq(Qff, rhs, rcond=None)
                if not np.allclose(Qff @ uf, rhs, atol=1e-9 * (1 + np.abs(rhs).max())):
                    continue  # no stationary point on this face
            if np.any(uf < lo[free] - 1e-12) or np.any(uf > hi[free] + 1e-12):
                continue
            u[free] = np.clip(uf, lo[free], hi[free])
        val = qp.value(u)
        if val < best_val:
            best_u, best_val = u, val
    return best_u, best_val
