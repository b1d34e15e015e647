"""Benchmark systems, ground-truth simulation and closed-loop experiment driver."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .control import QuadraticCost, datacontrol_step, norm_cost, setpoint_cost
from .errors import DataReachError, StateLeftDomain
from .intervals import IMatrix, ITensor3, IVector, imat_vec, meet, real_mat_iv
from .knowledge import (
    Decoupling,
    LipschitzBounds,
    PartialDynamics,
    Sample,
    SideInfoSet,
    VectorFieldBounds,
    append_sample,
    build_knowledge,
    rebuild,
)
from .qpsolve import QPOptions
from .reach import max_step_size


@dataclass(frozen=True)
class SystemSpec:
    """Ground-truth control-affine benchmark with its declared side information."""

    n: int
    m: int
    f_true: Callable[[np.ndarray], np.ndarray]
    G_true: Callable[[np.ndarray], np.ndarray]
    U: IVector
    X: IVector
    lip: LipschitzBounds
    side: SideInfoSet
    name: str

    def h_true(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.f_true(x) + self.G_true(x) @ u


def _linear_partial(P: np.ndarray, m: int, residual_lip: LipschitzBounds) -> PartialDynamics:
    """Known part f_kn(x) = P x with G_kn = 0 (exact interval extensions)."""
    n = P.shape[0]
    zero_g = np.zeros((n, m))
    zero_jg = np.zeros((n, m, n))

    return PartialDynamics(
        f_known=lambda x: P @ x,
        G_known=lambda x: zero_g,
        f_known_iv=lambda X: real_mat_iv(P, X),
        G_known_iv=lambda X: IMatrix(zero_g, zero_g),
        jac_f_known_iv=lambda X: IMatrix(P, P),
        jac_G_known_iv=lambda X: ITensor3(zero_jg, zero_jg),
        lip=residual_lip,
    )


# ---------------------------------------------------------------------------
# unicycle
# ---------------------------------------------------------------------------

def unicycle() -> SystemSpec:
    """Planar unicycle: positions driven by speed, heading by the turning rate.

    The vector field is declared unknown; the bounds encode that f is nearly
    constant, that only two G entries respond to the state, and that nothing
    depends on the positions.
    """

    def f_true(x):
        return np.zeros(3)

    def G_true(x):
        th = x[2]
        return np.array([[math.cos(th), 0.0], [math.sin(th), 0.0], [0.0, 1.0]])

    lip = LipschitzBounds([0.01, 0.01, 0.01], [[1.1, 0.0], [1.1, 0.0], [0.0, 0.1]])
    dep_f = np.zeros((3, 3), bool)
    dep_f[:, 2] = True
    dep_G = np.zeros((3, 2, 3), bool)
    dep_G[:, :, 2] = True
    side = SideInfoSet(decoupling=Decoupling(dep_f, dep_G))
    return SystemSpec(
        n=3, m=2, f_true=f_true, G_true=G_true,
        U=IVector([-3.0, -math.pi], [3.0, math.pi]),
        X=IVector([-5.0, -5.0, -math.pi], [5.0, 5.0, math.pi]),
        lip=lip, side=side, name="unicycle",
    )


def unicycle_knowledge_settings() -> dict:
    """Three nested side-information settings used by the tube comparisons.

    "lipschitz_only" drops the state-decoupling knowledge, "decoupled" is the
    default setting, and "decoupled_bounds" adds the knowledge that f vanishes
    and the heading responds one-to-one to the turning rate.
    """
    sys_b = unicycle()
    side_a = SideInfoSet()
    side_b = sys_b.side
    big = 1e3
    g_lo = np.full((3, 2), -big)
    g_hi = np.full((3, 2), big)
    g_lo[2, 1] = g_hi[2, 1] = 1.0
    side_c = replace(
        sys_b.side,
        vf_bounds=VectorFieldBounds(
            region=sys_b.X,
            f_range=IVector(np.zeros(3), np.zeros(3)),
            G_range=IMatrix(g_lo, g_hi),
        ),
    )
    return {"lipschitz_only": side_a, "decoupled": side_b, "decoupled_bounds": side_c}


# ---------------------------------------------------------------------------
# planar quadrotor
# ---------------------------------------------------------------------------

_QUAD_CDV = 0.25
_QUAD_CDPHI = 0.02255
_QUAD_G = 9.81
_QUAD_M = 1.25
_QUAD_L = 0.5
_QUAD_IYY = 0.03


def quadrotor() -> SystemSpec:
    """Planar quadrotor, state [px, vx, py, vy, phi, omega], controls [T1, T2].

    The kinematic rows (position and pitch-angle integrators) are declared
    known; drag and thrust effects are learned.
    """

    def f_true(x):
        return np.array([
            x[1],
            -_QUAD_CDV * x[1] / _QUAD_M,
            x[3],
            -_QUAD_G - _QUAD_CDV * x[3] / _QUAD_M,
            x[5],
            -_QUAD_CDPHI * x[5] / (2.0 * _QUAD_IYY),
        ])

    def G_true(x):
        s, c = math.sin(x[4]), math.cos(x[4])
        k = _QUAD_L / (2.0 * _QUAD_IYY)
        return np.array([
            [0.0, 0.0],
            [-s / _QUAD_M, -s / _QUAD_M],
            [0.0, 0.0],
            [c / _QUAD_M, c / _QUAD_M],
            [0.0, 0.0],
            [-k, k],
        ])

    lip_full = LipschitzBounds(
        [1.0, 0.3, 1.0, 0.3, 1.0, 0.9],
        [[0.0, 0.0], [0.9, 0.9], [0.0, 0.0], [0.9, 0.9], [0.0, 0.0], [0.01, 0.01]],
    )
    lip_resid = LipschitzBounds(
        [0.0, 0.3, 0.0, 0.3, 0.0, 0.9], lip_full.L_G
    )
    P = np.zeros((6, 6))
    P[0, 1] = P[2, 3] = P[4, 5] = 1.0
    dep_f = np.zeros((6, 6), bool)
    dep_f[:, [1, 3, 5]] = True
    dep_G = np.zeros((6, 2, 6), bool)
    dep_G[:, :, 4] = True
    side = SideInfoSet(
        decoupling=Decoupling(dep_f, dep_G),
        partial_dynamics=_linear_partial(P, 2, lip_resid),
    )
    return SystemSpec(
        n=6, m=2, f_true=f_true, G_true=G_true,
        U=IVector([0.0, 0.0], [18.4, 18.4]),
        X=IVector(
            [-20.0, -10.0, -20.0, -10.0, -math.pi / 2, -5.0],
            [20.0, 10.0, 20.0, 10.0, math.pi / 2, 5.0],
        ),
        lip=lip_full, side=side, name="quadrotor",
    )


# ---------------------------------------------------------------------------
# damaged aircraft
# ---------------------------------------------------------------------------

def aircraft() -> SystemSpec:
    """Damaged-aircraft model, state [w_l, w_v, q, theta, h] in ft/s/centirad.

    Linear landing-configuration dynamics with nonlinear damage terms on the
    pitch rate; the pitch-angle integrator row is declared known.
    """

    def f_true(x):
        x1, x2, x3, x4, _ = x
        return np.array([
            -0.021 * x1 + 0.122 * x2 - 0.322 * x3,
            -0.209 * x1 - 0.53 * x2 + 2.21 * x3,
            0.017 * x1 + 0.01 * math.cos(x1) * x1 - 0.164 * x2
            + 0.15 * math.sin(x1) * x2 - 0.421 * x3,
            x3,
            -x2 + 2.21 * x4,
        ])

    def G_true(x):
        return np.array([
            [0.01, 1.0],
            [-0.064, -0.044],
            [-0.378, 0.544 + 0.5 * math.sin(x[1])],
            [0.0, 0.0],
            [0.0, 0.0],
        ])

    LG = np.full((5, 2), 0.01)
    LG[2, 1] = 0.5
    lip_full = LipschitzBounds([0.4, 3.0, 4.0, 1.0, 3.0], LG)
    lip_resid = LipschitzBounds([0.4, 3.0, 4.0, 0.0, 3.0], LG)
    P = np.zeros((5, 5))
    P[3, 2] = 1.0
    dep_f = np.zeros((5, 5), bool)
    dep_f[:, :4] = True
    dep_G = np.zeros((5, 2, 5), bool)
    dep_G[:, :, [1, 2]] = True
    side = SideInfoSet(
        decoupling=Decoupling(dep_f, dep_G),
        partial_dynamics=_linear_partial(P, 2, lip_resid),
    )
    return SystemSpec(
        n=5, m=2, f_true=f_true, G_true=G_true,
        U=IVector([-5.0, -5.0], [5.0, 5.0]),
        X=IVector(np.full(5, -50.0), np.full(5, 150.0)),
        lip=lip_full, side=side, name="aircraft",
    )


_SYSTEMS = {"unicycle": unicycle, "quadrotor": quadrotor, "aircraft": aircraft}


def by_name(name: str) -> SystemSpec:
    try:
        return _SYSTEMS[name]()
    except KeyError:
        raise KeyError(f"unknown system {name!r}; choose from {sorted(_SYSTEMS)}")


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def rk4_step(sys: SystemSpec, x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """Classical 4th-order step with the control held constant."""
    k1 = sys.h_true(x, u)
    k2 = sys.h_true(x + 0.5 * h * k1, u)
    k3 = sys.h_true(x + 0.5 * h * k2, u)
    k4 = sys.h_true(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def advance(sys: SystemSpec, x: np.ndarray, u: np.ndarray, dt: float,
            substeps: int = 10) -> np.ndarray:
    """Hold u for dt using `substeps` RK4 sub-steps."""
    h = dt / substeps
    for _ in range(substeps):
        x = rk4_step(sys, x, u, h)
    return x


def simulate(sys: SystemSpec, x0, u_signal: Callable[[float], np.ndarray],
             t0: float, t1: float, h: float):
    """Integrate the true dynamics; returns (times, states) on the h-grid."""
    K = int(round((t1 - t0) / h))
    ts = t0 + h * np.arange(K + 1)
    xs = np.empty((K + 1, sys.n))
    xs[0] = np.asarray(x0, dtype=float)
    left_domain = False
    for k in range(K):
        u = np.asarray(u_signal(ts[k]), dtype=float)
        xs[k + 1] = rk4_step(sys, xs[k], u, h)
        if not left_domain and not sys.X.contains(xs[k + 1]):
            left_domain = True
    if left_domain:
        warnings.warn(
            f"{sys.name}: simulated state left the declared domain", StateLeftDomain
        )
    return ts, xs


def excite(sys: SystemSpec, N: int, seed: int, dt: float = 0.1,
           x0=None, mode: str = "mixed", substeps: int = 10) -> List[Sample]:
    """Generate a seeded excitation trajectory of N samples.

    Modes: "random" draws uniformly in U each step; "single_axis" keeps one
    random control axis live per step; "zero" applies no control; "mixed"
    interleaves all three, which identifies f and the G columns separately.
    """
    if N < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    x = np.asarray(sys.X.mid if x0 is None else x0, dtype=float)
    samples = []
    for i in range(N):
        u = rng.uniform(sys.U.lo, sys.U.hi)
        if mode == "zero":
            u = np.zeros(sys.m)
        elif mode == "single_axis":
            keep = rng.integers(sys.m)
            u = np.where(np.arange(sys.m) == keep, u, 0.0)
        elif mode == "mixed":
            roll = rng.random()
            if roll < 0.2:
                u = np.zeros(sys.m)
            elif roll < 0.65:
                keep = rng.integers(sys.m)
                u = np.where(np.arange(sys.m) == keep, u, 0.0)
        elif mode != "random":
            raise ValueError(f"unknown excitation mode {mode!r}")
        samples.append(Sample(x.copy(), sys.h_true(x, u), u, t=i * dt))
        x = advance(sys, x, u, dt, substeps)
    return samples


# ---------------------------------------------------------------------------
# closed-loop experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    dt: float
    init_len: int
    x0: np.ndarray
    cost: QuadraticCost
    stop_level: float
    max_steps: int
    seed: int
    mode: str = "idealistic"
    cost_offset: float = 0.0  # constant dropped from the quadratic form
    excitation: str = "mixed"
    refresh_every: int = 25
    eps: float = 1e-8
    mu0: float = 1.0
    redraw_weights: bool = False
    weights: Optional[tuple] = None  # fixed (w+, w-) override of the seeded draw
    substeps: int = 10
    M: float = 1e3
    record_reach: bool = False

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.init_len < 1:
            raise ValueError("init_len must be >= 1")


@dataclass
class StepLog:
    i: int
    t: float
    u: np.ndarray
    model_cost: float
    realized_cost: float
    bound: float
    iters: int
    micros: float
    mode_used: str
    box_lo: Optional[np.ndarray] = None
    box_hi: Optional[np.ndarray] = None


@dataclass
class RunReport:
    system: str
    mode: str
    seed: int
    reached: bool
    steps_taken: int
    steps_to_goal: Optional[int]
    cum_cost: float
    mean_step_micros: float
    max_step_micros: float
    final_state: np.ndarray
    logs: List[StepLog] = field(default_factory=list)
    failure: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "mode": self.mode,
            "seed": self.seed,
            "reached": self.reached,
            "steps_taken": self.steps_taken,
            "steps_to_goal": self.steps_to_goal,
            "cum_cost": self.cum_cost,
            "mean_step_micros": self.mean_step_micros,
            "max_step_micros": self.max_step_micros,
            "final_state": [float(v) for v in self.final_state],
            "failure": self.failure,
        }


def run_closed_loop(sys: SystemSpec, cfg: ExperimentConfig) -> RunReport:
    """Excite, build the knowledge base, then control step by step.

    Every applied control appends exactly one sample to the base through the
    linear-cost incremental update; a full invariance refresh runs every
    `refresh_every` steps.  Stops once the realized one-step cost (plus the
    constant offset) enters the stop sublevel set.
    """
    limit = max_step_size(sys.lip, sys.U)
    if not cfg.dt < limit:
        raise ValueError(
            f"dt={cfg.dt:g} must lie strictly below the step bound {limit:g}"
        )
    samples = excite(sys, cfg.init_len, cfg.seed, dt=cfg.dt, x0=cfg.x0,
                     mode=cfg.excitation, substeps=cfg.substeps)
    kb = build_knowledge(samples, sys.lip, sys.side, M=cfg.M)
    all_samples = list(samples)
    x = advance(sys, samples[-1].x, samples[-1].u, cfg.dt, cfg.substeps)

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5EED]))
    if cfg.weights is not None:
        wplus, wminus = float(cfg.weights[0]), float(cfg.weights[1])
    else:
        wplus, wminus = rng.uniform(0.0, 1.0, size=2)
    opts = QPOptions(eps=cfg.eps, mu0=cfg.mu0)
    logs: List[StepLog] = []
    reached = False
    failure = None
    u_prev = None
    t = cfg.init_len * cfg.dt
    cum_cost = 0.0

    for i in range(cfg.max_steps):
        try:
            u, diag = datacontrol_step(
                kb, x, cfg.cost, sys.U, sys.X, cfg.dt, cfg.mode, opts,
                wplus, wminus, u_prev,
            )
        except DataReachError as exc:
            failure = f"step {i}: {type(exc).__name__}: {exc}"
            break
        x_next = advance(sys, x, u, cfg.dt, cfg.substeps)
        realized = cfg.cost.value(u, x_next) + cfg.cost_offset
        diag.realized_cost = realized
        cum_cost += realized
        log = StepLog(i, t, u, diag.model_cost, realized, diag.bound,
                      diag.iters, diag.micros, diag.mode_used)
        if cfg.record_reach:
            pred = meet(
                diag.aff.B + imat_vec(diag.aff.Aplus, u),
                diag.aff.B + imat_vec(diag.aff.Aminus, u),
                1e-12,
            )
            log.box_lo, log.box_hi = pred.lo, pred.hi
        logs.append(log)

        new_sample = Sample(x, sys.h_true(x, u), u, t)
        all_samples.append(new_sample)
        kb = append_sample(kb, new_sample)
        if (i + 1) % cfg.refresh_every == 0:
            kb = rebuild(kb, all_samples)
        x = x_next
        t += cfg.dt
        u_prev = u
        if cfg.redraw_weights and cfg.weights is None:
            wplus, wminus = rng.uniform(0.0, 1.0, size=2)
        if realized <= cfg.stop_level:
            reached = True
            break

    micros = [log.micros for log in logs]
    return RunReport(
        system=sys.name,
        mode=cfg.mode,
        seed=cfg.seed,
        reached=reached,
        steps_taken=len(logs),
        steps_to_goal=len(logs) if reached else None,
        cum_cost=cum_cost,
        mean_step_micros=float(np.mean(micros)) if micros else 0.0,
        max_step_micros=float(np.max(micros)) if micros else 0.0,
        final_state=x,
        logs=logs,
        failure=failure,
    )


def unicycle_experiment(seed: int = 4, mode: str = "idealistic",
                        max_steps: int = 150) -> ExperimentConfig:
    """Drive the unicycle to the origin under the 0.1-sublevel stop rule.

    One-step greedy control of this cost has a genuine equilibrium short of
    the goal for many post-excitation geometries (even with known dynamics);
    the default seed gives a geometry from which greedy descent succeeds.
    """
    return ExperimentConfig(
        dt=0.1, init_len=10, x0=np.array([-2.0, -2.5, math.pi / 2]),
        cost=norm_cost(3, 2), stop_level=0.1, max_steps=max_steps,
        seed=seed, mode=mode,
    )


def quadrotor_experiment(seed: int = 1, mode: str = "idealistic",
                         max_steps: int = 625) -> ExperimentConfig:
    """Drive the horizontal speed to 5 m/s; stop window |vx - 5| <= 0.1.

    Horizontal speed responds to thrust only through the pitch angle, so the
    one-step model has no first-order signal at hover; redrawing the selection
    weights every step keeps the controller exploring until the coupling is
    identified.
    """
    cost, offset = setpoint_cost(6, 2, index=1, target=5.0)
    return ExperimentConfig(
        dt=0.008, init_len=10, x0=np.array([0.0, 0.0, 5.0, 0.0, 0.0, 0.0]),
        cost=cost, stop_level=0.005, max_steps=max_steps, seed=seed,
        mode=mode, cost_offset=offset, redraw_weights=True,
    )


def aircraft_experiment(seed: int = 3, mode: str = "idealistic",
                        max_steps: int = 300) -> ExperimentConfig:
    """Drive the pitch angle to 5 centirad; stop window |theta - 5| <= 0.5.

    Pitch responds to the controls only through the pitch rate, so the same
    per-step weight redraw as the quadrotor keeps the one-step model decisive.
    """
    cost, offset = setpoint_cost(5, 2, index=3, target=5.0)
    return ExperimentConfig(
        dt=0.01, init_len=10, x0=np.array([0.0, 0.0, 0.0, 0.0, 100.0]),
        cost=cost, stop_level=0.125, max_steps=max_steps, seed=seed,
        mode=mode, cost_offset=offset, redraw_weights=True,
    )


def experiment_for(name: str, **kwargs) -> ExperimentConfig:
    presets = {
        "unicycle": unicycle_experiment,
        "quadrotor": quadrotor_experiment,
        "aircraft": aircraft_experiment,
    }
    return presets[name](**kwargs)
