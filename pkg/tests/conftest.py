import math

import numpy as np
import pytest

from datareach.intervals import IMatrix, IVector
from datareach.knowledge import LipschitzBounds, SideInfoSet, VectorFieldBounds, build_knowledge
from datareach.systems import advance, excite, unicycle

# seed of the reference excitation run; chosen so the trajectory and the
# whole Monte-Carlo fan stay inside the declared unicycle domain
FIG_SEED = 2
SAMPLE_DT = 0.1
T_REF = 1.5  # 15 samples at 0.1 s


def exact_integrator_kb():
    """1-D system xdot = u known exactly through range bounds (all L = 0)."""
    lip = LipschitzBounds([0.0], [[0.0]])
    side = SideInfoSet(
        vf_bounds=VectorFieldBounds(
            region=IVector([-100.0], [100.0]),
            f_range=IVector([0.0], [0.0]),
            G_range=IMatrix([[1.0]], [[1.0]]),
        )
    )
    return build_knowledge([], lip, side)


def constant_f_kb(value=1.0):
    """1-D system xdot = value, no control effect, known through range bounds."""
    lip = LipschitzBounds([0.0], [[0.0]])
    side = SideInfoSet(
        vf_bounds=VectorFieldBounds(
            region=IVector([-100.0], [100.0]),
            f_range=IVector([value], [value]),
            G_range=IMatrix([[0.0]], [[0.0]]),
        )
    )
    return build_knowledge([], lip, side)


@pytest.fixture(scope="session")
def unicycle_system():
    return unicycle()


@pytest.fixture(scope="session")
def unicycle_fig_setup(unicycle_system):
    """Excitation trajectory, knowledge base and tube start used by tube tests."""
    sysu = unicycle_system
    samples = excite(sysu, 15, seed=FIG_SEED, dt=SAMPLE_DT,
                     x0=[-2.0, -2.5, math.pi / 2])
    kb = build_knowledge(samples, sysu.lip, sysu.side)
    x_start = advance(sysu, samples[-1].x, samples[-1].u, SAMPLE_DT)
    return sysu, samples, kb, x_start


def batch_rk4_unicycle(X, V, W, dt, substeps=4):
    """Vectorized classical RK4 for a batch of unicycle states and controls."""
    h = dt / substeps

    def field(Xs):
        return np.stack([V * np.cos(Xs[:, 2]), V * np.sin(Xs[:, 2]), W], axis=1)

    for _ in range(substeps):
        k1 = field(X)
        k2 = field(X + 0.5 * h * k1)
        k3 = field(X + 0.5 * h * k2)
        k4 = field(X + h * k3)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def mc_unicycle_rollout(x_start, n_traj, T, dt, t_ref, rng):
    """Trajectory fan under the perturbed constant-speed / cosine-turn family.

    Returns states of shape (T+1, n_traj, 3) on the reach grid.
    """
    a1 = rng.uniform(-0.1, 0.1, n_traj)
    a2 = rng.uniform(-0.01, 0.01, n_traj)
    X = np.tile(np.asarray(x_start, float), (n_traj, 1))
    out = np.empty((T + 1, n_traj, 3))
    out[0] = X
    t = t_ref
    substeps = 4
    for i in range(T):
        # controls vary inside the step; integrate with piecewise-frozen values
        h = dt / substeps
        for k in range(substeps):
            tk = t + k * h
            V = 1.0 + a1
            W = np.cos(6.0 * (tk + 0.5 * h - t_ref)) + a2
            X = batch_rk4_unicycle(X, V, W, h, substeps=1)
        out[i + 1] = X
        t += dt
    return out
