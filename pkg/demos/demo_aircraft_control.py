"""Pitch-angle recovery of a damaged aircraft with unknown dynamics.

Linearized landing-configuration dynamics with nonlinear damage terms on the
pitch rate; only the pitch-angle integrator row is declared known.  The
controller drives the pitch angle to 5 centiradians from level flight.
"""

import numpy as np

from datareach import aircraft, run_closed_loop
from datareach.systems import aircraft_experiment


def main():
    cfg = aircraft_experiment()
    rep = run_closed_loop(aircraft(), cfg)
    print(f"target: theta = 5 centirad; window |theta - 5| <= 0.5; dt = {cfg.dt} s")
    print(f"reached: {rep.reached} after {rep.steps_taken} steps")
    print(f"final state: {np.round(rep.final_state, 3)}")
    print(f"mean step time: {rep.mean_step_micros:.0f} us")
    print(f"\n{'step':>4} {'cost':>12} {'bound':>10} {'u1':>7} {'u2':>7}")
    for log in rep.logs[::20]:
        print(f"{log.i:4d} {log.realized_cost:12.5f} {log.bound:10.3f} "
              f"{log.u[0]:7.2f} {log.u[1]:7.2f}")


if __name__ == "__main__":
    main()
