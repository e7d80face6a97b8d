"""How a single Gaussian mode spreads and drags trajectories with it.

The guidance velocity of a free Gaussian packet is affine in the
coordinate: v(u, t) = drift + (u - center) * sigma'/sigma. Every trajectory
therefore keeps its initial position expressed in units of the current
width: u(t) = c(t) + (u(0) - c(0)) * sigma(t)/sigma(0). This script prints
the spread law next to integrated trajectories so the scaling is visible.
"""

import numpy as np

from bohm_equilibrium import (
    GaussianMode,
    IntegratorConfig,
    PhysicalParams,
    TwoParticleState,
    evolve_mode,
    integrate_trajectory,
    mode_coordinates,
)


def main():
    params = PhysicalParams()
    mode = GaussianMode(sigma0=0.05, coord_mass=2.0)
    print("spread of a narrow mode (sigma0 = 0.05, coordinate mass 2m):")
    print(f"{'t':>6} {'sigma(t)':>12} {'sigma/sigma0':>14} {'stretch rate':>14}")
    for t in (0.0, 0.01, 0.1, 0.5, 1.0, 2.0):
        ev = evolve_mode(mode, params, t)
        print(
            f"{t:6.2f} {ev.sigma:12.6f} {ev.sigma / mode.sigma0:14.4f} "
            f"{ev.stretch_rate:14.6f}"
        )

    print()
    print("trajectories started at 1, 2, 3 initial widths from the center")
    print("stay at 1, 2, 3 current widths for all time:")
    state = TwoParticleState.from_widths(0.05, 1.0)
    config = IntegratorConfig(dt=1e-3, t_final=2.0)
    cm2, _ = state.evolved(2.0)
    for k in (1, 2, 3):
        # put the offset purely into the cm coordinate (y1 = y2 = Y)
        start_y = k * state.cm_mode.sigma0
        trajectory = integrate_trajectory(state, (start_y, start_y), config)
        big, _ = mode_coordinates(*trajectory.positions[-1])
        print(
            f"  start Y = {k} sigma0: final Y = {big:10.6f}, "
            f"i.e. {big / cm2.sigma:.6f} current widths"
        )

    print()
    print("the ratio sigma(t)/sigma0 is the width ratio R; for the narrow")
    print("mode above, R(2) =", f"{cm2.sigma / state.cm_mode.sigma0:.4f}")


if __name__ == "__main__":
    main()
