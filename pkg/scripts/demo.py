"""Walk through one run of each layer and print what comes out.

Usage: python3 scripts/demo.py [output directory]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from hypertrack.cli import main as cli_main
from hypertrack.front_tracking import random_steps, simulate
from hypertrack.functionals import calibrate_C0, monitor_F, monitor_glimm, required_C1
from hypertrack.graph import graph_regularity
from hypertrack.riemann import riemann_summary, solve_riemann
from hypertrack.system import builtin


def riemann_demo() -> None:
    cubic = builtin("cubic")
    sol = solve_riemann(cubic, np.array([1.0]), np.array([-1.0]))
    print("cubic 1 -> -1:")
    for row in riemann_summary(sol):
        print("  ", row)


def tracking_demo() -> None:
    p = builtin("p_system")
    traj = simulate(p, random_steps(p, 8, 0.02, 3), 0.1, 2.0)
    C0 = calibrate_C0([traj])
    C1 = max(required_C1(traj, C0), 1.0 / traj.delta)
    glimm, F = monitor_glimm(traj, C0), monitor_F(traj, C0, C1)
    print(f"p-system run: {traj.interactions} interactions, {len(traj.fronts)} fronts created")
    print(f"  C0 = {C0:g}: Glimm ok {glimm.ok}, fitted decrease rate {glimm.fitted_c:.3g}")
    print(f"  C1 = {C1:.3g}: F ok {F.ok}")
    print(f"  max V_art = {max(e['Vart'] for e in traj.series):.2e} (eps = {traj.epsilon})")


def graph_demo() -> None:
    cubic = builtin("cubic")
    traj = simulate(cubic, random_steps(cubic, 8, 0.8, 0), 0.1, 1.0)
    rep = graph_regularity(traj, 1.0, pairs=20)
    print(f"cubic graph: inverse error {rep.inverse_error:.1e}, X jump {rep.continuity_error:.1e}, "
          f"U jump constant {rep.jump_constant:.3g}, modulus constant {rep.modulus_constant:.3g}")


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
    riemann_demo()
    tracking_demo()
    graph_demo()
    here = Path(__file__).parent
    cli_main(["run", str(here / "demo.scn"), "--out", str(out)])
    cli_main(["graph", str(here / "demo.scn"), "--times", "0.5,1.0", "--out", str(out / "graphs")])
