"""Solve the brachistochrone as a Finsler extremal and compare it with the cycloid.

The travel-time density sqrt((dx^2 + dy^2) / (2 g y)) is homogeneous of
degree one in the velocity, so its extremals are unparameterized curves.
The solver fixes a gauge (first y = u^2 near the cusp, then x) and shoots.

Run: python demos/brachistochrone.py
"""

import math

import numpy as np

from varik import extremal as ex
from varik import finsler as fs
from varik.paths import Curve


def main():
    prob = ex.brachistochrone_problem(y_pi=2.0, g=1.0)
    result = ex.solve_bvp(prob)
    print("shooting iterations:", result.iterations)
    print("endpoint miss:      ", f"{result.endpoint_miss:.2e}")
    print("max EL residual:    ", f"{result.el_residual_max:.2e}")
    print("distance to cycloid:", f"{ex.cycloid_distance(result.curve):.2e}")

    s = prob.structure
    t_solved = fs.finsler_length(s, result.curve)
    t_exact = ex.cycloid_travel_time(2.0, 1.0, 1e-4, math.pi)
    print("travel time:        ", f"{t_solved:.12f} (closed form {t_exact:.12f})")

    # a straight chute from the cusp is slower than the full cycloid (time pi);
    # with x = t^2 * end the integrand is constant
    x1, y1 = prob.end
    line = Curve([f"t^2*{x1}", f"t^2*{y1}"], (0.0, 1.0))
    print("straight chute:     ", f"{fs.finsler_length(s, line):.6f} vs cycloid {ex.cycloid_travel_time():.6f}")

    th = np.linspace(1e-4, math.pi, 5)
    for t, (x, y) in zip(th, zip(*ex.cycloid(th))):
        print(f"  theta {t:5.3f}: cycloid point ({x:.6f}, {y:.6f})")


if __name__ == "__main__":
    main()
