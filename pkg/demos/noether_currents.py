"""Conserved quantities along solved extremals.

A generator u of a symmetry of F gives the current u^mu dF/dy^mu, which is
constant along every extremal.  Three cases: a free particle (momentum), the
harmonic oscillator (energy, from time translation) and a potential that
depends on one coordinate only (momentum in the other).

Run: python demos/noether_currents.py
"""

import math

from varik import extremal as ex
from varik import finsler as fs
from varik.extremal import BvpProblem, GaugeSpec
from varik.finsler import NoetherSpec, noether_current


def show(label, s, start, end, generator, steps=200):
    r = ex.solve_bvp(BvpProblem(s, GaugeSpec(0), start, end, rk4_steps=steps))
    rep = ex.conserved_along(r, noether_current(s, NoetherSpec(generator)))
    print(f"{label:<28} value {rep['initial']: .10f}  drift {rep['max_drift']:.1e}  ({rep['knots']} knots)")


def main():
    show("free particle, momentum", fs.FinslerStructure.from_text("sqrt(y0^2 + y1^2)", 2), [0, 0], [1, 2], ["0", "1"])
    osc = fs.lift_conventional("0.5*qd1^2 - 0.5*q1^2", 1)
    show("oscillator, -energy", osc, [0, 0], [math.pi / 2, 1], ["1", "0"])
    flat = fs.lift_conventional("0.5*(qd1^2 + qd2^2) - 0.5*q2^2", 2)
    show("V(q2) only, q1 momentum", flat, [0, 0, 0], [1.2, 0.7, 0.4], ["0", "1", "0"])
    show("V(q2) only, q2 momentum", flat, [0, 0, 0], [1.2, 0.7, 0.4], ["0", "0", "1"])


if __name__ == "__main__":
    main()
