"""Field equations of the De Broglie density on the chart (t, x, psi, psibar).

A plane wave exp(i(kappa x - omega t)) solves the field equations exactly
when omega = kappa^2 / (2m) - e phi; any other frequency leaves a residual.

Run: python demos/de_broglie.py
"""

import numpy as np

from varik import kawafield as kf
from varik.finsler import NoetherSpec


def main():
    m, e, phi, kappa = 1.0, 1.0, 0.3, 1.0
    s = kf.debroglie(m, e, str(phi))
    omega = kappa**2 / (2 * m) - e * phi
    g = np.linspace(0.0, 1.0, 20)
    T, X = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    for w in (omega, 1.05 * omega, 1.1 * omega):
        R = kf.el_field_residual(s, kf.plane_wave(kappa, w), [T, X])
        worst = max(float(np.max(np.abs(r))) for r in R)
        print(f"omega = {w:.4f}: max field residual {worst:.2e}")

    # time translation is a symmetry; its current has no net flux on a solution
    flux = kf.noether_conservation(s, NoetherSpec(["1", "0", "0", "0"]), kf.plane_wave(kappa, omega), [(0.2, 0.8), (0.1, 0.9)])
    print(f"boundary flux of the time-translation current: {abs(flux):.2e}")


if __name__ == "__main__":
    main()
