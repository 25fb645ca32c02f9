"""A second-order 2-areal density on R^3: homogeneity, area and its invariance.

The density adds curvature-like terms in the mixed z coordinates to the
ordinary area element.  It passes the second-order scaling law, so its area
does not depend on how the surface is parameterized.

Run: python demos/second_order_area.py
"""

import math

from varik import kawafield2 as kf2
from varik.paths import Patch

DENSITY = (
    "sqrt(y12^2 + y13^2 + y23^2) + a*(y12*z13v3 - y13*z12v3)/y12^2"
    " + b*(y23*z12_13 - y13*z12_23 + y12*z13_23)/y12^3"
)


def main():
    s = kf2.Areal2Structure.from_text(DENSITY, 3, 2, {"a": 0.3, "b": 0.2})
    rep = kf2.check_homogeneity_field2(s)
    print("scaling residual:       ", f"{rep['max_rel_residual_scaling']:.2e}")
    print("weighted Euler residual:", f"{rep['max_rel_residual_euler']:.2e}")
    print("transversality residual:", f"{rep['max_rel_residual_transversality']:.2e}")

    p = Patch(["t1^2 + 0.1*t2", "t2 + 0.2*t1*t2", "t1*t2 + 0.3*sin(t1)"], [(1, 2), (1, 2)])
    r = p.reparameterize(lambda u: [u[0] ** 2, u[1] ** 2], [(1.0, math.sqrt(2.0)), (1.0, math.sqrt(2.0))])
    a, b = kf2.kawaguchi2_area(s, p, cross_check=True), kf2.kawaguchi2_area(s, r)
    print(f"area {a:.12f}, reparameterized {b:.12f}")

    # the k-form built from the density is not coordinate invariant in general
    bend = lambda x: [x[0] + 0.3 * x[1] * x[1], x[1], x[2] + 0.2 * x[0] * x[1]]
    print("relative change under a quadratic chart map:", f"{kf2.transition_discrepancy(s, bend)['max_rel_discrepancy']:.2e}")


if __name__ == "__main__":
    main()
