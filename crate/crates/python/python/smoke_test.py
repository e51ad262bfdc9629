"""Smoke test for the pymlhp extension.

Build with `maturin develop -m crates/python/Cargo.toml --features extension-module`,
or copy target/*/libpymlhp.so to pymlhp.so next to this script.
"""

import math

import pymlhp


def main():
    values = pymlhp.integrated_legendre(0.25, 3)
    assert len(values) == 4
    assert abs(values[0] + values[1] - 1.0) < 1e-15

    points, weights = pymlhp.gauss_legendre(5)
    assert abs(sum(weights) - 2.0) < 1e-14
    assert abs(sum(w * x**2 for x, w in zip(points, weights)) - 2.0 / 3.0) < 1e-14

    assert pymlhp.corner_leaf_count(2, 4) == 13

    rows = pymlhp.corner_study(dim=2, levels=3)
    errors = [row["err_energy"] for row in rows]
    assert all(b < a for a, b in zip(errors, errors[1:])), errors

    steps, total = pymlhp.transient_study(dim=1, steps=4, degree=3)
    assert math.isfinite(total) and total > 0.0
    assert steps[-1]["study"] == "transient"

    print("corner energy errors:", ", ".join(f"{e:.3e}" for e in errors))
    print(f"transient space-time error: {total:.3e}")
    print("ok")


if __name__ == "__main__":
    main()
