#!/usr/bin/env python3
"""Import the compiled extension and exercise every exported entry point.

Builds are looked up in target/release first, then target/debug; the shared
object is staged into a temporary directory under the importable name.
"""

import cmath
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module(tmp: Path) -> None:
    for profile in ("release", "debug"):
        built = REPO / "target" / profile / "libloopcalc.so"
        if built.exists():
            shutil.copy2(built, tmp / "loopcalc.so")
            print(f"using {built}")
            return
    sys.exit("build the extension first: cargo build -p loopcalc-py")


def expect(cond: bool, msg: str) -> None:
    if not cond:
        sys.exit(f"FAIL: {msg}")
    print(f"ok: {msg}")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        stage_module(tmp)
        sys.path.insert(0, str(tmp))
        import loopcalc

        # Path algebra: an exact out-and-back spur cancels.
        spurred = loopcalc.Path([0, 0], [[1, 0], [1, 1], [1, 0], [2, 1]])
        reduced = spurred.reduce()
        expect(reduced.vertices == [[1.0, 0.0], [2.0, 1.0]], "spur cancels to two segments")
        expect(spurred.thin_equal(loopcalc.Path([0, 0], [[1, 0], [2, 1]])),
               "thin equivalence sees through the spur")

        # Composition against the file format.
        text = spurred.to_text()
        expect(loopcalc.Path.from_text(text).to_text() == text, "path text round-trips")

        # Uniform-field square: holonomy is the area phase exp(i B L^2).
        field = loopcalc.ConnectionField.reference_u1(1.0)
        square = loopcalc.parallelogram([0, 0], [1, 0], [0, 1], 0.5, 0.5)
        [[h]] = field.holonomy(square)
        expect(abs(h - cmath.exp(0.25j)) <= 1e-8, f"square holonomy {h} matches exp(0.25i)")

        # Loop derivative at the origin recovers F_12 = i.
        origin = loopcalc.Path([0, 0])
        (m, order, err) = loopcalc.loop_deriv(field, origin, [1, 0], [0, 1])
        expect(abs(m[0][0] - 1j) <= 1e-6, f"loop derivative {m[0][0]} is the field strength i")
        expect(order >= 1.8, f"observed order {order}")

        # Field strength accessor agrees.
        [[f12]] = field.field_strength([0.0, 0.0], 1, 2)
        expect(abs(f12 - 1j) <= 1e-12, "field_strength returns i")

        # Endpoint derivative of the su2 reference field has a small
        # extrapolation residual.
        su2 = loopcalc.ConnectionField.reference_su2()
        line = loopcalc.Path([0, 0, 0], [[0.4, 0.2, -0.1]])
        (_, order, err) = loopcalc.mandelstam(su2, line, [1.0, 0.0, 0.0])
        expect(err <= 1e-9 and 1.8 <= order <= 2.2,
               f"endpoint derivative order {order:.3f}, err {err:.2e}")

        # Transport sections carry no vertical derivative.
        (m, _, _) = loopcalc.connection(su2, line, 2, section="transport")
        flat = [abs(z) for row in m for z in row]
        expect(max(flat) <= 1e-9, "transport section vertical part vanishes")

        # Field text round-trip and the identity suite.
        expect(loopcalc.ConnectionField.from_text(su2.to_text()).to_text() == su2.to_text(),
               "field text round-trips")
        result = loopcalc.run_identity_suite(su2, seed=42, trials=3)
        expect(result["pass"], "identity suite passes on the su2 reference field")
        expect(result["report"].startswith("identity,samples,"), "CSV report present")

        strict = loopcalc.run_identity_suite(su2, seed=42, trials=2,
                                             tolerances={"curvature_rel": 0.0})
        expect(not strict["pass"], "zero tolerance forces a failing suite")

        print("all smoke checks passed")


if __name__ == "__main__":
    main()
