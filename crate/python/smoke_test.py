"""Smoke test of the pyspingas extension.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/pyspingas-*.whl
"""

import math
import sys

import pyspingas as sg


def check(cond, msg):
    if not cond:
        print(f"FAIL: {msg}")
        sys.exit(1)
    print(f"ok: {msg}")


def main():
    rows = sg.table2()
    check([r[3] for r in rows] == ["1/2", "5/7", "7/8", "28/29"], "transition table")

    p = sg.SimParams(0.0, 2.3, h_over_gamma=1.0, seed=0.0)
    r = sg.simulate(p)
    check(abs(r["m_ss"] - 0.5) < 1e-3, f"bias law M = {r['m_ss']:.5f}")

    ordered = sg.simulate(sg.SimParams(4.5, 3.8))
    flipped = sg.simulate(sg.SimParams(4.5, 3.8, seed=-1e-4))
    check(ordered["m_ss"] > 0.3 and abs(ordered["m_ss"] + flipped["m_ss"]) < 1e-6, "ordered point and seed equivariance")

    t, m = sg.trajectory(sg.SimParams(4.5, 3.8))
    check(len(t) == len(m) > 10 and t[0] == 0.0, f"trajectory with {len(t)} samples")

    i0 = sg.critical_point("pump", 3.7)
    check(i0 is not None and abs(i0 - 1.6) < 1e-3, f"boundary I0(J=3.7) = {i0:.4f}")

    chi = sg.susceptibility(sg.SimParams(0.0, 2.3), 1e-3)
    check(abs(chi["chi"] * p.gamma - 1.0) < 0.01, "unpumped susceptibility")

    res = sg.sweep_rates([1.0, 4.0], [1.0, 5.0])
    check(len(res["records"]) == 4, "2x2 sweep")

    j, i = sg.map_conditions(1e12, 20.0)
    check(j > 0 and i > 0, f"conditions map J/G={j:.2f} I/G={i:.2f}")

    xs = [1.0 + 3.0 * k / 39 for k in range(40)]
    ys = [math.sqrt(1 - 1.6 / x) if x > 1.6 else 0.0 for x in xs]
    f = sg.fit("beta", xs, ys)
    check(abs(f["exponent"] - 0.5) < 1e-6, f"beta fit {f['exponent']:.6f}")

    st = sg.selftest(sets=2, steps=20)
    check(st["passed"], "self-test")

    try:
        sg.fit("bogus", xs, ys)
    except ValueError:
        check(True, "bad fit form raises ValueError")
    else:
        check(False, "bad fit form raises ValueError")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
