"""Smoke test for the pygeoequiv extension.

Build and install with `maturin develop -m crates/python/Cargo.toml`, or point
PYTHONPATH at a directory holding the built `pygeoequiv` shared library.
"""

import json
import sys

import pygeoequiv as ge


def main() -> int:
    assert "dini" in ge.GENERATORS

    dini = ge.generate("dini", json.dumps({"beta1": "1 + x1/10", "beta2": "2 + x2/10"}))
    assert (dini.dim, dini.rank) == (2, 2)
    ev = dini.eigenvalues([0.0, 0.0])
    assert abs(ev[0] - 2.0) < 1e-12 and abs(ev[1] - 4.0) < 1e-12, ev
    holds, residual = dini.first_divisibility([0.1, 0.2])
    assert holds and residual < 1e-8
    report = dini.verify(samples=10, seed=7)
    print(report)
    assert report.verdict == "pass" and report.exit_code == 0

    round_trip = ge.Model.from_json(dini.to_json())
    assert round_trip.coords == ["x1", "x2"]

    conformal = ge.generate("heisenberg", json.dumps({"factor": "1 + x^2 + y^2"}))
    bad = conformal.verify(samples=10, seed=7)
    print(bad)
    assert bad.verdict == "fail" and bad.exit_code == 2
    assert json.loads(bad.to_json())["verdict"] == "fail"

    path = conformal.geodesic([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.1)
    t, q, p = path[-1]
    assert abs(t - 0.1) < 1e-12 and abs(q[0] - 0.1) < 1e-9

    try:
        ge.Model.from_json('{"coords": ["x"]}')
    except ValueError as e:
        print("rejected malformed manifest:", e)
    else:
        raise AssertionError("malformed manifest accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
