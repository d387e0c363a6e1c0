"""Smoke test for the slag_py extension: run with pytest or as a script."""

import math

import slag_py
from slag_py import DNumber


def test_double_number_algebra():
    tau = DNumber(0.0, 1.0)
    assert tau * tau == DNumber(1.0)
    z = DNumber(2.0, 1.0)
    assert z.quad() == 3.0
    assert (z * z.inverse()) == DNumber(1.0)
    assert DNumber.from_null(1.0, 3.0) == DNumber(2.0, 1.0)
    assert DNumber(1.0, 1.0).inverse() is None
    assert z.component() == "positive"
    w = DNumber(0.3, -0.2).exp().log()
    assert abs(w.re - 0.3) < 1e-14 and abs(w.im + 0.2) < 1e-14


def test_plane_and_graph():
    columns = [[1, 0, 0, 0], [0, 1, 0, 0]]
    rep = slag_py.analyze_plane(columns)
    assert rep["slag"] is True
    assert slag_py.dz(columns) == DNumber(1.0)
    assert slag_py.graph_tests([[0.5, 0.0], [0.0, 2.0]], picture="null")["slag"] is True
    assert slag_py.graph_tests([[2.0, 0.0], [0.0, 2.0]], picture="null")["slag"] is False
    b = slag_py.cayley_graph([[0.0, 0.3], [0.3, 0.0]])
    assert len(b) == 2


def test_sampling_is_seeded():
    a = slag_py.sample_mealy(2, 200, seed=5)
    b = slag_py.sample_mealy(2, 200, seed=5)
    assert a == b
    assert a["inequality_holds"] and a["mismatches"] == 0


def test_transport():
    plan = slag_py.ot_1d((0.0, 1.0, [1.0] * 33), (0.0, 2.0, [0.5] * 33))
    assert plan["monotone"]
    assert all(abs(t - 2 * u) < 1e-9 for u, t in zip(plan["u"], plan["t"]))
    d = slag_py.ot_discrete([[0.0], [1.0]], [[1.1], [0.1]])
    assert d["cyclically_monotone"]


def test_complex_line():
    r = slag_py.plane_correspondence(0.4, -0.7)
    assert r["agrees"]


def test_errors_are_value_errors():
    try:
        slag_py.analyze_plane([[1, 0, 0]])
    except ValueError:
        pass
    else:
        raise AssertionError("ragged columns accepted")
    assert math.isclose(slag_py.DEFAULT_TOL, 1e-10)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
    print("ok")
