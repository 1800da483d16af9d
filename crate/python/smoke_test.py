"""Smoke test for the zbuscert_py extension module.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import json
import math

import zbuscert_py as zb


def check_two_node():
    feeder = zb.Feeder.two_node(-0.25)
    result = feeder.solve()
    assert result.converged, result
    expected = zb.two_node_analytic(-0.25)
    assert expected is not None
    assert abs(result.solution[0] - expected) < 1e-8
    report = json.loads(result.report_json)
    assert report["status"] == "converged"


def check_three_node():
    feasible = zb.Feeder.three_node(0.05).certify()
    assert feasible.feasible
    assert 0 < feasible.r_min < feasible.r_max
    assert 0 <= feasible.alpha_at(feasible.r_min) < 1
    assert set(feasible.coefficients) >= {"a1", "a2", "A_Y", "D_D"}

    infeasible = zb.Feeder.three_node(0.3).certify()
    assert not infeasible.feasible
    assert infeasible.r_min is None


def check_round_trip():
    feeder = zb.Feeder.random(7, node_count=4, delta_fraction=0.5)
    again = zb.Feeder.from_json(feeder.to_json())
    assert again.to_json() == feeder.to_json()
    assert len(feeder.labels()) == feeder.dim
    w = feeder.no_load_voltage()
    assert all(math.isfinite(abs(x)) for x in w)
    diag = feeder.solve(lambda_="diag-w", init="flat", max_iters=500)
    assert diag.status in {"converged", "max_iters_reached", "diverged", "singular"}


def check_errors():
    assert zb.right_shift("c") == "a"
    for bad in (lambda: zb.right_shift("d"), lambda: zb.Feeder.from_json("{}"),
                lambda: zb.Feeder.three_node(0.0)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


if __name__ == "__main__":
    check_two_node()
    check_three_node()
    check_round_trip()
    check_errors()
    print("smoke test passed")
