"""Smoke test of the Python bindings: run after `pip install --no-build-isolation crates/twoweight-py`."""

import json
import math

import twoweight_py as tw


def main():
    lebesgue = tw.Measure(segments=[(0.0, 1.0, 1.0)])
    assert abs(lebesgue.mass(0.25, 0.75) - 0.5) < 1e-15
    # H of Lebesgue on [0,1] at x outside: log(x / (x - 1))
    x = 2.0
    assert abs(lebesgue.hilbert(x) - math.log(x / (x - 1.0))) < 1e-12

    m = tw.Measure.from_json(json.dumps({"atoms": [[0.5, 2.0]], "segments": [[0.0, 1.0, 1.0]]}))
    assert m.total_mass() == 3.0
    assert abs(m.mass(0.4, 0.6) - 2.2) < 1e-12 and m.mass(0.5, 0.6, closed=False) < 0.2

    omega = tw.cantor_omega(6)
    sigma = tw.cantor_sigma(6, "center")
    assert abs(omega.total_mass() - 1.0) < 1e-12
    assert abs(sigma.mass(1 / 3, 2 / 3) - 1.0) < 1e-15
    z = tw.solve_on_gap(omega, (1 / 3, 2 / 3), 0.0)
    assert abs(z - 0.5) < 1e-12

    fam = [(j / 4, (j + 1) / 4) for j in range(4)]
    print("A2 on quarters:", tw.a2(omega, sigma, fam))
    print("testing:", tw.testing(omega, sigma, fam, "dual"))
    assert abs(tw.epsilon_zero() - 0.9217) < 1e-4

    coeffs, mean = tw.haar_coefficients([1.0, -1.0, 2.0, 0.0], lebesgue, 2)
    energy = sum(c * c for _, c in coeffs) + mean * mean
    assert abs(energy - (1 + 1 + 4 + 0) / 4) < 1e-12

    est, err = tw.bad_probability(-12, 1365, 4, 0.5, 500, 7)
    assert 0.0 <= est <= 1.0 and err >= 0.0

    files, warnings = tw.run_experiment(json.dumps({"cantor": {"depth": 6, "reports": "c"}}), "cantor")
    rows = files["cantor_c_pivotal.csv"].splitlines()
    assert rows[0].startswith("schema,depth")
    print("pivotal rows:", len(rows) - 1, "warnings:", warnings)

    try:
        tw.run_experiment(json.dumps({"eps": 2.0}), "conditions")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("invalid config accepted")
    print("ok")


if __name__ == "__main__":
    main()
