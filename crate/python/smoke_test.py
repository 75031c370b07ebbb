"""Smoke test for the afdsim extension module.

Build and install first:  pip install --no-build-isolation crates/python
"""

import math

import afdsim


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    sc = afdsim.Scenario.basic(0.1)
    assert sc.horizon == 100 and close(sc.p_g, 0.1)

    b0 = sc.initial_belief()
    assert len(b0) == 8 and close(sum(b0), 1.0)
    h2 = lambda p: -p * math.log2(p) - (1 - p) * math.log2(1 - p)
    assert close(afdsim.entropy(b0), h2(0.25))

    # every component is healthy next slot w.p. 0.9 regardless of its state
    b = sc.belief_update(b0, 1, 1)
    pred0, pred4 = 0.9**3, 0.1 * 0.9**2
    assert close(b[0], pred0 / (pred0 + 0.1 * pred4))
    assert close(b[0] + b[4], 1.0)
    assert afdsim.entropy(b) == 0.0

    try:
        sc.belief_update([0.5] * 8, 0, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("unnormalised belief should be rejected")

    never = sc.evaluate("never_probe", 200)
    delay = sc.evaluate("delay_d10", 200)
    assert never.probe_cost == 0.0
    assert close(delay.entropy_cost + delay.aoi_cost + delay.probe_cost, delay.j_hat, 1e-9)
    assert sc.evaluate("delay_d10", 200).j_hat == delay.j_hat

    h, d = sc.optimize(iterations=3, eval_reps=10, single_start=True)
    assert 0.0 <= h <= 1.0 and 0.0 <= d <= 1.0

    dp = sc.dp_solve(4)
    assert close(dp.optimal_cost, min(dp.q_values))
    try:
        sc.dp_solve(11)
    except ValueError:
        pass
    else:
        raise AssertionError("horizon above the cap should be rejected")

    for name in afdsim.suites():
        r = afdsim.verify(name, trials=50, seed=1)
        assert r.passed, r

    sc2 = afdsim.Scenario.from_toml(sc.to_toml())
    assert sc2.to_toml() == sc.to_toml()
    assert math.isclose(afdsim.Scenario.basic(0.7).tau_sm_f, 0.1 / (0.1 + 0.3))

    print(f"ok: afdsim {afdsim.__version__}, J(never) = {never.j_hat:.3f}, J(D=10) = {delay.j_hat:.3f}, J_dp(4) = {dp.optimal_cost:.4f}")


if __name__ == "__main__":
    main()
