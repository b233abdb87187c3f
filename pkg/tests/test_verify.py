import numpy as np
import pytest

from wsnsel.model import GenConfig, ReliabilityParams, Scenario, generate_scenario
from wsnsel.selection import SelectConfig, Solution
from wsnsel.verify import check_connectivity, flow_residuals, verify_all

P = ReliabilityParams()


def dist_for_R(R):
    # invert the near branch: R = 1 - 0.5 (dist/d)^(2 beta)
    return P.d * (2 * (1 - R)) ** (1 / (2 * P.beta))


def chain_scenario(n_sensors, spacing):
    """Sensors on a line ending at one AP, each `spacing` apart."""
    J = n_sensors
    pos = np.array([[i * spacing, 0.0] for i in range(J + 1)])
    return Scenario(
        num_sensors=J,
        num_aps=1,
        dim=1,
        positions=pos,
        regressors=np.ones((J, 1)),
        noise_std=np.ones(J),
        max_rates=np.full(J, 0.4),
    )


def sol(method, r, T, nu=None, delta=2e-4):
    return Solution(method=method, r=np.array(r), T=np.array(T), nu=nu, delta=delta)


def test_flow_residuals_inactive_sensor():
    s = chain_scenario(1, dist_for_R(0.8))
    out = flow_residuals(s, sol("ssls", [0.0], [[0.0, 0.0]]))
    np.testing.assert_allclose(out[0], [0.0, 0.0, 0.0])


def test_flow_residuals_single_hop():
    # r rbar = 0.2, T = 0.5 on a link with R = 0.8 -> (0.2, 0.4, 0.2)
    s = chain_scenario(1, dist_for_R(0.8))
    out = flow_residuals(s, sol("ssls", [0.5], [[0.0, 0.5]]))
    np.testing.assert_allclose(out[0], [0.2, 0.4, 0.2], atol=1e-12)


def test_flow_residuals_two_hop_chain():
    # sensor 0 -> sensor 1 -> AP; mid sensor inflow includes the relayed term
    d = dist_for_R(0.8)
    s = chain_scenario(2, d)
    T = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, 0.6]])
    out = flow_residuals(s, sol("ssls", [0.5, 0.25], T))
    np.testing.assert_allclose(out[0], [0.2, 0.4, 0.2], atol=1e-12)
    # sensor 1: own 0.25*0.4 = 0.1 plus inflow 0.5*0.8 = 0.4; out 0.6*0.8
    np.testing.assert_allclose(out[1], [0.5, 0.48, -0.02], atol=1e-12)


def test_connectivity_chain_passes():
    s = chain_scenario(2, dist_for_R(0.8))
    T = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, 0.6]])
    res = check_connectivity(s, sol("ssls", [0.5, 0.25], T))
    assert res.passed and not res.offenders


def test_connectivity_zero_row_fails():
    s = chain_scenario(2, dist_for_R(0.8))
    T = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.6]])
    res = check_connectivity(s, sol("ssls", [0.5, 0.25], T))
    assert not res.passed
    assert res.offenders == (0,)


def test_connectivity_indirect_path():
    # 0 only reaches the AP through 1
    s = chain_scenario(2, dist_for_R(0.8))
    T = np.array([[0.0, 0.4, 0.0], [0.0, 0.0, 0.6]])
    assert check_connectivity(s, sol("ssls", [0.1, 0.1], T)).passed


def test_verify_all_flags_row_sum_violation():
    s = chain_scenario(1, dist_for_R(0.8))
    bad = sol("ssls", [0.9], [[0.0, 1.2]])
    rep = verify_all(s, bad, SelectConfig())
    assert not rep.box_and_rows.passed
    assert rep.box_and_rows.margin == pytest.approx(0.2)
    assert not rep.overall


def test_verify_all_flags_surrogate_violation():
    s = chain_scenario(1, dist_for_R(0.8))
    bad = sol("ssls", [0.3], [[0.0, 0.5]])  # T > r
    rep = verify_all(s, bad, SelectConfig())
    assert not rep.surrogate.passed
    assert rep.surrogate.margin == pytest.approx(0.2)


def test_verify_all_flags_flow_violation():
    s = chain_scenario(1, dist_for_R(0.8))
    bad = sol("ssls", [0.9], [[0.0, 0.1]])  # 0.36 in, 0.08 out
    rep = verify_all(s, bad, SelectConfig())
    assert not rep.flow.passed
    assert rep.flow.margin == pytest.approx(0.36 - 0.08)


def test_verify_all_flags_mse_violation():
    s = chain_scenario(1, dist_for_R(0.8))
    ok = sol("ssls", [0.5], [[0.0, 0.5]])
    # f = 1/(0.5*0.4) = 5 with sigma = a = 1
    rep = verify_all(s, ok, SelectConfig(gamma=4.0))
    assert not rep.mse.passed
    assert rep.mse.margin == pytest.approx(1.0)
    assert verify_all(s, ok, SelectConfig(gamma=6.0)).mse.passed


def test_verify_all_nonconvex_consistency_post_threshold():
    s = chain_scenario(2, dist_for_R(0.8))
    # sensor 1 off (r=0) yet receiving and forwarding: inconsistent
    T = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, 0.6]])
    bad = sol("ssls", [0.5, 0.0], T)
    rep = verify_all(s, bad, SelectConfig(gamma=10.0))
    assert not rep.nonconvex_consistency.passed


def test_verify_all_relay_loop_counterexample():
    # two "relays" feeding only each other: flow or connectivity must fail
    d = dist_for_R(0.8)
    J = 3
    pos = np.array([[0.0, 0.0], [d, 0.0], [d, d], [0.0, d]])
    s = Scenario(
        num_sensors=J,
        num_aps=1,
        dim=1,
        positions=pos,
        regressors=np.ones((J, 1)),
        noise_std=np.ones(J),
        max_rates=np.full(J, 0.4),
    )
    nu = np.array([1.0, 1.0, 1.0])
    T = np.array(
        [
            [0.0, 0.5, 0.0, 0.0],  # the sensing node feeds the loop
            [0.0, 0.0, 0.5, 0.0],  # relay 1 -> relay 2
            [0.0, 0.5, 0.0, 0.0],  # relay 2 -> relay 1
        ]
    )
    bad = sol("ssrls", [0.5, 0.0, 0.0], T, nu=nu)
    rep = verify_all(s, bad, SelectConfig(gamma=10.0))
    assert not (rep.flow.passed and rep.connectivity.passed)


def test_verify_passes_on_pipeline_output():
    from wsnsel.model import mse_rate
    from wsnsel.selection import ssls

    s = generate_scenario(GenConfig(J=20, seed=9))
    cfg = SelectConfig(gamma=2 * mse_rate(s, np.ones(20)), iters=6)
    rep = verify_all(s, ssls(s, cfg), cfg)
    assert rep.overall, rep.failures()


def test_verify_report_json_shape():
    s = chain_scenario(1, dist_for_R(0.8))
    rep = verify_all(s, sol("ssls", [0.5], [[0.0, 0.5]]), SelectConfig(gamma=6.0))
    import json

    doc = json.loads(rep.to_json())
    assert doc["overall"] is True
    assert set(doc) == {
        "box_and_rows", "surrogate", "flow", "nonconvex_consistency",
        "mse", "connectivity", "overall",
    }
