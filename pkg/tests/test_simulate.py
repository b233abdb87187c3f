import numpy as np
import pytest

from wsnsel.model import (
    GenConfig,
    ReliabilityParams,
    Scenario,
    SingularInformation,
    generate_scenario,
    mse_rate,
)
from wsnsel.selection import SelectConfig, Solution, ssls
from wsnsel.simulate import SimConfig, blue_estimate, simulate_routing

P = ReliabilityParams()


def one_sensor_scenario(R=1.0):
    if R >= 1.0:
        spacing = 1e-9  # reliability rounds to 1.0 in double precision
    else:
        spacing = P.d * (2 * (1 - R)) ** (1 / (2 * P.beta))
    return Scenario(
        num_sensors=1,
        num_aps=1,
        dim=1,
        positions=np.array([[0.0, 0.0], [spacing, 0.0]]),
        regressors=np.array([[1.0]]),
        noise_std=np.array([1.0]),
        max_rates=np.array([0.4]),
    )


def test_stable_single_queue_delivers():
    # arrival 0.2 per slot, service 0.5: stable; most messages get through
    s = one_sensor_scenario(R=1.0)
    sol = Solution(method="ssls", r=np.array([0.5]), T=np.array([[0.0, 0.5]]),
                   nu=None, delta=2e-4)
    rep = simulate_routing(s, sol, SimConfig(horizon=10000, drain=0, seed=0))
    assert rep.generated > 1500
    assert rep.delivery_ratio >= 0.95
    assert rep.delivered + int(rep.final_queues.sum()) == rep.generated


def test_no_service_accumulates_queue():
    s = one_sensor_scenario()
    sol = Solution(method="ssls", r=np.array([0.5]), T=np.zeros((1, 2)),
                   nu=None, delta=2e-4)
    H = 10000
    rep = simulate_routing(s, sol, SimConfig(horizon=H, drain=0, seed=1))
    assert rep.delivered == 0
    assert rep.final_queues[0] == rep.generated
    assert abs(rep.final_queues[0] - 0.2 * H) < 0.02 * H


def test_seed_determinism_and_sensitivity():
    s = generate_scenario(GenConfig(J=15, seed=2))
    cfg = SelectConfig(gamma=2 * mse_rate(s, np.ones(15)), iters=4)
    sol = ssls(s, cfg)
    a = simulate_routing(s, sol, SimConfig(horizon=3000, drain=500, seed=5))
    b = simulate_routing(s, sol, SimConfig(horizon=3000, drain=500, seed=5))
    c = simulate_routing(s, sol, SimConfig(horizon=3000, drain=500, seed=6))
    assert a.to_json() == b.to_json()
    assert a.generated != c.generated or a.delivered != c.delivered


def test_noiseless_estimate_is_exact():
    s = one_sensor_scenario(R=1.0)
    sol = Solution(method="ssls", r=np.array([0.5]), T=np.array([[0.0, 0.5]]),
                   nu=None, delta=2e-4)
    cfg = SimConfig(horizon=2000, drain=500, seed=3, noiseless=True,
                    theta=np.array([2.0]))
    rep = simulate_routing(s, sol, cfg)
    assert rep.delivered >= 1
    assert rep.theta_hat[0] == pytest.approx(2.0, abs=1e-12)


def test_blue_estimate_identity_with_exact_counts():
    s = generate_scenario(GenConfig(J=10, m=3, seed=4))
    rng = np.random.default_rng(0)
    r = rng.uniform(0.3, 0.9, 10)
    H = 12345
    _, scaled = blue_estimate(s, H * r * s.max_rates, np.zeros(10), H)
    assert scaled == pytest.approx(mse_rate(s, r), abs=1e-9)


def test_blue_estimate_singular_without_messages():
    s = generate_scenario(GenConfig(J=6, m=2, seed=0))
    with pytest.raises(SingularInformation):
        blue_estimate(s, np.zeros(6), np.zeros(6), 100)


def test_queue_trace_csv(tmp_path):
    s = one_sensor_scenario()
    sol = Solution(method="ssls", r=np.array([0.5]), T=np.array([[0.0, 0.5]]),
                   nu=None, delta=2e-4)
    path = tmp_path / "trace.csv"
    with open(path, "w") as fh:
        simulate_routing(s, sol, SimConfig(horizon=50, drain=0, seed=0), trace_file=fh)
    lines = path.read_text().splitlines()
    assert lines[0] == "slot,node,queue_len"
    assert len(lines) == 1 + 50  # one sensor, one row per slot


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=0)
    with pytest.raises(ValueError):
        SimConfig(drain=-1)
