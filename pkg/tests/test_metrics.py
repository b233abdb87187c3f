import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsnsel.metrics import (
    CSV_HEADER,
    MCConfig,
    active_percentages,
    aggregates_to_csv,
    band_percentages,
    monte_carlo,
    p_alp,
    p_trr,
    rows_to_csv,
)
from wsnsel.selection import SelectConfig, Solution


def make_sol(r, T, nu=None, delta=2e-4):
    return Solution(method="ssls" if nu is None else "ssrls",
                    r=np.array(r), T=np.array(T), nu=nu, delta=delta)


def test_p_trr_examples():
    assert p_trr(make_sol([0.7, 0.0, 0.3], np.zeros((3, 4)))) == pytest.approx(
        100 / 3
    )
    assert p_trr(make_sol([0.0, 0.0], np.zeros((2, 3)))) == 0.0
    assert p_trr(make_sol([1.0, 1.0], np.zeros((2, 3)))) == 100.0


def test_p_alp_examples():
    assert p_alp(make_sol([0.0, 0.0], np.zeros((2, 3)))) == 0.0
    T = np.zeros((2, 3))
    T[0, 2] = 0.5
    assert p_alp(make_sol([0.5, 0.0], T)) == pytest.approx(25.0)
    full = np.zeros((2, 3))
    full[:, 2] = 1.0  # every row sums to 1
    assert p_alp(make_sol([1.0, 1.0], full)) == pytest.approx(100.0)


def test_active_percentages_counting():
    # J=2, K=1: one rate, one link, no relays
    T = np.zeros((2, 3))
    T[0, 2] = 0.5
    s, l, rel = active_percentages(make_sol([0.5, 0.0], T))
    assert s == pytest.approx(50.0)
    assert l == pytest.approx(100.0 / 6)
    assert rel == 0.0


def test_active_percentages_relays():
    T = np.zeros((2, 3))
    T[1, 2] = 0.5
    nu = np.array([1.0, 1.0])
    _, _, rel = active_percentages(make_sol([0.5, 0.0], T, nu=nu))
    assert rel == pytest.approx(50.0)


@given(st.lists(st.floats(min_value=2e-4, max_value=1.0), min_size=0, max_size=6))
@settings(max_examples=100)
def test_bands_sum_to_active_links(vals):
    T = np.zeros((3, 4))
    for k, v in enumerate(vals):
        T[k % 3, k // 3] = v
    sol = make_sol([0.5, 0.5, 0.5], T)
    bands = band_percentages(sol)
    _, links, _ = active_percentages(sol)
    assert bands.sum() == pytest.approx(links, abs=1e-9)
    assert np.all(bands >= 0)


def test_band_assignment_edges():
    T = np.zeros((1, 2))
    T[0, 1] = 0.25  # boundary lands in the second band
    assert band_percentages(make_sol([0.5], T))[1] > 0
    T[0, 1] = 0.2499
    assert band_percentages(make_sol([0.5], T))[0] > 0


def test_p_trr_lower_bound_from_active_count():
    sol = make_sol([0.3, 2e-4, 0.0], np.zeros((3, 4)))
    n_active = int(np.sum(sol.r > 0))
    assert p_trr(sol) >= sol.delta * n_active / 3 * 100 / 100


def test_mc_determinism_and_aggregates():
    mc = MCConfig(cells=[(10, 1, 2, 0.4, "linksel")], trials=3, master_seed=1)
    rows, agg = monte_carlo(mc)
    rows2, agg2 = monte_carlo(mc)
    assert rows_to_csv(rows) == rows_to_csv(rows2)
    assert aggregates_to_csv(agg) == aggregates_to_csv(agg2)
    assert rows_to_csv(rows).splitlines()[0] == CSV_HEADER
    assert len(rows) == 3
    a = agg[0]
    assert a["n_ok"] + a["n_flagged"] == 3
    if a["n_ok"] == 1:
        assert a["P_alp_std"] == 0.0


def test_mc_single_trial_zero_std():
    mc = MCConfig(cells=[(10, 1, 2, 0.4, "linksel")], trials=1, master_seed=2)
    _, agg = monte_carlo(mc)
    if agg[0]["n_ok"]:
        assert agg[0]["P_trr_std"] == 0.0


def test_mc_config_validation():
    with pytest.raises(ValueError):
        MCConfig(cells=[(10, 1, 2, 0.4, "nope")])
    with pytest.raises(ValueError):
        MCConfig(cells=[(10, 1, 2, 0.4, "ssls")], trials=0)
