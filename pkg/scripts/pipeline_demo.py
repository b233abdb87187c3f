#!/usr/bin/env python3
"""Single-scenario walkthrough: generate, select, verify, simulate, plot.

Mirrors the default experiment setup (J=30, K=1, m=2, rbar=0.4, gamma=0.5)
and prints every stage's headline numbers.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from wsnsel import (
    GenConfig,
    SelectConfig,
    SimConfig,
    generate_scenario,
    mse_rate,
    simulate_routing,
    ssls,
    verify_all,
)
from wsnsel.svgplot import network_plot


def run(args):
    s = generate_scenario(GenConfig(J=args.J, seed=args.seed))
    print(f"scenario: J={args.J}, K=1, m=2, seed={args.seed}")

    sol = ssls(s, SelectConfig())
    active = sol.active_sensors()
    print(f"ssls: {len(active)} active sensors {active.tolist()}, "
          f"{int(np.sum(sol.T > 0))} links, f(r) = {mse_rate(s, sol.r):.6f}")

    rep = verify_all(s, sol)
    print(f"verify: overall={rep.overall} failures={rep.failures()}")

    sim = simulate_routing(s, sol, SimConfig(seed=args.seed))
    print(f"simulate: delivery {sim.delivery_ratio:.4f} "
          f"({sim.delivered}/{sim.generated}), "
          f"scaled MSE {sim.scaled_mse:.4f} vs predicted {mse_rate(s, sol.r):.4f}")

    out = Path(args.out)
    out.write_text(network_plot(s, sol))
    print(f"network plot -> {out}")
    return 0 if rep.overall else 1


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--J", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="network.svg")
    sys.exit(run(ap.parse_args()))
