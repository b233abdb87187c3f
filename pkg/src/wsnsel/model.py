"""Problem instances: network geometry, link reliability, and the MSE-rate cost.

Index convention: nodes 0..J-1 are sensors, J..J+K-1 are access points.
APs only receive; they carry no regressors, noise, or rate variables.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np


class SingularInformation(Exception):
    """Raised when the rate-weighted information matrix is not positive definite."""


@dataclass(frozen=True)
class ReliabilityParams:
    """Parameters of the piecewise link-reliability curve.

    Reliability is 1 at distance 0, 0.5 at the communication radius `d`,
    and exactly 0 beyond the cut-off 2*d. `beta` is the power attenuation
    factor (typical range 2..6).
    """

    d: float = 1.74
    beta: float = 2.0

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"comm radius must be positive, got {self.d}")
        if self.beta < 1:
            raise ValueError(f"attenuation must be >= 1, got {self.beta}")

    @property
    def cutoff(self) -> float:
        return 2.0 * self.d


def reliability(dist: float, params: ReliabilityParams) -> float:
    """Probability that a transmission over distance `dist` is received.

    Piecewise: 1 - 0.5*(dist/d)^(2*beta) below d, 0.5*(2 - dist/d)^(2*beta)
    between d and 2d, zero beyond. Continuous everywhere, equals 0.5 at d.
    """
    if dist < 0:
        raise ValueError("distance must be nonnegative")
    u = dist / params.d
    if u < 1.0:
        return 1.0 - 0.5 * u ** (2.0 * params.beta)
    if u < 2.0:
        return 0.5 * (2.0 - u) ** (2.0 * params.beta)
    return 0.0


@dataclass(frozen=True)
class Scenario:
    """One full problem instance.

    positions has length J+K (sensors first); regressors, noise_std and
    max_rates have length J.
    """

    num_sensors: int
    num_aps: int
    dim: int
    positions: np.ndarray  # (J+K, 2)
    regressors: np.ndarray  # (J, m)
    noise_std: np.ndarray  # (J,)
    max_rates: np.ndarray  # (J,)
    reliability: ReliabilityParams = field(default_factory=ReliabilityParams)
    seed: int | None = None

    def __post_init__(self):
        J, K, m = self.num_sensors, self.num_aps, self.dim
        if J < 1 or K < 1 or m < 1:
            raise ValueError("need at least one sensor, one AP, and dim >= 1")
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "regressors", np.asarray(self.regressors, dtype=float))
        object.__setattr__(self, "noise_std", np.asarray(self.noise_std, dtype=float))
        object.__setattr__(self, "max_rates", np.asarray(self.max_rates, dtype=float))
        if self.positions.shape != (J + K, 2):
            raise ValueError(f"positions must have shape ({J + K}, 2)")
        if self.regressors.shape != (J, m):
            raise ValueError(f"regressors must have shape ({J}, {m})")
        if self.noise_std.shape != (J,) or np.any(self.noise_std <= 0):
            raise ValueError("noise_std must be J positive reals")
        if self.max_rates.shape != (J,) or np.any(
            (self.max_rates <= 0) | (self.max_rates > 1)
        ):
            raise ValueError("max_rates must be J reals in (0, 1]")
        for arr in (self.positions, self.regressors, self.noise_std, self.max_rates):
            arr.setflags(write=False)
        if np.linalg.matrix_rank(self.regressors) < m:
            warnings.warn(
                "regressor matrix is rank deficient; the MSE-rate constraint "
                "may be infeasible",
                stacklevel=2,
            )

    @property
    def num_nodes(self) -> int:
        return self.num_sensors + self.num_aps

    def to_json(self) -> str:
        doc = {
            "J": self.num_sensors,
            "K": self.num_aps,
            "m": self.dim,
            "positions": self.positions.tolist(),
            "regressors": self.regressors.tolist(),
            "noise_std": self.noise_std.tolist(),
            "max_rates": self.max_rates.tolist(),
            "reliability": {"d": self.reliability.d, "beta": self.reliability.beta},
            "seed": self.seed,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        known = {
            "J",
            "K",
            "m",
            "positions",
            "regressors",
            "noise_std",
            "max_rates",
            "reliability",
            "seed",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        rel = doc["reliability"]
        rel_unknown = set(rel) - {"d", "beta"}
        if rel_unknown:
            raise ValueError(f"unknown reliability fields: {sorted(rel_unknown)}")
        return cls(
            num_sensors=doc["J"],
            num_aps=doc["K"],
            dim=doc["m"],
            positions=np.array(doc["positions"]),
            regressors=np.array(doc["regressors"]),
            noise_std=np.array(doc["noise_std"]),
            max_rates=np.array(doc["max_rates"]),
            reliability=ReliabilityParams(d=rel["d"], beta=rel["beta"]),
            seed=doc.get("seed"),
        )


@dataclass(frozen=True)
class EdgeSet:
    """Directed communication edges (i, p) with positive reliability.

    Only sensors transmit, so i ranges over sensors while p ranges over all
    nodes. Self-pairs are excluded. `R` stores the reliability per edge.
    """

    edges: tuple[tuple[int, int], ...]
    R: np.ndarray  # (len(edges),)

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        self.R.setflags(write=False)

    def __len__(self) -> int:
        return len(self.edges)

    def reliability_matrix(self, J: int, num_nodes: int) -> np.ndarray:
        """Dense J x (J+K) matrix with zeros off the edge set."""
        M = np.zeros((J, num_nodes))
        for (i, p), r in zip(self.edges, self.R):
            M[i, p] = r
        return M


def build_edges(s: Scenario) -> EdgeSet:
    """Edges (i, p) with R_ip > 0; sensors transmit, APs never do."""
    edges = []
    vals = []
    for i in range(s.num_sensors):
        for p in range(s.num_nodes):
            if p == i:
                continue
            dist = float(np.linalg.norm(s.positions[i] - s.positions[p]))
            r = reliability(dist, s.reliability)
            if r > 0.0:
                edges.append((i, p))
                vals.append(r)
    return EdgeSet(edges=tuple(edges), R=np.array(vals))


def _sensor_scale(s: Scenario) -> np.ndarray:
    # c_i = rbar_i / sigma_i^2, the fixed per-sensor weight in M(r)
    return s.max_rates / s.noise_std**2


def info_matrix(s: Scenario, r: np.ndarray) -> np.ndarray:
    """Rate-weighted information matrix M(r) = sum_i r_i c_i a_i a_i^T."""
    r = np.asarray(r, dtype=float)
    w = r * _sensor_scale(s)
    A = s.regressors
    return (A * w[:, None]).T @ A


def _pd_inverse(M: np.ndarray, pd_tol_scale: float = 1e-10) -> np.ndarray:
    """Inverse of M after a scale-aware positive-definiteness check."""
    tol = pd_tol_scale * (1.0 + np.trace(M))
    eigvals = np.linalg.eigvalsh(M)
    if eigvals[0] <= tol:
        raise SingularInformation(
            f"information matrix not PD (min eigenvalue {eigvals[0]:.3e})"
        )
    return np.linalg.inv(M)


def mse_rate(s: Scenario, r: np.ndarray) -> float:
    """MSE-rate f(r) = tr(M(r)^-1)."""
    return float(np.trace(_pd_inverse(info_matrix(s, r))))


def mse_rate_grad(s: Scenario, r: np.ndarray) -> np.ndarray:
    """Gradient of f: grad_i = -c_i * a_i^T M^-2 a_i."""
    Minv = _pd_inverse(info_matrix(s, r))
    A = s.regressors
    B = A @ Minv  # rows a_i^T M^-1
    return -_sensor_scale(s) * np.einsum("ij,ij->i", B, B)


def mse_rate_hess(s: Scenario, r: np.ndarray) -> np.ndarray:
    """Hessian of f: H_ij = 2 c_i c_j (a_i^T M^-1 a_j)(a_i^T M^-2 a_j)."""
    Minv = _pd_inverse(info_matrix(s, r))
    A = s.regressors
    B = A @ Minv
    P1 = B @ A.T  # a_i^T M^-1 a_j
    P2 = B @ B.T  # a_i^T M^-2 a_j
    c = _sensor_scale(s)
    return 2.0 * np.outer(c, c) * P1 * P2


@dataclass(frozen=True)
class GenConfig:
    """Knobs for random scenario generation.

    Defaults mirror a square deployment area of side 5, unit-variance
    Gaussian regressors, and 0 dB SNR (so all noise deviations are 1).
    """

    J: int = 30
    K: int = 1
    m: int = 2
    rbar: float = 0.4
    snr_db: float = 0.0
    area_side: float = 5.0
    seed: int = 0
    reliability: ReliabilityParams = field(default_factory=ReliabilityParams)

    def __post_init__(self):
        if self.area_side <= 0:
            raise ValueError("area_side must be positive")
        if not 0 < self.rbar <= 1:
            raise ValueError("rbar must be in (0, 1]")


def generate_scenario(cfg: GenConfig) -> Scenario:
    """Random instance: uniform positions, standard-normal regressors.

    Deterministic in cfg.seed (same config gives a bit-identical Scenario).
    """
    rng = np.random.default_rng(cfg.seed)
    positions = rng.uniform(0.0, cfg.area_side, size=(cfg.J + cfg.K, 2))
    regressors = rng.standard_normal(size=(cfg.J, cfg.m))
    snr = 10.0 ** (cfg.snr_db / 10.0)
    noise_std = np.full(cfg.J, 1.0 / np.sqrt(snr))
    return Scenario(
        num_sensors=cfg.J,
        num_aps=cfg.K,
        dim=cfg.m,
        positions=positions,
        regressors=regressors,
        noise_std=noise_std,
        max_rates=np.full(cfg.J, cfg.rbar),
        reliability=cfg.reliability,
        seed=cfg.seed,
    )
