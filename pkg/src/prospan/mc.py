"""Size/power simulation harness for the spanning test.

Data-generating processes produce a base universe (the benchmark set) plus
one extra asset: an exact duplicate of the first base asset when spanning is
true, or the first asset shifted by a constant monthly premium when it is
false. Draws are keyed by (seed, rep) so the replication order and worker
count cannot change them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from ._parallel import parallel_map
from .eumax import PortfolioSet
from .inference import DEFAULT_B_EXPONENTS, spanning_test
from .panel import ReturnPanel
from .spanning import GridParams
from .utility import Mode

DESK_GRID = GridParams(6, 3, 6, 3)


@dataclass(frozen=True)
class DgpSpec:
    """Configuration of one data-generating process.

    ``n_assets`` is the size of the benchmark universe; the enlarged universe
    adds one derived column according to ``null_mode``.
    """

    kind: Literal["iid-normal", "ar1", "garch-like"]
    n_assets: int
    means: tuple[float, ...]
    cov: tuple[tuple[float, ...], ...]
    persistence: float = 0.0
    null_mode: Literal["spanning-true", "spanning-false"] = "spanning-true"
    shift: float = 0.01

    def __post_init__(self):
        if self.kind not in ("iid-normal", "ar1", "garch-like"):
            raise ValueError(f"unknown dgp kind: {self.kind!r}")
        if self.n_assets < 1:
            raise ValueError("need at least one base asset")
        mu = np.asarray(self.means, dtype=float)
        sigma = np.asarray(self.cov, dtype=float)
        if mu.shape != (self.n_assets,):
            raise ValueError("means length must equal n_assets")
        if sigma.shape != (self.n_assets, self.n_assets):
            raise ValueError("cov must be n_assets x n_assets")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("cov must be symmetric")
        eig = np.linalg.eigvalsh(sigma)
        if eig.min() < -1e-10:
            raise ValueError("cov must be positive semidefinite")
        if not 0.0 <= self.persistence < 1.0:
            raise ValueError("persistence must be in [0, 1)")
        if self.null_mode not in ("spanning-true", "spanning-false"):
            raise ValueError(f"unknown null mode: {self.null_mode!r}")

    @classmethod
    def simple(
        cls,
        kind: str = "iid-normal",
        n_assets: int = 1,
        mean: float = 0.005,
        sd: float = 0.04,
        corr: float = 0.3,
        persistence: float = 0.0,
        null_mode: str = "spanning-true",
        shift: float = 0.01,
    ) -> "DgpSpec":
        """Homogeneous-asset DGP with a common pairwise correlation."""
        cov = np.full((n_assets, n_assets), corr * sd * sd)
        np.fill_diagonal(cov, sd * sd)
        return cls(
            kind=kind,
            n_assets=n_assets,
            means=(mean,) * n_assets,
            cov=tuple(tuple(row) for row in cov),
            persistence=persistence,
            null_mode=null_mode,
            shift=shift,
        )


def _base_draws(dgp: DgpSpec, t: int, rng: np.random.Generator) -> np.ndarray:
    mu = np.asarray(dgp.means)
    sigma = np.asarray(dgp.cov)
    if dgp.kind == "iid-normal":
        return rng.multivariate_normal(mu, sigma, size=t, method="svd")
    if dgp.kind == "ar1":
        phi = dgp.persistence
        innov_cov = sigma * (1.0 - phi**2)
        x = np.empty((t, dgp.n_assets))
        state = rng.multivariate_normal(np.zeros(dgp.n_assets), sigma, method="svd")
        for i in range(t):
            eps = rng.multivariate_normal(
                np.zeros(dgp.n_assets), innov_cov, method="svd"
            )
            state = phi * state + eps
            x[i] = mu + state
        return x
    # garch-like: per-asset variance recursion around the target covariance,
    # persistence split 1:3 between the shock and lagged-variance terms
    p = dgp.persistence
    a_coef, b_coef = 0.25 * p, 0.75 * p
    var = np.diag(sigma).copy()
    omega = var * (1.0 - p)
    d = np.sqrt(var)
    corr = sigma / np.outer(d, d) if np.all(d > 0) else np.eye(dgp.n_assets)
    chol = np.linalg.cholesky(corr + 1e-12 * np.eye(dgp.n_assets))
    sig2 = var.copy()
    x = np.empty((t, dgp.n_assets))
    prev = np.zeros(dgp.n_assets)
    for i in range(t):
        sig2 = omega + a_coef * prev**2 + b_coef * sig2
        z = chol @ rng.standard_normal(dgp.n_assets)
        prev = np.sqrt(sig2) * z
        x[i] = mu + prev
    return x


def generate_panel(dgp: DgpSpec, t: int, seed: int, rep: int) -> ReturnPanel:
    """One simulated panel: base assets plus the derived extra column."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
    base = _base_draws(dgp, t, rng)
    if dgp.null_mode == "spanning-true":
        extra = base[:, 0].copy()
    else:
        extra = base[:, 0] + dgp.shift
    values = np.column_stack([base, extra])
    dates = [f"{1900 + i // 12:04d}{i % 12 + 1:02d}" for i in range(t)]
    labels = tuple(f"A{i}" for i in range(dgp.n_assets)) + ("X",)
    return ReturnPanel(tuple(dates), labels, values)


@dataclass(frozen=True)
class RejectionSummary:
    """Per-rep statistics and the aggregate rejection rate."""

    rate: float
    rho: tuple[float, ...]
    q_bc: tuple[float, ...]
    reject: tuple[bool, ...]


def simulate_rejection_rate(
    dgp: DgpSpec,
    t: int,
    reps: int,
    alpha: float = 0.05,
    seed: int = 0,
    grid: GridParams = DESK_GRID,
    b_exponents: Sequence[float] = DEFAULT_B_EXPONENTS,
    mode: Mode = "paper",
    jobs: int = 1,
) -> RejectionSummary:
    """Fraction of replications where the spanning test rejects."""
    if reps < 1:
        raise ValueError("reps must be >= 1")

    labels = tuple(f"A{i}" for i in range(dgp.n_assets)) + ("X",)
    bench = PortfolioSet(labels, tuple(range(dgp.n_assets)))
    enlarged = PortfolioSet.full(labels)

    def one(rep: int):
        panel = generate_panel(dgp, t, seed, rep)
        decision = spanning_test(
            panel, bench, enlarged, alpha, b_exponents, grid, mode
        )
        return decision.rho, decision.q_bc, decision.decision == "RejectSpanning"

    rows = parallel_map(one, range(reps), jobs)
    rejects = [r[2] for r in rows]
    return RejectionSummary(
        rate=sum(rejects) / reps,
        rho=tuple(r[0] for r in rows),
        q_bc=tuple(r[1] for r in rows),
        reject=tuple(rejects),
    )
