"""(mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates.

Strategy parameters are the usual defaults (Hansen, "The CMA Evolution
Strategy: A Tutorial", 2016). The covariance is re-decomposed every
generation, which is cheap at the dimensions used here (at most 22).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# eigenvalues of C are floored at this fraction of the largest one
EIG_FLOOR = 1e-14


class CovarianceError(ArithmeticError):
    """The covariance matrix stopped being symmetric positive definite."""


def default_population_size(n: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(n)))


@dataclass
class CMAES:
    """Ask/tell optimizer state.

    ``rng`` drives all sampling, so a seeded generator makes a run
    reproducible bit for bit.
    """

    mean: np.ndarray
    sigma: float
    rng: np.random.Generator
    popsize: int | None = None

    def __post_init__(self):
        self.mean = np.array(self.mean, dtype=float)
        n = self.n = self.mean.size
        if n < 1:
            raise ValueError("need at least one free variable")
        if not self.sigma > 0:
            raise ValueError("sigma0 must be > 0")
        lam = self.popsize or default_population_size(n)
        if lam < 2:
            raise ValueError("population size must be >= 2")
        self.lam = lam
        self.mu = mu = lam // 2
        w = math.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = mueff = 1.0 / float(np.sum(self.weights**2))

        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.generation = 0
        self.min_eigenvalue = 1.0
        self._z = None

    def ask(self) -> np.ndarray:
        """Sample ``lam`` candidates, one per row."""
        z = self.rng.standard_normal((self.lam, self.n))
        self._z = z
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def tell(self, candidates: np.ndarray, fitness) -> None:
        fitness = np.asarray(fitness, dtype=float)
        if fitness.shape != (self.lam,):
            raise ValueError("need one fitness value per candidate")
        n, mu = self.n, self.mu
        order = np.argsort(fitness, kind="stable")
        y = (np.asarray(candidates)[order[:mu]] - self.mean) / self.sigma
        y_w = self.weights @ y
        self.mean = self.mean + self.sigma * y_w
        self.generation += 1

        # C^-1/2 y_w through the current eigenbasis
        c_inv_sqrt_y = self.B @ ((self.B.T @ y_w) / self.D)
        self.ps = (1 - self.cs) * self.ps + math.sqrt(
            self.cs * (2 - self.cs) * self.mueff
        ) * c_inv_sqrt_y
        ps_norm = float(np.linalg.norm(self.ps))
        hsig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) < (
            1.4 + 2 / (n + 1)
        ) * self.chi_n
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(
            self.cc * (2 - self.cc) * self.mueff
        ) * y_w

        rank_one = np.outer(self.pc, self.pc)
        rank_mu = (y.T * self.weights) @ y
        delta_h = (1 - hsig) * self.cc * (2 - self.cc)
        self.C = (
            (1 - self.c1 - self.cmu + self.c1 * delta_h) * self.C
            + self.c1 * rank_one
            + self.cmu * rank_mu
        )
        self.sigma *= math.exp((self.cs / self.damps) * (ps_norm / self.chi_n - 1))

        # flat fitness: the best and the mu-th candidate tie, widen the search
        if fitness[order[0]] == fitness[order[min(mu, self.lam - 1)]]:
            self.sigma *= math.exp(0.2 + self.cs / self.damps)
        self._decompose()

    def _decompose(self) -> None:
        C = np.triu(self.C) + np.triu(self.C, 1).T
        eigvals, B = np.linalg.eigh(C)
        self.min_eigenvalue = float(eigvals.min())
        if not np.all(np.isfinite(eigvals)) or eigvals.max() <= 0:
            raise CovarianceError(f"covariance lost positive definiteness: eigenvalues {eigvals}")
        floor = EIG_FLOOR * float(eigvals.max())
        if self.min_eigenvalue < floor:
            eigvals = np.maximum(eigvals, floor)
            C = (B * eigvals) @ B.T
        self.C = C
        self.B = B
        self.D = np.sqrt(eigvals)

    @property
    def condition(self) -> float:
        return float((self.D.max() / self.D.min()) ** 2)


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    evaluations: int
    iterations: int
    history: list[float] = field(default_factory=list)
    stop_reason: str = "max_iterations"


def minimize(
    func: Callable[[np.ndarray], float],
    x0,
    sigma0: float,
    *,
    max_iterations: int = 1000,
    popsize: int | None = None,
    rng: np.random.Generator | int | None = None,
    tolfun: float = 1e-12,
    tolx: float = 1e-12,
    target: float | None = None,
    callback: Callable[[CMAES], None] | None = None,
) -> MinimizeResult:
    """Minimize ``func`` from ``x0``; returns the best candidate ever evaluated.

    ``history`` holds the best fitness of each generation. The run stops
    early when the fitness range over the recent generations falls below
    ``tolfun``, when every step size falls below ``tolx`` or when
    ``target`` is reached.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    es = CMAES(np.asarray(x0, float), float(sigma0), rng, popsize)
    best_x = es.mean.copy()
    best_f = math.inf
    evaluations = 0
    history: list[float] = []
    window = 10 + int(math.ceil(30 * es.n / es.lam))
    stop = "max_iterations"
    for _ in range(max_iterations):
        X = es.ask()
        f = np.array([func(x) for x in X], dtype=float)
        evaluations += len(f)
        k = int(np.argmin(f))
        if f[k] < best_f:
            best_f, best_x = float(f[k]), X[k].copy()
        history.append(float(f[k]))
        es.tell(X, f)
        if callback is not None:
            callback(es)
        if target is not None and best_f <= target:
            stop = "target"
            break
        recent = history[-window:]
        if len(history) >= window and max(recent) - min(recent) < tolfun and np.ptp(f) < tolfun:
            stop = "tolfun"
            break
        if es.sigma * float(np.sqrt(np.max(np.diag(es.C)))) < tolx:
            stop = "tolx"
            break
    return MinimizeResult(best_x, best_f, evaluations, len(history), history, stop)
