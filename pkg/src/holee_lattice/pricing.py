"""European claims on the lattice: backward induction, path enumeration, Monte Carlo.

One step of the rollback from ``m`` to ``m - 1`` is::

    V(m-1, i) = B(t-dt, t | node) * (q(t) V(m, i+1) + (1 - q(t)) V(m, i)),   t = m dt

Caplets and floorlets pay ``max(R - K, 0) * dt`` (resp. ``max(K - R, 0) * dt``)
at ``T_e + dt`` where ``R = -ln B(T_e, T_e + dt) / dt`` is the realised
continuously compounded one-period rate and ``K`` is quoted on the same basis.
Their value at ``T_e`` is that amount times ``B(T_e, T_e + dt)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lattice import DiscountCurve, Lattice, enumerate_paths, evolve_paths
from .model import ModelParams, TimeGrid

ZCB_CALL = "zcb_call"
ZCB_PUT = "zcb_put"
CAPLET = "caplet"
FLOORLET = "floorlet"
CUSTOM = "custom"
KINDS = (ZCB_CALL, ZCB_PUT, CAPLET, FLOORLET, CUSTOM)

MAX_ENUMERATION_STEPS = 20

# payoff(curves) -> values; curves[j, k] = B(T_e, T_e + k dt) at terminal node/path j
TerminalPayoff = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Claim:
    kind: str
    exercise: float
    maturity: float | None = None
    strike: float = 0.0
    payoff: TerminalPayoff | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown claim kind {self.kind!r}; expected one of {KINDS}")
        if not (math.isfinite(self.strike) and self.strike >= 0):
            raise ValueError(f"strike = {self.strike!r} must be nonnegative")
        if self.kind in (ZCB_CALL, ZCB_PUT):
            if self.maturity is None or self.maturity < self.exercise:
                raise ValueError("bond claims need maturity >= exercise")
        if self.kind == CUSTOM and self.payoff is None:
            raise ValueError("custom claims need a payoff callable")

    def describe(self) -> str:
        if self.kind in (ZCB_CALL, ZCB_PUT):
            return f"{self.kind}(exercise={self.exercise:g}, maturity={self.maturity:g}, strike={self.strike:.15g})"
        if self.kind in (CAPLET, FLOORLET):
            return f"{self.kind}(exercise={self.exercise:g}, strike={self.strike:.15g})"
        return f"custom(exercise={self.exercise:g})"

    def steps(self, grid: TimeGrid) -> tuple[int, int]:
        """(exercise step, last maturity step the payoff reads)."""
        m_e = grid.step(self.exercise, "exercise")
        if self.kind in (ZCB_CALL, ZCB_PUT):
            last = grid.step(self.maturity, "maturity")
        elif self.kind in (CAPLET, FLOORLET):
            last = m_e + 1
            if last > grid.n_steps:
                raise ValueError("caplet/floorlet period ends beyond the grid horizon")
        else:
            last = grid.n_steps
        return m_e, last

    def terminal_values(self, curves: np.ndarray, grid: TimeGrid) -> np.ndarray:
        m_e, last = self.steps(grid)
        K = self.strike
        if self.kind == ZCB_CALL:
            return np.maximum(curves[:, last - m_e] - K, 0.0)
        if self.kind == ZCB_PUT:
            return np.maximum(K - curves[:, last - m_e], 0.0)
        if self.kind in (CAPLET, FLOORLET):
            bond = curves[:, 1]
            rate = -np.log(bond) / grid.dt
            gap = rate - K if self.kind == CAPLET else K - rate
            return bond * np.maximum(gap, 0.0) * grid.dt
        values = np.asarray(self.payoff(curves), dtype=float)
        if values.shape != (curves.shape[0],):
            raise ValueError("custom payoff must return one value per node")
        return values


def rollback(lattice: Lattice, terminal: np.ndarray, m_e: int) -> list[np.ndarray]:
    """Node values for steps 0..m_e given the values at step ``m_e``."""
    if m_e > lattice.depth:
        raise ValueError(f"exercise step {m_e} beyond lattice depth {lattice.depth}")
    values = [None] * (m_e + 1)
    values[m_e] = np.asarray(terminal, dtype=float)
    for m in range(m_e, 0, -1):
        q = lattice.params.q_at(m)
        v = values[m]
        short = lattice.curves[m - 1][:, 1]
        values[m - 1] = short * (q * v[1:] + (1.0 - q) * v[:-1])
    return values


def price_european(lattice: Lattice, claim: Claim) -> float:
    m_e, _ = claim.steps(lattice.grid)
    if m_e > lattice.depth:
        raise ValueError(f"claim exercises at step {m_e}, lattice depth is {lattice.depth}")
    terminal = claim.terminal_values(np.asarray(lattice.curves[m_e]), lattice.grid)
    return float(rollback(lattice, terminal, m_e)[0][0])


def enumerate_price(initial: DiscountCurve, params: ModelParams, claim: Claim) -> float:
    """Price by summing over every epsilon path to the exercise date.

    Independent of the lattice: each path is evolved on its own, discounted by
    its realised one-period bonds and weighted by the product of q / (1 - q).
    Works for non-recombining parameters too.
    """
    m_e, _ = claim.steps(params.grid)
    if m_e > MAX_ENUMERATION_STEPS:
        raise ValueError(f"enumeration limited to {MAX_ENUMERATION_STEPS} steps")
    paths = enumerate_paths(m_e)
    curves, disc = evolve_paths(initial, params, paths)
    q = params.q.at_steps(np.arange(1, m_e + 1))
    weight = np.prod(np.where(paths == 1, q, 1.0 - q), axis=1)
    payoff = claim.terminal_values(curves, params.grid)
    return float(math.fsum(weight * disc * payoff))


def mc_price(
    initial: DiscountCurve,
    params: ModelParams,
    claim: Claim,
    n_paths: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error with epsilon drawn under q(t)."""
    if n_paths < 100:
        raise ValueError("mc_price needs at least 100 paths")
    m_e, last = claim.steps(params.grid)
    rng = np.random.default_rng(seed)
    q = params.q.at_steps(np.arange(1, m_e + 1))
    eps = (rng.random((n_paths, m_e)) < q).astype(np.int8)
    # bond and rate payoffs only read maturities up to ``last``
    horizon = params.grid.n_steps if claim.kind == CUSTOM else min(max(last, m_e + 1), params.grid.n_steps)
    curves, disc = evolve_paths(initial, params, eps, horizon=horizon)
    x = disc * claim.terminal_values(curves, params.grid)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n_paths))
