"""Recombining lattice of discount curves, path evolution and simulation.

A node ``(m, i)`` sits at time ``m * dt`` after ``i`` up moves (epsilon = 1).
Its curve is stored as an array whose entry ``k`` is ``B(m dt, (m + k) dt)``,
so entry 0 is the maturing bond and entry 1 the one-period bond.

Moving from step ``m - 1`` to ``m``::

    B(m, T) = B(m-1, T) / B(m-1, m) * (U(m, T) if up else D(m, T))
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ArithmeticUnderflow, NonRecombiningError
from .model import Convention, ModelParams, TimeGrid

RECOMBINE_TOL = 1e-10
PAR_TOL = 1e-12
MAX_ENUMERATION_DEPTH = 12


@dataclass(frozen=True, eq=False)
class DiscountCurve:
    """Zero prices ``B(0, k dt)`` for ``k = 0..n_steps``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.grid.n_steps + 1:
            raise ValueError(f"curve needs {self.grid.n_steps + 1} values, got {v.size}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            k = int(np.flatnonzero(~(np.isfinite(v) & (v > 0)))[0])
            raise ValueError(f"discount at maturity step {k} is {v[k]!r}; must be positive")
        if abs(v[0] - 1.0) > PAR_TOL:
            raise ValueError(f"B(0,0) = {v[0]!r}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def flat(cls, grid: TimeGrid, rate: float) -> DiscountCurve:
        """Continuously compounded flat curve, ``B(0, T) = exp(-rate * T)``."""
        return cls(grid, np.exp(-rate * grid.times()))

    @property
    def monotone(self) -> bool:
        """False when some forward rate is negative; such curves are still accepted."""
        return bool(np.all(np.diff(self.values) <= 0))

    def price(self, T: float) -> float:
        return float(self.values[self.grid.step(T, "T")])

    def extended(self, n_steps: int) -> DiscountCurve:
        """Extrapolate to ``n_steps`` holding the last one-period forward rate."""
        n = self.grid.n_steps
        if n_steps <= n:
            return DiscountCurve(TimeGrid(self.grid.dt, n_steps), self.values[: n_steps + 1])
        fwd = math.log(self.values[n - 1] / self.values[n])
        tail = self.values[n] * np.exp(-fwd * np.arange(1, n_steps - n + 1))
        return DiscountCurve(TimeGrid(self.grid.dt, n_steps), np.concatenate((self.values, tail)))


@dataclass(frozen=True, eq=False)
class LatticeNode:
    step: int
    ups: int
    time: float
    curve: np.ndarray  # B(t, t + k dt), k = 0..


@dataclass(frozen=True, eq=False)
class Lattice:
    params: ModelParams
    initial: DiscountCurve
    depth: int
    curves: tuple[np.ndarray, ...]  # curves[m][i, k] = B(m dt, (m + k) dt | i ups)

    @property
    def grid(self) -> TimeGrid:
        return self.params.grid

    def curve(self, m: int, i: int) -> np.ndarray:
        self._check_node(m, i)
        return self.curves[m][i]

    def node(self, m: int, i: int) -> LatticeNode:
        return LatticeNode(m, i, self.grid.time(m), self.curve(m, i))

    def nodes(self) -> Iterator[LatticeNode]:
        for m in range(self.depth + 1):
            for i in range(m + 1):
                yield self.node(m, i)

    def price(self, m: int, i: int, T: float) -> float:
        N = self.grid.step(T, "T")
        if N < m:
            raise ValueError(f"maturity T = {T!r} precedes node time")
        return float(self.curve(m, i)[N - m])

    def _check_node(self, m: int, i: int) -> None:
        if not 0 <= m <= self.depth or not 0 <= i <= m:
            raise IndexError(f"node ({m}, {i}) outside lattice of depth {self.depth}")


def _check_inputs(initial: DiscountCurve, params: ModelParams) -> None:
    if initial.grid != params.grid:
        raise ValueError(f"curve grid {initial.grid} differs from model grid {params.grid}")


def _check_prices(block: np.ndarray, step: int, nodes: np.ndarray | None = None) -> None:
    ok = np.isfinite(block) & (block > 0)
    if not np.all(ok):
        row = int(np.argwhere(~ok)[0][0])
        node = int(nodes[row]) if nodes is not None else row
        raise ArithmeticUnderflow(
            f"non-positive or non-finite price at step {step}, node {node}", step=step, node=node
        )


def build_lattice(initial: DiscountCurve, params: ModelParams, depth: int) -> Lattice:
    """Forward induction of node curves up to ``depth`` steps.

    Every interior node is reached twice, as the up child of ``(m-1, i-1)``
    and the down child of ``(m-1, i)``.  Both are computed and must agree to
    ``RECOMBINE_TOL`` relative, otherwise NonRecombiningError is raised.
    """
    _check_inputs(initial, params)
    n = params.grid.n_steps
    if not 0 <= depth <= n:
        raise ValueError(f"depth = {depth} outside [0, {n}]")
    check_par = params.convention is Convention.TIME_TO_MATURITY
    curves = [initial.values.copy()[None, :]]
    for m in range(1, depth + 1):
        parent = curves[-1]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):  # caught by _check_prices
            fwd = parent[:, 1:] / parent[:, 1:2]
        U, D = params.factors(m, np.arange(m, n + 1))
        up = fwd * U  # children (m, 1..m)
        down = fwd * D  # children (m, 0..m-1)
        _check_prices(up, m, np.arange(1, m + 1))
        _check_prices(down, m)
        if m > 1:
            a, b = up[:-1], down[1:]
            spread = np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))
            worst = float(spread.max())
            if worst > RECOMBINE_TOL:
                i = int(np.unravel_index(np.argmax(spread), spread.shape)[0]) + 1
                raise NonRecombiningError(
                    f"up and down children of node ({m}, {i}) differ by {worst:.3e} relative",
                    step=m, node=i, spread=worst,
                )
        block = np.vstack((down[:1], up))
        if check_par and np.max(np.abs(block[:, 0] - 1.0)) > PAR_TOL:
            raise ArithmeticUnderflow(f"B(t,t) drifted from 1 at step {m}", step=m)
        block.setflags(write=False)
        curves.append(block)
    return Lattice(params, initial, depth, tuple(curves))


def _as_paths(eps) -> np.ndarray:
    e = np.asarray(eps)
    if e.ndim == 1:
        e = e[None, :]
    if e.size and not np.all((e == 0) | (e == 1)):
        raise ValueError("path entries must be 0 or 1")
    return e.astype(bool)


def evolve_paths(
    initial: DiscountCurve,
    params: ModelParams,
    eps,
    horizon: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the one-step update along each row of ``eps`` (shape paths x steps).

    Returns ``(curves, discount)``: the curves at step ``m = eps.shape[1]``
    over maturities ``m..horizon`` and the realised discount
    ``prod_k B(k dt, (k+1) dt | path)`` for ``k < m``.
    """
    _check_inputs(initial, params)
    e = _as_paths(eps)
    n_paths, m_end = e.shape
    horizon = params.grid.n_steps if horizon is None else horizon
    if m_end > horizon or horizon > params.grid.n_steps:
        raise ValueError(f"path length {m_end} / horizon {horizon} exceed grid of {params.grid.n_steps} steps")
    cur = np.broadcast_to(initial.values[: horizon + 1], (n_paths, horizon + 1))
    disc = np.ones(n_paths)
    for m in range(1, m_end + 1):
        U, D = params.factors(m, np.arange(m, horizon + 1))
        short = cur[:, 1:2]
        disc = disc * short[:, 0]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            cur = cur[:, 1:] / short * np.where(e[:, m - 1 : m], U, D)
        _check_prices(cur, m)
    return np.array(cur), disc


def evolve_path(initial: DiscountCurve, params: ModelParams, path: Sequence[int]) -> np.ndarray:
    """Curve after applying the one-step update once per path entry.

    Entry ``k`` of the result is ``B(m dt, (m + k) dt)`` with ``m = len(path)``.
    """
    curves, _ = evolve_paths(initial, params, np.asarray(path, dtype=np.int8).reshape(1, -1))
    return curves[0]


def enumerate_paths(depth: int) -> np.ndarray:
    """All 2**depth paths, one per row."""
    return np.array(list(itertools.product((0, 1), repeat=depth)), dtype=np.int8).reshape(-1, depth)


def verify_recombination(initial: DiscountCurve, params: ModelParams, depth: int) -> float:
    """Max relative spread of curves among paths with equal up-count."""
    if not 0 <= depth <= MAX_ENUMERATION_DEPTH:
        raise ValueError(f"depth = {depth} outside [0, {MAX_ENUMERATION_DEPTH}]")
    paths = enumerate_paths(depth)
    curves, _ = evolve_paths(initial, params, paths)
    ups = paths.sum(axis=1)
    worst = 0.0
    for i in range(depth + 1):
        group = curves[ups == i]
        spread = (group.max(axis=0) - group.min(axis=0)) / np.abs(group).max(axis=0)
        worst = max(worst, float(spread.max()))
    return worst


def short_rate(lattice: Lattice, m: int, i: int) -> float:
    """Per-period log rate ``-ln B(t, t + dt)`` at node (m, i)."""
    c = lattice.curve(m, i)
    if c.size < 2:
        raise ValueError(f"node at step {m} has no one-period bond within the grid")
    return float(-math.log(c[1]))


def short_rate_annualized(lattice: Lattice, m: int, i: int) -> float:
    return short_rate(lattice, m, i) / lattice.grid.dt


def lattice_records(lattice: Lattice) -> Iterator[tuple[int, int, float, float]]:
    """(step, ups, maturity, price) for every node and maturity."""
    dt = lattice.grid.dt
    for m, block in enumerate(lattice.curves):
        for i, row in enumerate(block):
            for k, price in enumerate(row):
                yield m, i, (m + k) * dt, float(price)


def short_rate_records(lattice: Lattice) -> Iterator[tuple[int, int, float, float]]:
    """(step, ups, rate_per_period, rate_annualized) where the one-period bond exists."""
    dt = lattice.grid.dt
    for m, block in enumerate(lattice.curves):
        if block.shape[1] < 2:
            break
        for i, row in enumerate(block):
            r = -math.log(row[1])
            yield m, i, r, r / dt


def simulate_paths(params: ModelParams, horizon: int, n_paths: int, seed: int) -> np.ndarray:
    """Sample epsilon paths under the physical probabilities p(t).

    Row ``j``, column ``k - 1`` is epsilon(k dt) for path ``j``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if not 0 <= horizon <= params.grid.n_steps:
        raise ValueError(f"horizon = {horizon} outside [0, {params.grid.n_steps}]")
    rng = np.random.default_rng(seed)
    p = params.p.at_steps(np.arange(1, horizon + 1))
    return (rng.random((n_paths, horizon)) < p).astype(np.int8)
