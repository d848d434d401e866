"""Short-rate behaviour along monotone paths, classical versus extended model.

Rates are computed in log space along the all-down path (node ``(m, 0)``) and
the all-up path (node ``(m, m)``).  Those nodes are reached by a single path,
so no lattice is needed and depths of a few thousand steps stay cheap.  Input
curves are extrapolated at their terminal one-period forward rate wherever
maturities beyond the grid are needed.

Verdict rules on a series ``r_1..r_n`` (finite-depth stand-ins for limits):

* ``DivergesToInfinity``: strictly increasing over the last quarter and
  either above ``EXPLOSION_LEVEL`` or still growing, i.e. the last half rose
  by more than ``DRIFT_TOL`` and the mean increment of the last quarter is at
  least half that of the quarter before it.
* ``DivergesNegative``: strictly decreasing over the last quarter and either
  below ``-EXPLOSION_LEVEL`` or sliding into negative rates, i.e. the last
  half fell by more than ``DRIFT_TOL`` and the final rate is negative.
* ``Bounded(lo, hi)`` otherwise, with the extremes over the last half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .lattice import DiscountCurve
from .model import ModelParams, TimeGrid

ALL_DOWN = "AllDown"
ALL_UP = "AllUp"
CLASSICAL = "Classical"
EXTENDED = "Extended"

DIVERGES_NEGATIVE = "DivergesNegative"
DIVERGES_TO_INFINITY = "DivergesToInfinity"
BOUNDED = "Bounded"

EXPLOSION_LEVEL = 10.0
DRIFT_TOL = 1e-3
MIN_SERIES = 8
MAX_DEPTH = 2000


@dataclass(frozen=True)
class Verdict:
    kind: str
    lo: float | None = None
    hi: float | None = None

    def __str__(self) -> str:
        if self.kind == BOUNDED:
            return f"Bounded({self.lo:.15g}, {self.hi:.15g})"
        return self.kind

    def as_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == BOUNDED:
            d.update(lo=self.lo, hi=self.hi)
        return d


def classify_series(rates: Sequence[float]) -> Verdict:
    r = np.asarray(rates, dtype=float)
    n = r.size
    if n == 0:
        return Verdict(BOUNDED, math.nan, math.nan)
    half = r[n // 2 :]
    if n >= MIN_SERIES:
        last = np.diff(r[(3 * n) // 4 :])
        before = np.diff(r[n // 2 : (3 * n) // 4 + 1])
        drift = half[-1] - half[0]
        if np.all(last > 0) and (
            r[-1] > EXPLOSION_LEVEL or (drift > DRIFT_TOL and last.mean() >= 0.5 * before.mean())
        ):
            return Verdict(DIVERGES_TO_INFINITY)
        if np.all(last < 0) and (r[-1] < -EXPLOSION_LEVEL or (drift < -DRIFT_TOL and r[-1] < 0)):
            return Verdict(DIVERGES_NEGATIVE)
    return Verdict(BOUNDED, float(half.min()), float(half.max()))


def _extend(initial: DiscountCurve, params: ModelParams, horizon: int):
    if initial.grid.dt != params.grid.dt:
        raise ValueError("curve and model use different dt")
    grid = TimeGrid(params.grid.dt, horizon)
    return initial.extended(horizon), params.with_grid(grid)


def _log_curves(initial: DiscountCurve, params: ModelParams, path: Sequence[int]) -> Iterator[np.ndarray]:
    """Yield ln B(m dt, (m + k) dt) along ``path`` for m = 0..len(path)."""
    n = params.grid.n_steps
    logb = np.log(initial.values)
    yield logb
    for m, e in enumerate(path, start=1):
        h = params.log_ratio(m, np.arange(m, n + 1))
        q = params.q_at(m)
        log_up = -np.log(q + (1.0 - q) * np.exp(-h))
        logb = logb[1:] - logb[1] + (log_up if e else log_up - h)
        yield logb


@dataclass(frozen=True)
class FInfinityEstimate:
    maturities: np.ndarray  # years
    ratios: np.ndarray  # B(t + dt, T) / B(t, T)
    cauchy: float  # max successive difference over the last quarter

    @property
    def limit(self) -> float:
        """Last ratio, the finite-horizon stand-in for 1 + f_inf."""
        return float(self.ratios[-1])


def f_infinity_estimate(
    initial: DiscountCurve,
    params: ModelParams,
    path: Sequence[int],
    t: float,
    T_max: float,
) -> FInfinityEstimate:
    """Ratios B(t+dt, T) / B(t, T) along ``path`` for T = t + 2dt .. T_max."""
    dt = params.grid.dt
    m = int(round(t / dt))
    H = int(round(T_max / dt))
    if abs(m * dt - t) > 1e-9 * max(1.0, abs(t)) or abs(H * dt - T_max) > 1e-9 * max(1.0, abs(T_max)):
        raise ValueError("t and T_max must be grid times")
    if len(path) < m + 1:
        raise ValueError(f"path needs at least {m + 1} entries to reach t + dt")
    if H < m + 2:
        raise ValueError("T_max must be at least t + 2 dt")
    curve, p = _extend(initial, params, H)
    logs = list(_log_curves(curve, p, path[: m + 1]))
    now, nxt = logs[m], logs[m + 1]
    # now[k] is maturity m + k, nxt[k] is maturity m + 1 + k
    ratios = np.exp(nxt[1:] - now[2:])
    diffs = np.abs(np.diff(ratios))
    tail = diffs[(3 * diffs.size) // 4 :]
    cauchy = float(tail.max()) if tail.size else 0.0
    return FInfinityEstimate(np.arange(m + 2, H + 1) * dt, ratios, cauchy)


@dataclass(frozen=True, eq=False)
class AsymptoticsReport:
    mode: str
    path_type: str
    steps: np.ndarray
    rates: np.ndarray  # per-period log rate at the monotone node
    bonds: np.ndarray  # B(t, t + dt)
    f_inf: np.ndarray  # running estimate of F_inf at the far end of the curve
    verdict: Verdict
    truncated: bool = False

    @property
    def window(self) -> tuple[float, float]:
        """(lo, hi) of the rates over the final half of the run."""
        half = self.rates[self.rates.size // 2 :]
        return float(half.min()), float(half.max())

    @property
    def window_width(self) -> float:
        lo, hi = self.window
        return hi - lo

    def records(self) -> Iterator[tuple[int, float, float, float]]:
        for row in zip(self.steps, self.rates, self.bonds, self.f_inf):
            yield int(row[0]), float(row[1]), float(row[2]), float(row[3])


def short_rate_profile(
    initial: DiscountCurve,
    params: ModelParams,
    path_type: str,
    depth: int,
    tail: int | None = None,
) -> AsymptoticsReport:
    """Short rates at nodes (m, 0) (AllDown) or (m, m) (AllUp) for m = 1..depth.

    The curve is carried out to ``depth + 1 + tail`` steps (default
    ``tail = depth``) so the running F_inf estimate looks far past each node.
    """
    if path_type not in (ALL_DOWN, ALL_UP):
        raise ValueError(f"path_type must be {ALL_DOWN!r} or {ALL_UP!r}")
    if not 1 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth = {depth} outside [1, {MAX_DEPTH}]")
    tail = depth if tail is None else tail
    curve, p = _extend(initial, params, depth + 1 + tail)
    e = 1 if path_type == ALL_UP else 0
    rates, bonds, f_inf = [], [], []
    truncated = False
    prev = None
    for m, logb in enumerate(_log_curves(curve, p, [e] * depth)):
        if m > 0:
            r = -logb[1]
            gap = prev[-1] - logb[-1]
            fi = math.exp(gap) if gap < 709.0 else math.inf
            if not math.isfinite(r):
                truncated = True
                break
            rates.append(r)
            bonds.append(math.exp(-r))
            f_inf.append(fi)
        prev = logb
    rates = np.array(rates)
    mode = CLASSICAL if params.is_classical else EXTENDED
    return AsymptoticsReport(
        mode=mode,
        path_type=path_type,
        steps=np.arange(1, rates.size + 1),
        rates=rates,
        bonds=np.array(bonds),
        f_inf=np.array(f_inf),
        verdict=classify_series(rates),
        truncated=truncated,
    )


@dataclass(frozen=True, eq=False)
class DrawbackReport:
    depth: int
    reports: dict = field(default_factory=dict)  # (mode, path_type) -> AsymptoticsReport

    COLUMNS = ("step", "r_classical_down", "r_classical_up", "r_extended_down", "r_extended_up")
    _KEYS = ((CLASSICAL, ALL_DOWN), (CLASSICAL, ALL_UP), (EXTENDED, ALL_DOWN), (EXTENDED, ALL_UP))

    def rows(self) -> Iterator[tuple]:
        series = [self.reports[k].rates for k in self._KEYS]
        for m in range(1, self.depth + 1):
            yield (m, *(float(s[m - 1]) if m <= s.size else math.nan for s in series))

    @property
    def verdicts(self) -> dict[str, Verdict]:
        return {name: self.reports[k].verdict for name, k in zip(self.COLUMNS[1:], self._KEYS)}

    @property
    def contract_holds(self) -> bool:
        """Classical columns are the two divergences, extended columns bounded."""
        v = self.verdicts
        classical = {v["r_classical_down"].kind, v["r_classical_up"].kind}
        return classical == {DIVERGES_NEGATIVE, DIVERGES_TO_INFINITY} and all(
            v[c].kind == BOUNDED for c in ("r_extended_down", "r_extended_up")
        )


def drawback_report(
    initial: DiscountCurve,
    classical: ModelParams,
    extended: ModelParams,
    depth: int,
) -> DrawbackReport:
    if classical.grid.dt != extended.grid.dt:
        raise ValueError("classical and extended models must share dt")
    reports = {}
    for label, params in ((CLASSICAL, classical), (EXTENDED, extended)):
        for path_type in (ALL_DOWN, ALL_UP):
            rep = short_rate_profile(initial, params, path_type, depth)
            # label by the slot, not by what is_classical infers
            reports[(label, path_type)] = AsymptoticsReport(
                label, path_type, rep.steps, rep.rates, rep.bonds, rep.f_inf, rep.verdict, rep.truncated
            )
    return DrawbackReport(depth, reports)
