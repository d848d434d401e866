"""Model core: parameters and the perturbation functions U, D and H = U/D.

Every time argument of the public functions is a grid time in years.  The
``ModelParams`` methods work on integer step indices (``m`` for the current
time, ``N`` for the maturity) and are vectorised over maturities; the lattice
and asymptotics modules use those directly.

With ``h(t, T) = C(T) * G(t, T)`` and ``G`` the CDF of eta(T)::

    U(t, T) = 1 / (q(t) + (1 - q(t)) * exp(-h))
    D(t, T) = exp(-h) * U(t, T)

so that ``q U + (1 - q) D = 1`` and ``U / D = exp(h)`` hold identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Callable, Iterable, Union

import numpy as np

from .errors import DegenerateSpread, HoLeeError, OffGridError

TIME_TOL = 1e-9
PMF_SUM_TOL = 1e-12

# tolerances of the identity verifiers
NO_ARBITRAGE_TOL = 1e-12
PORTFOLIO_TOL = 1e-10
TELESCOPING_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform trading clock ``t_k = k * dt`` for ``k = 0..n_steps``."""

    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt = {self.dt!r} must be a positive finite number")
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 1:
            raise ValueError(f"n_steps = {self.n_steps!r} must be a positive integer")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def step(self, t: float, name: str = "t") -> int:
        """Step index of grid time ``t``; raises OffGridError otherwise."""
        x = t / self.dt
        k = round(x)
        if not math.isfinite(x) or abs(x - k) > TIME_TOL * max(1.0, abs(x)):
            raise OffGridError(f"{name} = {t!r} is not on the grid dt = {self.dt!r}")
        if k < 0 or k > self.n_steps:
            raise OffGridError(f"{name} = {t!r} lies outside [0, {self.horizon!r}]")
        return int(k)

    def time(self, k: int) -> float:
        return k * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


class Convention(str, Enum):
    """Which argument the eta CDF receives in ``h(t, T)``."""

    TIME_TO_MATURITY = "time_to_maturity"  # P(eta(T) <= T - t)
    CALENDAR_TIME = "calendar_time"  # P(eta(T) <= t), the literal printed form


# ---------------------------------------------------------------------------
# eta(T): distribution on {dt, 2dt, ..., N dt}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformEta:
    """Mass 1/N on each support point."""

    def pmf(self, N: int) -> np.ndarray:
        return np.full(N, 1.0 / N)

    def cdf(self, a, N):
        a = np.asarray(a, dtype=float)
        return a / np.asarray(N, dtype=float)

    def check(self, n_steps: int) -> None:
        pass


@dataclass(frozen=True)
class TruncatedGeometricEta:
    """pmf(j) proportional to ``rho**j`` on j = 1..N."""

    rho: float

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"eta rho = {self.rho!r} outside (0,1)")

    def pmf(self, N: int) -> np.ndarray:
        w = self.rho ** np.arange(1, N + 1)
        return w / w.sum()

    def cdf(self, a, N):
        # sum_{j<=a} rho^j / sum_{j<=N} rho^j = (1 - rho^a) / (1 - rho^N)
        lr = math.log(self.rho)
        a = np.asarray(a, dtype=float)
        N = np.asarray(N, dtype=float)
        return np.expm1(a * lr) / np.expm1(N * lr)

    def check(self, n_steps: int) -> None:
        pass


@dataclass(frozen=True)
class TableEta:
    """Explicit pmf per maturity: ``rows[N - 1]`` has the N probabilities of eta(N dt)."""

    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(v) for v in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        for n, row in enumerate(rows, start=1):
            if len(row) != n:
                raise ValueError(f"eta pmf for maturity step {n} has {len(row)} entries, expected {n}")
            for j, v in enumerate(row, start=1):
                if not (math.isfinite(v) and v >= 0.0):
                    raise ValueError(f"eta pmf[{n}][{j}] = {v!r} is negative or not finite")
            total = math.fsum(row)
            if abs(total - 1.0) > PMF_SUM_TOL:
                raise ValueError(f"eta pmf for maturity step {n} sums to {total!r}, expected 1 within {PMF_SUM_TOL:g}")

    @cached_property
    def _cdf_matrix(self) -> np.ndarray:
        n = len(self.rows)
        mat = np.zeros((n + 1, n + 1))
        for N, row in enumerate(self.rows, start=1):
            c = np.cumsum(row)
            mat[N, 1 : N + 1] = c / c[-1]
            mat[N, N + 1 :] = 1.0
        return mat

    def pmf(self, N: int) -> np.ndarray:
        return np.array(self.rows[N - 1])

    def cdf(self, a, N):
        a = np.asarray(a, dtype=np.int64)
        N = np.asarray(N, dtype=np.int64)
        if np.any(N > len(self.rows)):
            raise ValueError(f"eta table covers maturities up to step {len(self.rows)}, got {int(np.max(N))}")
        return self._cdf_matrix[N, a]

    def check(self, n_steps: int) -> None:
        if len(self.rows) < n_steps:
            raise ValueError(f"eta table has {len(self.rows)} maturities, grid needs {n_steps}")


EtaSpec = Union[UniformEta, TruncatedGeometricEta, TableEta]


# ---------------------------------------------------------------------------
# C(T): maturity scale
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantScale:
    c: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"scale c = {self.c!r} must be positive")

    def values(self, N, dt: float) -> np.ndarray:
        return np.full(np.shape(N), self.c, dtype=float)


@dataclass(frozen=True)
class LinearScale:
    """C(T) = kappa * T.  kappa = -ln(delta) reproduces the classical model."""

    kappa: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"scale kappa = {self.kappa!r} must be positive")

    def values(self, N, dt: float) -> np.ndarray:
        return self.kappa * (np.asarray(N, dtype=float) * dt)


@dataclass(frozen=True)
class SaturatingScale:
    """C(T) = c_inf * (1 - exp(-T / tau)), bounded by c_inf."""

    c_inf: float
    tau: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c_inf) and self.c_inf > 0):
            raise ValueError(f"scale c_inf = {self.c_inf!r} must be positive")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"scale tau = {self.tau!r} must be positive")

    def values(self, N, dt: float) -> np.ndarray:
        return -self.c_inf * np.expm1(-(np.asarray(N, dtype=float) * dt) / self.tau)


@dataclass(frozen=True)
class TableScale:
    """``values[N - 1]`` is C(N dt)."""

    table: tuple[float, ...]

    def __post_init__(self) -> None:
        table = tuple(float(v) for v in self.table)
        object.__setattr__(self, "table", table)
        for k, v in enumerate(table):
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"scale[{k}] = {v!r} must be positive")

    def values(self, N, dt: float) -> np.ndarray:
        N = np.asarray(N, dtype=np.int64)
        if np.any(N > len(self.table)) or np.any(N < 1):
            raise ValueError(f"scale table covers maturity steps 1..{len(self.table)}")
        return np.asarray(self.table)[N - 1]


MaturityScale = Union[ConstantScale, LinearScale, SaturatingScale, TableScale]


# ---------------------------------------------------------------------------
# q(t) and p(t)
# ---------------------------------------------------------------------------

RISK_NEUTRAL = "risk_neutral"
PHYSICAL = "physical"


@dataclass(frozen=True)
class ProbSchedule:
    """Piecewise-constant probability per step.

    ``values[k]`` applies at step ``k + 1``; the last value holds for all later
    steps, so a one-element schedule is a constant.  Risk-neutral weights must
    lie in the open interval (0,1).  Physical probabilities only drive path
    simulation and may touch the end points.
    """

    values: tuple[float, ...]
    role: str = RISK_NEUTRAL

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in np.atleast_1d(self.values))
        object.__setattr__(self, "values", values)
        if self.role not in (RISK_NEUTRAL, PHYSICAL):
            raise ValueError(f"unknown probability role {self.role!r}")
        if not values:
            raise ValueError(f"{self.symbol} schedule is empty")
        for k, v in enumerate(values):
            if self.role == RISK_NEUTRAL:
                if not 0.0 < v < 1.0:
                    raise ValueError(f"{self.symbol}[{k}] = {v!r} outside (0,1)")
            elif not 0.0 <= v <= 1.0:
                raise ValueError(f"{self.symbol}[{k}] = {v!r} outside [0,1]")

    @classmethod
    def constant(cls, value: float, role: str = RISK_NEUTRAL) -> ProbSchedule:
        return cls((value,), role)

    @property
    def symbol(self) -> str:
        return "q" if self.role == RISK_NEUTRAL else "p"

    def at(self, m: int) -> float:
        """Probability in force at step ``m`` (step 0 reuses the first value)."""
        return self.values[min(max(m, 1), len(self.values)) - 1]

    def at_steps(self, ms) -> np.ndarray:
        idx = np.clip(np.asarray(ms, dtype=np.int64), 1, len(self.values)) - 1
        return np.asarray(self.values)[idx]


# ---------------------------------------------------------------------------
# Parameter bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    grid: TimeGrid
    eta: EtaSpec
    scale: MaturityScale
    q: ProbSchedule
    p: ProbSchedule = field(default_factory=lambda: ProbSchedule.constant(0.5, PHYSICAL))
    convention: Convention = Convention.TIME_TO_MATURITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "convention", Convention(self.convention))
        if self.q.role != RISK_NEUTRAL:
            raise ValueError("q must be a risk-neutral schedule")
        if self.p.role != PHYSICAL:
            raise ValueError("p must be a physical schedule")
        self.eta.check(self.grid.n_steps)
        c = self.scale.values(np.arange(1, self.grid.n_steps + 1), self.grid.dt)
        bad = np.flatnonzero(~(np.isfinite(c) & (c > 0)))
        if bad.size:
            k = int(bad[0]) + 1
            raise ValueError(f"C(T) = {c[k - 1]!r} at maturity step {k} must be positive")

    def with_grid(self, grid: TimeGrid) -> ModelParams:
        """Same model on another grid (table families must cover it)."""
        if grid.dt != self.grid.dt:
            raise ValueError("with_grid keeps dt fixed")
        return replace(self, grid=grid)

    @property
    def is_classical(self) -> bool:
        return (
            isinstance(self.eta, UniformEta)
            and isinstance(self.scale, LinearScale)
            and len(self.q.values) == 1
            and self.convention is Convention.TIME_TO_MATURITY
        )

    def q_at(self, m: int) -> float:
        return self.q.at(m)

    def cdf(self, m: int, N) -> np.ndarray:
        N = np.asarray(N, dtype=np.int64)
        if np.any(N < 1):
            raise ValueError("eta(T) is undefined for T = 0")
        if np.any(N < m):
            raise ValueError(f"maturity step below current step {m}")
        a = N - m if self.convention is Convention.TIME_TO_MATURITY else np.full_like(N, m)
        return self.eta.cdf(a, N)

    def log_ratio(self, m: int, N) -> np.ndarray:
        """h(t, T) = C(T) * G(t, T) for step ``m`` and maturity steps ``N``."""
        return self.scale.values(N, self.grid.dt) * self.cdf(m, N)

    def factors(self, m: int, N) -> tuple[np.ndarray, np.ndarray]:
        """(U, D) at step ``m`` for maturity steps ``N``."""
        q = self.q_at(m)
        e = np.exp(-self.log_ratio(m, N))
        den = q + (1.0 - q) * e
        return 1.0 / den, e / den


def classical_model(q: float, delta: float, grid: TimeGrid, p=0.5) -> ModelParams:
    """Constant-q Ho-Lee model with ``U / D = delta**-(T - t)``.

    Built as uniform eta with C(T) = -T ln(delta), which gives
    ``U = 1 / (q + (1 - q) * delta**(T - t))``.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q = {q!r} outside (0,1)")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta = {delta!r} outside (0,1)")
    return ModelParams(
        grid=grid,
        eta=UniformEta(),
        scale=LinearScale(-math.log(delta)),
        q=ProbSchedule.constant(q),
        p=ProbSchedule(p, PHYSICAL),
        convention=Convention.TIME_TO_MATURITY,
    )


def recombining_eta(scale: MaturityScale, grid: TimeGrid) -> TableEta:
    """eta table under which ``scale`` yields a recombining lattice.

    Recombination needs ``C(T) P(eta(T) = j dt)`` to depend on ``T - j dt``
    only.  Taking the one-step increments ``phi(s) = C(s+1) - C(s)`` (with
    C(0) = 0) gives ``pmf_N(j) = phi(N - j) / C(N)``.  Uniform eta is the
    special case of a linear scale.  Requires a nondecreasing scale.
    """
    n = grid.n_steps
    c = np.concatenate(([0.0], scale.values(np.arange(1, n + 1), grid.dt)))
    phi = np.diff(c)
    if np.any(phi < 0):
        s = int(np.flatnonzero(phi < 0)[0])
        raise ValueError(f"scale decreases between steps {s} and {s + 1}; no recombining eta exists")
    rows = []
    for N in range(1, n + 1):
        w = phi[N - 1 :: -1][:N]  # phi(N - j) for j = 1..N
        rows.append(tuple(w / w.sum()))
    return TableEta(tuple(rows))


# ---------------------------------------------------------------------------
# Operations on grid times
# ---------------------------------------------------------------------------


def _pair(params: ModelParams, t: float, T: float) -> tuple[int, int]:
    m = params.grid.step(t, "t")
    N = params.grid.step(T, "T")
    if N == 0:
        raise ValueError("eta(T) is undefined for T = 0")
    if m > N:
        raise ValueError(f"t = {t!r} exceeds T = {T!r}")
    return m, N


def _perturb_pair(params: ModelParams, t: float, T: float) -> tuple[int, int]:
    m, N = _pair(params, t, T)
    if m == 0:
        raise ValueError("perturbations apply from t = dt onwards")
    return m, N


def eta_cdf(params: ModelParams, t: float, T: float) -> float:
    """P(eta(T) <= T - t), or P(eta(T) <= t) under the calendar convention."""
    m, N = _pair(params, t, T)
    return float(params.cdf(m, N))


def log_ratio_h(params: ModelParams, t: float, T: float) -> float:
    m, N = _pair(params, t, T)
    return float(params.log_ratio(m, N))


def perturb_up(params: ModelParams, t: float, T: float) -> float:
    m, N = _perturb_pair(params, t, T)
    return float(params.factors(m, N)[0])


def perturb_down(params: ModelParams, t: float, T: float) -> float:
    m, N = _perturb_pair(params, t, T)
    return float(params.factors(m, N)[1])


def _all_pairs(n_steps: int) -> Iterable[tuple[int, np.ndarray]]:
    for m in range(1, n_steps + 1):
        yield m, np.arange(m, n_steps + 1)


FactorFn = Callable[[int, np.ndarray], "tuple[np.ndarray, np.ndarray]"]


def verify_no_arbitrage(
    params: ModelParams,
    pairs: Iterable[tuple[int, int]] | None = None,
    factors: FactorFn | None = None,
) -> float:
    """Max of |q(t) U(t,T) + (1 - q(t)) D(t,T) - 1|.

    ``pairs`` holds (m, N) step pairs and defaults to every 1 <= m <= N <= n.
    ``factors`` replaces ``params.factors`` to audit externally supplied U/D.
    """
    factors = factors or params.factors
    if pairs is None:
        groups = _all_pairs(params.grid.n_steps)
    else:
        groups = ((m, np.array([N])) for m, N in pairs)
    worst = 0.0
    for m, Ns in groups:
        q = params.q_at(m)
        U, D = factors(m, Ns)
        worst = max(worst, float(np.max(np.abs(q * U + (1.0 - q) * D - 1.0))))
    return worst


def verify_telescoping(params: ModelParams) -> float:
    """Max relative violation of H(t,T) = H(t,t+dt) H(t+dt,T) over the grid.

    This is the exact condition for the lattice to recombine.
    """
    n = params.grid.n_steps
    worst = 0.0
    for m in range(1, n):
        Ns = np.arange(m + 1, n + 1)
        lhs = params.log_ratio(m, Ns)
        rhs = params.log_ratio(m, m + 1) + np.concatenate(([0.0], params.log_ratio(m + 1, Ns[1:])))
        # |H_lhs / H_rhs - 1|
        worst = max(worst, float(np.max(np.abs(np.expm1(lhs - rhs)))))
    return worst


def max_portfolio_residual(params: ModelParams) -> float:
    """Max |LHS - 1| of the portfolio identity over every 1 <= m < N < n.

    Pairs whose spread U - D vanishes (h = 0) are skipped.
    """
    n = params.grid.n_steps
    worst = 0.0
    for m in range(1, n - 1):
        U, D = params.factors(m, np.arange(m + 1, n + 1))
        u1, u2, d1, d2 = U[:-1], U[1:], D[:-1], D[1:]
        spread = u1 - d1
        ok = spread != 0.0
        if not np.any(ok):
            continue
        lhs = u2[ok] / spread[ok] * (1.0 - d1[ok]) - d2[ok] / spread[ok] * (1.0 - u1[ok])
        worst = max(worst, float(np.max(np.abs(lhs - 1.0))))
    return worst


def max_hedge_residual(params: ModelParams, initial) -> float:
    """Max relative |V^U - V^D| of the hedged portfolio over every 1 <= m < N < n.

    Parent bond prices B(t-dt, T) and B(t-dt, T+dt) are the forwards implied
    by the initial curve ``initial[k] = B(0, k dt)``.
    """
    B = np.asarray(initial, dtype=float)
    n = params.grid.n_steps
    worst = 0.0
    for m in range(1, n - 1):
        Ns = np.arange(m + 1, n)
        U, D = params.factors(m, np.arange(m + 1, n + 1))
        u1, u2, d1, d2 = U[:-1], U[1:], D[:-1], D[1:]
        ok = (u2 != d2) & (u1 != d1)
        if not np.any(ok):
            continue
        b_short = B[Ns][ok] / B[m - 1]
        b_long = B[Ns + 1][ok] / B[m - 1]
        u1, u2, d1, d2 = u1[ok], u2[ok], d1[ok], d2[ok]
        b = b_short * (d1 - u1) / (b_long * (u2 - d2))
        vu = b_short * u1 + b * b_long * u2
        vd = b_short * d1 + b * b_long * d2
        scale = np.maximum(np.maximum(np.abs(vu), np.abs(vd)), b_short)
        worst = max(worst, float(np.max(np.abs(vu - vd) / scale)))
    return worst


def portfolio_identity_lhs(params: ModelParams, m: int, N: int) -> float:
    if m >= N:
        raise DegenerateSpread(f"U(t,T) - D(t,T) vanishes at t = T (step {m})")
    if N + 1 > params.grid.n_steps:
        raise ValueError("maturity T + dt lies beyond the grid horizon")
    (u1, u2), (d1, d2) = params.factors(m, np.array([N, N + 1]))
    spread = u1 - d1
    if spread == 0.0:
        raise DegenerateSpread(f"U(t,T) == D(t,T) at steps ({m}, {N})")
    return float(u2 / spread * (1.0 - d1) - d2 / spread * (1.0 - u1))


def verify_portfolio_identity(params: ModelParams, t: float, T: float) -> float:
    """|LHS - 1| of the riskless-portfolio identity built from maturities T and T + dt."""
    m, N = _perturb_pair(params, t, T)
    return abs(portfolio_identity_lhs(params, m, N) - 1.0)


def portfolio_values(params: ModelParams, bonds: tuple[float, float], t: float, T: float, b: float):
    """(V^U, V^D) of one T-bond plus ``b`` (T+dt)-bonds, up to the common 1/B(t-dt,t)."""
    m, N = _perturb_pair(params, t, T)
    (u1, u2), (d1, d2) = params.factors(m, np.array([N, N + 1]))
    b_short, b_long = bonds
    return b_short * u1 + b * b_long * u2, b_short * d1 + b * b_long * d2


def hedge_ratio(params: ModelParams, bonds: tuple[float, float], t: float, T: float) -> float:
    """Units of the (T+dt)-bond that make one T-bond riskless over (t-dt, t].

    ``bonds`` are B(t-dt, T) and B(t-dt, T+dt) at the parent node.
    """
    m, N = _perturb_pair(params, t, T)
    if m >= N:
        raise DegenerateSpread(f"hedge ratio undefined at t = T (step {m})")
    if N + 1 > params.grid.n_steps:
        raise ValueError("maturity T + dt lies beyond the grid horizon")
    b_short, b_long = bonds
    if not (b_short > 0 and b_long > 0):
        raise ValueError("bond prices must be positive")
    (u1, u2), (d1, d2) = params.factors(m, np.array([N, N + 1]))
    if u2 == d2 or u1 == d1:
        raise DegenerateSpread(f"zero spread at steps ({m}, {N})")
    b = float(b_short * (d1 - u1) / (b_long * (u2 - d2)))
    vu, vd = b_short * u1 + b * b_long * u2, b_short * d1 + b * b_long * d2
    if abs(vu - vd) > PORTFOLIO_TOL * max(abs(vu), abs(vd), b_short):
        raise HoLeeError(f"hedged portfolio not riskless: V^U = {vu!r}, V^D = {vd!r}")
    return b
