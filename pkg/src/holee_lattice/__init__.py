"""Ho-Lee binomial term-structure lattice with time-dependent parameters."""

from __future__ import annotations

__version__ = "0.1.0"

from .asymptotics import drawback_report, short_rate_profile
from .errors import (
    ArithmeticUnderflow,
    ConfigError,
    DegenerateSpread,
    HoLeeError,
    NonRecombiningError,
    OffGridError,
)
from .lattice import DiscountCurve, build_lattice, simulate_paths, verify_recombination
from .model import (
    ConstantScale,
    Convention,
    LinearScale,
    ModelParams,
    ProbSchedule,
    SaturatingScale,
    TableEta,
    TableScale,
    TimeGrid,
    TruncatedGeometricEta,
    UniformEta,
    classical_model,
    recombining_eta,
)
from .pricing import Claim, enumerate_price, mc_price, price_european
