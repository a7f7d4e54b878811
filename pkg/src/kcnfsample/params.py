"""Parameter ledger: formula-derived defaults plus recorded overrides."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

from .errors import InvalidSlack

TYPICAL, SMALL_ERROR, SMALL_DENSITY = "typical", "small_error", "small_density"

# Kernels draw delta as an integer ratio; denominators are kept below this.
DELTA_DEN_LIMIT = 1 << 30


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(DELTA_DEN_LIMIT) if isinstance(x, float) else Fraction(x)


def kernel_delta(delta) -> Fraction:
    """delta as a ratio the kernels can draw exactly (rounded down if needed)."""
    d = Fraction(delta)
    if d.denominator <= DELTA_DEN_LIMIT:
        return d
    q = Fraction(math.floor(d * DELTA_DEN_LIMIT), DELTA_DEN_LIMIT)
    return max(q, Fraction(1, DELTA_DEN_LIMIT))


def regime_of(k: int, n: int, m: int, eps: float) -> str:
    """Atypical regimes take precedence in the order small_error, small_density."""
    if eps <= math.exp(-n * 2.0 ** (-k / 2)):
        return SMALL_ERROR
    if Fraction(m, n) <= Fraction(1, k**3):
        return SMALL_DENSITY
    return TYPICAL


@dataclass(frozen=True)
class Params:
    k: int
    n: int
    m: int
    alpha: Fraction
    eps: float
    xi: float
    eta: Fraction
    D: Fraction
    delta: Fraction
    s: int | None  # None means no truncation
    regime: str
    overrides: dict = field(default_factory=dict)
    out_of_theory: tuple[str, ...] = ()
    leaf_mode: str = "exact"
    cap: int = 26
    budget: int = -1  # final rejection attempts per component; < 0 unbounded
    max_steps: int = 0  # tau draws + rejection attempts; 0 disables

    @property
    def sep_threshold(self) -> int:
        return math.ceil(2 * self.eta * self.k)

    @property
    def live_floor(self) -> Fraction:
        return (Fraction(2, 3) - 2 * self.eta) * self.k

    def with_overrides(self, **kw) -> "Params":
        return apply_overrides(self, kw)

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("alpha", "eta", "D", "delta"):
            d[key] = str(d[key])
        d["s"] = "inf" if self.s is None else self.s
        d["overrides"] = {k: str(v) for k, v in self.overrides.items()}
        d["out_of_theory"] = list(self.out_of_theory)
        d["sep_threshold"] = self.sep_threshold
        d["live_floor"] = str(self.live_floor)
        return d


def paper_eta(k: int) -> Fraction:
    return Fraction(15 * math.log2(k) / k).limit_denominator(1 << 40)


def paper_D(k: int, alpha: Fraction, xi) -> Fraction:
    return Fraction(k**8) * (alpha + 1) / as_fraction(xi)


def paper_delta(k: int, alpha: Fraction, xi) -> Fraction:
    if alpha == 0:
        return Fraction(1)
    return min(Fraction(1), as_fraction(xi) / (Fraction(k**40) * alpha))


def paper_s(k: int, alpha: Fraction, n: int, eps: float) -> int:
    return math.ceil(6 * k**4 * float(alpha) * math.log2(n / eps))


_OVERRIDABLE = {"delta", "s", "D", "eta", "leaf_mode", "cap", "budget", "max_steps"}


def apply_overrides(p: Params, overrides: dict) -> Params:
    unknown = set(overrides) - _OVERRIDABLE
    if unknown:
        raise ValueError(f"unknown overrides {sorted(unknown)}")
    kw = {}
    for key, val in overrides.items():
        if key in ("delta", "D", "eta"):
            val = as_fraction(val)
        if key == "delta":
            if not 0 < val <= 1:
                raise ValueError(f"delta must lie in (0, 1], got {val}")
            val = kernel_delta(val)
        if key == "s" and val is not None and val != math.inf:
            val = int(val)
        if key == "s" and val == math.inf:
            val = None
        kw[key] = val
    merged = dict(p.overrides)
    merged.update({k: v for k, v in kw.items() if k in ("delta", "s", "D", "eta")})
    q = replace(p, overrides=merged, **kw)
    return replace(q, out_of_theory=_flags(q))


def _flags(p: Params) -> tuple[str, ...]:
    flags = []
    if p.eta >= 1:
        flags.append("eta>=1")
    if p.live_floor <= 0:
        flags.append("live_floor<=0")
    if p.k < 2**20:
        flags.append("k<2^20")
    return tuple(flags)


def derive_params(k: int, n: int, m: int, eps: float = 0.05, xi: float = 1.0, overrides: dict | None = None) -> Params:
    if k < 2 or n < 1 or m < 0:
        raise ValueError(f"need k >= 2, n >= 1, m >= 0 (got k={k}, n={n}, m={m})")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 2 ** (-k / 8) <= xi <= 1:
        raise InvalidSlack(f"xi={xi} outside [2^(-k/8), 1]")
    alpha = Fraction(m, n)
    p = Params(
        k=k, n=n, m=m, alpha=alpha, eps=eps, xi=xi,
        eta=paper_eta(k),
        D=paper_D(k, alpha, xi),
        delta=kernel_delta(paper_delta(k, alpha, xi)),
        s=paper_s(k, alpha, n, eps),
        regime=regime_of(k, n, m, eps),
    )
    return apply_overrides(p, overrides or {})


def desk_overrides(k: int, alpha) -> dict:
    """Small-k stand-ins for eta and D.

    The profile values make eta >= 1 below k of about 90, which empties the
    separator and the frozen set. Here eta keeps the overlap threshold at 2
    and a positive live floor, and D sits just above the mean degree k*alpha.
    """
    eta = Fraction(1, 5) if k <= 3 else Fraction(3, 20)
    return {"eta": eta, "D": Fraction(math.floor(k * Fraction(alpha)) + 2)}


def params_for(formula, eps: float = 0.05, xi: float = 1.0, overrides: dict | None = None) -> Params:
    k = formula.k if formula.k is not None else 2
    return derive_params(k, formula.n, formula.m, eps, xi, overrides)
