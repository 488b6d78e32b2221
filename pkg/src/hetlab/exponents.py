"""Exponent calculus for cell-escape chains.

Indices follow the chain: saddle k has stability index ``rhos[k-1]`` for
k = 1..n, the typical exponents are alpha_0..alpha_n and the effective
exponents bar_alpha_0..bar_alpha_{n-1}.

Products rho_{kj} = rho_{k+1} ... rho_j are accumulated as sums of logs so
that long chains keep full relative accuracy. A product within a relative
1e-12 of 1 counts as equal to 1 and is therefore not binding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DomainError, KappaUndefined, RegimeError
from .network import EscapeChainSpec

TIE_RTOL = 1e-12


class Regime(str, enum.Enum):
    POSITIVE_LIMIT = "PositiveLimit"
    POWER_LAW = "PowerLaw"
    SUPERPOLYNOMIAL = "Superpolynomial"


def _check_rhos(rhos: Sequence[float]) -> list[float]:
    out = [float(r) for r in rhos]
    for r in out:
        if not (math.isfinite(r) and r > 0):
            raise DomainError(f"stability indices must be finite and > 0, got {r!r}")
    return out


class RhoProducts:
    """Log-domain accessor for rho_{kj}, 0 <= k <= j <= n."""

    def __init__(self, rhos: Sequence[float]):
        self.rhos = _check_rhos(rhos)
        self.n = len(self.rhos)
        logs = [math.log(r) for r in self.rhos]
        self._abs = [0.0]
        self._cum = [0.0]
        for v in logs:
            self._cum.append(self._cum[-1] + v)
            self._abs.append(self._abs[-1] + abs(v))
        self._logs = logs

    def _check(self, k: int, j: int) -> None:
        if not 0 <= k <= j <= self.n:
            raise IndexError(f"rho product indices need 0 <= k <= j <= {self.n}, got ({k}, {j})")

    def log(self, k: int, j: int) -> float:
        self._check(k, j)
        if j - k <= 4:
            return math.fsum(self._logs[k:j])
        return self._cum[j] - self._cum[k]

    def __call__(self, k: int, j: int) -> float:
        return math.exp(self.log(k, j))

    def sign(self, k: int, j: int) -> int:
        """-1, 0 or +1 as rho_{kj} is below, equal to (within tolerance) or above 1."""
        v = self.log(k, j)
        tol = TIE_RTOL * max(1.0, self._abs[j] - self._abs[k])
        if v < -tol:
            return -1
        if v > tol:
            return 1
        return 0


def alpha_sequence(alpha0: float, rhos: Sequence[float]) -> tuple[float, ...]:
    """alpha_k = min(alpha_{k-1} rho_k, 1), starting from alpha0."""
    if not (isinstance(alpha0, (int, float)) and 0.0 < alpha0 <= 1.0):
        raise DomainError(f"alpha0 must lie in (0, 1], got {alpha0!r}")
    out = [float(alpha0)]
    for r in _check_rhos(rhos):
        out.append(min(out[-1] * r, 1.0))
    return tuple(out)


def kappa(alpha: Sequence[float]) -> Optional[int]:
    """Largest k <= n-1 with alpha_k == 1, or None."""
    n = len(alpha) - 1
    for k in range(n - 1, -1, -1):
        if alpha[k] == 1.0:
            return k
    return None


def binding_set(rhos: Sequence[float], kappa: int, n: int) -> tuple[int, ...]:
    """Record-point construction of the binding set H."""
    prods = RhoProducts(rhos)
    if kappa is None:
        raise KappaUndefined("binding set needs kappa")
    if kappa >= n - 1:
        return ()
    H = [n - 1]
    j = n - 1
    while True:
        # candidates i in (kappa, j) with rho_{i,n-1} < rho_{j,n-1}, i.e. rho_{ij} < 1
        cands = [i for i in range(kappa + 1, j) if prods.sign(i, j) < 0]
        if not cands:
            break
        j = max(cands)
        H.append(j)
    return tuple(sorted(H))


def binding_set_bruteforce(rhos: Sequence[float], kappa: int, n: int) -> tuple[int, ...]:
    """H straight from the definition: rho_{kj} < 1 for every j in (k, n-1]."""
    prods = RhoProducts(rhos)
    return tuple(k for k in range(kappa + 1, n)
                 if all(prods.sign(k, j) < 0 for j in range(k + 1, n)))


def slowdown_sets(kappa: int, H: Sequence[int], n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(H', J) with H' = H + {kappa} - {n-1} and J = H' + 1."""
    if kappa is None:
        raise KappaUndefined("slowdown sets need kappa")
    if kappa >= n - 1:
        return (), ()
    Hp = sorted((set(H) | {kappa}) - {n - 1})
    return tuple(Hp), tuple(k + 1 for k in Hp)


def _k_of(i: int, H: Sequence[int]) -> int:
    return min(k for k in H if k >= i)


def bar_alpha(rhos: Sequence[float], kappa: Optional[int], H: Sequence[int],
              alpha: Sequence[float]) -> tuple[float, ...]:
    """Effective exponents bar_alpha_0..bar_alpha_{n-1}.

    For i <= kappa they equal alpha_i; beyond, bar_alpha_i = 1 / rho_{i,k(i)}
    with k(i) the first binding index at or after i.
    """
    if kappa is None:
        raise KappaUndefined("effective exponents need kappa")
    prods = RhoProducts(rhos)
    n = prods.n
    out = list(alpha[: kappa + 1])
    for i in range(kappa + 1, n):
        out.append(math.exp(-prods.log(i, _k_of(i, H))))
    return tuple(out)


def bar_alpha_backward(rhos: Sequence[float], kappa: int, H: Sequence[int],
                       alpha: Sequence[float]) -> tuple[float, ...]:
    """Backward recursion: 1 on H, otherwise bar_alpha_{i+1} / rho_{i+1}."""
    n = len(rhos)
    tail = [0.0] * n
    Hs = set(H)
    for i in range(n - 1, kappa, -1):
        tail[i] = 1.0 if (i in Hs or i == n - 1) else tail[i + 1] / rhos[i]
    return tuple(alpha[: kappa + 1]) + tuple(tail[kappa + 1:])


def bar_alpha_clamped(rhos: Sequence[float], kappa: int, alpha: Sequence[float]) -> tuple[float, ...]:
    """Clamped backward recursion: min(bar_alpha_{i+1} / rho_{i+1}, 1)."""
    n = len(rhos)
    tail = [0.0] * n
    for i in range(n - 1, kappa, -1):
        tail[i] = 1.0 if i == n - 1 else min(tail[i + 1] / rhos[i], 1.0)
    return tuple(alpha[: kappa + 1]) + tuple(tail[kappa + 1:])


def bar_alpha_ratio(alpha: Sequence[float], kappa: int, H: Sequence[int]) -> tuple[float, ...]:
    """Ratio form alpha_i / alpha_{k(i)}."""
    n = len(alpha) - 1
    return tuple(alpha[: kappa + 1]) + tuple(alpha[i] / alpha[_k_of(i, H)] for i in range(kappa + 1, n))


def theta_partial(rhos: Sequence[float], J: Sequence[int], bar: Sequence[float]) -> tuple[float, ...]:
    """theta_0..theta_n: running sums of bar_alpha_j / rho_j - 1 over j in J."""
    n = len(rhos)
    Js = set(J)
    out, acc = [], 0.0
    for k in range(n + 1):
        if k in Js:
            acc += bar[k] / rhos[k - 1] - 1.0
        out.append(acc)
    return tuple(out)


def theta(rhos: Sequence[float], J: Sequence[int], bar: Sequence[float]) -> float:
    """Escape exponent: sum over J of bar_alpha_i / rho_i - 1."""
    return math.fsum(bar[i] / rhos[i - 1] - 1.0 for i in J)


def chi_bar(lambdas: Sequence[float], mus: Sequence[float], J: Sequence[int],
            bar: Sequence[float]) -> float:
    """Time constant: bar_alpha_{i-1}/lambda_i off J plus bar_alpha_i/mu_i on J."""
    if not J:
        raise RegimeError("chi_bar is defined only in the power-law regime")
    n = len(lambdas)
    Js = set(J)
    terms = [bar[i] / mus[i - 1] if i in Js else bar[i - 1] / lambdas[i - 1] for i in range(1, n + 1)]
    return math.fsum(terms)


def typical_chi(lambdas: Sequence[float], alpha: Sequence[float]) -> float:
    """Typical passage constant: sum of alpha_{k-1} / lambda_k."""
    return math.fsum(alpha[k - 1] / lambdas[k - 1] for k in range(1, len(lambdas) + 1))


@dataclass(frozen=True)
class ExponentReport:
    alpha: tuple[float, ...]
    kappa: Optional[int]
    H: tuple[int, ...]
    H_prime: tuple[int, ...]
    J: tuple[int, ...]
    bar_alpha: Optional[tuple[float, ...]]
    theta: Optional[float]
    theta_partial: Optional[tuple[float, ...]]
    chi_bar: Optional[float]
    chi: float
    regime: Regime
    rhos: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.rhos)

    def rho_product(self, k: int, j: int) -> float:
        return RhoProducts(self.rhos)(k, j)

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "kappa": self.kappa,
            "H": list(self.H),
            "H_prime": list(self.H_prime),
            "J": list(self.J),
            "bar_alpha": None if self.bar_alpha is None else list(self.bar_alpha),
            "theta": self.theta,
            "theta_partial": None if self.theta_partial is None else list(self.theta_partial),
            "chi_bar": self.chi_bar,
            "regime": self.regime.value,
        }


def classify_escape(spec: EscapeChainSpec) -> ExponentReport:
    rhos = spec.rhos
    n = spec.n
    alpha = alpha_sequence(spec.alpha0, rhos)
    k = kappa(alpha)
    chi = typical_chi(spec.lambdas, alpha)
    if k is None:
        return ExponentReport(alpha, None, (), (), (), None, None, None, None, chi,
                              Regime.SUPERPOLYNOMIAL, rhos)
    H = binding_set(rhos, k, n)
    Hp, J = slowdown_sets(k, H, n)
    bar = bar_alpha(rhos, k, H, alpha)
    parts = theta_partial(rhos, J, bar)
    th = theta(rhos, J, bar)
    if k == n - 1:
        return ExponentReport(alpha, k, H, Hp, J, bar, 0.0, parts, None, chi,
                              Regime.POSITIVE_LIMIT, rhos)
    cb = chi_bar(spec.lambdas, spec.mus, J, bar)
    return ExponentReport(alpha, k, H, Hp, J, bar, th, parts, cb, chi, Regime.POWER_LAW, rhos)
