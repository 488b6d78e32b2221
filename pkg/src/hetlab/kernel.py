"""Closed-form Gaussian exit laws for a single rectified saddle.

Notation: ``g_c`` is the centred Gaussian density with variance ``c`` and
``psi_c`` its distribution function. A path enters the box
[-R, R] x [-L', L'] at (eps^alpha * x, L) and leaves through the left or
right face. ``c1`` is the limiting variance of the unstable-direction noise
integral and ``c2`` the stationary variance of the stable coordinate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError, ValidationError
from .network import Saddle


@dataclass(frozen=True)
class SaddleBox:
    """Box geometry around a rectified saddle; rates live on :class:`Saddle`."""

    R: float = 1.0
    L: float = 0.5
    L_prime: float = 1.0

    def __post_init__(self) -> None:
        R, L, Lp = (float(v) for v in (self.R, self.L, self.L_prime))
        if not (math.isfinite(R) and math.isfinite(L) and math.isfinite(Lp)):
            raise ValidationError("box constants must be finite")
        if R < 1.0 or Lp < 1.0:
            raise ValidationError(f"box needs R >= 1 and L' >= 1, got R={R}, L'={Lp}")
        if not 0.0 < L < Lp:
            raise ValidationError(f"box needs 0 < L < L', got L={L}, L'={Lp}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "L_prime", Lp)

    def to_dict(self) -> dict:
        return {"R": self.R, "L": self.L, "L_prime": self.L_prime}

    @classmethod
    def from_dict(cls, data: dict) -> "SaddleBox":
        return cls(data.get("R", 1.0), data.get("L", 0.5), data.get("L_prime", 1.0))


UNIT_BOX = SaddleBox(1.0, 1.0, 2.0)


@dataclass(frozen=True)
class GaussianLaw:
    variance: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise DomainError(f"variance must be > 0, got {self.variance!r}")

    def pdf(self, x):
        return gaussian_pdf(x, self.variance)

    def cdf(self, x):
        return gaussian_cdf(x, self.variance)

    def sample(self, rng, size=None):
        return math.sqrt(self.variance) * rng.standard_normal(size)


def gaussian_pdf(x, c: float):
    """g_c(x)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (2.0 * c)) / math.sqrt(2.0 * math.pi * c)
    return out if out.ndim else float(out)


def gaussian_cdf(x, c: float):
    """psi_c(x) through erfc, accurate in both tails."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * special.erfc(-x / math.sqrt(2.0 * c))
    return out if out.ndim else float(out)


def gaussian_positive_moment(m: float, sd: float, p: float) -> float:
    """E[((m + sd*Y)^+)^p] for standard normal Y and p > -1.

    Closed form through the parabolic cylinder function D_{-p-1}; falls back
    to adaptive quadrature when the special function overflows.
    """
    if sd <= 0:
        return max(m, 0.0) ** p
    u = m / sd
    if u > -37.0:
        d, _ = special.pbdv(-p - 1.0, -u)
        val = sd ** p * math.exp(special.gammaln(p + 1.0) - u * u / 4.0) * d / math.sqrt(2.0 * math.pi)
        if math.isfinite(val) and val >= 0:
            return float(val)
    return _positive_moment_quad(m, sd, p)


def _positive_moment_quad(m: float, sd: float, p: float) -> float:
    lo = max(-m / sd, -40.0)
    if lo >= 40.0:
        return 0.0
    f = lambda y: (m + sd * y) ** p * math.exp(-0.5 * y * y) / math.sqrt(2.0 * math.pi)
    val, err = integrate.quad(f, lo, max(lo, 0.0) + 40.0, epsabs=0.0, epsrel=1e-11, limit=400)
    if not math.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
        raise QuadratureError(f"positive moment quadrature failed (m={m}, sd={sd}, p={p})")
    return float(val)


def hermite_expectation(f: Callable[[np.ndarray], np.ndarray], c: float, nodes: int = 64) -> float:
    """E f(N) for N ~ N(0, c) with probabilists' Gauss-Hermite nodes.

    Accurate for smooth f only; kinks such as (z - N)^+ cost several digits.
    """
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return float(np.dot(w, f(math.sqrt(c) * x)) / math.sqrt(2.0 * math.pi))


def model_variances(saddle: Saddle) -> tuple[float, float]:
    """(c1, c2) = (1/(2 lambda), 1/(2 mu)) for the linear model with unit noise."""
    if not isinstance(saddle, Saddle):
        raise DomainError("model_variances needs a Saddle")
    return 1.0 / (2.0 * saddle.lam), 1.0 / (2.0 * saddle.mu)


def _sq_norm(v) -> float:
    a = np.asarray(v, dtype=float)
    return float(np.sum(a * a))


def general_variances(saddle: Saddle, box: SaddleBox, F1: Callable, F2: Callable,
                      rtol: float = 1e-10) -> tuple[float, float]:
    """Variances for a rectified field with noise rows F1, F2.

    c1 = int_0^inf e^{-2 lam s} |F1(0, e^{-mu s} L)|^2 ds and
    c2 = int_{-inf}^0 e^{2 mu s} |F2(R e^{-lam s}, 0)|^2 ds.
    ``F1``/``F2`` return a scalar or the noise row vector.
    """
    lam, mu = saddle.lam, saddle.mu

    def f1s(s):
        return math.exp(-2.0 * lam * s) * _sq_norm(F1(0.0, math.exp(-mu * s) * box.L))

    def f2s(s):
        return math.exp(2.0 * mu * s) * _sq_norm(F2(box.R * math.exp(min(-lam * s, 700.0)), 0.0))

    # weights below e^{-80} are dropped; F is bounded so the tail is negligible
    out = []
    for fn, lo, hi in ((f1s, 0.0, 40.0 / lam), (f2s, -40.0 / mu, 0.0)):
        with warnings.catch_warnings():
            # non-convergence is reported through QuadratureError below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=rtol, limit=500)
        if not math.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
            raise QuadratureError(f"variance quadrature did not converge (value {val}, error {err})")
        out.append(float(val))
    return out[0], out[1]


def exit_direction_prob(x, c1: float):
    """Limit probability of leaving through the left face from rescaled entrance x."""
    if not c1 > 0:
        raise DomainError("c1 must be > 0")
    return gaussian_cdf(-np.asarray(x, dtype=float), c1)


def exit_time_tail(x: float, alpha: float, theta: float, beta: float, c: float, r: float,
                   saddle: Saddle, epsilon: float, c1: Optional[float] = None) -> float:
    """Leading-order P{zeta >= beta l_eps / lambda + c} for a strip of half-width r eps^theta.

    For theta + beta - alpha > 0 the prediction is
    eps^{theta+beta-alpha} 2 r e^{-lambda c} g_{c1}(eps^{alpha-1} x);
    at theta + beta - alpha = 0 it is the Gaussian mass of the window
    [-r e^{-lambda c}, r e^{-lambda c}] around eps^{alpha-1} x.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.0 <= theta < alpha:
        raise DomainError(f"theta must lie in [0, alpha), got {theta}")
    if beta < 1.0 - theta - 1e-12:
        raise DomainError(f"beta must be >= 1 - theta, got {beta}")
    if not (r > 0 and epsilon > 0):
        raise DomainError("r and epsilon must be > 0")
    if c1 is None:
        c1 = model_variances(saddle)[0]
    lam = saddle.lam
    y = epsilon ** (alpha - 1.0) * x
    half = r * math.exp(-lam * c)
    power = theta + beta - alpha
    if abs(power) <= 1e-12:
        return float(gaussian_cdf(y + half, c1) - gaussian_cdf(y - half, c1))
    return float(epsilon ** power * 2.0 * half * gaussian_pdf(y, c1))


@dataclass(frozen=True)
class NuMeasure:
    """Limiting fine-scale exit intensity.

    ``beta_one`` selects the regime where the stable-direction Gaussian (variance
    ``c2``) smears the power law; otherwise nu has the bare density on (0, inf).
    ``weight`` multiplies the whole measure.
    """

    rho: float
    R: float = 1.0
    L: float = 1.0
    beta_one: bool = False
    c2: float = 1.0
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"nu needs rho in (0, 1), got {self.rho}")
        if self.R <= 0 or self.L <= 0 or self.c2 <= 0:
            raise DomainError("nu needs R, L, c2 > 0")

    @classmethod
    def for_saddle(cls, saddle: Saddle, box: SaddleBox, beta_one: bool,
                   c2: Optional[float] = None) -> "NuMeasure":
        if c2 is None:
            c2 = model_variances(saddle)[1]
        return cls(saddle.rho, box.R, box.L, beta_one, c2)

    @property
    def power(self) -> float:
        return 1.0 / self.rho

    @property
    def K(self) -> float:
        return self.weight * self.R / self.L ** self.power

    def cdf(self, z: float, method: str = "exact") -> float:
        """nu((-inf, z])."""
        if z == -math.inf:
            return 0.0
        if z == math.inf:
            return math.inf
        p = self.power
        if not self.beta_one:
            return self.K * max(z, 0.0) ** p
        return self.K * self._smeared(z, p, method)

    def density(self, z: float, method: str = "exact") -> float:
        p = self.power
        if not self.beta_one:
            return self.K * p * z ** (p - 1.0) if z > 0 else 0.0
        return self.K * p * self._smeared(z, p - 1.0, method)

    def _smeared(self, z: float, p: float, method: str) -> float:
        # E((z - N) v 0)^p with N ~ N(0, c2)
        sd = math.sqrt(self.c2)
        if method == "exact":
            return gaussian_positive_moment(z, sd, p)
        if method == "quad":
            return _positive_moment_quad(z, sd, p)
        if method == "hermite":
            return hermite_expectation(lambda y: np.maximum(z - y, 0.0) ** p, self.c2)
        raise ValueError(f"unknown method {method!r}")

    def mass(self, a: float, b: float) -> float:
        return self.cdf(b) - self.cdf(a)


def h_window(a: float, b: float, z, rho: float):
    """|(b - z) v 0|^{1/rho} - |(a - z) v 0|^{1/rho}."""
    p = 1.0 / rho
    z = np.asarray(z, dtype=float)
    out = np.maximum(b - z, 0.0) ** p - np.maximum(a - z, 0.0) ** p
    return out if out.ndim else float(out)


def local_limit_prediction(x: float, a: float, b: float, beta: float, saddle: Saddle,
                           box: SaddleBox, c1: Optional[float] = None,
                           c2: Optional[float] = None) -> float:
    """Coefficient of eps^{beta/rho - 1} in P{exit location in eps^beta [a, b]}.

    Equals g_{c1}(x) (nu(b) - nu(a)) with nu in the regime fixed by beta.
    """
    rho = saddle.rho
    if not rho < 1.0:
        raise DomainError(f"local limit needs rho < 1, got {rho}")
    if not rho < beta <= 1.0:
        raise DomainError(f"beta must lie in (rho, 1], got {beta}")
    if a > b:
        raise DomainError(f"window needs a <= b, got [{a}, {b}]")
    mc1, mc2 = model_variances(saddle)
    c1 = mc1 if c1 is None else c1
    nu = NuMeasure.for_saddle(saddle, box, beta_one=beta == 1.0, c2=mc2 if c2 is None else c2)
    if a == b:
        return 0.0
    return float(gaussian_pdf(x, c1)) * nu.mass(a, b)


@dataclass(frozen=True)
class TypicalExitLaw:
    """Scaling limit of the rescaled exit location xi' on the right face.

    ``case`` is 1 (rho < 1), 2 (rho = 1), 3 (rho > 1, alpha rho <= 1) or
    4 (rho > 1, alpha rho > 1). ``epsilon=None`` takes eps -> 0 inside the
    formulas. Distribution methods describe xi' conditional on a right exit;
    ``plus_mass`` is the probability of that exit.
    """

    case: int
    alpha: float
    alpha_prime: float
    c: float
    rho: float
    x: float
    c1: float
    c2: float
    epsilon: Optional[float] = None

    @property
    def has_density(self) -> bool:
        return self.case != 2

    def _kick(self, exponent: float) -> float:
        if self.epsilon is None:
            return 1.0 if exponent == 0.0 else 0.0
        return self.epsilon ** exponent

    @property
    def _u_scale(self) -> float:
        return self._kick(1.0 - self.alpha) * math.sqrt(self.c1)

    def plus_mass(self) -> float:
        s = self._u_scale
        if s == 0.0:
            return 1.0 if self.x > 0 else (0.5 if self.x == 0 else 0.0)
        return float(gaussian_cdf(self.x / s, 1.0))

    def _gauss_params(self) -> tuple[float, float]:
        if self.case == 4:
            return 0.0, math.sqrt(self.c2)
        return self.c * abs(self.x) ** self.rho, self._kick(1.0 - self.alpha * self.rho) * math.sqrt(self.c2)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.case == 1:
            s = self._u_scale
            y = np.where(z > 0, (np.maximum(z, 0.0) / self.c) ** (1.0 / self.rho), 0.0)
            if s == 0.0:
                out = (y >= self.x).astype(float) if self.x > 0 else np.zeros_like(z)
            else:
                lo = gaussian_cdf(-self.x / s, 1.0)
                out = (gaussian_cdf((y - self.x) / s, 1.0) - lo) / (1.0 - lo)
                out = np.where(z > 0, out, 0.0)
        elif self.case == 2:
            raise DomainError("the rho = 1 law has no closed-form distribution; use sample()")
        else:
            m, sd = self._gauss_params()
            out = (z >= m).astype(float) if sd == 0.0 else gaussian_cdf((z - m) / sd, 1.0)
        out = np.asarray(out, dtype=float)
        return out if out.ndim else float(out)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.case == 2:
            raise DomainError("the rho = 1 law is exposed as a sampler only")
        if self.case == 1:
            s = self._u_scale
            if s == 0.0:
                raise DomainError("degenerate limit law has no density")
            zp = np.maximum(z, 1e-300)
            y = (zp / self.c) ** (1.0 / self.rho)
            dy = y / (self.rho * zp)
            lo = gaussian_cdf(-self.x / s, 1.0)
            out = np.where(z > 0, gaussian_pdf((y - self.x) / s, 1.0) / s * dy / (1.0 - lo), 0.0)
        else:
            m, sd = self._gauss_params()
            if sd == 0.0:
                raise DomainError("degenerate limit law has no density")
            out = gaussian_pdf((z - m) / sd, 1.0) / sd
        out = np.asarray(out, dtype=float)
        return out if out.ndim else float(out)

    def sample(self, rng, size: int) -> np.ndarray:
        """Draw xi' conditional on a right exit."""
        if self.case in (3, 4):
            m, sd = self._gauss_params()
            return m + sd * rng.standard_normal(size)
        out = np.empty(0)
        s = self._u_scale
        while out.size < size:
            y = self.x + s * rng.standard_normal(2 * size)
            y = y[y >= 0]
            out = np.concatenate([out, y])
        y = out[:size]
        val = self.c * np.abs(y) ** self.rho
        if self.case == 2:
            val = val + self._kick(1.0 - self.alpha) * math.sqrt(self.c2) * rng.standard_normal(size)
        return val


def typical_exit_law(alpha: float, saddle: Saddle, box: SaddleBox, x: float = 0.0,
                     epsilon: Optional[float] = None) -> TypicalExitLaw:
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    rho = saddle.rho
    if rho < 1.0:
        case = 1
    elif rho == 1.0:
        case = 2
    elif alpha * rho <= 1.0:
        case = 3
    else:
        case = 4
    c1, c2 = model_variances(saddle)
    return TypicalExitLaw(case, float(alpha), min(alpha * rho, 1.0), box.L / box.R ** rho, rho,
                          float(x), c1, c2, epsilon)


@dataclass(frozen=True)
class EntranceLaw:
    """Law of the rescaled entrance coordinate xi_0.

    ``kind`` is ``point`` (value = a), ``normal`` (mean a, sd b) or
    ``uniform`` (on [a, b]).
    """

    kind: str = "normal"
    a: float = 0.0
    b: float = 1.0

    KINDS = ("point", "normal", "uniform")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValidationError(f"entrance kind must be one of {self.KINDS}, got {self.kind!r}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if self.kind == "normal" and not self.b > 0:
            raise ValidationError("normal entrance needs sd > 0")
        if self.kind == "uniform" and not self.b > self.a:
            raise ValidationError("uniform entrance needs a < b")

    @classmethod
    def point(cls, value: float) -> "EntranceLaw":
        return cls("point", value, 0.0)

    @property
    def code(self) -> int:
        return self.KINDS.index(self.kind)

    def support(self) -> tuple[float, float]:
        if self.kind == "point":
            return self.a, self.a
        if self.kind == "uniform":
            return self.a, self.b
        return -math.inf, math.inf

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            out = gaussian_pdf((x - self.a) / self.b, 1.0) / self.b
        elif self.kind == "uniform":
            out = np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)
        else:
            raise DomainError("a point mass has no density")
        return out if np.ndim(out) else float(out)

    def sample(self, rng, size: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(size, self.a)
        if self.kind == "normal":
            return self.a + self.b * rng.standard_normal(size)
        return rng.uniform(self.a, self.b, size)

    def expect(self, f: Callable[[float], float]) -> float:
        """E f(xi_0) by adaptive quadrature against the density."""
        if self.kind == "point":
            return float(f(self.a))
        lo, hi = self.support()
        if self.kind == "normal":
            lo, hi = self.a - 40.0 * self.b, self.a + 40.0 * self.b
        pts = [self.a] if self.kind == "normal" else None
        val, err = integrate.quad(lambda y: f(y) * self.pdf(y), lo, hi, points=pts,
                                  epsabs=0.0, epsrel=1e-11, limit=400)
        if not math.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
            raise QuadratureError("entrance expectation did not converge")
        return float(val)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, data: dict) -> "EntranceLaw":
        return cls(data.get("kind", "normal"), data.get("a", 0.0), data.get("b", 1.0))


EntranceLike = Union[EntranceLaw, float, Callable[[float], float]]


def _entrance_expect_g(c: float, entrance: EntranceLike) -> float:
    if isinstance(entrance, (int, float)):
        return float(gaussian_pdf(float(entrance), c))
    if isinstance(entrance, EntranceLaw):
        return entrance.expect(lambda y: gaussian_pdf(y, c))
    # callable density
    val, err = integrate.quad(lambda y: entrance(y) * gaussian_pdf(y, c), -math.inf, math.inf,
                              epsabs=0.0, epsrel=1e-10, limit=400)
    if not math.isfinite(val) or err > 1e-7 * max(abs(val), 1e-300):
        raise QuadratureError("entrance expectation did not converge")
    return float(val)


def psi_nu_integral(s: float, nu: NuMeasure) -> float:
    """int psi_s(-z) nu(dz) by adaptive quadrature against the nu density."""
    scale = math.sqrt(s + (nu.c2 if nu.beta_one else 0.0))
    hi = 40.0 * scale
    f = lambda z: float(gaussian_cdf(-z, s)) * nu.density(z)
    lo = -40.0 * math.sqrt(nu.c2) if nu.beta_one else 0.0
    val, err = integrate.quad(f, lo, hi, points=[0.0] if nu.beta_one else None,
                              epsabs=0.0, epsrel=1e-10, limit=500)
    if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300):
        raise QuadratureError(f"psi-nu quadrature did not converge (value {val}, error {err})")
    return float(val)


def two_saddle_prefactor(c: float, s: float, nu: NuMeasure, entrance_law: EntranceLike) -> float:
    """h = E[g_c(xi_0)] * int psi_s(-z) nu(dz).

    ``entrance_law`` is an :class:`EntranceLaw`, a float (point mass) or a
    density callable.
    """
    if not (c > 0 and s > 0):
        raise DomainError("c and s must be > 0")
    return _entrance_expect_g(c, entrance_law) * psi_nu_integral(s, nu)


def two_saddle_prefactor_closed(c: float, s: float, nu: NuMeasure, entrance_law: EntranceLike) -> float:
    """Same quantity via the Gaussian moment identity (beta = 1 regime only)."""
    if not nu.beta_one:
        raise DomainError("closed form needs the beta = 1 regime")
    inner = nu.K * gaussian_positive_moment(0.0, math.sqrt(s + nu.c2), nu.power)
    return _entrance_expect_g(c, entrance_law) * inner


def chain_prefactor(spec, box: SaddleBox = UNIT_BOX, entrance: EntranceLike = 0.0,
                    method: str = "closed") -> float:
    """Prefactor h of p(eps) ~ h eps^theta for a two-saddle chain with alpha0 = 1.

    Uses c = 1/(2 lambda_1), s = 1/(2 lambda_2) and the beta = 1 measure of
    the first saddle, whose exit is what the second saddle sees.
    """
    if spec.n != 2 or spec.alpha0 != 1.0:
        raise DomainError("the closed-form prefactor covers two-saddle chains with alpha0 = 1")
    s1, s2 = spec.saddles
    if not s1.rho < 1.0:
        raise DomainError("prefactor needs rho_1 < 1")
    nu = NuMeasure.for_saddle(s1, box, beta_one=True)
    c, s = model_variances(s1)[0], model_variances(s2)[0]
    if method == "closed":
        return two_saddle_prefactor_closed(c, s, nu, entrance)
    if method == "quad":
        return two_saddle_prefactor(c, s, nu, entrance)
    raise ValueError(f"unknown method {method!r}")
