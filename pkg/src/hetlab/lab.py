"""Monte Carlo experiments: epsilon ladders, rare-event estimates and fits.

Sign convention: ``theta_hat`` is the coefficient on log eps in
log p = log h + theta log eps, so a positive value means the probability
decays as eps shrinks.

Timed-out paths are excluded from ``n`` and reported in ``timeouts``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import AllTimeout, DomainError, InsufficientData, InsufficientEscapes, RegimeError, ValidationError
from .exponents import ExponentReport, Regime
from .kernel import EntranceLaw, SaddleBox, local_limit_prediction
from .network import EscapeChainSpec, Saddle
from .rng import derive_seed
from .sim import ChainBatch, ExitBatch, Side, TransportMap, simulate_chain_batch

log = logging.getLogger(__name__)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class LadderConfig:
    eps_values: tuple[float, ...]
    samples_per_eps: Union[int, tuple[int, ...]] = 100_000
    seed: int = 0
    dt: Optional[float] = None
    target: str = "escape"
    chunk: int = 1 << 18

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.eps_values)
        if not eps:
            raise ValidationError("ladder needs at least one epsilon")
        if any(not (math.isfinite(e) and e > 0) for e in eps):
            raise ValidationError("ladder epsilons must be > 0")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValidationError("ladder epsilons must be strictly decreasing")
        object.__setattr__(self, "eps_values", eps)
        samples = self.samples_per_eps
        if isinstance(samples, (list, tuple)):
            samples = tuple(int(s) for s in samples)
            if len(samples) != len(eps):
                raise ValidationError("need one sample count per epsilon")
        else:
            samples = int(samples)
        for s in np.atleast_1d(samples):
            if s < 100:
                raise ValidationError(f"samples per epsilon must be >= 100, got {s}")
        object.__setattr__(self, "samples_per_eps", samples)
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be > 0")

    def samples(self, i: int) -> int:
        s = self.samples_per_eps
        return s[i] if isinstance(s, tuple) else s


@dataclass(frozen=True)
class EstimateRow:
    eps: float
    hits: int
    n: int
    p_hat: float
    ci_low: float
    ci_high: float
    timeouts: int = 0

    def as_tuple(self) -> tuple:
        return (self.eps, self.hits, self.n, self.p_hat, self.ci_low, self.ci_high, self.timeouts)


CSV_COLUMNS = ("eps", "hits", "n", "p_hat", "ci_low", "ci_high", "timeouts")


@dataclass(frozen=True)
class PowerLawFit:
    theta_hat: float
    h_hat: float
    stderr_theta: float
    r_squared: float
    rows_used: int
    rows_dropped: int


@dataclass
class EstimateTable:
    rows: list[EstimateRow] = field(default_factory=list)
    fit: Optional[PowerLawFit] = None


def wilson_interval(hits: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValidationError("Wilson interval needs n > 0")
    p = hits / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    # at p = 0 or 1 one bound equals p analytically; keep rounding from crossing it
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def estimate_event(eps: float, event, timed_out=None) -> EstimateRow:
    """p_hat and Wilson 95% interval for a boolean event array."""
    event = np.asarray(event, dtype=bool)
    timed = np.zeros_like(event) if timed_out is None else np.asarray(timed_out, dtype=bool)
    total = event.size
    if total == 0:
        raise ValidationError("no samples")
    timeouts = int(np.count_nonzero(timed))
    n = total - timeouts
    if n == 0:
        raise AllTimeout(f"all {total} paths timed out at eps={eps}")
    hits = int(np.count_nonzero(event & ~timed))
    lo, hi = wilson_interval(hits, n)
    return EstimateRow(float(eps), hits, n, hits / n, lo, hi, timeouts)


def row_from_batch(batch: ChainBatch) -> EstimateRow:
    return estimate_event(batch.epsilon, batch.escaped, batch.timed_out)


def fit_power_law(rows: Union[EstimateTable, Sequence[EstimateRow]], min_hits: int = 10,
                  weights: Optional[Sequence[float]] = None) -> PowerLawFit:
    """Weighted least squares of log p_hat on log eps.

    Weights are inverse delta-method variances p_hat n / (1 - p_hat) unless
    ``weights`` (one per kept row) fixes them. Rows with fewer than
    ``min_hits`` hits are dropped with a warning.
    """
    rows = list(rows.rows if isinstance(rows, EstimateTable) else rows)
    keep = [r for r in rows if r.hits >= min_hits]
    dropped = len(rows) - len(keep)
    if dropped:
        log.warning("dropping %d row(s) with fewer than %d hits", dropped, min_hits)
    if len(keep) < 3:
        raise InsufficientData(f"power-law fit needs >= 3 rows with >= {min_hits} hits, got {len(keep)}")
    x = np.log([r.eps for r in keep])
    y = np.log([r.p_hat for r in keep])
    if weights is None:
        var = np.array([max((1.0 - r.p_hat) / (r.p_hat * r.n), 1e-300) for r in keep])
        w = 1.0 / var
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(keep),) or np.any(w <= 0):
            raise ValidationError("need one positive weight per kept row")
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    ss_res = float(np.sum(w * resid ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(beta[1]), float(math.exp(beta[0])), float(math.sqrt(cov[1, 1])), r2,
                       len(keep), dropped)


@dataclass
class LadderResult:
    table: EstimateTable
    batches: list[ChainBatch]


def run_ladder(config: LadderConfig, spec: EscapeChainSpec, maps: Optional[Sequence[TransportMap]] = None,
               box: Union[SaddleBox, Sequence[SaddleBox]] = SaddleBox(), entrance: EntranceLaw = EntranceLaw(),
               threads: Optional[int] = None, keep_batches: bool = False,
               max_time: Optional[float] = None) -> LadderResult:
    """Escape-probability estimates along the ladder; rung i uses seed derive_seed(seed, i)."""
    if config.target != "escape":
        raise ValidationError(f"unknown ladder target {config.target!r}")
    rows, batches = [], []
    for i, eps in enumerate(config.eps_values):
        seed = derive_seed(config.seed, i)
        total = config.samples(i)
        batch = None
        for start in range(0, total, config.chunk):
            part = simulate_chain_batch(spec, maps, eps, config.dt, seed, min(config.chunk, total - start),
                                        start=start, box=box, entrance=entrance, max_time=max_time,
                                        threads=threads)
            batch = part if batch is None else batch.concat(part)
        rows.append(row_from_batch(batch))
        if keep_batches:
            batches.append(batch)
    table = EstimateTable(rows)
    try:
        table.fit = fit_power_law(rows)
    except InsufficientData as exc:
        log.warning("no fit: %s", exc)
    return LadderResult(table, batches)


@dataclass(frozen=True)
class ConcentrationSummary:
    mean_ratio: float
    quantiles: dict
    n_events: int
    reference_time: float
    saddle_ratios: tuple[float, ...]


def saddle_time_constants(report: ExponentReport, lambdas: Sequence[float], mus: Sequence[float]) -> tuple[float, ...]:
    """Predicted passage constant per saddle along the most likely escape."""
    if report.regime is not Regime.POWER_LAW:
        raise RegimeError("passage constants need the power-law regime")
    bar = report.bar_alpha
    J = set(report.J)
    return tuple(bar[i] / mus[i - 1] if i in J else bar[i - 1] / lambdas[i - 1]
                 for i in range(1, report.n + 1))


def exit_time_concentration(batch: ChainBatch, report: ExponentReport, lambdas: Sequence[float],
                            mus: Sequence[float], min_events: int = 200,
                            subtract_travel: float = 0.0) -> ConcentrationSummary:
    """Escape-conditioned total time over chi_bar l_eps, plus per-saddle ratios."""
    if report.regime is not Regime.POWER_LAW:
        raise RegimeError("time concentration needs the power-law regime")
    esc = batch.escaped
    m = int(np.count_nonzero(esc))
    if m < min_events:
        raise InsufficientEscapes(f"{m} escape events, need {min_events}")
    l_eps = math.log(1.0 / batch.epsilon)
    ref = report.chi_bar * l_eps
    ratio = (batch.total_time[esc] - subtract_travel) / ref
    consts = saddle_time_constants(report, lambdas, mus)
    per = tuple(float(np.mean(batch.time[esc, k]) / (c * l_eps)) for k, c in enumerate(consts))
    qs = {q: float(np.quantile(ratio, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
    return ConcentrationSummary(float(np.mean(ratio)), qs, m, ref, per)


def exit_time_ratio(times, alpha: float, lam: float, eps: float) -> float:
    """Mean exit time over (alpha / lambda) l_eps."""
    return float(np.mean(times) / (alpha / lam * math.log(1.0 / eps)))


@dataclass(frozen=True)
class LocalLimitRecord:
    empirical: float
    ci_low: float
    ci_high: float
    prediction: float
    relative_discrepancy: float
    hits: int
    n: int


def local_limit_check(exits: ExitBatch, epsilon: float, a: float, b: float, beta: float, x: float,
                      saddle: Saddle, box: SaddleBox, side: Side = Side.RIGHT) -> LocalLimitRecord:
    """Scaled frequency of exits with location in eps^beta [a, b] against the closed form."""
    rho = saddle.rho
    if not (rho < 1.0 and rho < beta <= 1.0):
        raise ValidationError("local limit check needs rho < 1 and beta in (rho, 1]")
    valid = ~exits.timed_out
    n = int(np.count_nonzero(valid))
    if n == 0:
        raise InsufficientData("no completed paths")
    lo, hi = epsilon ** beta * a, epsilon ** beta * b
    inside = valid & (exits.side == int(side)) & (exits.location >= lo) & (exits.location <= hi)
    if a == b:
        inside &= False
    hits = int(np.count_nonzero(inside))
    scale = epsilon ** (-(beta / rho - 1.0))
    cl, ch = wilson_interval(hits, n)
    pred = local_limit_prediction(x, a, b, beta, saddle, box)
    emp = hits / n * scale
    rel = (emp - pred) / pred if pred > 0 else (0.0 if emp == 0 else math.inf)
    return LocalLimitRecord(emp, cl * scale, ch * scale, pred, rel, hits, n)


@dataclass(frozen=True)
class DensityComparison:
    ks: Optional[float]
    ks_pvalue: Optional[float]
    l1: Optional[float]
    n: int


def histogram_vs_density(samples, law, bins: int = 100) -> DensityComparison:
    """L1 distance between the normalised histogram and ``law.pdf`` and the KS statistic.

    ``law`` needs ``cdf`` and/or ``pdf`` methods; missing ones are skipped.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 10_000:
        raise InsufficientData(f"need >= 1e4 samples, got {x.size}")
    ks = p = l1 = None
    try:
        res = stats.kstest(x, law.cdf)
        ks, p = float(res.statistic), float(res.pvalue)
    except (DomainError, AttributeError) as exc:  # law without a distribution function
        log.info("KS skipped: %s", exc)
    try:
        lo, hi = np.quantile(x, [0.0005, 0.9995])
        dens, edges = np.histogram(x, bins=bins, range=(lo, hi))
        width = edges[1] - edges[0]
        dens = dens / (x.size * width)
        centres = 0.5 * (edges[1:] + edges[:-1])
        l1 = float(np.sum(np.abs(dens - np.asarray(law.pdf(centres)))) * width)
    except (DomainError, AttributeError) as exc:
        log.info("L1 skipped: %s", exc)
    return DensityComparison(ks, p, l1, int(x.size))
