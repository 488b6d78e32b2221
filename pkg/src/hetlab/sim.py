"""Path simulation near rectified saddles and along escape chains.

Two backends:

* exact stepping for the linear saddle dX = diag(lam, -mu) X dt + eps sigma dW
  (Gaussian transition kernel, no time-discretisation error in the law of
  the path at grid times), compiled with numba;
* Euler-Maruyama for user-supplied fields, vectorised over paths in numpy.

Exits are detected on the time grid and the crossing point is found by
linear interpolation between the last inside and first outside states.

Every path draws its noise from its own counter-based stream keyed by
(seed, path index), so batches can be split or reordered freely.

Chain layout: the entrance coordinate xi_0 is drawn from an
:class:`~hetlab.kernel.EntranceLaw` and placed at (eps^alpha0 xi_0, L).
``maps[k]`` is the connection leaving saddle k+1: for k < n-1 it carries
that saddle's exit location into the entrance of saddle k+2, and the last
map only contributes its travel time.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numba as nb
import numpy as np

from .errors import GeometryError, SimulationTimeout, ValidationError
from .exponents import Regime, classify_escape
from .kernel import EntranceLaw, SaddleBox
from .network import EscapeChainSpec, Saddle
from .rng import MAX_STREAM, CounterRNG, normal_block, normal_pair, split_seed, uniform_pair

# the TBB layer shipped with some images is too old and only warns; the
# workqueue layer is always available and fine for this embarrassingly parallel loop
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "workqueue"


class Side(enum.IntEnum):
    NONE = 0
    RIGHT = 1
    LEFT = 2
    TOP = 3
    BOTTOM = 4

    @property
    def sign(self) -> int:
        return {Side.RIGHT: 1, Side.LEFT: -1}.get(self, 0)

    @classmethod
    def for_sign(cls, s: int) -> "Side":
        return cls.RIGHT if s > 0 else cls.LEFT


ESCAPED, BROKEN, TIMEOUT = 0, 1, 2


@dataclass(frozen=True)
class ExitRecord:
    side: Side
    location: float
    time: float
    steps: int


def _as_sigma(sigma) -> np.ndarray:
    s = np.eye(2) if sigma is None else np.asarray(sigma, dtype=float)
    if s.shape != (2, 2) or not np.all(np.isfinite(s)):
        raise ValidationError("sigma must be a finite 2x2 matrix")
    if abs(np.linalg.det(s)) < 1e-14:
        raise ValidationError("sigma must be nonsingular")
    return s


@dataclass(frozen=True)
class LinearSaddleSde:
    """Rectified linear saddle with constant diffusion ``sigma`` on a box."""

    saddle: Saddle
    box: SaddleBox = SaddleBox()
    epsilon: float = 0.01
    sigma: Optional[tuple] = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "sigma", tuple(map(tuple, _as_sigma(self.sigma))))

    def transition(self, dt: float) -> tuple[float, float, float, float, float]:
        """(e1, e2, l11, l21, l22): exact one-step means and noise Cholesky factor."""
        return _transition(self.saddle.lam, self.saddle.mu, np.asarray(self.sigma), self.epsilon, dt)


def _transition(lam: float, mu: float, sigma: np.ndarray, eps: float, dt: float):
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    S = sigma @ sigma.T
    a1, a2 = lam, -mu

    def integ(s: float) -> float:
        # int_0^dt e^{s u} du
        return dt if abs(s * dt) < 1e-12 else math.expm1(s * dt) / s

    q11 = S[0, 0] * integ(2 * a1)
    q22 = S[1, 1] * integ(2 * a2)
    q12 = S[0, 1] * integ(a1 + a2)
    l11 = math.sqrt(q11)
    l21 = q12 / l11
    l22 = math.sqrt(max(q22 - l21 * l21, 0.0))
    return math.exp(lam * dt), math.exp(-mu * dt), eps * l11, eps * l21, eps * l22


@dataclass(frozen=True)
class GeneralSde:
    """dX = b(X) dt + eps sigma(X) dW on the box [-R, R] x [-L', L'].

    ``drift(x1, x2)`` returns ``(b1, b2)`` and ``diffusion(x1, x2)`` a 2x2
    nested sequence; both must accept numpy arrays elementwise.
    """

    drift: Callable
    diffusion: Callable
    epsilon: float
    domain: SaddleBox = SaddleBox()

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")

    def sigma_at(self, x1, x2) -> np.ndarray:
        m = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        raw = self.diffusion(x1, x2)
        out = np.empty((2, 2) + m)
        for i in range(2):
            for j in range(2):
                out[i, j] = np.broadcast_to(np.asarray(raw[i][j], dtype=float), m)
        return out

    def check_field(self, grid: int = 11, bound: float = 1e6, ellipticity: float = 1e-10) -> None:
        """Sample the domain and assert bounded coefficients and uniform ellipticity."""
        R, Lp = self.domain.R, self.domain.L_prime
        g1, g2 = np.meshgrid(np.linspace(-R, R, grid), np.linspace(-Lp, Lp, grid))
        b1, b2 = self.drift(g1, g2)
        s = self.sigma_at(g1, g2)
        vals = np.concatenate([np.ravel(b1), np.ravel(b2), s.ravel()])
        if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > bound:
            raise ValidationError("drift or diffusion unbounded on the sample grid")
        det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
        if np.min(np.abs(det)) < ellipticity:
            raise ValidationError("diffusion degenerate on the sample grid")


def rectified_sde(saddle: Saddle, box: SaddleBox, epsilon: float,
                  F: Optional[Callable] = None, G: Optional[Callable] = None) -> GeneralSde:
    """Rectified saddle drift diag(lam, -mu) x + eps^2 G(x) with noise matrix F(x)."""
    lam, mu, eps2 = saddle.lam, saddle.mu, epsilon * epsilon

    def drift(x1, x2):
        b1, b2 = lam * np.asarray(x1, dtype=float), -mu * np.asarray(x2, dtype=float)
        if G is not None:
            g1, g2 = G(x1, x2)
            b1, b2 = b1 + eps2 * np.asarray(g1), b2 + eps2 * np.asarray(g2)
        return b1, b2

    diffusion = F if F is not None else (lambda x1, x2: ((1.0, 0.0), (0.0, 1.0)))
    return GeneralSde(drift, diffusion, epsilon, box)


@dataclass(frozen=True)
class TransportMap:
    """Connection between saddles: xi' = flip (a xi + b eps^{1-alpha} N)."""

    a: float = 1.0
    b: float = 1.0
    flip: int = 1
    travel_time: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and self.a != 0):
            raise ValidationError("transport gain a must be finite and nonzero")
        if not math.isfinite(self.b):
            raise ValidationError("transport noise gain b must be finite")
        if self.flip not in (1, -1):
            raise ValidationError("flip must be +1 or -1")
        if not (math.isfinite(self.travel_time) and self.travel_time >= 0):
            raise ValidationError("travel_time must be >= 0")

    @classmethod
    def identity(cls) -> "TransportMap":
        """Exit location handed over unchanged, no kick, no travel time."""
        return cls(1.0, 0.0, 1, 0.0)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "flip": self.flip, "travel_time": self.travel_time}

    @classmethod
    def from_dict(cls, data: dict) -> "TransportMap":
        return cls(data.get("a", 1.0), data.get("b", 1.0), int(data.get("flip", 1)),
                   data.get("travel_time", 1.0))


# ---------------------------------------------------------------------------
# compiled engine


@nb.njit(cache=True, inline="always")
def _crossing(x1, x2, y1, y2, R, Lp):
    """Earliest face crossed on the segment (x1, x2) -> (y1, y2)."""
    f = 2.0
    side = 0
    if y1 >= R:
        g = (R - x1) / (y1 - x1)
        if g < f:
            f, side = g, 1
    elif y1 <= -R:
        g = (-R - x1) / (y1 - x1)
        if g < f:
            f, side = g, 2
    if y2 >= Lp:
        g = (Lp - x2) / (y2 - x2)
        if g < f:
            f, side = g, 3
    elif y2 <= -Lp:
        g = (-Lp - x2) / (y2 - x2)
        if g < f:
            f, side = g, 4
    if side == 0:
        return 0, 0.0, 0.0
    f = min(max(f, 0.0), 1.0)
    if side <= 2:
        loc = x2 + f * (y2 - x2)
    else:
        loc = x1 + f * (y1 - x1)
    return side, f, loc


@nb.njit(cache=True, parallel=True)
def _chain_kernel(k0, k1, streams, ctr0, trans, R, Lh, Lp, faces, ta, tb, tflip, ttravel,
                  scale0, eps, ent_code, ent_a, ent_b, y0, dt, max_time,
                  side_out, loc_out, time_out, steps_out, status_out, total_out):
    npath = streams.shape[0]
    n = faces.shape[0]
    for p in nb.prange(npath):
        sid = streams[p]
        ctr = ctr0
        if ent_code == 0:
            xi = ent_a
        elif ent_code == 1:
            z0, z1 = normal_pair(k0, k1, sid, ctr)
            xi = ent_a + ent_b * z0
        else:
            u0, u1 = uniform_pair(k0, k1, sid, ctr)
            xi = ent_a + (ent_b - ent_a) * u0
        ctr += 1
        x1 = scale0 * xi
        x2 = y0
        total = 0.0
        status = ESCAPED
        for k in range(n):
            e1 = trans[k, 0]
            e2 = trans[k, 1]
            l11 = trans[k, 2]
            l21 = trans[k, 3]
            l22 = trans[k, 4]
            t = 0.0
            steps = 0
            side = 0
            loc = 0.0
            if x1 >= R[k]:
                side, loc = 1, x2
            elif x1 <= -R[k]:
                side, loc = 2, x2
            while side == 0:
                if total + t + dt > max_time:
                    status = TIMEOUT
                    break
                g0, g1 = normal_pair(k0, k1, sid, ctr)
                ctr += 1
                y1 = e1 * x1 + l11 * g0
                y2 = e2 * x2 + l21 * g0 + l22 * g1
                steps += 1
                s, f, l = _crossing(x1, x2, y1, y2, R[k], Lp[k])
                if s != 0:
                    side = s
                    loc = l
                    t += f * dt
                else:
                    t += dt
                    x1 = y1
                    x2 = y2
            if status == TIMEOUT:
                time_out[p, k] = t
                steps_out[p, k] = steps
                total += t
                break
            side_out[p, k] = side
            loc_out[p, k] = loc
            time_out[p, k] = t
            steps_out[p, k] = steps
            total += t + ttravel[k]
            want = 1 if faces[k] > 0 else 2
            if side != want:
                status = BROKEN
                break
            if k < n - 1:
                z0, z1 = normal_pair(k0, k1, sid, ctr)
                ctr += 1
                x1 = tflip[k] * (ta[k] * loc + tb[k] * eps * z0)
                x2 = Lh[k + 1]
        status_out[p] = status
        total_out[p] = total


# ---------------------------------------------------------------------------
# batches


@dataclass
class ChainBatch:
    """Per-path chain results; arrays are indexed [path] or [path, saddle]."""

    path_ids: np.ndarray
    side: np.ndarray
    location: np.ndarray
    time: np.ndarray
    steps: np.ndarray
    status: np.ndarray
    total_time: np.ndarray
    epsilon: float
    dt: float
    max_time: float

    @property
    def size(self) -> int:
        return int(self.path_ids.shape[0])

    @property
    def escaped(self) -> np.ndarray:
        return self.status == ESCAPED

    @property
    def timed_out(self) -> np.ndarray:
        return self.status == TIMEOUT

    @property
    def hits(self) -> int:
        return int(np.count_nonzero(self.escaped))

    @property
    def timeouts(self) -> int:
        return int(np.count_nonzero(self.timed_out))

    def outcome(self, i: int) -> "ChainOutcome":
        exits = []
        for k in range(self.side.shape[1]):
            s = int(self.side[i, k])
            if s == 0:
                break
            exits.append(ExitRecord(Side(s), float(self.location[i, k]), float(self.time[i, k]),
                                    int(self.steps[i, k])))
        st = int(self.status[i])
        return ChainOutcome(st == ESCAPED, tuple(exits), float(self.total_time[i]), st == TIMEOUT)

    def concat(self, other: "ChainBatch") -> "ChainBatch":
        cat = np.concatenate
        return ChainBatch(cat([self.path_ids, other.path_ids]), cat([self.side, other.side]),
                          cat([self.location, other.location]), cat([self.time, other.time]),
                          cat([self.steps, other.steps]), cat([self.status, other.status]),
                          cat([self.total_time, other.total_time]), self.epsilon, self.dt, self.max_time)


@dataclass(frozen=True)
class ChainOutcome:
    escaped: bool
    exits: tuple[ExitRecord, ...]
    total_time: float
    timed_out: bool = False


def default_dt(saddles: Sequence[Saddle]) -> float:
    return 1e-3 * min(min(1.0 / s.lam, 1.0 / s.mu) for s in saddles)


def default_max_time(spec: EscapeChainSpec, epsilon: float, maps: Sequence[TransportMap] = ()) -> float:
    """Ten times the predicted passage time, plus the travel times."""
    report = classify_escape(spec)
    l_eps = max(math.log(1.0 / epsilon), 1.0) if epsilon > 0 else 1.0
    const = report.chi_bar if report.regime is Regime.POWER_LAW else report.chi
    return 10.0 * const * l_eps + sum(m.travel_time for m in maps)


def _boxes(box, n: int) -> list[SaddleBox]:
    if isinstance(box, SaddleBox):
        return [box] * n
    boxes = list(box)
    if len(boxes) != n:
        raise ValidationError(f"need one box per saddle ({n}), got {len(boxes)}")
    return boxes


def _set_threads(threads: Optional[int]) -> None:
    if threads:
        nb.set_num_threads(max(1, min(int(threads), nb.config.NUMBA_NUM_THREADS)))


def _run_kernel(seed, streams, ctr0, saddles, boxes, faces, maps, scale0, eps, entrance, y0,
                dt, max_time, sigma, threads) -> ChainBatch:
    n = len(saddles)
    sig = _as_sigma(sigma)
    trans = np.array([_transition(s.lam, s.mu, sig, eps, dt) for s in saddles], dtype=float)
    k0, k1 = split_seed(seed)
    streams = np.ascontiguousarray(streams, dtype=np.int64)
    if streams.size and (streams.min() < 0 or streams.max() > MAX_STREAM):
        raise ValidationError("path indices must lie in [0, 2**32)")
    m = streams.shape[0]
    side = np.zeros((m, n), dtype=np.int8)
    loc = np.zeros((m, n))
    tim = np.zeros((m, n))
    steps = np.zeros((m, n), dtype=np.int64)
    status = np.zeros(m, dtype=np.int8)
    total = np.zeros(m)
    arr = lambda vals: np.array(vals, dtype=float)
    _set_threads(threads)
    _chain_kernel(np.uint64(k0), np.uint64(k1), streams, np.int64(ctr0), trans,
                  arr([b.R for b in boxes]), arr([b.L for b in boxes]), arr([b.L_prime for b in boxes]),
                  np.array(faces, dtype=np.int64), arr([mp.a for mp in maps]), arr([mp.b for mp in maps]),
                  arr([mp.flip for mp in maps]), arr([mp.travel_time for mp in maps]),
                  float(scale0), float(eps), int(entrance.code), float(entrance.a), float(entrance.b),
                  float(y0), float(dt), float(max_time), side, loc, tim, steps, status, total)
    return ChainBatch(streams.copy(), side, loc, tim, steps, status, total, eps, dt, max_time)


def _check_maps(spec: EscapeChainSpec, maps: Optional[Sequence[TransportMap]]) -> list[TransportMap]:
    if maps is None:
        return [TransportMap()] * spec.n
    maps = list(maps)
    if len(maps) != spec.n:
        raise ValidationError(f"need {spec.n} transport maps, got {len(maps)}")
    return maps


def simulate_chain_batch(spec: EscapeChainSpec, maps: Optional[Sequence[TransportMap]], epsilon: float,
                         dt: Optional[float], seed: int, n_paths: int, start: int = 0,
                         box: Union[SaddleBox, Sequence[SaddleBox]] = SaddleBox(),
                         entrance: EntranceLaw = EntranceLaw(), max_time: Optional[float] = None,
                         sigma=None, threads: Optional[int] = None) -> ChainBatch:
    """Simulate paths ``start .. start + n_paths - 1`` of the chain."""
    if n_paths < 0:
        raise ValidationError("n_paths must be >= 0")
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    maps = _check_maps(spec, maps)
    dt = default_dt(spec.saddles) if dt is None else float(dt)
    if max_time is None:
        if epsilon == 0:
            raise ValidationError("max_time is required at epsilon = 0")
        max_time = default_max_time(spec, epsilon, maps)
    boxes = _boxes(box, spec.n)
    streams = np.arange(start, start + n_paths, dtype=np.int64)
    return _run_kernel(seed, streams, 0, spec.saddles, boxes, spec.exit_faces(), maps,
                       epsilon ** spec.alpha0, epsilon, entrance, boxes[0].L, dt, max_time, sigma, threads)


def simulate_chain(spec: EscapeChainSpec, maps: Optional[Sequence[TransportMap]], epsilon: float,
                   dt: Optional[float], rng: CounterRNG, box=SaddleBox(), entrance: EntranceLaw = EntranceLaw(),
                   max_time: Optional[float] = None, sigma=None) -> ChainOutcome:
    """One path on stream ``rng.stream``; equals the same index of a batch run."""
    batch = simulate_chain_batch(spec, maps, epsilon, dt, rng.seed, 1, rng.stream, box, entrance,
                                 max_time, sigma)
    out = batch.outcome(0)
    if out.timed_out:
        raise SimulationTimeout(f"path {rng.stream} exceeded max_time={batch.max_time}")
    return out


@dataclass
class ExitBatch:
    side: np.ndarray
    location: np.ndarray
    time: np.ndarray
    steps: np.ndarray
    timed_out: np.ndarray

    @property
    def size(self) -> int:
        return int(self.side.shape[0])

    def record(self, i: int) -> ExitRecord:
        return ExitRecord(Side(int(self.side[i])), float(self.location[i]), float(self.time[i]),
                          int(self.steps[i]))


def simulate_exit_batch(sde: Union[LinearSaddleSde, GeneralSde], n_paths: int, dt: float, seed: int,
                        initial: Optional[Sequence[float]] = None, entrance: Optional[EntranceLaw] = None,
                        alpha: float = 1.0, max_time: float = 100.0, start: int = 0,
                        threads: Optional[int] = None) -> ExitBatch:
    """Exit records of ``n_paths`` independent paths.

    Start either at the fixed point ``initial`` or at (eps^alpha xi, L) with
    xi drawn from ``entrance``.
    """
    box = sde.box if isinstance(sde, LinearSaddleSde) else sde.domain
    if initial is None:
        entrance = EntranceLaw() if entrance is None else entrance
        scale0, y0 = sde.epsilon ** alpha, box.L
    else:
        if entrance is not None:
            raise ValidationError("give either initial or entrance, not both")
        x1, y0 = (float(v) for v in initial)
        if not (abs(x1) < box.R and abs(y0) < box.L_prime):
            raise ValidationError(f"initial point {tuple(initial)} is not inside the box")
        entrance, scale0 = EntranceLaw.point(x1), 1.0
    if isinstance(sde, GeneralSde):
        return _euler_batch(sde, n_paths, dt, seed, scale0, entrance, y0, max_time, start)
    streams = np.arange(start, start + n_paths, dtype=np.int64)
    b = _run_kernel(seed, streams, 0, [sde.saddle], [box], [1], [TransportMap.identity()], scale0,
                    sde.epsilon, entrance, y0, dt, max_time, np.asarray(sde.sigma), threads)
    return ExitBatch(b.side[:, 0].copy(), b.location[:, 0].copy(), b.time[:, 0].copy(),
                     b.steps[:, 0].copy(), b.status == TIMEOUT)


def simulate_exit(sde: Union[LinearSaddleSde, GeneralSde], initial: Sequence[float], max_time: float,
                  dt: float, rng: CounterRNG) -> ExitRecord:
    """First exit of one path from the box; raises :class:`SimulationTimeout`."""
    b = simulate_exit_batch(sde, 1, dt, rng.seed, initial=initial, max_time=max_time, start=rng.stream)
    if b.timed_out[0]:
        raise SimulationTimeout(f"no exit before max_time={max_time}")
    return b.record(0)


def _euler_batch(sde: GeneralSde, n_paths: int, dt: float, seed: int, scale0: float,
                 entrance: EntranceLaw, y0: float, max_time: float, start: int) -> ExitBatch:
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    k0, k1 = split_seed(seed)
    box = sde.domain
    streams = np.arange(start, start + n_paths, dtype=np.int64)
    # counter 0 holds the entrance draw, as in the exact engine
    pair = np.empty((n_paths, 2))
    normal_block(np.uint64(k0), np.uint64(k1), streams, 0, pair)
    if entrance.kind == "point":
        xi = np.full(n_paths, entrance.a)
    elif entrance.kind == "normal":
        xi = entrance.a + entrance.b * pair[:, 0]
    else:
        u = np.array([CounterRNG(seed, int(s)).random() for s in streams])
        xi = entrance.a + (entrance.b - entrance.a) * u
    x1 = scale0 * xi
    x2 = np.full(n_paths, float(y0))
    side = np.zeros(n_paths, dtype=np.int8)
    loc = np.zeros(n_paths)
    tim = np.zeros(n_paths)
    steps = np.zeros(n_paths, dtype=np.int64)
    timed = np.zeros(n_paths, dtype=bool)
    out1 = x1 >= box.R
    side[out1], loc[out1] = 1, x2[out1]
    out2 = x1 <= -box.R
    side[out2], loc[out2] = 2, x2[out2]
    active = np.flatnonzero(side == 0)
    eps, sq = sde.epsilon, math.sqrt(dt)
    step = 0
    while active.size:
        if (step + 1) * dt > max_time:
            timed[active] = True
            tim[active] = step * dt
            steps[active] = step
            break
        step += 1
        a1, a2 = x1[active], x2[active]
        b1, b2 = sde.drift(a1, a2)
        s = sde.sigma_at(a1, a2)
        z = np.empty((active.size, 2))
        normal_block(np.uint64(k0), np.uint64(k1), streams[active], step, z)
        y1 = a1 + b1 * dt + eps * sq * (s[0, 0] * z[:, 0] + s[0, 1] * z[:, 1])
        y2 = a2 + b2 * dt + eps * sq * (s[1, 0] * z[:, 0] + s[1, 1] * z[:, 1])
        sd, f, lc = _crossing_vec(a1, a2, y1, y2, box.R, box.L_prime)
        done = sd > 0
        idx = active[done]
        side[idx] = sd[done]
        loc[idx] = lc[done]
        tim[idx] = (step - 1 + f[done]) * dt
        steps[idx] = step
        x1[active], x2[active] = y1, y2
        active = active[~done]
    return ExitBatch(side, loc, tim, steps, timed)


def _crossing_vec(x1, x2, y1, y2, R, Lp):
    with np.errstate(divide="ignore", invalid="ignore"):
        cands = np.full((4,) + x1.shape, 2.0)
        cands[0] = np.where(y1 >= R, (R - x1) / (y1 - x1), 2.0)
        cands[1] = np.where(y1 <= -R, (-R - x1) / (y1 - x1), 2.0)
        cands[2] = np.where(y2 >= Lp, (Lp - x2) / (y2 - x2), 2.0)
        cands[3] = np.where(y2 <= -Lp, (-Lp - x2) / (y2 - x2), 2.0)
    which = np.argmin(cands, axis=0)
    f = np.clip(np.take_along_axis(cands, which[None], 0)[0], 0.0, 1.0)
    hit = f <= 1.0
    hit &= np.take_along_axis(cands, which[None], 0)[0] < 2.0
    side = np.where(hit, which + 1, 0).astype(np.int8)
    loc = np.where(which <= 1, x2 + f * (y2 - x2), x1 + f * (y1 - x1))
    return side, f, loc


def step_linear_exact(sde: LinearSaddleSde, state, dt: float, rng) -> np.ndarray:
    """Sample the exact transition of the linear saddle; ``state`` is (2,) or (m, 2)."""
    x = np.asarray(state, dtype=float)
    e1, e2, l11, l21, l22 = sde.transition(dt)
    z = rng.standard_normal(x.shape)
    out = np.empty_like(x)
    out[..., 0] = e1 * x[..., 0] + l11 * z[..., 0]
    out[..., 1] = e2 * x[..., 1] + l21 * z[..., 0] + l22 * z[..., 1]
    return out


def step_euler(sde: GeneralSde, state, dt: float, rng) -> np.ndarray:
    """One Euler-Maruyama step; ``state`` is (2,) or (m, 2)."""
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    x = np.asarray(state, dtype=float)
    b1, b2 = sde.drift(x[..., 0], x[..., 1])
    s = sde.sigma_at(x[..., 0], x[..., 1])
    z = rng.standard_normal(x.shape) * math.sqrt(dt) * sde.epsilon
    out = np.empty_like(x)
    out[..., 0] = x[..., 0] + b1 * dt + s[0, 0] * z[..., 0] + s[0, 1] * z[..., 1]
    out[..., 1] = x[..., 1] + b2 * dt + s[1, 0] * z[..., 0] + s[1, 1] * z[..., 1]
    return out


def apply_transport(tmap: TransportMap, exit: ExitRecord, alpha_in: float, epsilon: float, rng,
                    outgoing: Side = Side.RIGHT) -> float:
    """Rescaled entrance of the next saddle, flip (a xi + b eps^{1-alpha_in} N)."""
    if exit.side != outgoing:
        raise GeometryError(f"exit on {exit.side.name} face, connection leaves through {outgoing.name}")
    if not (0.0 < alpha_in <= 1.0 and epsilon > 0):
        raise ValidationError("need alpha_in in (0, 1] and epsilon > 0")
    xi = exit.location / epsilon ** alpha_in
    kick = tmap.b * epsilon ** (1.0 - alpha_in) * float(rng.standard_normal())
    return tmap.flip * (tmap.a * xi + kick)
