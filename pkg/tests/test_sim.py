import math

import numpy as np
import pytest
from scipy import stats
from scipy.linalg import expm

from hetlab.errors import GeometryError, SimulationTimeout, ValidationError
from hetlab.kernel import UNIT_BOX, EntranceLaw, SaddleBox, gaussian_cdf
from hetlab.network import Saddle, chain
from hetlab.rng import CounterRNG
from hetlab.sim import (ExitRecord, GeneralSde, LinearSaddleSde, Side, TransportMap, apply_transport,
                        default_dt, default_max_time, rectified_sde, simulate_chain, simulate_chain_batch,
                        simulate_exit, simulate_exit_batch, step_euler, step_linear_exact)

BOX73 = SaddleBox(1.0, 0.5, 1.0)


# --- single steps


def test_exact_step_variance():
    eps = 0.1
    sde = LinearSaddleSde(Saddle(1.0, 1.0), BOX73, eps)
    x = step_linear_exact(sde, np.zeros((1_000_000, 2)), math.log(2.0), np.random.default_rng(0))
    assert x[:, 0].var() == pytest.approx(1.5 * eps ** 2, rel=0.01)
    assert x[:, 1].var() == pytest.approx(eps ** 2 * (1 - 0.25) / 2, rel=0.01)


def test_exact_step_zero_noise():
    sde = LinearSaddleSde(Saddle(2.0, 0.5), BOX73, 0.0)
    out = step_linear_exact(sde, np.array([0.1, 0.4]), 0.3, np.random.default_rng(0))
    assert out == pytest.approx([0.1 * math.exp(0.6), 0.4 * math.exp(-0.15)], rel=1e-15)


def test_exact_step_matches_euler_moments_small_dt():
    # one-step mean and variance agree to O(dt^2)
    dt = 1e-3
    sde = LinearSaddleSde(Saddle(1.5, 0.7), BOX73, 1.0)
    e1, e2, l11, l21, l22 = sde.transition(dt)
    assert e1 - (1 + 1.5 * dt) == pytest.approx(0, abs=5 * dt ** 2)
    assert e2 - (1 - 0.7 * dt) == pytest.approx(0, abs=5 * dt ** 2)
    assert l11 ** 2 - dt == pytest.approx(0, abs=5 * dt ** 2)
    assert l21 == 0.0
    assert l22 ** 2 - dt == pytest.approx(0, abs=5 * dt ** 2)


def test_correlated_sigma_covariance():
    sig = ((1.0, 0.0), (0.6, 0.8))
    sde = LinearSaddleSde(Saddle(1.0, 1.0), BOX73, 1.0, sig)
    dt = 0.5
    x = step_linear_exact(sde, np.zeros((400_000, 2)), dt, np.random.default_rng(1))
    A = np.diag([1.0, -1.0])
    S = np.array(sig) @ np.array(sig).T
    # Q = int_0^dt e^{As} S e^{A's} ds, elementwise closed form for diagonal A
    a = np.diag(A)
    Q = np.array([[S[i, j] * math.expm1((a[i] + a[j]) * dt) / (a[i] + a[j]) if a[i] + a[j] else S[i, j] * dt
                   for j in range(2)] for i in range(2)])
    assert np.cov(x.T) == pytest.approx(Q, rel=0.02, abs=2e-3)


def test_singular_sigma_rejected():
    with pytest.raises(ValidationError):
        LinearSaddleSde(Saddle(1, 1), BOX73, 0.1, ((1, 1), (1, 1)))


def test_euler_pure_noise():
    sde = GeneralSde(lambda x1, x2: (0 * x1, 0 * x2), lambda x1, x2: ((1, 0), (0, 1)), 0.3)
    x = step_euler(sde, np.zeros((500_000, 2)), 1.0, np.random.default_rng(2))
    assert x.var(axis=0) == pytest.approx([0.09, 0.09], rel=0.01)


def test_euler_zero_noise_is_forward_euler():
    sde = rectified_sde(Saddle(1.0, 2.0), BOX73, 0.0)
    out = step_euler(sde, np.array([0.2, 0.3]), 0.01, np.random.default_rng(0))
    assert out == pytest.approx([0.2 * 1.01, 0.3 * 0.98], rel=1e-15)


def test_euler_linear_mean_at_time_one():
    A = np.array([[0.5, 0.3], [-0.2, -1.0]])
    sde = GeneralSde(lambda x1, x2: (A[0, 0] * x1 + A[0, 1] * x2, A[1, 0] * x1 + A[1, 1] * x2),
                     lambda x1, x2: ((1, 0), (0, 1)), 0.2, SaddleBox(100.0, 0.5, 100.0))
    x0 = np.array([0.3, -0.4])
    n, dt = 10_000, 1e-3
    x = np.tile(x0, (n, 1))
    rng = np.random.default_rng(5)
    for _ in range(1000):
        x = step_euler(sde, x, dt, rng)
    target = expm(A) @ x0
    se = x.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(x.mean(axis=0) - target) < 3 * se)


# --- exits


def test_deterministic_exit_time():
    sde = LinearSaddleSde(Saddle(2.0, 1.0), BOX73, 0.0)
    rec = simulate_exit(sde, (0.1, 0.0), 10.0, 1e-3, CounterRNG(0))
    assert rec.side is Side.RIGHT
    assert rec.location == 0.0
    assert rec.time == pytest.approx(math.log(10.0) / 2.0, abs=1e-6)


def test_timeout():
    sde = LinearSaddleSde(Saddle(1.0, 1.0), BOX73, 0.0)
    with pytest.raises(SimulationTimeout):
        simulate_exit(sde, (1e-9, 0.0), 1.0, 1e-2, CounterRNG(0))


def test_initial_outside_rejected():
    sde = LinearSaddleSde(Saddle(1.0, 1.0), BOX73, 0.1)
    with pytest.raises(ValidationError):
        simulate_exit(sde, (1.5, 0.0), 1.0, 1e-2, CounterRNG(0))


def test_mean_exit_time_ratio():
    eps = 1e-3
    sde = LinearSaddleSde(Saddle(1.0, 1.0), BOX73, eps)
    b = simulate_exit_batch(sde, 10_000, 1e-3, seed=11, entrance=EntranceLaw("normal", 0, 1), alpha=1.0)
    assert not b.timed_out.any()
    ratio = b.time.mean() / math.log(1 / eps)
    assert 0.9 <= ratio <= 1.1


def test_exit_side_frequency():
    eps = 1e-3
    sde = LinearSaddleSde(Saddle(1.0, 1.0), BOX73, eps)
    n = 10_000
    b = simulate_exit_batch(sde, n, 1e-3, seed=12, entrance=EntranceLaw.point(1.0), alpha=1.0)
    p = gaussian_cdf(-1.0, 0.5)
    freq = np.mean(b.side == Side.LEFT)
    assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_exit_location_on_face():
    eps, dt = 0.05, 1e-2
    sde = LinearSaddleSde(Saddle(1.0, 0.5), BOX73, eps)
    b = simulate_exit_batch(sde, 5000, dt, seed=3, entrance=EntranceLaw("normal", 0, 1))
    lr = (b.side == Side.LEFT) | (b.side == Side.RIGHT)
    slack = 1.0 * dt + 6 * eps * math.sqrt(dt)
    assert np.all(np.abs(b.location[lr]) <= BOX73.L_prime + slack)
    assert np.all(b.time > 0)


@pytest.mark.slow
def test_exact_vs_euler_consistency():
    eps, n = 0.1, 10_000
    s = Saddle(1.0, 0.5)
    law = EntranceLaw("normal", 0, 1)
    exact = simulate_exit_batch(LinearSaddleSde(s, BOX73, eps), n, 1e-2, seed=21, entrance=law)
    euler = simulate_exit_batch(rectified_sde(s, BOX73, eps), n, 1e-4, seed=22, entrance=law)
    for a, b in ((exact.time, euler.time), (exact.location, euler.location)):
        se = math.sqrt(a.var() / n + b.var() / n)
        assert abs(a.mean() - b.mean()) < 3 * se
        # variance of the sample variance, fourth-moment form
        sv = math.sqrt((np.mean((a - a.mean()) ** 4) - a.var() ** 2) / n
                       + (np.mean((b - b.mean()) ** 4) - b.var() ** 2) / n)
        assert abs(a.var() - b.var()) < 3 * sv


def test_one_sided_exit():
    # alpha < 1, alpha rho < 1: the rescaled exit location stays of order one and positive
    eps, alpha = 1e-3, 0.5
    s = Saddle(1.0, 0.5)
    b = simulate_exit_batch(LinearSaddleSde(s, BOX73, eps), 10_000, 1e-3, seed=8,
                            entrance=EntranceLaw.point(1.0), alpha=alpha)
    xi = b.location / eps ** (alpha * s.rho)
    low = (b.side != Side.RIGHT) | (xi <= 1.0 / math.log(1 / eps))
    assert low.mean() < 1e-3


# --- chains


def test_single_saddle_symmetric_escape():
    spec = chain(1.0, [(1.0, 1.0)])
    n = 20_000
    b = simulate_chain_batch(spec, [TransportMap.identity()], 0.05, 1e-2, 4, n, box=BOX73,
                             entrance=EntranceLaw.point(0.0))
    assert abs(b.hits / n - 0.5) < 3 * math.sqrt(0.25 / n)


def test_zero_noise_never_escapes():
    spec = chain(1.0, [(1.0, 0.5), (1.0, 1.0)])
    b = simulate_chain_batch(spec, None, 0.0, 1e-2, 0, 50, box=BOX73, entrance=EntranceLaw.point(0.7),
                             max_time=30.0)
    assert b.hits == 0
    with pytest.raises(ValidationError):
        simulate_chain_batch(spec, None, 0.0, 1e-2, 0, 5)


def test_chain_determinism_and_splitting():
    spec = chain(1.0, [(1.0, 0.5), (1.0, 1.0)])
    kw = dict(box=UNIT_BOX, entrance=EntranceLaw("uniform", -3, 3))
    whole = simulate_chain_batch(spec, None, 0.1, 1e-2, 99, 2000, **kw)
    again = simulate_chain_batch(spec, None, 0.1, 1e-2, 99, 2000, threads=1, **kw)
    head = simulate_chain_batch(spec, None, 0.1, 1e-2, 99, 700, **kw)
    tail = simulate_chain_batch(spec, None, 0.1, 1e-2, 99, 1300, start=700, **kw)
    joined = head.concat(tail)
    for name in ("side", "location", "time", "steps", "status", "total_time"):
        assert np.array_equal(getattr(whole, name), getattr(again, name))
        assert np.array_equal(getattr(whole, name), getattr(joined, name))
    one = simulate_chain(spec, None, 0.1, 1e-2, CounterRNG(99, 1234), **kw)
    assert one == whole.outcome(1234)


def test_chain_outcome_layout():
    spec = chain(1.0, [(1.0, 0.5), (1.0, 1.0)])
    maps = [TransportMap(1.0, 0.0, 1, 2.0), TransportMap(1.0, 0.0, 1, 0.5)]
    b = simulate_chain_batch(spec, maps, 0.1, 1e-2, 1, 3000, box=UNIT_BOX)
    faces = spec.exit_faces()
    for i in range(b.size):
        out = b.outcome(i)
        assert out.total_time == pytest.approx(sum(e.time for e in out.exits)
                                               + sum(m.travel_time for m in maps[:len(out.exits)]), rel=1e-12)
        if out.escaped:
            assert [e.side.sign for e in out.exits] == list(faces)
        else:
            assert out.exits[-1].side.sign != faces[len(out.exits) - 1] or out.timed_out


def test_map_count_checked():
    with pytest.raises(ValidationError):
        simulate_chain_batch(chain(1.0, [(1, 0.5), (1, 1)]), [TransportMap()], 0.1, 1e-2, 0, 10)


def test_defaults():
    spec = chain(1.0, [(1.0, 0.5), (2.0, 1.0)])
    assert default_dt(spec.saddles) == pytest.approx(1e-3 * 0.5)
    # chi_bar = 1/0.5 + 1/2
    assert default_max_time(spec, math.exp(-2)) == pytest.approx(10 * 2.5 * 2)
    assert default_max_time(spec, math.exp(-2), [TransportMap()] * 2) == pytest.approx(52.0)


# --- transport


def test_transport_identity():
    rec = ExitRecord(Side.RIGHT, 0.02, 1.0, 10)
    out = apply_transport(TransportMap(1.0, 0.0, 1, 0.0), rec, 1.0, 0.01, CounterRNG(0))
    assert out == pytest.approx(2.0)


def test_transport_pure_kick():
    r = CounterRNG(3)
    tm = TransportMap(2.0, 0.7, -1, 1.0)
    rec = ExitRecord(Side.RIGHT, 0.0, 1.0, 1)
    xs = np.array([apply_transport(tm, rec, 1.0, 0.01, r) for _ in range(20_000)])
    assert stats.kstest(xs, stats.norm(0, 0.7).cdf).pvalue > 1e-3


def test_transport_limit_law():
    eps, alpha, a = 1e-6, 0.5, 1.7
    rng = np.random.default_rng(0)
    xi = rng.exponential(1.0, 100_000)
    r = CounterRNG(17)
    tm = TransportMap(a, 1.0, 1, 1.0)
    out = np.array([apply_transport(tm, ExitRecord(Side.RIGHT, x * eps ** alpha, 1.0, 1), alpha, eps, r)
                    for x in xi])
    d = stats.ks_2samp(out, a * rng.exponential(1.0, 100_000)).statistic
    assert d < 0.02


def test_transport_wrong_face():
    with pytest.raises(GeometryError):
        apply_transport(TransportMap(), ExitRecord(Side.LEFT, 0.0, 1.0, 1), 1.0, 0.1, CounterRNG(0))


@pytest.mark.parametrize("kw", [dict(a=0.0), dict(flip=0), dict(travel_time=-1.0), dict(b=float("inf"))])
def test_transport_validation(kw):
    with pytest.raises(ValidationError):
        TransportMap(**kw)


def test_transport_round_trip():
    tm = TransportMap(0.5, 2.0, -1, 3.0)
    assert TransportMap.from_dict(tm.to_dict()) == tm


# --- general fields


def test_check_field():
    ok = rectified_sde(Saddle(1, 1), BOX73, 0.1)
    ok.check_field()
    bad = GeneralSde(lambda x1, x2: (np.full_like(x1, np.inf), x2), lambda x1, x2: ((1, 0), (0, 1)), 0.1)
    with pytest.raises(ValidationError):
        bad.check_field()
    degenerate = GeneralSde(lambda x1, x2: (x1, x2), lambda x1, x2: ((1, 1), (1, 1)), 0.1)
    with pytest.raises(ValidationError):
        degenerate.check_field()


def test_euler_backend_deterministic_exit():
    sde = rectified_sde(Saddle(1.0, 1.0), BOX73, 0.0)
    b = simulate_exit_batch(sde, 3, 1e-4, 0, initial=(-0.2, 0.3))
    assert np.all(b.side == Side.LEFT)
    assert b.time == pytest.approx(np.full(3, math.log(5.0)), abs=1e-3)
    assert b.location == pytest.approx(np.full(3, 0.3 / 5.0), abs=1e-4)
