"""Timescale ladder, clusters and limiting weights for periodic cell networks.

This part is heuristic: the clustering and the mixture rule follow the
informal picture of nested metastable clusters, not a proven theorem.

Cell escapes with a positive limit probability (theta = 0) happen on the
basic time scale l_eps and are merged into the base clusters; every
power-law escape contributes a level theta with time scale eps^-theta l_eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import RegimeError, UnstableCycle, ValidationError
from .exponents import TIE_RTOL, Regime, classify_escape
from .network import CellCycle, EscapeChainSpec, EscapeLink, PeriodicNetworkSpec, Saddle, validate_network

LEVEL_TOL = 1e-9
HEURISTIC_NOTE = "heuristic: cluster hierarchy and mixture weights are not backed by a rigorous limit theorem"


def saddle_key(saddle: Saddle, index: int) -> str:
    return saddle.name if saddle.name is not None else f"s{index}"


def cycle_exponents(cycle: CellCycle) -> tuple[float, ...]:
    """Periodic exit exponents alpha_i of each saddle around a stable cycle."""
    rhos = [s.rho for s in cycle.saddles]
    log_loop = math.fsum(math.log(r) for r in rhos)
    if log_loop < -TIE_RTOL * max(1.0, sum(abs(math.log(r)) for r in rhos)):
        raise UnstableCycle(f"loop rho product {math.exp(log_loop):.6g} < 1: exponents decay to 0")
    # starting from 1, one lap lands on the fixed point; the second lap is periodic
    a = 1.0
    for r in rhos:
        a = min(a * r, 1.0)
    out = []
    for r in rhos:
        a = min(a * r, 1.0)
        out.append(a)
    if max(out) != 1.0:
        raise UnstableCycle("no clamp around the loop")
    return tuple(out)


def cycle_invariant_weights(cycle: CellCycle) -> dict[str, float]:
    """Limit share of time spent near each saddle: alpha_{i-1} / lambda_i, normalised.

    Keys are saddle names (``s<i>`` when unnamed); repeated names add up.
    """
    alpha = cycle_exponents(cycle)
    m = len(alpha)
    raw = [alpha[i - 1] / cycle.saddles[i].lam for i in range(m)]
    Z = math.fsum(raw)
    out: dict[str, float] = {}
    for i, s in enumerate(cycle.saddles):
        k = saddle_key(s, i)
        out[k] = out.get(k, 0.0) + raw[i] / Z
    return out


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        a, b = self.find(i), self.find(j)
        if a != b:
            self.parent[max(a, b)] = min(a, b)

    def groups(self) -> list[tuple[int, ...]]:
        g: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            g.setdefault(self.find(i), []).append(i)
        return sorted(tuple(v) for v in g.values())


def mix_weights(members: Sequence[int], cell_weights: Sequence[dict[str, float]],
                mixture: Optional[Sequence[float]] = None) -> dict[str, float]:
    """Mixture of member-cell weight vectors; equal mixing unless ``mixture`` is given."""
    coef = [1.0 if mixture is None else float(mixture[c]) for c in members]
    total = math.fsum(coef)
    if not total > 0:
        raise ValidationError("mixture coefficients of a cluster must have positive sum")
    keys = sorted({k for c in members for k in cell_weights[c]})
    return {k: math.fsum(w * cell_weights[c].get(k, 0.0) for w, c in zip(coef, members)) / total
            for k in keys}


@dataclass
class HierarchyReport:
    levels: list[float]
    clusters_at_level: list[list[tuple[int, ...]]]
    weights: list[list[dict[str, float]]]
    base_clusters: list[tuple[int, ...]]
    base_weights: list[dict[str, float]]
    escape_theta: list[float]
    note: str = HEURISTIC_NOTE

    def entries(self) -> list[tuple[Optional[float], list[tuple[int, ...]], list[dict[str, float]]]]:
        """Base level (None) followed by each theta level."""
        out = [(None, self.base_clusters, self.base_weights)]
        out += list(zip(self.levels, self.clusters_at_level, self.weights))
        return out

    @staticmethod
    def timescale(theta: float, epsilon: float) -> float:
        return epsilon ** (-theta) * math.log(1.0 / epsilon)

    def to_dict(self) -> dict:
        return {
            "note": self.note,
            "levels": self.levels,
            "base_clusters": [list(c) for c in self.base_clusters],
            "base_weights": self.base_weights,
            "clusters_at_level": [[list(c) for c in lv] for lv in self.clusters_at_level],
            "weights": self.weights,
            "escape_theta": self.escape_theta,
        }

    def to_dot(self) -> str:
        """Cluster-merge tree in Graphviz DOT."""
        lines = ["digraph hierarchy {", f'  label="{self.note}";', "  rankdir=BT;"]
        prev = [("b", i, c) for i, c in enumerate(self.base_clusters)]
        for tag, i, c in prev:
            lines.append(f'  {tag}{i} [label="{{{",".join(map(str, c))}}}"];')
        for li, (theta, clusters) in enumerate(zip(self.levels, self.clusters_at_level)):
            cur = [(f"l{li}_", i, c) for i, c in enumerate(clusters)]
            for tag, i, c in cur:
                lines.append(f'  {tag}{i} [label="theta={theta:.6g}\\n{{{",".join(map(str, c))}}}"];')
            for ptag, pi, pc in prev:
                for tag, i, c in cur:
                    if set(pc) <= set(c):
                        lines.append(f"  {ptag}{pi} -> {tag}{i};")
            prev = cur
        lines.append("}")
        return "\n".join(lines) + "\n"


def timescale_ladder(network: PeriodicNetworkSpec, mixture: Optional[Sequence[float]] = None,
                     tol: float = LEVEL_TOL) -> HierarchyReport:
    diags = validate_network(network)
    if diags:
        raise ValidationError("; ".join(str(d) for d in diags))
    n = len(network.cells)
    cell_w = [cycle_invariant_weights(c) for c in network.cells]
    thetas = []
    for i, esc in enumerate(network.escapes):
        rep = classify_escape(esc.chain)
        if rep.regime is Regime.SUPERPOLYNOMIAL:
            raise RegimeError(f"escape {i} is superpolynomial; the ladder needs power-law escapes")
        thetas.append(float(rep.theta))
    uf = _UnionFind(n)
    for esc, th in zip(network.escapes, thetas):
        if th <= tol:
            uf.union(esc.source, esc.target)
    base = uf.groups()
    levels: list[float] = []
    for th in sorted(t for t in thetas if t > tol):
        if not levels or th - levels[-1] > tol:
            levels.append(th)
    clusters, weights = [], []
    for lv in levels:
        for esc, th in zip(network.escapes, thetas):
            if th <= lv + tol:
                uf.union(esc.source, esc.target)
        g = uf.groups()
        clusters.append(g)
        weights.append([mix_weights(c, cell_w, mixture) for c in g])
    return HierarchyReport(levels, clusters, weights, base,
                           [mix_weights(c, cell_w, mixture) for c in base], thetas)


def cellular_flow_network(rho: Sequence[float] = (5.0, 0.5, 0.6, 0.8),
                          lam: Sequence[float] = (2.0, 1.0, 1.0, 1.0), size: int = 4) -> PeriodicNetworkSpec:
    """Doubly periodic cellular flow built from the two-cell example and its mirror image.

    Saddles O0..O3 carry stability indices ``rho`` and rates ``lam``; every
    cell circulates O0 -> O1 -> O2 -> O3. Cells form a ``size`` x ``size``
    periodic patch (size even), cell index = row * size + column. The four
    edges of a cell are crossed by escape chains of types 0..3:

    * type 0, wrong turn at O1: vertical edges between columns 2i and 2i+1;
    * type 1, wrong turn at O2: horizontal edges between rows 2j and 2j+1;
    * type 2, wrong turn at O3: vertical edges between columns 2i+1 and 2i+2;
    * type 3, wrong turn at O0: horizontal edges between rows 2j+1 and 2j+2.
    """
    if size < 2 or size % 2:
        raise ValidationError("cellular flow patch size must be even and >= 2")
    if len(rho) != 4 or len(lam) != 4:
        raise ValidationError("need four stability indices and four rates")
    saddles = tuple(Saddle(float(l), float(l) * float(r), f"O{i}") for i, (l, r) in enumerate(zip(lam, rho)))
    cycle = CellCycle(saddles)
    alpha = cycle_exponents(cycle)
    order = [saddles[k % 4] for k in range(5)]
    chains = [EscapeChainSpec(alpha[3], tuple(order[: t + 2])) for t in range(4)]

    def idx(r: int, c: int) -> int:
        return (r % size) * size + (c % size)

    escapes = []
    for r in range(size):
        for c in range(size):
            here = idx(r, c)
            right = idx(r, c + 1)
            up = idx(r + 1, c)
            vt = 0 if c % 2 == 0 else 2
            ht = 1 if r % 2 == 0 else 3
            escapes += [EscapeLink(here, chains[vt], right), EscapeLink(right, chains[vt], here),
                        EscapeLink(here, chains[ht], up), EscapeLink(up, chains[ht], here)]
    return PeriodicNetworkSpec(tuple(cycle for _ in range(size * size)), tuple(escapes))
