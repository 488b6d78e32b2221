"""Domain types for saddles, escape chains and periodic cell networks.

All types are frozen dataclasses, so they can be shared between threads
and used as dictionary keys. The stability index ``rho`` is always derived
from ``(lam, mu)`` and never stored.

JSON layout (UTF-8, no comments)::

    chain:   {"alpha0": 1.0, "saddles": [{"lambda": 1.0, "mu": 0.5}], "wrong_turn": true}
    network: {"cells": [{"saddles": [...]}],
              "escapes": [{"from": 0, "chain": {...}, "to": 1}]}

A saddle may carry an optional ``"name"``; a chain may carry an optional
``"turns"`` list of +1/-1 face signs for general (non-escape) chains.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Saddle:
    """Hyperbolic saddle with expansion rate ``lam`` and contraction rate ``mu``."""

    lam: float
    mu: float
    name: Optional[str] = None

    def __post_init__(self) -> None:
        for label, value in (("lambda", self.lam), ("mu", self.mu)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"saddle {label} must be a number, got {value!r}")
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"saddle {label} must be finite and > 0, got {value!r}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def rho(self) -> float:
        return self.mu / self.lam

    def scaled(self, c: float) -> "Saddle":
        """Same saddle with both rates multiplied by ``c``."""
        return Saddle(self.lam * c, self.mu * c, self.name)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"lambda": self.lam, "mu": self.mu}
        if self.name is not None:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: Any) -> "Saddle":
        if not isinstance(data, dict):
            raise ValidationError(f"saddle entry must be an object, got {type(data).__name__}")
        missing = [k for k in ("lambda", "mu") if k not in data]
        if missing:
            raise ValidationError(f"saddle entry missing keys {missing}")
        name = data.get("name")
        if name is not None and not isinstance(name, str):
            raise ValidationError("saddle name must be a string")
        return cls(data["lambda"], data["mu"], name)


@dataclass(frozen=True)
class EscapeChainSpec:
    """Ordered chain O_1..O_n entered with scaling exponent ``alpha0``.

    With ``wrong_turn`` set, the chain escapes when saddles 1..n-1 are left
    through the continuing face and saddle n through the opposite one.
    ``turns`` overrides this with an explicit face sign per saddle.
    """

    alpha0: float
    saddles: tuple[Saddle, ...]
    wrong_turn: bool = True
    turns: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        a = self.alpha0
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not math.isfinite(a):
            raise ValidationError(f"alpha0 must be a number, got {a!r}")
        if not 0.0 < a <= 1.0:
            raise ValidationError(f"alpha0 must lie in (0, 1], got {a!r}")
        object.__setattr__(self, "alpha0", float(a))
        saddles = tuple(self.saddles)
        if not saddles:
            raise ValidationError("chain needs at least one saddle")
        if not all(isinstance(s, Saddle) for s in saddles):
            raise ValidationError("chain saddles must be Saddle instances")
        object.__setattr__(self, "saddles", saddles)
        object.__setattr__(self, "wrong_turn", bool(self.wrong_turn))
        if self.turns is not None:
            turns = tuple(int(t) for t in self.turns)
            if len(turns) != len(saddles) or any(t not in (1, -1) for t in turns):
                raise ValidationError("turns must hold one +1/-1 entry per saddle")
            object.__setattr__(self, "turns", turns)

    @property
    def n(self) -> int:
        return len(self.saddles)

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple(s.rho for s in self.saddles)

    @property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(s.lam for s in self.saddles)

    @property
    def mus(self) -> tuple[float, ...]:
        return tuple(s.mu for s in self.saddles)

    def exit_faces(self) -> tuple[int, ...]:
        """Face sign (+1 right, -1 left) that continues the chain at each saddle."""
        if self.turns is not None:
            return self.turns
        faces = [1] * self.n
        if self.wrong_turn:
            faces[-1] = -1
        return tuple(faces)

    def scaled(self, c: float) -> "EscapeChainSpec":
        return EscapeChainSpec(self.alpha0, tuple(s.scaled(c) for s in self.saddles),
                               self.wrong_turn, self.turns)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "alpha0": self.alpha0,
            "saddles": [s.to_dict() for s in self.saddles],
            "wrong_turn": self.wrong_turn,
        }
        if self.turns is not None:
            out["turns"] = list(self.turns)
        return out

    @classmethod
    def from_dict(cls, data: Any) -> "EscapeChainSpec":
        if not isinstance(data, dict):
            raise ValidationError("chain must be a JSON object")
        if "alpha0" not in data or "saddles" not in data:
            raise ValidationError("chain needs 'alpha0' and 'saddles'")
        if not isinstance(data["saddles"], list):
            raise ValidationError("'saddles' must be a list")
        wrong_turn = data.get("wrong_turn", True)
        if not isinstance(wrong_turn, bool):
            raise ValidationError("'wrong_turn' must be a boolean")
        turns = data.get("turns")
        if turns is not None and not isinstance(turns, list):
            raise ValidationError("'turns' must be a list")
        return cls(
            data["alpha0"],
            tuple(Saddle.from_dict(s) for s in data["saddles"]),
            wrong_turn,
            None if turns is None else tuple(turns),
        )


@dataclass(frozen=True)
class CellCycle:
    """Cyclic list of saddles bounding one cell, in flow order."""

    saddles: tuple[Saddle, ...]

    def __post_init__(self) -> None:
        saddles = tuple(self.saddles)
        if not saddles:
            raise ValidationError("cell cycle needs at least one saddle")
        object.__setattr__(self, "saddles", saddles)

    def to_dict(self) -> dict[str, Any]:
        return {"saddles": [s.to_dict() for s in self.saddles]}

    @classmethod
    def from_dict(cls, data: Any) -> "CellCycle":
        if not isinstance(data, dict) or not isinstance(data.get("saddles"), list):
            raise ValidationError("cell must be an object with a 'saddles' list")
        return cls(tuple(Saddle.from_dict(s) for s in data["saddles"]))


@dataclass(frozen=True)
class EscapeLink:
    """Crossing from cell ``source`` to cell ``target`` along ``chain``."""

    source: int
    chain: EscapeChainSpec
    target: int

    def to_dict(self) -> dict[str, Any]:
        return {"from": self.source, "chain": self.chain.to_dict(), "to": self.target}

    @classmethod
    def from_dict(cls, data: Any) -> "EscapeLink":
        if not isinstance(data, dict) or not {"from", "chain", "to"} <= set(data):
            raise ValidationError("escape needs 'from', 'chain' and 'to'")
        src, dst = data["from"], data["to"]
        for v in (src, dst):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValidationError(f"cell index must be an integer, got {v!r}")
        return cls(src, EscapeChainSpec.from_dict(data["chain"]), dst)


@dataclass(frozen=True)
class PeriodicNetworkSpec:
    """Cells of a periodic network plus the escape chains linking them.

    Construction does not validate; call :func:`validate_network`.
    """

    cells: tuple[CellCycle, ...] = field(default_factory=tuple)
    escapes: tuple[EscapeLink, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "escapes", tuple(self.escapes))

    def to_dict(self) -> dict[str, Any]:
        return {"cells": [c.to_dict() for c in self.cells],
                "escapes": [e.to_dict() for e in self.escapes]}

    @classmethod
    def from_dict(cls, data: Any) -> "PeriodicNetworkSpec":
        if not isinstance(data, dict):
            raise ValidationError("network must be a JSON object")
        cells = data.get("cells", [])
        escapes = data.get("escapes", [])
        if not isinstance(cells, list) or not isinstance(escapes, list):
            raise ValidationError("'cells' and 'escapes' must be lists")
        return cls(tuple(CellCycle.from_dict(c) for c in cells),
                   tuple(EscapeLink.from_dict(e) for e in escapes))


@dataclass(frozen=True)
class Diagnostic:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.location}: {self.message}"


def validate_network(spec: PeriodicNetworkSpec) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant; empty when valid."""
    out: list[Diagnostic] = []
    if not spec.cells:
        out.append(Diagnostic("no-cells", "cells", "network has no cells"))
    ncell = len(spec.cells)
    for i, esc in enumerate(spec.escapes):
        loc = f"escapes[{i}]"
        bad = False
        for label, idx in (("from", esc.source), ("to", esc.target)):
            if not 0 <= idx < ncell:
                out.append(Diagnostic("index-out-of-range", f"{loc}.{label}",
                                      f"cell index {idx} not in [0, {ncell})"))
                bad = True
        if bad:
            continue
        boundary = set(spec.cells[esc.source].saddles)
        for k, s in enumerate(esc.chain.saddles):
            if s not in boundary:
                out.append(Diagnostic("saddle-not-on-boundary", f"{loc}.chain.saddles[{k}]",
                                      f"saddle {s} is not on the boundary of cell {esc.source}"))
    return out


def _read_json(path: str | Path) -> Any:
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"no such file: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{p}: {exc}") from exc


def load_chain_spec(path: str | Path) -> EscapeChainSpec:
    return EscapeChainSpec.from_dict(_read_json(path))


def load_network_spec(path: str | Path) -> PeriodicNetworkSpec:
    return PeriodicNetworkSpec.from_dict(_read_json(path))


def dumps(obj: EscapeChainSpec | PeriodicNetworkSpec) -> str:
    # repr-based float output round-trips exactly
    return json.dumps(obj.to_dict(), indent=2, ensure_ascii=False)


def chain(alpha0: float, rates: Iterable[Sequence[float]], wrong_turn: bool = True) -> EscapeChainSpec:
    """Shorthand: ``chain(1.0, [(1, 0.5), (1, 1)])``."""
    return EscapeChainSpec(alpha0, tuple(Saddle(l, m) for l, m in rates), wrong_turn)
