"""External fields, coupling constants, and model parameters.

Colors are numbered 1..q in every public interface; arrays are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .lattice import Graph, Vertex

BOUNDARY_CONDITIONS = ("free", "maxwired")


class IncompatibleFieldError(ValueError):
    """No color maximizes the field at every site."""


def _key(v: Sequence[int]) -> Vertex:
    return tuple(int(c) for c in v)


@dataclass(frozen=True)
class ExternalField:
    """Per-site, per-color field values h[x, m].

    Sites not listed read as zero only when ``padded`` is set; otherwise asking
    for them is an error.
    """

    q: int
    values: Mapping[Vertex, tuple[float, ...]]
    padded: bool = False
    summable_positive: bool = False

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q}")
        vals = {}
        for x, h in self.values.items():
            h = tuple(float(a) for a in h)
            if len(h) != self.q:
                raise ValueError(f"site {x}: expected {self.q} colors, got {len(h)}")
            if not all(np.isfinite(h)):
                raise ValueError(f"site {x}: field values must be finite")
            vals[_key(x)] = h
        object.__setattr__(self, "values", MappingProxyType(vals))
        if self.summable_positive:
            if self.padded:
                raise ValueError("a padded field has implicit zeros and cannot be positive")
            bad = [x for x, h in vals.items() if min(h) <= 0]
            if bad:
                raise ValueError(f"positive field requested but site {bad[0]} has entries <= 0")

    @classmethod
    def zero(cls, q: int) -> "ExternalField":
        return cls(q=q, values={}, padded=True)

    @classmethod
    def from_function(cls, q: int, fn: Callable[[Vertex], Sequence[float]],
                      sites: Iterable[Sequence[int]], summable_positive: bool = False,
                      ) -> "ExternalField":
        return cls(q=q, values={_key(x): tuple(fn(_key(x))) for x in sites},
                   summable_positive=summable_positive)

    @classmethod
    def from_array(cls, graph: Graph, arr: np.ndarray, summable_positive: bool = False,
                   ) -> "ExternalField":
        arr = np.asarray(arr, dtype=float)
        if arr.shape[0] != graph.n_vertices:
            raise ValueError("array must have one row per vertex of V u dV")
        return cls(q=arr.shape[1],
                   values={v: tuple(arr[i]) for i, v in enumerate(graph.all_vertices)},
                   summable_positive=summable_positive)

    @property
    def sites(self) -> frozenset[Vertex]:
        return frozenset(self.values)

    def at(self, x: Sequence[int]) -> tuple[float, ...]:
        x = _key(x)
        if x in self.values:
            return self.values[x]
        if self.padded:
            return (0.0,) * self.q
        raise KeyError(f"field is not defined at site {x}")

    def array_for(self, graph: Graph) -> np.ndarray:
        """(n_vertices, q) array over V u dV in graph index order."""
        return np.array([self.at(v) for v in graph.all_vertices], dtype=float).reshape(-1, self.q)

    def scaled(self, c: float) -> "ExternalField":
        return ExternalField(self.q, {x: tuple(c * a for a in h) for x, h in self.values.items()},
                             padded=self.padded,
                             summable_positive=self.summable_positive and c > 0)


def q_max(field: ExternalField, x: Sequence[int]) -> frozenset[int]:
    """Colors attaining the maximum at x (exact equality, no tolerance)."""
    h = field.at(x)
    top = max(h)
    return frozenset(m + 1 for m, a in enumerate(h) if a == top)


def check_compatibility(field: ExternalField, sites: Iterable[Sequence[int]],
                        ) -> tuple[bool, frozenset[int]]:
    """Intersection of the maximizer sets over ``sites`` and whether it is nonempty."""
    common = frozenset(range(1, field.q + 1))
    for x in sites:
        common &= q_max(field, x)
    return bool(common), common


def require_compatible(field: ExternalField, sites: Iterable[Sequence[int]]) -> frozenset[int]:
    sites = [_key(x) for x in sites]
    ok, common = check_compatibility(field, sites)
    if ok:
        return common
    maxsets = [(x, q_max(field, x)) for x in sites]
    for i, (x, qx) in enumerate(maxsets):
        for y, qy in maxsets[i + 1:]:
            if not qx & qy:
                raise IncompatibleFieldError(
                    f"no common maximizing color: site {x} maximizes {sorted(qx)}, "
                    f"site {y} maximizes {sorted(qy)}")
    running = frozenset(range(1, field.q + 1))
    for x, qx in maxsets:
        if not running & qx:
            raise IncompatibleFieldError(
                f"no common maximizing color: site {x} maximizes {sorted(qx)} "
                f"but earlier sites only share {sorted(running)}")
        running &= qx
    raise AssertionError("unreachable")


def _common_domain(h: ExternalField, hp: ExternalField) -> frozenset[Vertex]:
    if h.q != hp.q:
        raise ValueError(f"fields have different color counts ({h.q} vs {hp.q})")
    if h.sites == hp.sites:
        return h.sites
    if (hp.sites <= h.sites or h.padded) and (h.sites <= hp.sites or hp.padded):
        return h.sites | hp.sites
    raise ValueError("fields are defined on different sites")


def field_leq(h: ExternalField, hp: ExternalField, strict: bool = False,
              sites: Iterable[Sequence[int]] | None = None) -> bool:
    """Field order: h[x,k] - h[x,l] <= h'[x,k] - h'[x,l] at every site.

    By default only pairs with h[x,k] - h[x,l] > 0 are constrained; ``strict``
    constrains every ordered pair.
    """
    domain = _common_domain(h, hp) if sites is None else [_key(x) for x in sites]
    for x in domain:
        a = np.asarray(h.at(x))
        b = np.asarray(hp.at(x))
        gap = a[:, None] - a[None, :]
        gap_p = b[:, None] - b[None, :]
        viol = gap > gap_p
        if not strict:
            viol &= gap > 0
        if viol.any():
            return False
    return True


def l1_norm(field: ExternalField, sites: Iterable[Sequence[int]] | None = None) -> float:
    """Sum of |h[x, m]| over colors and over the field's sites (or ``sites``)."""
    if sites is None:
        return float(sum(abs(a) for h in field.values.values() for a in h))
    return float(sum(abs(a) for x in sites for a in field.at(x)))


@dataclass(frozen=True)
class Couplings:
    """Nonnegative coupling constants on interior edges."""

    uniform: float | None = 1.0
    per_edge: Mapping[frozenset, float] = field(default_factory=dict)
    default: float | None = None

    def __post_init__(self):
        vals = {}
        for k, j in dict(self.per_edge).items():
            key = frozenset(_key(v) for v in k)
            if len(key) != 2:
                raise ValueError(f"edge {tuple(k)} must join two distinct vertices")
            j = float(j)
            if not j >= 0:
                raise ValueError(f"coupling on {sorted(key)} must be >= 0, got {j}")
            vals[key] = j
        object.__setattr__(self, "per_edge", MappingProxyType(vals))
        if vals:
            object.__setattr__(self, "uniform", None)
        if self.uniform is not None and not self.uniform >= 0:
            raise ValueError(f"coupling must be >= 0, got {self.uniform}")

    @classmethod
    def from_edges(cls, values: Mapping, default: float | None = None) -> "Couplings":
        return cls(uniform=None, per_edge=values, default=default)

    def value(self, x: Sequence[int], y: Sequence[int]) -> float:
        if self.uniform is not None:
            return self.uniform
        key = frozenset((_key(x), _key(y)))
        if key in self.per_edge:
            return self.per_edge[key]
        if self.default is not None:
            return self.default
        raise KeyError(f"no coupling for edge {sorted(key)}")

    def array_for(self, graph: Graph) -> np.ndarray:
        vs = graph.all_vertices
        return np.array([self.value(vs[a], vs[b]) for a, b in graph.edges], dtype=float)


def couplings_leq(J: Couplings, Jp: Couplings, graph: Graph | None = None) -> bool:
    """Componentwise J <= J' on the edges of ``graph`` (or the listed edges)."""
    if J.uniform is not None and Jp.uniform is not None:
        return J.uniform <= Jp.uniform
    if graph is not None:
        return bool(np.all(J.array_for(graph) <= Jp.array_for(graph)))
    keys = set(J.per_edge) | set(Jp.per_edge)
    if (set(J.per_edge) != set(Jp.per_edge)
            and J.uniform is None and Jp.uniform is None
            and J.default is None and Jp.default is None):
        raise ValueError("couplings are defined on different edges")
    return all(J.value(*sorted(k)) <= Jp.value(*sorted(k)) for k in keys)


@dataclass(frozen=True)
class ModelParams:
    """One point (beta, q, J, h, bc) of the model family.

    ``mode="bernoulli"`` marks the independent-percolation reference, the only
    place q = 1 is accepted.
    """

    beta: float
    q: int
    couplings: Couplings = field(default_factory=Couplings)
    field: ExternalField | None = None
    bc: str = "free"
    mode: str = "rcm"

    def __post_init__(self):
        if not self.beta >= 0 or not np.isfinite(self.beta):
            raise ValueError(f"beta must be a finite nonnegative number, got {self.beta}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ValueError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")
        if self.mode not in ("rcm", "bernoulli"):
            raise ValueError(f"mode must be 'rcm' or 'bernoulli', got {self.mode!r}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q}")
        if self.q < 2 and self.mode != "bernoulli":
            raise ValueError("q = 1 is only allowed in bernoulli mode")
        if self.field is None:
            object.__setattr__(self, "field", ExternalField.zero(self.q))
        elif self.field.q != self.q:
            raise ValueError(f"field has {self.field.q} colors but q = {self.q}")

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **changes)


def decaying_values(q: int, amplitude: float = 0.1, center: Sequence[int] | None = None
                    ) -> Callable[[Vertex], tuple[float, ...]]:
    """x -> amplitude * 2^-|x - center|_1 on color 1 and half that on the others."""
    def h(x):
        c = np.zeros(len(x), dtype=int) if center is None else np.asarray(center)
        base = amplitude * 2.0 ** (-float(np.abs(np.asarray(x) - c).sum()))
        return (base,) + (0.5 * base,) * (q - 1)
    return h


def decaying_field(q: int, sites: Iterable[Sequence[int]], amplitude: float = 0.1,
                   center: Sequence[int] | None = None) -> ExternalField:
    """Positive summable field amplitude * 2^-|x|_1, full on color 1, half elsewhere."""
    return ExternalField.from_function(q, decaying_values(q, amplitude, center), sites,
                                       summable_positive=True)


@dataclass(frozen=True)
class ModelTemplate:
    """Parameters minus beta and the graph, for scans over both."""

    q: int
    J: float = 1.0
    bc: str = "free"
    field_fn: Callable[[Vertex], Sequence[float]] | None = None
    mode: str = "rcm"
    name: str = ""

    def at(self, beta: float, graph: Graph) -> ModelParams:
        if self.field_fn is None:
            fld = ExternalField.zero(self.q)
        else:
            fld = ExternalField.from_function(self.q, self.field_fn, graph.all_vertices)
        return ModelParams(beta=beta, q=self.q, couplings=Couplings(uniform=self.J),
                           field=fld, bc=self.bc, mode=self.mode)


def load_field_document(doc: Mapping | str | Path) -> tuple[ExternalField, Couplings | None]:
    """Read a field/coupling document.

    Keys: ``q``; ``sites`` as a list of ``{"coords": [...], "h": [q reals]}``;
    optional ``couplings`` as ``{"uniform": J}`` or a list of
    ``{"edge": [[...], [...]], "J": J}``; optional ``padded`` and ``positive``.
    """
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text())
    if not isinstance(doc, Mapping):
        raise ValueError("field document must be a JSON object")
    if "q" not in doc:
        raise ValueError("field document: missing key 'q'")
    q = doc["q"]
    if not isinstance(q, int) or isinstance(q, bool):
        raise ValueError(f"field document: 'q' must be an integer, got {q!r}")
    values = {}
    for i, site in enumerate(doc.get("sites", [])):
        try:
            x = _key(site["coords"])
            h = site["h"]
        except (KeyError, TypeError):
            raise ValueError(f"field document: sites[{i}] needs 'coords' and 'h'") from None
        if x in values:
            raise ValueError(f"field document: sites[{i}] repeats site {x}")
        if len(h) != q:
            raise ValueError(f"field document: sites[{i}].h has {len(h)} entries, expected q={q}")
        values[x] = tuple(h)
    fld = ExternalField(q=q, values=values, padded=bool(doc.get("padded", False)),
                        summable_positive=bool(doc.get("positive", False)))

    couplings = None
    spec = doc.get("couplings")
    if isinstance(spec, Mapping):
        if "uniform" not in spec:
            raise ValueError("field document: couplings object needs 'uniform'")
        couplings = Couplings(uniform=float(spec["uniform"]))
    elif isinstance(spec, list):
        per = {}
        for i, item in enumerate(spec):
            try:
                a, b = item["edge"]
                per[frozenset((_key(a), _key(b)))] = float(item["J"])
            except (KeyError, TypeError, ValueError):
                raise ValueError(
                    f"field document: couplings[{i}] needs 'edge' (two vertices) and 'J'") from None
        couplings = Couplings.from_edges(per)
    elif spec is not None:
        raise ValueError("field document: 'couplings' must be an object or a list")
    return fld, couplings
