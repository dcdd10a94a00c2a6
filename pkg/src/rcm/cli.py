"""Command-line entry point: ``rcm {enumerate,sample,verify,scan}``.

Configuration comes from an optional JSON file (``--config``) overlaid by
flags; flags win. The seed is taken from ``--seed``, then the file, then the
``RCM_SEED`` environment variable, then 0.

Exit status: 0 success, 1 a verification check failed (or an unexpected
runtime error), 2 invalid input. Errors are printed to stderr as a JSON
object.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, events
from .field import (
    Couplings,
    ExternalField,
    IncompatibleFieldError,
    ModelParams,
    ModelTemplate,
    decaying_values,
    load_field_document,
    require_compatible,
)
from .lattice import Graph, build_box, build_graph
from .measure import EnumerationTooLarge, enumerate_measure
from .sampler import RNG_NAME, ChainConfig, run_chains
from .verify import run_suite

SUBCOMMANDS = ("enumerate", "sample", "verify", "scan")

DEFAULTS: dict[str, Any] = {
    "graph": {"d": 2, "radius": 1, "center": None, "vertices": None},
    "model": {"beta": 0.5, "q": 2, "bc": "free", "mode": "rcm", "J": 1.0},
    "field": None,
    "chain": {"burn_in": 1000, "samples": 10000, "thin": 1, "chains": 1,
              "scan": "sequential", "debug_check_every": 0},
    "scan": {"grid": {"start": 0.5, "stop": 0.9, "num": 9}, "sizes": [4, 6, 8],
             "batches": 50, "n_boot": 200},
    "verify": {"fields": 5},
    "enumerate": {"cap": 22},
    "seed": None,
    "out": "rcm_out",
}


class ConfigError(ValueError):
    def __init__(self, kind: str, message: str, path: str = "", line: int | None = None,
                 column: int | None = None):
        super().__init__(message)
        self.kind, self.path, self.line, self.column = kind, path, line, column

    def to_dict(self) -> dict:
        d = {"error": self.kind, "message": str(self)}
        if self.path:
            d["path"] = self.path
        if self.line is not None:
            d["line"], d["column"] = self.line, self.column
        return d


@dataclass
class RunConfig:
    subcommand: str
    graph: dict
    model: dict
    field: Any
    chain: dict
    scan: dict
    verify: dict
    enumerate: dict
    seed: int
    out: Path
    params: ModelParams | None = None
    box: Graph | None = None
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, "graph": self.graph, "model": self.model,
                "field": self.field, "chain": self.chain, "scan": self.scan,
                "verify": self.verify, "enumerate": self.enumerate, "seed": self.seed,
                "out": str(self.out)}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError("unknown_key", f"unknown key {path + k!r}", path + k)
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("field", "grid"):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def _num(doc, path, kind=float, lo=None, lo_open=False):
    v = doc
    for p in path.split("."):
        v = v[p]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and v != int(v)):
        raise ConfigError("type", f"{path} must be {'an integer' if kind is int else 'a number'}"
                          f", got {v!r}", path)
    v = kind(v)
    if not math.isfinite(v):
        raise ConfigError("value", f"{path} must be finite", path)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError("value", f"{path} must be {'>' if lo_open else '>='} {lo}, got {v}",
                          path)
    return v


def _load_document(doc) -> dict:
    if doc is None:
        return {}
    if isinstance(doc, dict):
        return doc
    text = Path(doc).read_text() if not str(doc).lstrip().startswith("{") else str(doc)
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("malformed", f"invalid JSON: {e.msg}", line=e.lineno,
                          column=e.colno) from None
    if not isinstance(parsed, dict):
        raise ConfigError("malformed", "config document must be a JSON object")
    return parsed


def _build_field(spec, q: int, graph: Graph, base_dir: Path | None):
    """Returns (field, couplings-or-None)."""
    if spec is None:
        return ExternalField.zero(q), None
    if isinstance(spec, str):
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            spec = json.loads(path.read_text())
        except OSError as e:
            raise ConfigError("value", f"cannot read field file {spec}: {e.strerror}", "field")
        except json.JSONDecodeError as e:
            raise ConfigError("malformed", f"invalid JSON in field file: {e.msg}", "field",
                              e.lineno, e.colno) from None
    if not isinstance(spec, dict):
        raise ConfigError("type", "field must be null, a path, or an object", "field")
    if spec.get("kind") == "decaying":
        amp = _num(spec, "amplitude", lo=0, lo_open=True) if "amplitude" in spec else 0.1
        fn = decaying_values(q, amp, graph.center)
        return ExternalField.from_function(q, fn, graph.all_vertices, summable_positive=True), None
    try:
        fld, J = load_field_document(spec)
    except ValueError as e:
        raise ConfigError("field", str(e), "field") from None
    if fld.q != q:
        raise ConfigError("field", f"field has q={fld.q} but model.q={q}", "field.q")
    stray = [x for x in fld.sites if x not in graph]
    if stray:
        raise ConfigError("missing_site", f"field site {stray[0]} is not in V or its boundary",
                          "field.sites")
    if not fld.padded:
        missing = [x for x in graph.all_vertices if x not in fld.values]
        if missing:
            raise ConfigError("missing_site", f"field has no value at site {missing[0]} "
                              "(set \"padded\": true to read missing sites as zero)",
                              "field.sites")
    return fld, J


def parse_config(document, overrides: dict | None = None, subcommand: str = "enumerate",
                 env: dict | None = None) -> RunConfig:
    """Validate a config document (dict, JSON text or path) plus flag overrides."""
    env = os.environ if env is None else env
    base_dir = None
    if isinstance(document, (str, Path)) and not str(document).lstrip().startswith("{"):
        base_dir = Path(document).resolve().parent
    raw = _load_document(document)
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = _merge(cfg, overrides)

    g = cfg["graph"]
    d = _num(cfg, "graph.d", int, lo=2)
    radius = _num(cfg, "graph.radius", int, lo=0)
    center = g.get("center")
    if center is not None and (not isinstance(center, list) or len(center) != d
                               or not all(isinstance(c, int) for c in center)):
        raise ConfigError("value", f"graph.center must be a list of {d} integers", "graph.center")
    verts = g.get("vertices")
    if verts is not None:
        # explicit vertex set overrides the box
        if not (isinstance(verts, list) and verts and all(
                isinstance(v, list) and len(v) == d and all(isinstance(c, int) for c in v)
                for v in verts)):
            raise ConfigError("value", f"graph.vertices must be a nonempty list of {d}-integer "
                              "lists", "graph.vertices")
        box = build_graph(verts, d=d)
    else:
        box = build_box(d, radius, center)

    m = cfg["model"]
    beta = _num(cfg, "model.beta", lo=0)
    q = _num(cfg, "model.q", int, lo=1)
    J = _num(cfg, "model.J", lo=0)
    if m["bc"] not in ("free", "maxwired"):
        raise ConfigError("value", f"model.bc must be 'free' or 'maxwired', got {m['bc']!r}",
                          "model.bc")
    if m["mode"] not in ("rcm", "bernoulli"):
        raise ConfigError("value", f"model.mode must be 'rcm' or 'bernoulli', got {m['mode']!r}",
                          "model.mode")
    if q < 2 and m["mode"] != "bernoulli":
        raise ConfigError("q_range", "q < 2 is only allowed with model.mode = 'bernoulli'",
                          "model.q")
    fld, Jdoc = _build_field(cfg["field"], q, box, base_dir)
    if m["bc"] == "maxwired":
        try:
            require_compatible(fld, box.all_vertices)
        except IncompatibleFieldError as e:
            raise ConfigError("incompatible_field", str(e), "field") from None
    params = ModelParams(beta=beta, q=q, couplings=Jdoc or Couplings(uniform=J), field=fld,
                         bc=m["bc"], mode=m["mode"])

    c = cfg["chain"]
    for k in ("burn_in", "samples", "debug_check_every"):
        _num(cfg, f"chain.{k}", int, lo=0)
    _num(cfg, "chain.thin", int, lo=1)
    _num(cfg, "chain.chains", int, lo=1)
    if c["scan"] not in ("sequential", "random"):
        raise ConfigError("value", "chain.scan must be 'sequential' or 'random'", "chain.scan")

    s = cfg["scan"]
    grid = s["grid"]
    if isinstance(grid, dict):
        for k in ("start", "stop"):
            _num(s, f"grid.{k}", lo=0)
        _num(s, "grid.num", int, lo=2)
    elif not (isinstance(grid, list) and len(grid) >= 2
              and all(isinstance(b, (int, float)) for b in grid)
              and all(b2 > b1 for b1, b2 in zip(grid, grid[1:]))):
        raise ConfigError("value", "scan.grid must be {start, stop, num} or an increasing list",
                          "scan.grid")
    sizes = s["sizes"]
    if not (isinstance(sizes, list) and len(sizes) >= 2 and all(isinstance(n, int) and n >= 1
                                                              for n in sizes)):
        raise ConfigError("value", "scan.sizes must list at least 2 positive integers",
                          "scan.sizes")
    _num(cfg, "scan.batches", int, lo=2)
    _num(cfg, "scan.n_boot", int, lo=1)
    _num(cfg, "verify.fields", int, lo=1)
    _num(cfg, "enumerate.cap", int, lo=0)

    seed = cfg["seed"]
    if seed is None:
        env_seed = env.get("RCM_SEED")
        if env_seed not in (None, ""):
            try:
                seed = int(env_seed)
            except ValueError:
                raise ConfigError("value", f"RCM_SEED must be an integer, got {env_seed!r}",
                                  "RCM_SEED") from None
        else:
            seed = 0
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("value", f"seed must be a nonnegative integer, got {seed!r}", "seed")

    return RunConfig(subcommand=subcommand, graph={"d": d, "radius": radius, "center": center,
                                                   "vertices": verts},
                     model=dict(m), field=cfg["field"], chain=dict(c), scan=dict(s),
                     verify=dict(cfg["verify"]), enumerate=dict(cfg["enumerate"]), seed=seed,
                     out=Path(cfg["out"]), params=params, box=box, raw=raw)


# subcommands

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _sample_observables(graph: Graph):
    c = graph.index(graph.center if graph.center is not None else graph.vertices[0])
    obs = [("open_edges", events.open_count(graph.n_edges)),
           ("cluster_size_center", events.cluster_size(c))]
    first = graph.coords[: graph.n_interior, 0]
    obs.append(("left_right_crossing", events.crossing(np.flatnonzero(first == first.min()),
                                                       np.flatnonzero(first == first.max()))))
    if graph.radius:
        from .observables import _annulus_targets
        obs.append((f"reach_sphere_{graph.radius}",
                    events.reaches(c, _annulus_targets(graph, graph.center, graph.radius))))
    return obs


def run_enumerate(cfg: RunConfig) -> tuple[int, list[str]]:
    try:
        table = enumerate_measure(cfg.params, cfg.box, cap=cfg.enumerate["cap"])
    except EnumerationTooLarge as e:
        raise ConfigError("too_large", str(e), "graph.radius") from None
    table.to_csv(cfg.out / "table.csv")
    return 0, ["table.csv"]


def run_sample(cfg: RunConfig) -> tuple[int, list[str]]:
    c = cfg.chain
    chain = ChainConfig(cfg.params, burn_in=c["burn_in"], samples=c["samples"], thin=c["thin"],
                        seed=cfg.seed, scan=c["scan"], debug_check_every=c["debug_check_every"])
    pooled, per = run_chains(chain, cfg.box, _sample_observables(cfg.box), n_chains=c["chains"])
    doc = per[0].to_dict() if len(per) == 1 else pooled.to_dict()
    if len(per) > 1:
        doc["chains"] = [s.to_dict() for s in per]
    _write_json(cfg.out / "chain.json", doc)
    return 0, ["chain.json"]


def run_verify(cfg: RunConfig) -> tuple[int, list[str]]:
    qs = (2,) if cfg.params.q <= 2 else (2, cfg.params.q)
    reports = run_suite(seed=cfg.seed, n_fields=cfg.verify["fields"], qs=qs)
    _write_json(cfg.out / "verify.json", [r.to_dict() for r in reports])
    return (0 if all(r.passed for r in reports) else 1), ["verify.json"]


def run_scan(cfg: RunConfig) -> tuple[int, list[str]]:
    from .observables import ScanSettings, scan_beta_c
    s, c, p = cfg.scan, cfg.chain, cfg.params
    grid = s["grid"]
    betas = (np.linspace(grid["start"], grid["stop"], grid["num"]) if isinstance(grid, dict)
             else np.asarray(grid, dtype=float))
    fld = cfg.field
    field_fn = None
    if isinstance(fld, dict) and fld.get("kind") == "decaying":
        field_fn = decaying_values(p.q, fld.get("amplitude", 0.1))
    elif fld is not None:
        raise ConfigError("value", "scan supports a zero or 'decaying' field only", "field")
    tpl = ModelTemplate(q=p.q, J=float(cfg.model["J"]), bc=p.bc, field_fn=field_fn, mode=p.mode)
    st = ScanSettings(burn_in=c["burn_in"], samples=c["samples"], thin=c["thin"], seed=cfg.seed,
                      batches=s["batches"], n_boot=s["n_boot"])
    res = scan_beta_c(betas, tpl, s["sizes"], st, d=cfg.graph["d"])
    res.to_csv(cfg.out / "scan.csv")
    res.to_json(cfg.out / "verdict.json")
    return 0, ["scan.csv", "verdict.json"]


RUNNERS = {"enumerate": run_enumerate, "sample": run_sample, "verify": run_verify,
           "scan": run_scan}


def dispatch(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, outputs = RUNNERS[cfg.subcommand](cfg)
    manifest = {"config": cfg.echo(), "seed": cfg.seed, "rng": RNG_NAME, "version": __version__,
                "outputs": outputs, "status": status,
                "timing": {"wall_seconds": round(time.perf_counter() - t0, 6)}}
    _write_json(cfg.out / "run.json", manifest)
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and graph (flags override --config values)")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--d", type=int, help="lattice dimension (>= 2)")
    g.add_argument("--radius", type=int, help="box radius; V = [-r, r]^d")
    g.add_argument("--beta", type=float)
    g.add_argument("--q", type=int)
    g.add_argument("--J", type=float, help="uniform coupling")
    g.add_argument("--bc", choices=["free", "maxwired"])
    g.add_argument("--mode", choices=["rcm", "bernoulli"])
    g.add_argument("--field", help="field document path")
    g.add_argument("--seed", type=int, help="master seed (precedence: flag, config, RCM_SEED, 0)")
    g.add_argument("--out", help="output directory")
    ch = common.add_argument_group("chain")
    ch.add_argument("--burn-in", dest="burn_in", type=int)
    ch.add_argument("--samples", type=int)
    ch.add_argument("--thin", type=int)
    ch.add_argument("--chains", type=int)
    ch.add_argument("--scan-order", dest="scan_order", choices=["sequential", "random"])

    ap = argparse.ArgumentParser(prog="rcm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rcm {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    e = sub.add_parser("enumerate", parents=[common], help="exact table on a small box")
    e.add_argument("--cap", type=int, help="maximum number of interior edges")
    sub.add_parser("sample", parents=[common], help="heat-bath chain summaries")
    v = sub.add_parser("verify", parents=[common], help="exhaustive inequality checks")
    v.add_argument("--fields", type=int, help="random fields per graph and q")
    s = sub.add_parser("scan", parents=[common], help="beta_c crossing scan")
    s.add_argument("--grid", type=float, nargs="+", metavar="BETA",
                   help="increasing beta values, or START STOP NUM with --linspace")
    s.add_argument("--linspace", action="store_true", help="read --grid as START STOP NUM")
    s.add_argument("--sizes", type=int, nargs="+")
    s.add_argument("--boot", type=int, dest="n_boot")
    return ap


def _overrides(ns: argparse.Namespace) -> dict:
    o: dict[str, Any] = {}

    def put(section, key, val):
        if val is not None:
            if section is None:
                o[key] = val
            else:
                o.setdefault(section, {})[key] = val

    put("graph", "d", ns.d)
    put("graph", "radius", ns.radius)
    for k in ("beta", "q", "J", "bc", "mode"):
        put("model", k, getattr(ns, k))
    put(None, "field", ns.field)
    put(None, "seed", ns.seed)
    put(None, "out", ns.out)
    for k in ("burn_in", "samples", "thin", "chains"):
        put("chain", k, getattr(ns, k))
    put("chain", "scan", ns.scan_order)
    put("enumerate", "cap", getattr(ns, "cap", None))
    put("verify", "fields", getattr(ns, "fields", None))
    if getattr(ns, "grid", None) is not None:
        if ns.linspace:
            if len(ns.grid) != 3:
                raise ConfigError("value", "--linspace needs START STOP NUM", "scan.grid")
            put("scan", "grid", {"start": ns.grid[0], "stop": ns.grid[1],
                                 "num": int(ns.grid[2])})
        else:
            put("scan", "grid", list(ns.grid))
    put("scan", "sizes", getattr(ns, "sizes", None))
    put("scan", "n_boot", getattr(ns, "n_boot", None))
    return o


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = parse_config(ns.config, _overrides(ns), ns.subcommand)
        return dispatch(cfg)
    except ConfigError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 2
    except OSError as e:
        print(json.dumps({"error": "io", "message": str(e)}), file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(json.dumps({"error": "invalid_input", "message": str(e)}), file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - reported as JSON, not a traceback
        print(json.dumps({"error": "runtime", "type": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
