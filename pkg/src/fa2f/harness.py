"""Experiment runner: key=value configs, an operation registry, write-once outputs, SVG plots.

Config format (one ``key = value`` per line, ``#`` starts a comment)::

    schema = 1
    experiment = tau0-trend
    operation = kcm.tau0_trend
    seed = 12
    replicas = 1000
    param.qs = 0.3, 0.4, 0.5
    param.L = 64

Top-level keys are exactly those in ``TOP_KEYS``; parameters go under
``param.``.  Each operation declares its parameters with defaults, and
anything else is rejected.  A run writes ``<root>/<experiment>/`` with
``results.csv`` and ``config.txt`` (both byte-identical on rerun) plus
``record.json`` (build id and wall time).  The root comes from the
``output`` key, else ``$FA2F_OUTPUT_ROOT``, else ``./fa2f-output``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .errors import NumericGuardError

SCHEMA = 1
TOP_KEYS = ("schema", "experiment", "operation", "seed", "replicas", "output")
OUTPUT_ENV = "FA2F_OUTPUT_ROOT"

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    """Config does not validate (exit code 2)."""


# --------------------------------------------------------------------------
# Config
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str
    operation: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    replicas: int = 1
    output: str | None = None
    schema: int = SCHEMA

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        top: dict = {}
        params: dict = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("param."):
                name = key[len("param."):]
                if not name or name in params:
                    raise ConfigError(f"line {n}: bad or repeated parameter {key!r}")
                params[name] = value
            elif key in TOP_KEYS:
                if key in top:
                    raise ConfigError(f"line {n}: repeated key {key!r}")
                top[key] = value
            else:
                raise ConfigError(f"line {n}: unknown key {key!r}")
        for req in ("schema", "experiment", "operation"):
            if req not in top:
                raise ConfigError(f"missing required key {req!r}")
        try:
            schema = int(top["schema"])
            seed = int(top.get("seed", 0))
            replicas = int(top.get("replicas", 1))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if schema != SCHEMA:
            raise ConfigError(f"unsupported schema {schema} (this build reads schema {SCHEMA})")
        if replicas < 1 or seed < 0:
            raise ConfigError("replicas must be >= 1 and seed >= 0")
        exp = top["experiment"]
        if not exp or any(c in exp for c in "/\\") or exp.startswith("."):
            raise ConfigError(f"experiment id {exp!r} is not a plain name")
        cfg = cls(exp, top["operation"], params, seed, replicas, top.get("output"), schema)
        cfg.resolve()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def resolve(self) -> dict:
        """Validated parameters with defaults filled in (typed)."""
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation {self.operation!r}; known: {', '.join(sorted(OPERATIONS))}")
        op = OPERATIONS[self.operation]
        extra = set(self.params) - set(op.params)
        if extra:
            raise ConfigError(f"unknown parameter(s) for {self.operation}: {', '.join(sorted(extra))}")
        out = {}
        for name, (conv, default) in op.params.items():
            raw = self.params.get(name, default)
            try:
                out[name] = conv(raw) if isinstance(raw, str) else raw
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"param.{name}: {exc}") from None
        return out

    def to_text(self) -> str:
        """Resolved config; parsing it back reproduces the run."""
        lines = [
            f"schema = {self.schema}",
            f"experiment = {self.experiment}",
            f"operation = {self.operation}",
            f"seed = {self.seed}",
            f"replicas = {self.replicas}",
        ]
        op = OPERATIONS[self.operation]
        for name, value in self.resolve().items():
            lines.append(f"param.{name} = {op.render(name, value)}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(",", " ").split())


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in s.replace(",", " ").split())


def _bc(s: str) -> str:
    if s not in ("1", "0", "healthy", "infected"):
        raise ValueError(f"boundary must be 1/0/healthy/infected, got {s!r}")
    return {"healthy": "1", "infected": "0"}.get(s, s)


def _choice(*options):
    def conv(s):
        if s not in options:
            raise ValueError(f"expected one of {options}, got {s!r}")
        return s

    return conv


@dataclass
class Operation:
    fn: Callable
    columns: tuple
    params: dict  # name -> (converter, default as string)
    doc: str = ""

    def render(self, name, value) -> str:
        if isinstance(value, tuple):
            return ", ".join(_fmt(v) for v in value)
        return _fmt(value)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


OPERATIONS: dict[str, Operation] = {}


def operation(name, columns, doc="", **params):
    def deco(fn):
        OPERATIONS[name] = Operation(fn, tuple(columns), params, doc or (fn.__doc__ or "").strip())
        return fn

    return deco


def _rng(seed, *key):
    from .lattice import SeededRng

    return SeededRng(seed, *key)


@operation("bootstrap.constants", ("name", "value"))
def op_constants(p, seed, replicas):
    """Sharp-threshold constants."""
    from . import bootstrap

    for k, v in bootstrap.constants().items():
        yield k, v


@operation("bootstrap.rho", ("q", "half_width", "samples", "rho", "stderr", "tau0_lower"), q=(float, "0.35"), half_width=(int, "4"))
def op_rho(p, seed, replicas):
    """Monte Carlo estimate of the crossing probability and the derived tau0 lower bound."""
    from . import bootstrap
    from .lattice import Region

    h = p["half_width"]
    V = Region.box((-h, -h), (h, h))
    rho, se = bootstrap.estimate_rho(V, p["q"], replicas, _rng(seed))
    yield p["q"], h, replicas, rho, se, bootstrap.tau0_lower_bound(rho, V, p["q"])


@operation("bootstrap.bp_tau0", ("q", "L", "replica", "tau0_bp"), qs=(_floats, "0.3, 0.2, 0.15"), L=(int, "256"))
def op_bp_tau0(p, seed, replicas):
    """Synchronous 2-BP infection time of the origin, one row per replica."""
    from . import bootstrap
    from .lattice import Region

    for k, q in enumerate(p["qs"]):
        s = bootstrap.bp_tau0_samples(Region.torus(p["L"], p["L"]), q, replicas, _rng(seed, k))
        for i, t in enumerate(s.tau0_bp):
            yield q, p["L"], i, t


@operation("kcm.tau0_trend", ("q", "L", "replicas", "mean_tau0", "stderr", "log_mean_tau0", "inv_q", "hit_fraction"),
           qs=(_floats, "0.3, 0.4, 0.5"), L=(int, "64"), j=(int, "2"), t_max=(float, "1e7"))
def op_tau0_trend(p, seed, replicas):
    """Mean persistence time of the origin for FA-jf on an L x L torus, one row per q."""
    from . import kcm
    from .lattice import Region

    for k, q in enumerate(p["qs"]):
        params = kcm.SimParams(p["j"], q, Region.torus(p["L"], p["L"]), t_max=p["t_max"], rng=_rng(seed, k))
        s = kcm.fa_tau0_samples(params, replicas)
        t = np.minimum(s.tau0, p["t_max"])
        m = float(t.mean())
        yield q, p["L"], replicas, m, float(t.std(ddof=1) / math.sqrt(len(t))) if len(t) > 1 else 0.0, math.log(m), 1 / q, s.summary.hit_fraction


@operation("kcm.stationarity", ("q", "L", "occupancy", "occupancy_err", "pairs", "pairs_err", "passed"),
           q=(float, "0.3"), L=(int, "16"), t_burn=(float, "100"), t_obs=(float, "1e4"))
def op_stationarity(p, seed, replicas):
    """Time averages of occupancy and infected nearest-neighbour pairs from the stationary start."""
    from . import kcm
    from .lattice import Region

    rep = kcm.stationarity_check(kcm.SimParams(2, p["q"], Region.torus(p["L"], p["L"]), rng=_rng(seed)), p["t_burn"], p["t_obs"])
    yield p["q"], p["L"], rep.occupancy, rep.occupancy_err, rep.pairs, rep.pairs_err, rep.passed


@operation("droplet.traversable", ("a", "b", "q", "bc", "method", "log_prob"),
           a=(_ints, "1, 2, 4, 8"), b=(int, "2"), q=(float, "0.5"), bc=(_bc, "1"), method=(_choice("transfer_matrix", "recursion"), "transfer_matrix"))
def op_traversable(p, seed, replicas):
    """log T(a, b) for a symbolic boundary."""
    from . import droplet

    for a in p["a"]:
        yield a, p["b"], p["q"], p["bc"], p["method"], droplet.traversable_prob(a, p["b"], p["q"], p["bc"], p["method"])


@operation("droplet.r_study", ("q", "r", "lower", "integral", "upper", "pi2_9"), qs=(_floats, "0.5, 0.2, 0.1, 1e-3, 1e-6"))
def op_r_study(p, seed, replicas):
    """r(q) = -q' log(product lower bound) against the Riemann sums of g."""
    from . import bootstrap, droplet

    ref = bootstrap.constants()["pi^2/9"]
    for q in p["qs"]:
        lo, integral, up = droplet.riemann_sums(q)
        yield q, droplet.sg_prob_lower_bound(q, detail=True).r, lo, integral, up, ref


@operation("spectral.fa_trel", ("j", "w", "h", "geometry", "bc", "q", "states", "t_rel"),
           j=(int, "2"), w=(int, "2"), h=(int, "2"), q=(float, "0.3"), geometry=(_choice("torus", "box"), "torus"), bc=(_bc, "0"))
def op_fa_trel(p, seed, replicas):
    """Exact relaxation time of FA-jf on a small region (all states)."""
    from . import spectral
    from .lattice import ALL_HEALTHY, ALL_INFECTED, Region

    if p["geometry"] == "torus":
        R, bc = Region.torus(p["w"], p["h"]), None
    else:
        R, bc = Region.rectangle(p["w"], p["h"]), (ALL_HEALTHY if p["bc"] == "1" else ALL_INFECTED)
    ch = spectral.build_fa_chain(p["j"], R, bc, p["q"])
    yield p["j"], p["w"], p["h"], p["geometry"], p["bc"] if bc is not None else "", p["q"], ch.size, spectral.relaxation_time(ch)


@operation("spectral.gamma_toy", ("level", "q", "bc", "gamma"), levels=(_ints, "0, 1, 2, 3"), q=(float, "0.3"), bc=(_bc, "1"), scales=(_ints, "1, 2, 4"))
def op_gamma_toy(p, seed, replicas):
    """Best Poincare constant on the super-good event for toy scales."""
    from . import droplet, spectral
    from .lattice import ALL_HEALTHY, ALL_INFECTED, Region

    sc = droplet.ScaleSequence.custom(list(p["scales"]))
    bc = ALL_HEALTHY if p["bc"] == "1" else ALL_INFECTED
    for n in p["levels"]:
        R = Region.rectangle(*droplet.level_dims(n, sc))
        yield n, p["q"], p["bc"], spectral.gamma(R, bc, p["q"], sc, n)


@operation("cbsep.scaling", ("d", "n", "p", "method", "t_rel", "bound", "ratio"),
           d=(int, "2"), ns=(_ints, "4, 9, 16"), ps=(_floats, "0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625"))
def op_cbsep_scaling(p, seed, replicas):
    """Relaxation time of binary CBSEP on tori against T_rel ~ log(1/p)/p."""
    from . import cbsep

    for r in cbsep.scaling_study(p["d"], p["ns"], p["ps"], rng=_rng(seed)):
        yield r.d, r.n, r.p, r.method, r.t_rel, r.bound, r.ratio


@operation("cbsep.cover", ("L", "replicas", "mean_cover", "ratio_L2logL"), Ls=(_ints, "4, 8, 16"))
def op_cover(p, seed, replicas):
    """Mean cover time of the simple random walk on the L x L torus."""
    from . import cbsep

    for k, L in enumerate(p["Ls"]):
        m = cbsep.cover_time_estimate(cbsep.Graph.torus(L), replicas, _rng(seed, k))
        yield L, replicas, m, m / (L * L * math.log(L))


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


def build_id() -> str:
    """``git describe``-style id of the source tree, or the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class ResultRecord:
    experiment: str
    build: str
    wall_time: float
    params: dict
    columns: tuple
    rows: list

    def csv_bytes(self) -> bytes:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue().encode()


def output_root(cfg: ExperimentConfig | None = None) -> Path:
    if cfg is not None and cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUTPUT_ENV, "fa2f-output"))


def run(cfg: ExperimentConfig, stream=None) -> tuple[ResultRecord, Path]:
    """Execute a validated config and persist it; returns the record and its directory.

    Rows are streamed to ``stream`` as produced, but nothing touches the
    disk until the operation has finished, so a failed run leaves no files.
    """
    params = cfg.resolve()
    dest = output_root(cfg) / cfg.experiment
    if dest.exists():
        raise FileExistsError(f"{dest} exists; outputs are write-once per experiment id")
    op = OPERATIONS[cfg.operation]
    t0 = time.perf_counter()
    rows = []
    if stream is not None:
        print(",".join(op.columns), file=stream, flush=True)
    for row in op.fn(params, cfg.seed, cfg.replicas):
        row = tuple(row)
        if len(row) != len(op.columns):
            raise RuntimeError(f"{cfg.operation} produced a row of width {len(row)}")
        rows.append(row)
        if stream is not None:
            print(",".join(_fmt(v) for v in row), file=stream, flush=True)
    rec = ResultRecord(cfg.experiment, build_id(), time.perf_counter() - t0, params, op.columns, rows)
    _write_once(dest, rec, cfg)
    return rec, dest


def _write_once(dest: Path, rec: ResultRecord, cfg: ExperimentConfig) -> None:
    # the single writer for a run; the directory is created exclusively
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.mkdir()
    with open(dest / "results.csv", "xb") as fh:
        fh.write(rec.csv_bytes())
    with open(dest / "config.txt", "x") as fh:
        fh.write(cfg.to_text())
    meta = {
        "experiment": rec.experiment,
        "build": rec.build,
        "wall_time_s": round(rec.wall_time, 6),
        "operation": cfg.operation,
        "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in rec.params.items()},
        "rows": len(rec.rows),
    }
    with open(dest / "record.json", "x") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, NumericGuardError) or isinstance(exc, OverflowError):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, FileExistsError, ValueError)):
        return EXIT_CONFIG
    return EXIT_FAIL


# --------------------------------------------------------------------------
# Plotting
# --------------------------------------------------------------------------

PLOT_PRESETS = {
    # log mean tau0 against 1/q
    "tau0": dict(x="inv_q", y="log_mean_tau0", xlabel="1/q", ylabel="log mean tau0", ref_y=None),
    # r(q) against its small-q limit pi^2/9
    "rq": dict(x="q", y="r", xlabel="q", ylabel="r(q)", logx=True, ref_y="pi^2/9"),
}


@dataclass
class PlotSpec:
    x: str
    y: str
    xlabel: str | None = None
    ylabel: str | None = None
    title: str | None = None
    logx: bool = False
    logy: bool = False
    ref_y: float | str | None = None
    line: bool = True

    def ref_value(self) -> float | None:
        if self.ref_y is None:
            return None
        if isinstance(self.ref_y, str):
            from . import bootstrap

            consts = bootstrap.constants()
            return consts[self.ref_y] if self.ref_y in consts else float(self.ref_y)
        return float(self.ref_y)


def read_columns(paths) -> dict:
    cols: dict = {}
    for path in paths:
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                for k, v in rec.items():
                    cols.setdefault(k, []).append(v)
    return cols


def plot(paths, spec: PlotSpec, out) -> Path:
    """Static SVG scatter/line plot of two CSV columns; identical inputs give identical bytes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = list(paths)
    if not paths:
        raise ValueError("no input files")
    cols = read_columns(paths)
    if not cols or not cols.get(spec.x):
        raise ValueError("input has no rows")
    for c in (spec.x, spec.y):
        if c not in cols:
            raise ValueError(f"column {c!r} not found; have {', '.join(cols)}")
    x = np.array([float(v) for v in cols[spec.x]])
    y = np.array([float(v) for v in cols[spec.y]])
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]

    with matplotlib.rc_context({"svg.hashsalt": "fa2f", "svg.fonttype": "none", "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.plot(x, y, "o-" if spec.line and len(x) > 1 else "o", color="C0", ms=5, label=spec.y)
        ref = spec.ref_value()
        if ref is not None:
            ax.axhline(ref, color="0.3", ls="--", lw=1, label=f"reference {ref:.11g}")
        if spec.logx:
            ax.set_xscale("log")
        if spec.logy:
            ax.set_yscale("log")
        ax.grid(True, which="major", color="0.85", lw=0.6)
        ax.set_xlabel(spec.xlabel or spec.x)
        ax.set_ylabel(spec.ylabel or spec.y)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(loc="best", fontsize=8, frameon=False)
        fig.tight_layout()
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    with open(out, "xb") as fh:
        fh.write(buf.getvalue())
    return out
