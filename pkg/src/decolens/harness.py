"""Config parsing, experiment execution and artifact emission."""

from __future__ import annotations

import ast
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .decoherence import DELOCALIZING, LOCALIZING, NEUTRAL, PhaseMode, run_ensemble
from .errors import ConfigError
from .grid import GridSpec
from .observables import (
    LeftFraction,
    Transmitted,
    aggregate,
    center_on_maximum,
    classify_barrier,
    collapse_state,
    collapse_time,
)
from .presets import PRESETS, build_geometry, build_setup, lookup, resolve
from .two_particle import (
    build_initial,
    discretize,
    lensing_analysis,
    scatter_zeno,
    schmidt_gram,
    schmidt_numeric,
)

CONTROL_KEYS = ("preset", "seed", "runs", "out_dir", "format", "workers")
PARAM_KEYS = tuple(
    sorted({k for p in PRESETS.values() for k in p.defaults} | {"beta", "d_sep", "barrier_height", "barrier_width"})
)
STRING_KEYS = ("phase_mode", "form")
FORMATS = ("csv", "json")


@dataclass
class ExperimentConfig:
    preset: str = "fig1"
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    runs: int | None = None
    out_dir: str = "out"
    format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        try:
            self.preset = lookup(self.preset).name
        except KeyError:
            raise ConfigError(f"unknown preset {self.preset}", key="preset") from None
        if self.runs is not None and self.runs < 1:
            raise ConfigError("runs must be at least 1", key="runs")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be csv or json, got {self.format}", key="format")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key="seed")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1", key="workers")
        defaults = lookup(self.preset).defaults
        for key in self.overrides:
            if key not in defaults:
                raise ConfigError(f"key {key} does not apply to preset {self.preset}", key=key)

    @property
    def n_runs(self) -> int:
        return self.runs if self.runs is not None else lookup(self.preset).runs

    @property
    def params(self) -> dict:
        return resolve({**lookup(self.preset).defaults, **self.overrides})


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def _number(text: str) -> float:
    """Evaluate an arithmetic expression of numbers and ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(text)

    return float(ev(ast.parse(text.strip(), mode="eval")))


def parse_config(text) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    control, overrides, lines = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONTROL_KEYS and key not in PARAM_KEYS:
            raise ConfigError(f"unknown key {key}", key=key, line=lineno)
        if key in control or key in overrides:
            raise ConfigError(f"duplicate key {key}", key=key, line=lineno)
        lines[key] = lineno
        try:
            if key in ("preset", "out_dir", "format"):
                control[key] = value
            elif key in ("seed", "runs", "workers"):
                control[key] = int(value)
            elif key == "phase_mode":
                overrides[key] = PhaseMode.parse(value)
            elif key == "form":
                if value not in ("full", "linearized"):
                    raise ValueError(value)
                overrides[key] = value
            else:
                overrides[key] = _number(value)
        except (ValueError, SyntaxError):
            raise ConfigError(f"invalid value for {key}: {value!r}", key=key, line=lineno) from None
    if "n" in overrides:
        overrides["n"] = int(overrides["n"])
    if "grid_n" in overrides:
        overrides["grid_n"] = int(overrides["grid_n"])
    try:
        return ExperimentConfig(overrides=overrides, **control)
    except ConfigError as err:
        raise ConfigError(str(err), key=err.key, line=lines.get(err.key)) from None


# output


@dataclass
class ArtifactManifest:
    out_dir: Path
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"files": [{"path": p, "sha256": h} for p, h in self.files], "summary": self.summary}


class _Writer:
    def __init__(self, out_dir: Path, fmt: str):
        self.out_dir = out_dir
        self.fmt = fmt
        self.files = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, columns: dict) -> None:
        name = f"{stem}.{self.fmt}"
        if self.fmt == "csv":
            body = _csv(columns)
        else:
            body = json.dumps({k: _jsonable(v) for k, v in columns.items()}, indent=1) + "\n"
        self._emit(name, body)

    def _emit(self, name: str, body: str) -> None:
        path = self.out_dir / name
        try:
            path.write_text(body, encoding="utf-8")
        except OSError as err:
            raise OSError(f"cannot write {path}: {err.strerror}") from err
        self.files.append((name, hashlib.sha256(body.encode("utf-8")).hexdigest()))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _csv(columns: dict) -> str:
    names = list(columns)
    cols = [list(columns[k]) for k in names]
    rows = [",".join(names)]
    for i in range(len(cols[0]) if cols else 0):
        rows.append(",".join(_fmt(c[i]) for c in cols))
    return "\n".join(rows) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _events(w: _Writer, stem: str, run) -> None:
    ev = run.events
    w.table(
        stem,
        {
            "t": [e.t for e in ev],
            "x0": [e.x0 for e in ev],
            "kappa": [e.kappa for e in ev],
            "phi": [e.phi for e in ev],
        },
    )


def _series(w: _Writer, stem: str, run) -> None:
    cols = {"time": run.times, "mean_x": run.mean_x, "var_x": run.var_x, "max_pos": run.max_pos}
    cols.update(run.probes)
    w.table(stem, cols)


def _coherent(setup, **kwargs):
    d = replace(setup.decoherence, gamma=0.0)
    return run_ensemble(setup.psi0, setup.potential, setup.step, d, setup.duration, 0, 1, **kwargs)[0]


def _ensemble(setup, cfg, mode=None, **kwargs):
    d = setup.decoherence if mode is None else replace(setup.decoherence, phase_mode=mode)
    return run_ensemble(
        setup.psi0, setup.potential, setup.step, d, setup.duration, cfg.seed, cfg.n_runs, cfg.workers, **kwargs
    )


def _run_free(cfg, setup, w, summary):
    x = setup.grid.x
    coh = _coherent(setup)
    w.table("coherent_density", {"x": x, "density": coh.final_density})
    runs = _ensemble(setup, cfg)
    for r in runs:
        w.table(f"run_{r.run_index:02d}_density", {"x": x, "density": r.final_density})
        _series(w, f"run_{r.run_index:02d}_series", r)
        _events(w, f"run_{r.run_index:02d}_events", r)
    ens = aggregate(runs, cfg.seed)
    w.table("ensemble_density", {"x": x, "density": ens.mean_density})
    w.table("centered_density", {"x": x, "density": ens.centered_density})
    summary.update(
        coherent_std=coh.final_std,
        run_std=[r.final_std for r in runs],
        edge_max=max([coh.edge_max] + [r.edge_max for r in runs]),
    )


def _run_tracks(cfg, setup, w, summary):
    coh = _coherent(setup)
    p = setup.params
    for r in _ensemble(setup, cfg):
        w.table(
            f"run_{r.run_index:02d}_tracks",
            {
                "time": r.times,
                "max_pos": r.max_pos,
                "mean_x": r.mean_x,
                "var_x": r.var_x,
                "coherent_max_pos": coh.max_pos,
                "coherent_mean_x": coh.mean_x,
                "coherent_var_x": coh.var_x,
                "ballistic_k0_t": p["x_ini"] + p["k0"] * r.times,
                "ballistic_2kappa0_t": p["x_ini"] + 2 * p["kappa0"] * r.times,
            },
        )
        _events(w, f"run_{r.run_index:02d}_events", r)
    summary.update(coherent_std=coh.final_std)


def _snapshots(w, stem, run, grid):
    cols = {"x": grid.x}
    for t, rho in run.snapshots:
        cols[f"t={t:.6g}"] = rho
    w.table(stem, cols)


def _run_double(cfg, setup, w, summary):
    p = setup.params
    probe = {"p_left": LeftFraction(setup.split0, p["k0"])}
    every = setup.duration / 8
    coh = _coherent(setup, probes=probe, snapshot_every=every)
    _snapshots(w, "coherent_snapshots", coh, setup.grid)
    runs = _ensemble(setup, cfg, probes=probe, snapshot_every=every)
    rows = {"run": [], "p_left": [], "side": [], "collapse_time": []}
    for r in runs:
        tag = f"run_{r.run_index:02d}"
        _series(w, f"{tag}_series", r)
        _events(w, f"{tag}_events", r)
        _snapshots(w, f"{tag}_snapshots", r, setup.grid)
        p_left, side = collapse_state(r.final_density, setup.grid, probe["p_left"].split0 + p["k0"] * r.times[-1], setup.theta)
        rows["run"].append(r.run_index)
        rows["p_left"].append(p_left)
        rows["side"].append(side.value)
        rows["collapse_time"].append(collapse_time(r.times, r.probes["p_left"], setup.theta))
    w.table("collapse", rows)
    summary.update(sides=rows["side"], collapse_time=rows["collapse_time"], edge_max=max(r.edge_max for r in runs))


def _run_barrier(cfg, setup, w, summary):
    x = setup.grid.x
    edge = setup.potential.right_edge
    probe = {"transmitted": Transmitted(edge)}
    w.table("potential", {"x": x, "V": setup.potential.values})
    coh = _coherent(setup, probes=probe)
    w.table("coherent_density", {"x": x, "density": coh.final_density})
    t_coh, out_coh = classify_barrier(coh.final_density, setup.grid, edge, setup.theta)
    runs = _ensemble(setup, cfg, probes=probe)
    rows = {"run": [], "transmitted": [], "outcome": []}
    for r in runs:
        tag = f"run_{r.run_index:02d}"
        w.table(f"{tag}_density", {"x": x, "density": r.final_density})
        _series(w, f"{tag}_series", r)
        _events(w, f"{tag}_events", r)
        t, out = classify_barrier(r.final_density, setup.grid, edge, setup.theta)
        rows["run"].append(r.run_index)
        rows["transmitted"].append(t)
        rows["outcome"].append(out.value)
    w.table("barrier", rows)
    summary.update(coherent_T=t_coh, coherent_outcome=out_coh.value, outcomes=rows["outcome"])


def _run_modes(cfg, setup, w, summary, per_run: bool):
    x = setup.grid.x
    coh = _coherent(setup)
    w.table("coherent_density", {"x": x, "density": coh.final_density})
    if cfg.preset == "fig7":
        w.table("coherent_centered_density", {"x": x, "density": center_on_maximum(coh.final_density)})
    chosen = cfg.overrides.get("phase_mode")
    modes = [chosen] if chosen is not None else [LOCALIZING, DELOCALIZING, NEUTRAL]
    widths = {"mode": [], "run": [], "final_std": []}
    for mode in modes:
        name = str(mode)
        runs = _ensemble(setup, cfg, mode)
        ens = aggregate(runs, cfg.seed)
        w.table(f"{name}_ensemble_density", {"x": x, "density": ens.mean_density})
        if per_run:
            for r in runs:
                w.table(f"{name}_run_{r.run_index:02d}_density", {"x": x, "density": r.final_density})
                _events(w, f"{name}_run_{r.run_index:02d}_events", r)
        else:
            w.table(f"{name}_centered_density", {"x": x, "density": ens.centered_density})
        for r in runs:
            widths["mode"].append(name)
            widths["run"].append(r.run_index)
            widths["final_std"].append(r.final_std)
    w.table("widths", widths)
    summary.update(coherent_std=coh.final_std)


def _pair_grid(geom, n: int) -> GridSpec:
    half = geom.d + abs(geom.s) + abs(geom.s_t) + 6 * geom.sigma
    return GridSpec(n, 2 * half / (n - 1), -half)


def _density_matrix(w, stem, m, grid):
    cols = {"x": grid.x}
    rho = np.abs(m) ** 2
    for j in range(grid.n):
        cols[f"y{j:03d}"] = rho[:, j]
    w.table(stem, cols)


def _schmidt_rows(rows, case, path, dec):
    for i, wgt in enumerate(dec.weights[: len(dec.widths_left)]):
        rows["case"].append(case)
        rows["path"].append(path)
        rows["component"].append(i)
        rows["weight"].append(wgt)
        rows["width_left"].append(dec.widths_left[i])
        rows["width_right"].append(dec.widths_right[i])


def _run_zeno(cfg, p, w, summary):
    geom = build_geometry(p)
    grid = _pair_grid(geom, p["grid_n"])
    rows = {k: [] for k in ("case", "path", "component", "weight", "width_left", "width_right")}
    for case, phase in (("phase_1", 1.0), ("phase_i", 1j)):
        state = scatter_zeno(build_initial(geom, phase))
        m = discretize(state, grid)
        exact = schmidt_gram(state, grid)
        numeric = schmidt_numeric(m, grid)
        _schmidt_rows(rows, case, "analytic", exact)
        _schmidt_rows(rows, case, "numeric", numeric)
        w.table(
            f"{case}_schmidt",
            {
                "x": grid.x,
                **{f"left_{i}_density": np.abs(exact.left_fns[i]) ** 2 for i in range(len(exact.weights))},
                **{f"right_{i}_density": np.abs(exact.right_fns[i]) ** 2 for i in range(len(exact.weights))},
            },
        )
        coarse = _pair_grid(geom, 128)
        _density_matrix(w, f"{case}_density", discretize(state, coarse), coarse)
        summary[case] = [float(v) for v in exact.weights]
    w.table("schmidt", rows)


def _run_lensing(cfg, p, w, summary):
    base = build_geometry(p)
    variants = {
        "equal": base,
        "mass_ratio_100": replace(base, mass_b=100 * base.mass_a),
        "attractive": replace(base, kappa=-base.kappa),
    }
    rows = {
        k: []
        for k in (
            "variant",
            "t_i",
            "weight_0",
            "weight_1",
            "width_left_0",
            "width_left_1",
            "width_right_0",
            "width_right_1",
            "initial_width_left",
            "initial_width_right",
            "displacement_a",
            "displacement_b",
            "narrowed",
        )
    }
    for name, geom in variants.items():
        t_i, rep = lensing_analysis(geom)
        s = rep.schmidt
        vals = (
            name,
            t_i,
            s.weights[0],
            s.weights[1],
            s.widths_left[0],
            s.widths_left[1],
            s.widths_right[0],
            s.widths_right[1],
            rep.initial_width_a,
            rep.initial_width_b,
            rep.displacement_a,
            rep.displacement_b,
            int(rep.narrowed),
        )
        for key, v in zip(rows, vals):
            rows[key].append(v)
        half = max(abs(t.rA) + 5 * t.sigma for t in rep.state.terms) + max(abs(t.rB) + 5 * t.width_b for t in rep.state.terms)
        grid = GridSpec(128, 2 * half / 127, -half)
        m = rep.state(grid.x, grid.x)
        _density_matrix(w, f"{name}_density", m / math.sqrt(np.sum(np.abs(m) ** 2) * grid.dx**2), grid)
        summary[name] = {"t_i": t_i, "narrowed": rep.narrowed}
    w.table("lensing", rows)


def run_experiment(cfg: ExperimentConfig) -> ArtifactManifest:
    """Run a preset and write its outputs plus ``manifest.json`` to ``cfg.out_dir``."""
    preset = lookup(cfg.preset)
    out = Path(cfg.out_dir)
    w = _Writer(out, cfg.format)
    summary = {"preset": preset.name, "seed": cfg.seed, "runs": cfg.n_runs}
    params = cfg.params
    if preset.kind == "pair":
        (_run_zeno if preset.name == "zeno" else _run_lensing)(cfg, params, w, summary)
    else:
        setup = build_setup(params, preset.kind)
        if preset.name == "fig2":
            _run_tracks(cfg, setup, w, summary)
        elif preset.kind == "double" or (preset.kind == "custom" and setup.split0 is not None):
            _run_double(cfg, setup, w, summary)
        elif setup.potential.kind == "barrier":
            _run_barrier(cfg, setup, w, summary)
        elif preset.kind == "modes":
            _run_modes(cfg, setup, w, summary, per_run=preset.name == "fig6")
        else:
            _run_free(cfg, setup, w, summary)
    summary["parameters"] = {k: (str(v) if isinstance(v, PhaseMode) else v) for k, v in sorted(params.items())}
    manifest = ArtifactManifest(out, list(w.files), _jsonable_tree(summary))
    body = json.dumps(manifest.as_dict(), indent=1, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(body, encoding="utf-8")
    return manifest


def _jsonable_tree(v):
    if isinstance(v, dict):
        return {k: _jsonable_tree(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable_tree(x) for x in (v.tolist() if isinstance(v, np.ndarray) else v)]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v
