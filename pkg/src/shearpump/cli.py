"""Command-line presets: ``shearpump <command> [--config FILE] [--emit csv|json|table]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .bands import band_structure, chern_number, pump_rule, table_chern, table_order
from .berry import longuet_higgins_phase, transport_cycle
from .errors import ConfigError, ModelError, ShearPumpError
from .evolution import Schedule, _min_gap, evolve, operator_identity_residual
from .jahnteller import PHI0, JTParameters, jt_cycle_charge, minimize
from .loop import DeformationLoop
from .model import HoppingLaw, NecklaceModel, NecklaceSpec, TrimerModel
from .twolevel import doublet_indices, necklace_coefficients

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


# ---------------------------------------------------------------------------
# strict configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    kind: str  # float | int | bool | str | floats | ints | complex
    default: Any
    positive: bool = False
    choices: tuple = ()


def _coerce(name: str, f: Field, value):
    def bad(why):
        return ConfigError(f"field {name!r}: {why} (got {value!r})")

    if f.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("expected a number")
        value = float(value)
        if not math.isfinite(value):
            raise bad("must be finite")
    elif f.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("expected an integer")
    elif f.kind == "bool":
        if not isinstance(value, bool):
            raise bad("expected true or false")
    elif f.kind == "str":
        if not isinstance(value, str):
            raise bad("expected a string")
        if f.choices and value not in f.choices:
            raise bad(f"expected one of {list(f.choices)}")
    elif f.kind == "complex":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = complex(value)
        elif (isinstance(value, list) and len(value) == 2
              and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            value = complex(value[0], value[1])
        else:
            raise bad("expected a number or [re, im]")
    elif f.kind in ("floats", "ints"):
        if not isinstance(value, list):
            raise bad("expected a list")
        if not value:
            raise bad("grid must be nonempty")
        inner = Field("float" if f.kind == "floats" else "int", None, f.positive)
        return [_coerce(f"{name}[{i}]", inner, v) for i, v in enumerate(value)]
    if f.positive and f.kind in ("float", "int") and not value > 0:
        raise bad("must be positive")
    return value


def parse_config(text: Optional[str], schema: dict) -> dict:
    """Defaults of ``schema`` overridden by the JSON object ``text``; unknown keys are errors."""
    data = {}
    if text is not None:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; allowed: {sorted(schema)}")
    out = {}
    for name, f in schema.items():
        out[name] = _coerce(name, f, data[name]) if name in data else f.default
    return out


_HOPPING = {"t0": Field("float", 1.0, positive=True), "beta": Field("float", 2.0)}

SCHEMAS = {
    "transport-sweep": {
        **_HOPPING,
        "model": Field("str", "trimer", choices=("trimer", "necklace")),
        "p": Field("int", 3, positive=True),
        "band": Field("ints", [0]),
        "eps": Field("floats", [0.04, 0.02, 0.01, 0.005], positive=True),
        "theta": Field("float", 0.0),
        "center": Field("complex", 0j),
        "n_samples": Field("int", 256, positive=True),
        "fd_step": Field("float", 1e-5, positive=True),
        "tol": Field("float", 1e-4, positive=True),
    },
    "chern-table": {
        **_HOPPING,
        "p": Field("int", 5, positive=True),
        "eps": Field("float", 0.05, positive=True),
        "center": Field("complex", 0j),
        "n_s": Field("int", 48, positive=True),
        "n_theta": Field("int", 48, positive=True),
        "measure_order": Field("bool", True),
    },
    "evolve-check": {
        **_HOPPING,
        "model": Field("str", "trimer", choices=("trimer", "necklace")),
        "p": Field("int", 3, positive=True),
        "band": Field("ints", [0]),
        "eps": Field("float", 0.1, positive=True),
        "theta": Field("float", 0.0),
        "tau_gap": Field("floats", [500.0, 1000.0, 2000.0, 4000.0], positive=True),
        "n_samples": Field("int", 17, positive=True),
        "order": Field("int", 2, choices=(2, 4)),
        "trace_out": Field("str", ""),
    },
    "jt": {
        **_HOPPING,
        "p": Field("int", 3, positive=True),
        "m": Field("int", 1, positive=True),
        "K": Field("float", 10.0, positive=True),
        "L": Field("float", 1.0, positive=True),
        "Phi0": Field("float", PHI0, positive=True),
        "branch": Field("int", -1, choices=(1, -1)),
        "electronic": Field("str", "two_level", choices=("two_level", "exact")),
        "x_max": Field("float", 0.5, positive=True),
        "n_probes": Field("int", 64, positive=True),
        "tol": Field("float", 0.1, positive=True),
    },
    "band-data": {
        **_HOPPING,
        "p": Field("int", 5, positive=True),
        "x": Field("complex", 0j),
        "n_theta": Field("int", 256, positive=True),
    },
    "lh-phase": {
        **_HOPPING,
        "eps": Field("floats", [0.005, 0.01, 0.02, 0.05, 0.1], positive=True),
        "n_random": Field("int", 20),
        "n_samples": Field("int", 256, positive=True),
    },
}


def _check_choices(cfg: dict, schema: dict):
    for name, f in schema.items():
        if f.kind == "int" and f.choices and cfg[name] not in f.choices:
            raise ConfigError(f"field {name!r}: expected one of {list(f.choices)} (got {cfg[name]!r})")


def _hopping(cfg) -> HoppingLaw:
    return HoppingLaw(cfg["t0"], cfg["beta"])


def _spec(cfg) -> NecklaceSpec:
    p = cfg["p"]
    if p < 3 or p % 2 == 0:
        raise ConfigError(f"field 'p': expected an odd integer >= 3 (got {p})")
    return NecklaceSpec(p, _hopping(cfg))


def _model(cfg):
    if cfg["model"] == "trimer":
        return TrimerModel(_hopping(cfg))
    return NecklaceModel(_spec(cfg))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


@dataclass
class Table:
    columns: list
    rows: list
    meta: dict

    def _cell(self, v):
        if isinstance(v, str):
            return v
        if v is None:
            return "nan"
        if isinstance(v, (bool, np.bool_)):
            return str(int(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return f"{float(v):.17g}"

    def csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(self._cell(v) for v in r) + "\n")
        return buf.getvalue()

    def json(self) -> str:
        def clean(v):
            if isinstance(v, (np.floating, float)):
                return None if not math.isfinite(float(v)) else float(v)
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, np.bool_):
                return bool(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        doc = {"columns": self.columns, "rows": [dict(zip(self.columns, map(clean, r))) for r in self.rows]}
        doc.update(clean(self.meta))
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        cells = [self.columns] + [[self._cell(v) for v in r] for r in self.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(self.columns))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
        for k in sorted(self.meta):
            lines.append(f"# {k}: {json.dumps(self.meta[k], sort_keys=True, default=str)}")
        return "\n".join(lines) + "\n"


def _map(fn: Callable, items, threads: int):
    """Ordered map; results come back in grid order whatever the completion order."""
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


class _PointFailure(Exception):
    def __init__(self, where: str, exc: Exception):
        super().__init__(f"{where}: {exc}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_transport_sweep(cfg: dict, threads: int = 1, seed: int = 0) -> Table:
    model = _model(cfg)

    def point(eps):
        loop = DeformationLoop.circle(eps, cfg["n_samples"], center=cfg["center"])
        try:
            rep = transport_cycle(model, loop, cfg["theta"], cfg["band"], tol=cfg["tol"], fd_step=cfg["fd_step"])
        except ShearPumpError as exc:
            raise _PointFailure(f"eps={eps!r}", exc) from exc
        lh = rep.lh_phase if rep.lh_phase is not None else None
        return [eps, rep.charge_e, rep.charge_e * eps, lh, rep.richardson_error]

    rows = _map(point, cfg["eps"], threads)
    return Table(["eps", "Q", "Q_eps", "lh_phase", "richardson_error"], rows, {"command": "transport-sweep"})


def cmd_chern_table(cfg: dict, threads: int = 1, seed: int = 0) -> Table:
    spec = _spec(cfg)
    failures = []

    def point(gap):
        try:
            rec = chern_number(spec, gap, cfg["eps"], cfg["n_s"], cfg["n_theta"], center=cfg["center"],
                               measure_order=cfg["measure_order"])
        except ShearPumpError as exc:
            failures.append(f"gap {gap}: {exc}")
            return [gap, None, None, table_order(spec.p, gap), table_chern(spec.p, gap), None,
                    pump_rule(spec.p, gap), None]
        return [gap, rec.opening_order, rec.chern, table_order(spec.p, gap), table_chern(spec.p, gap),
                rec.chern, pump_rule(spec.p, gap), rec.plaquette_field_residual]

    rows = _map(point, list(range(1, spec.p)), threads)
    meta = {"command": "chern-table", "p": spec.p, "failures": sorted(failures)}
    return Table(["gap", "order", "chern", "table_order", "table_chern", "pump_charge", "pump_rule",
                  "residual"], rows, meta)


def cmd_evolve_check(cfg: dict, threads: int = 1, seed: int = 0) -> Table:
    model = _model(cfg)
    band = cfg["band"]
    sched = Schedule.circle(cfg["eps"], 1.0)
    gap = _min_gap(model, sched, cfg["theta"], band)
    taus = [t / gap for t in cfg["tau_gap"]]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = operator_identity_residual(model, sched, cfg["theta"], band, taus, cfg["n_samples"], cfg["order"])
    slope = rep.slope if rep.slope is not None else None
    half = rep.slope_halfwidth if rep.slope_halfwidth is not None else None
    rows = []
    for t, r in zip(rep.taus, rep.max_residual):
        note = "tau*gap<10 outside adiabatic regime" if t * gap < 10 else ""
        rows.append([t, t * gap, r, slope, half, note])
    if cfg["trace_out"]:
        out = evolve(model, sched.with_tau(taus[-1]), cfg["theta"], band, order=cfg["order"])
        with open(cfg["trace_out"], "w", encoding="utf-8") as fh:
            out.to_csv(fh=fh)
    meta = {"command": "evolve-check", "min_gap": gap,
            "slope": "not available" if slope is None else slope,
            "slope_halfwidth": half}
    return Table(["tau", "tau_gap", "max_residual", "fitted_slope", "slope_halfwidth", "annotations"],
                 rows, meta)


def cmd_jt(cfg: dict, threads: int = 1, seed: int = 0) -> Table:
    spec = _spec(cfg)
    try:
        doublet_indices(spec.p, cfg["m"])
    except ShearPumpError as exc:
        raise ConfigError(f"field 'm': {exc}") from None
    coeffs = necklace_coefficients(spec, cfg["m"])
    params = JTParameters(cfg["K"], cfg["L"], coeffs, spec.p, cfg["Phi0"], cfg["branch"], cfg["electronic"], spec)
    rep = minimize(params, x_max=cfg["x_max"], n_probes=cfg["n_probes"], seed=seed)
    charge = None
    if cfg["branch"] == -1 and cfg["m"] == 1:
        charge = jt_cycle_charge(params, spec, tol=cfg["tol"])
    d = rep.to_dict()
    meta = {"command": "jt", "report": d, "jt_cycle_charge": charge}
    row = [d["class"], rep.x_star_radius, rep.phi_star, rep.phi_star / params.Phi0, rep.energy,
           rep.hessian_definite, rep.gradient_norm, rep.ampere_residual, charge]
    return Table(["class", "x_radius", "phi", "phi_over_phi0", "energy", "hessian_definite", "gradient_norm",
                  "ampere_residual", "jt_cycle_charge"], [row], meta)


def cmd_band_data(cfg: dict, threads: int = 1, seed: int = 0) -> Table:
    spec = _spec(cfg)
    if cfg["n_theta"] < 64:
        raise ConfigError("field 'n_theta': must be at least 64")
    bs = band_structure(spec, cfg["x"], cfg["n_theta"])
    rows = [[t, *e] for t, e in zip(bs.grid, bs.energies.T)]
    return Table(["theta"] + [f"E_{k + 1}" for k in range(spec.p)], rows,
                 {"command": "band-data", "p": spec.p, "x": [cfg["x"].real, cfg["x"].imag]})


def cmd_lh_phase(cfg: dict, threads: int = 1, seed: int = 0) -> Table:
    model = TrimerModel(_hopping(cfg))
    rng = np.random.default_rng(seed)
    loops = [(eps, 0j) for eps in cfg["eps"]]
    for _ in range(max(cfg["n_random"], 0)):
        radius = 10 ** rng.uniform(-2.5, -1)
        dist = radius * rng.uniform(1.2, 4.0)
        loops.append((radius, dist * np.exp(2j * np.pi * rng.random())))

    def point(item):
        radius, center = item
        loop = DeformationLoop.circle(radius, cfg["n_samples"], center=center)
        try:
            phase = longuet_higgins_phase(model, loop)
        except ShearPumpError as exc:
            raise _PointFailure(f"eps={radius!r}", exc) from exc
        return [radius, center.real, center.imag, int(abs(center) < radius), phase]

    rows = _map(point, loops, threads)
    return Table(["eps", "center_re", "center_im", "encircles", "lh_phase"], rows, {"command": "lh-phase"})


COMMANDS = {
    "transport-sweep": cmd_transport_sweep,
    "chern-table": cmd_chern_table,
    "evolve-check": cmd_evolve_check,
    "jt": cmd_jt,
    "band-data": cmd_band_data,
    "lh-phase": cmd_lh_phase,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shearpump", description="Shear-driven charge transport presets.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--emit", choices=("csv", "json", "table"), default="table")
    ap.add_argument("--out", help="write output here instead of standard output")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    return ap


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads < 1 or not 0 <= args.seed < 2**64:
        print("config error: --threads must be >= 1 and --seed a 64-bit unsigned integer", file=stderr)
        return EXIT_CONFIG
    schema = SCHEMAS[args.command]
    try:
        text = None
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
        cfg = parse_config(text, schema)
        _check_choices(cfg, schema)
        table = COMMANDS[args.command](cfg, args.threads, args.seed)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (_PointFailure, ShearPumpError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    text = {"csv": table.csv, "json": table.json, "table": table.table}[args.emit]()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    failures = table.meta.get("failures") or []
    for f in failures:
        print(f"numerical failure: {f}", file=stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
