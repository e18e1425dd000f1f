"""Command-line front end.

Every command writes one JSON report::

    {"schema": "commres/1", "command": ..., "inputs": {...}, "result": {...},
     "tolerances": {...}, "solver": {...}}

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 property violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from . import capacity as cap
from . import channels as ch
from . import comb as cb
from . import discrimination as ds
from . import io
from . import resource as rs
from . import sdp
from . import verify

SCHEMA = "commres/1"
DIGITS = 12

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_PROPERTY = 0, 1, 2, 3

COMMANDS = ("dmax", "robustness", "smoothed-dmax", "imax", "diamond", "psucc", "theorem1", "nscap",
            "ns-success", "bound2", "simcost", "trend", "verify")
SUITE_NAMES = tuple(verify.SUITES) + ("all",)

logger = logging.getLogger("commres")


@dataclass
class RunConfig:
    command: str
    channel: str | None = None
    other: str | None = None
    ensemble: str | None = None
    comb: str | None = None
    eps: float = 0.0
    delta: float = 0.0
    M: int | None = None
    M_max: int | None = None
    n_max: int = 2
    method: str = "reduced"
    no_ancilla: bool = False
    suite: str = "all"
    seeds: int | None = None
    seed: int = 0
    tol: float = sdp.DEFAULT_TOL
    out: str | None = None
    csv: str | None = None
    timing: bool = False
    extra: dict = field(default_factory=dict)


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


def _round(x: Any) -> Any:
    """Floats to ``DIGITS`` significant digits; non-finite values become strings."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{DIGITS}g}")
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if hasattr(x, "item"):  # numpy scalar
        return _round(x.item())
    return x


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg.command!r}")
    needs_channel = cfg.command != "verify"
    if needs_channel and not cfg.channel:
        raise ConfigError("channel", "required for this command")
    if cfg.command == "diamond" and not cfg.other:
        raise ConfigError("other", "required for diamond")
    if cfg.command == "psucc" and not cfg.ensemble:
        raise ConfigError("ensemble", "required for psucc")
    if cfg.command == "ns-success" and cfg.M is None:
        raise ConfigError("M", "required for ns-success")
    if cfg.M is not None and cfg.M < 1:
        raise ConfigError("M", f"must be >= 1, got {cfg.M}")
    if cfg.M_max is not None and cfg.M_max < 1:
        raise ConfigError("M_max", f"must be >= 1, got {cfg.M_max}")
    if not math.isfinite(cfg.eps) or cfg.eps < 0:
        raise ConfigError("eps", f"must be a finite number >= 0, got {cfg.eps}")
    if not math.isfinite(cfg.delta) or cfg.delta < 0:
        raise ConfigError("delta", f"must be a finite number >= 0, got {cfg.delta}")
    if cfg.command in ("nscap",) and cfg.eps >= 1:
        raise ConfigError("eps", "must lie in [0, 1)")
    if cfg.command == "bound2" and cfg.eps + cfg.delta / 2 >= 1:
        raise ConfigError("eps", f"need eps + delta/2 < 1, got {cfg.eps + cfg.delta / 2}")
    if cfg.command in ("smoothed-dmax", "simcost") and cfg.eps > 2:
        raise ConfigError("eps", "diamond distances never exceed 2")
    if not 1 <= cfg.n_max <= 3:
        raise ConfigError("n_max", f"must lie in 1..3, got {cfg.n_max}")
    if cfg.method not in ("reduced", "comb"):
        raise ConfigError("method", f"expected 'reduced' or 'comb', got {cfg.method!r}")
    if cfg.suite not in SUITE_NAMES:
        raise ConfigError("suite", f"expected one of {', '.join(SUITE_NAMES)}, got {cfg.suite!r}")
    if cfg.seeds is not None and cfg.seeds < 1:
        raise ConfigError("seeds", f"must be >= 1, got {cfg.seeds}")
    if cfg.seed < 0:
        raise ConfigError("seed", f"must be >= 0, got {cfg.seed}")
    if not 1e-10 <= cfg.tol <= 1e-4:
        raise ConfigError("tol", f"must lie in [1e-10, 1e-4], got {cfg.tol}")


def _load_channel(cfg: RunConfig, path: str, inputs: dict, key: str) -> ch.QuantumChannel:
    n = io.load_channel(path)
    inputs[key] = {"path": path, "d_in": n.d_in, "d_out": n.d_out}
    if cfg.comb:
        c = io.load_comb(cfg.comb)
        inputs["comb"] = {"path": cfg.comb, "dims": list(c.dims)}
        if not cb.is_ns_b_to_a(c):
            raise ConfigError("comb", "comb signals from B to A and cannot be wired around a channel")
        try:
            n = cb.apply_comb(c, n)
        except ValueError as exc:
            raise ConfigError("comb", str(exc)) from None
    return n


def _compute(cfg: RunConfig, inputs: dict) -> tuple[dict | list, bool]:
    """Result payload and whether all checked properties held."""
    cmd = cfg.command
    if cmd == "verify":
        checks = verify.run_suite(cfg.suite, cfg.seeds, cfg.seed)
        inputs.update({"suite": cfg.suite, "seeds": cfg.seeds, "seed": cfg.seed})
        failed = [c.name for c in checks if not c.passed]
        return {"checks": [c.to_dict() for c in checks], "passed": not failed, "failed": failed}, not failed

    n = _load_channel(cfg, cfg.channel, inputs, "channel")
    if cmd in ("dmax", "robustness"):
        rep = rs.dmax(n)
        return rep.to_dict(), True
    if cmd == "smoothed-dmax":
        inputs["eps"] = cfg.eps
        return rs.dmax_smoothed(n, cfg.eps).to_dict(), True
    if cmd == "imax":
        return {"imax_bits": rs.imax(n)}, True
    if cmd == "diamond":
        m = _load_channel(cfg, cfg.other, inputs, "other")
        if (n.d_in, n.d_out) != (m.d_in, m.d_out):
            raise ConfigError("other", f"channel is {m.d_in}->{m.d_out}, expected {n.d_in}->{n.d_out}")
        return {"diamond_distance": ch.diamond_dist(n, m)}, True
    if cmd == "psucc":
        ens = io.load_ensemble(cfg.ensemble)
        inputs["ensemble"] = {"path": cfg.ensemble, "size": len(ens), "dims": list(ens.dims)}
        inputs["ancilla"] = not cfg.no_ancilla
        if ens.d_a != n.d_in:
            raise ConfigError("ensemble", f"system A has dimension {ens.d_a}, channel expects {n.d_in}")
        value, _ = ds.p_succ_optimal(ens, n, ancilla=not cfg.no_ancilla)
        r = rs.dmax(n).robustness
        guess = ds.p_guess(ens)
        return {"p_succ": value, "p_guess": guess, "ratio": value / guess, "one_plus_R": 1 + r,
                "class_E": ds.in_class_E(ens)}, True
    if cmd == "theorem1":
        rep = rs.dmax(n)
        ratio, _, _ = ds.theorem1_certificate(n, rep)
        dev = abs(ratio - rep.value)
        return {"ratio": ratio, "one_plus_R": rep.value, "deviation": dev}, dev <= 1e-6
    if cmd == "nscap":
        inputs.update({"eps": cfg.eps, "M_max": cfg.M_max})
        M = cap.ns_oneshot_capacity(n, cfg.eps, cfg.M_max)
        res = cap.ns_success(n, M)
        return {"M": M, "log2_M": math.log2(M), "success": res.success}, True
    if cmd == "ns-success":
        inputs.update({"M": cfg.M, "method": cfg.method})
        return cap.ns_success(n, cfg.M, method=cfg.method).to_dict(), True
    if cmd == "bound2":
        inputs.update({"eps": cfg.eps, "delta": cfg.delta})
        return {"bound_bits": cap.theorem2_bound(n, cfg.eps, cfg.delta)}, True
    if cmd == "simcost":
        inputs["eps"] = cfg.eps
        res = cap.simulation_cost(n, cfg.eps)
        return {**res.to_dict(), "dmax_bits": res.dmax_bits}, True
    if cmd == "trend":
        inputs.update({"n_max": cfg.n_max, "delta": cfg.delta})
        rows = cap.tensor_power_trend(n, cfg.n_max, cfg.delta)
        return {"trend": [{"n": k, "per_copy_bits": v} for k, v in rows]}, True
    raise ConfigError("command", f"unknown command {cmd!r}")


def _flatten(prefix: str, obj: Any, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and not any(isinstance(v, (dict, list)) for v in obj):
        out[prefix] = ";".join(str(v) for v in obj)
    else:
        out[prefix] = obj


def write_csv(report: dict, path: str) -> None:
    """One row per record for tabular results (checks, trend), else a single row."""
    result = report["result"]
    table = next((v for v in result.values() if isinstance(v, list) and v and isinstance(v[0], dict)), None)
    rows = []
    if table is not None:
        for rec in table:
            row = {}
            _flatten("", rec, row)
            rows.append(row)
    else:
        row = {}
        _flatten("", result, row)
        rows.append(row)
    fields = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def run(cfg: RunConfig) -> int:
    """Execute one command; the report goes to ``cfg.out`` or stdout."""
    start = time.perf_counter()
    inputs: dict = {}
    try:
        validate(cfg)
        with sdp.solver_tolerance(cfg.tol), sdp.record_stats() as stats:
            result, ok = _compute(cfg, inputs)
    except (io.SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except sdp.SdpError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    report = {
        "schema": SCHEMA,
        "command": cfg.command,
        "inputs": inputs,
        "result": result,
        "tolerances": {"solver_tol": cfg.tol, "ns_tol": cb.NS_TOL, "validation_tol": cap.VALIDATION_TOL},
        "solver": dict(stats),
    }
    if cfg.timing:
        report["wall_time_s"] = time.perf_counter() - start
    text = json.dumps(_round(report), sort_keys=True, indent=2) + "\n"
    try:
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if cfg.csv:
            write_csv(_round(report), cfg.csv)
    except OSError as exc:
        print(f"error: out: cannot write report ({exc.strerror})", file=sys.stderr)
        return EXIT_INVALID
    if not ok:
        print("property violation", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="commres", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--channel", help="channel JSON file")
    ap.add_argument("--other", help="second channel JSON file (diamond)")
    ap.add_argument("--ensemble", help="ensemble JSON file (psucc)")
    ap.add_argument("--comb", help="comb JSON file applied to the channel first")
    ap.add_argument("--eps", type=float, default=0.0)
    ap.add_argument("--delta", type=float, default=0.0)
    ap.add_argument("--M", type=int, dest="M")
    ap.add_argument("--M-max", type=int, dest="M_max")
    ap.add_argument("--n-max", type=int, dest="n_max", default=2)
    ap.add_argument("--method", default="reduced", help="ns-success program: reduced or comb")
    ap.add_argument("--no-ancilla", action="store_true", help="psucc without the reference system")
    ap.add_argument("--suite", default="all", help=f"verify suite: {', '.join(SUITE_NAMES)}")
    ap.add_argument("--seeds", type=int, help="number of random instances per verify check")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=sdp.DEFAULT_TOL, help="solver tolerance in [1e-10, 1e-4]")
    ap.add_argument("--out", help="write the JSON report here instead of stdout")
    ap.add_argument("--csv", help="also write a flattened CSV")
    ap.add_argument("--timing", action="store_true", help="add wall time (makes reports non-reproducible)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    fields = {k: v for k, v in vars(args).items() if k != "verbose"}
    return run(RunConfig(**fields))


if __name__ == "__main__":
    sys.exit(main())
