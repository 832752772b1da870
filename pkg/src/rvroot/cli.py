"""Command-line front end.

    python3 -m rvroot estimate --angles 30,50 --snr inf
    python3 -m rvroot sweep --config configs/condition1.cfg --out cond1.csv
    python3 -m rvroot roots --elements 8 --out roots8.csv
    python3 -m rvroot verify --level quick

Configuration files hold one ``key = value`` per line (``#`` starts a comment);
keys are the Scenario / SweepSpec field names. Command-line flags override the
file. Exit codes: 0 ok, 1 usage or config error, 2 estimation failure,
3 verification failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .array_model import Scenario, UlaConfig, noise_power_from_snr, stream, synthesize
from .errors import ContractViolation, EstimationFailure, NumericalError
from .estimator import estimate
from .experiments import GATE_DEG, SweepSpec, root_locus, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_ESTIMATION, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3, 4

SWEEP_COLUMNS = ("sweep_variable", "sweep_value", "rmse_true_emp_deg", "rmse_true_theory_deg",
                 "rmse_mirror_emp_deg", "rmse_mirror_theory_deg", "trials_used", "failures")
SNR_CONVENTION = "per-source SNR with unit source power; noise_power = 10^(-snr_db/10)"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_float_list(text: str) -> tuple[float, ...]:
    """``a,b,c``, ``start:step:stop`` (stop included) or ``inf``."""
    text = text.strip()
    if not text:
        raise ValueError("empty value")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"range {text!r} needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(n))
    return tuple(float(p) for p in text.split(","))


def parse_int_list(text: str) -> tuple[int, ...]:
    vals = parse_float_list(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return conv


@dataclass
class RunConfig:
    elements: int = 9
    spacing_ratio: float = 0.5
    angles_deg: tuple[float, ...] = (30.0, 50.0)
    snapshots: tuple[int, ...] = (200,)
    snr_db: tuple[float, ...] | None = None
    noise_power: float | None = None
    seed: int = 2025
    trials: int = 1000
    tracked_source_deg: float | None = None
    sweep_variable: str | None = None
    sweep_values: tuple[float, ...] | None = None
    workers: int | None = None
    output_path: str | None = None
    format: str = "csv"

    def array(self) -> UlaConfig:
        return UlaConfig(self.elements, self.spacing_ratio)

    def _noise(self, snr=None) -> float:
        if snr is not None:
            return noise_power_from_snr(snr)
        if self.noise_power is not None:
            return self.noise_power
        if self.snr_db is None:
            return 0.0
        if len(self.snr_db) != 1:
            raise UsageError("snr_db lists more than one value; use the sweep command")
        return noise_power_from_snr(self.snr_db[0])

    def scenario(self) -> Scenario:
        if len(self.snapshots) != 1:
            raise UsageError("snapshots lists more than one value; use the sweep command")
        return Scenario(self.array(), self.angles_deg, self.snapshots[0], self._noise(), self.seed)

    def sweep_spec(self) -> SweepSpec:
        var = self.sweep_variable
        if var is None:
            multi_snr = self.snr_db is not None and len(self.snr_db) > 1
            multi_m = len(self.snapshots) > 1
            if multi_snr and multi_m:
                raise UsageError("both snr_db and snapshots list several values; set sweep_variable")
            var = "snr_db" if multi_snr else "snapshots" if multi_m else None
            if var is None and self.sweep_values is None:
                raise UsageError("nothing to sweep: give several snr_db or snapshots values")
            if var is None:
                raise UsageError("sweep_values given without sweep_variable")
        values = self.sweep_values
        if var == "snr_db":
            if values is None:
                values = self.snr_db
            if values is None:
                raise UsageError("snr_db sweep needs snr_db or sweep_values")
            base = Scenario(self.array(), self.angles_deg, self._single(self.snapshots, "snapshots"),
                            0.0, self.seed)
        else:
            if values is None:
                values = self.snapshots
            snr = None if self.snr_db is None else self._single(self.snr_db, "snr_db")
            base = Scenario(self.array(), self.angles_deg, 1, self._noise(snr), self.seed)
        return SweepSpec(base, var, tuple(values), self.trials, self.tracked_source_deg)

    @staticmethod
    def _single(values, name):
        if len(values) != 1:
            raise UsageError(f"{name} must be a single value when it is not the swept variable")
        return values[0]

    def describe(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("workers", "output_path") or v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(f"{x:g}" if isinstance(x, float) else str(x) for x in v)
            parts.append(f"{f.name}={v}")
        return " ".join(parts)


CONVERTERS = {
    "elements": _int,
    "spacing_ratio": float,
    "angles_deg": parse_float_list,
    "snapshots": parse_int_list,
    "snr_db": parse_float_list,
    "noise_power": float,
    "seed": _int,
    "trials": _int,
    "tracked_source_deg": float,
    "sweep_variable": _choice("snr_db", "snapshots"),
    "sweep_values": parse_float_list,
    "workers": _int,
    "output_path": str,
    "format": _choice("csv"),
}

FLAG_KEYS = {
    "elements": "elements", "spacing": "spacing_ratio", "angles": "angles_deg",
    "snapshots": "snapshots", "snr": "snr_db", "seed": "seed", "trials": "trials",
    "workers": "workers", "out": "output_path",
}


def read_config_file(path: str) -> dict[str, tuple[str, str]]:
    """Raw ``{key: (text, origin)}`` from a key = value file."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    raw = {}
    for n, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{path}:{n}"
        if "=" not in body:
            raise UsageError(f"{where}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in CONVERTERS:
            raise UsageError(f"{where}: unknown key {key!r}")
        if key in raw:
            raise UsageError(f"{where}: duplicate key {key!r} (first set at {raw[key][1]})")
        raw[key] = (value, where)
    return raw


def build_config(raw: dict[str, tuple[str, str]]) -> RunConfig:
    cfg = RunConfig()
    for key, (text, where) in raw.items():
        try:
            setattr(cfg, key, CONVERTERS[key](text))
        except ValueError as exc:
            raise UsageError(f"{where}: {key}: {exc}") from exc
    if cfg.snr_db is not None and cfg.noise_power is not None:
        a, b = raw["snr_db"][1], raw["noise_power"][1]
        raise UsageError(f"snr_db ({a}) and noise_power ({b}) are mutually exclusive")
    if cfg.workers is not None and cfg.workers < 1:
        raise UsageError(f"{raw['workers'][1]}: workers must be >= 1")
    return cfg


def resolve_config(args) -> RunConfig:
    raw = read_config_file(args.config) if args.config else {}
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            if key == "snr_db":
                raw.pop("noise_power", None)
            raw[key] = (str(v), f"--{flag}")
    return build_config(raw)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the destination directory and rename."""
    dest = Path(path)
    fd, tmp = tempfile.mkstemp(dir=dest.parent if str(dest.parent) else ".", prefix=f".{dest.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, dest)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def check_writable(path: str) -> None:
    parent = Path(path).parent
    if not parent.is_dir():
        raise OSError(f"directory {parent} does not exist")
    if not os.access(parent, os.W_OK):
        raise OSError(f"directory {parent} is not writable")
    if Path(path).is_dir():
        raise OSError(f"{path} is a directory")


def sweep_csv(cfg: RunConfig, spec: SweepSpec, rows) -> str:
    flagged = [_fmt(r.sweep_value) for r in rows if r.flagged]
    lines = [
        f"# rvroot {__version__} sweep",
        f"# seed: {cfg.seed}",
        f"# snr_convention: {SNR_CONVENTION}",
        f"# gating_window_deg: {GATE_DEG:g} (estimates farther from the reference are failed trials)",
        "# rmse_emp: over successful trials; rmse_theory: closed-form MSE averaged over all trials",
        f"# config: {cfg.describe()}",
        f"# tracked_source_deg: {spec.tracked_source_deg:g}",
        f"# flagged_rows (>10% failed trials): {','.join(flagged) if flagged else 'none'}",
        ",".join(SWEEP_COLUMNS),
    ]
    for r in rows:
        lines.append(",".join([
            spec.sweep_variable, _fmt(r.sweep_value), _fmt(r.rmse_true_emp_deg), _fmt(r.rmse_true_theory_deg),
            _fmt(r.rmse_mirror_emp_deg), _fmt(r.rmse_mirror_theory_deg), str(r.trials_used), str(r.failures),
        ]))
    return "\n".join(lines) + "\n"


def roots_csv(cfg: RunConfig, locus) -> str:
    lines = [
        f"# rvroot {__version__} roots",
        f"# elements: {cfg.elements}  spacing_ratio: {cfg.spacing_ratio:g}  "
        f"angles_deg: {','.join(f'{a:g}' for a in locus.angles_deg)}  noiseless model covariance",
        "# reference: unit circle |z| = 1",
        "re,im,class",
    ]
    for z, lab in zip(locus.roots, locus.labels):
        lines.append(f"{_fmt(z.real)},{_fmt(z.imag)},{lab}")
    return "\n".join(lines) + "\n"


def cmd_estimate(args) -> int:
    cfg = resolve_config(args)
    sc = cfg.scenario()
    data = synthesize(sc, stream(sc.seed))
    try:
        est, decomp, diag = estimate(data.observed, sc.num_sources, sc.array)
    except (EstimationFailure, NumericalError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    print("doa_deg: " + ", ".join(f"{a:.6f}" for a in est.angles_deg))
    print("mirror_deg: " + ", ".join(f"{a:.6f}" for a in est.mirror_angles_deg))
    if any(est.ambiguous):
        print("ambiguous: " + ", ".join(str(a).lower() for a in est.ambiguous))
    if args.spectrum:
        print("eigenvalues: " + ", ".join(f"{w:.9g}" for w in decomp.eigenvalues))
        print("roots:")
        for z, lab in zip(diag.all_roots, diag.labels):
            print(f"  {z.real: .9f} {z.imag:+.9f}j  |z|={abs(z):.9f}  {lab}")
    if args.json_roots:
        print(json.dumps(diag.to_dict(), indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    spec = cfg.sweep_spec()
    if cfg.output_path:
        check_writable(cfg.output_path)
    rows = run_sweep(spec, workers=cfg.workers or os.cpu_count() or 1)
    text = sweep_csv(cfg, spec, rows)
    if cfg.output_path:
        atomic_write(cfg.output_path, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_roots(args) -> int:
    cfg = resolve_config(args)
    sc = cfg.scenario()
    if cfg.output_path:
        check_writable(cfg.output_path)
    try:
        locus = root_locus(sc.array, sc.angles_deg)
    except (EstimationFailure, NumericalError) as exc:
        print(f"root extraction failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    text = roots_csv(cfg, locus)
    if cfg.output_path:
        atomic_write(cfg.output_path, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .oracles import run_suite

    results = run_suite(args.level)
    for r in results:
        print(r.line(), flush=True)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} oracles passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rvroot", description="Real-valued root-MUSIC DOA estimation and error analysis.")
    p.add_argument("--version", action="version", version=f"rvroot {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--elements", type=int, metavar="L")
        sp.add_argument("--spacing", type=float, metavar="R", help="d / lambda")
        sp.add_argument("--angles", metavar="LIST", help="comma-separated degrees; write --angles=-20,35 for a leading minus")
        sp.add_argument("--snapshots", metavar="M", help="integer or list")
        sp.add_argument("--snr", metavar="SPEC", help="dB: value, list, start:step:stop or inf")

    e = sub.add_parser("estimate", help="estimate DOAs for one synthetic realization")
    common(e)
    e.add_argument("--spectrum", action="store_true", help="also print eigenvalues and the root table")
    e.add_argument("--json-roots", action="store_true", help="print root diagnostics as JSON")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="Monte Carlo sweep over SNR or snapshot count")
    common(s)
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", metavar="PATH")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("roots", help="noiseless root locus as CSV")
    common(r)
    r.add_argument("--out", metavar="PATH")
    r.set_defaults(func=cmd_roots)

    v = sub.add_parser("verify", help="run the self-verification oracles")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ContractViolation, ValueError) as exc:
        print(f"rvroot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rvroot: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
