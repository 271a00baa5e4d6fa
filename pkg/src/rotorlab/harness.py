"""Experiment configs, deterministic runs, and output bundles with a manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from rotorlab import __version__, acceptance
from rotorlab.alpha_builder import build_in_A, constant_digits, gauss_random
from rotorlab.birkhoff import DEFAULT_GUARD, make_context, random_x
from rotorlab.cf_core import CfDigits, parse_rational
from rotorlab.observable import SawtoothCombo, syndetic_scan
from rotorlab.temporal import ensemble, histogram_csv, parse_grid, scan_csv, scan_tdlt

ALPHA_KINDS = ("digits", "constant", "gauss_random", "build_in_A")


class ConfigError(ValueError):
    """Invalid config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        n = flag
    else:
        raw = os.environ.get("ROTORLAB_THREADS", "1")
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError("ROTORLAB_THREADS", f"not an integer: {raw!r}") from None
    if n < 1:
        raise ConfigError("threads", "must be >= 1")
    return n


def parallel_map(fn: Callable, keys: Sequence, threads: int = 1) -> list:
    """fn over keys, results in key order regardless of completion order."""
    if threads <= 1 or len(keys) <= 1:
        return [fn(k) for k in keys]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, keys))


# --- config ----------------------------------------------------------------------


def _require(raw: dict, key: str, path: str):
    if key not in raw:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    return raw[key]


def _int(value, path: str, lo: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    observable: dict
    alpha: dict
    x: list
    horizons: dict
    grids: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "alpha": self.alpha,
            "x": self.x,
            "horizons": self.horizons,
            "grids": self.grids,
            "seeds": self.seeds,
            "outputs": self.outputs,
        }

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(f"{__version__}|{self.canonical()}".encode()).hexdigest()

    @classmethod
    def from_dict(cls, raw: Any) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"observable", "alpha", "x", "horizons", "grids", "seeds", "outputs"}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        obs = _require(raw, "observable", "")
        _validate_observable(obs)
        alpha = _require(raw, "alpha", "")
        _validate_alpha(alpha)
        xs = raw.get("x", [{"kind": "random", "seed": 0}])
        if isinstance(xs, dict):
            xs = [xs]
        if not isinstance(xs, list) or not xs:
            raise ConfigError("x", "expected an x spec or a non-empty list of them")
        for i, spec in enumerate(xs):
            _validate_x(spec, f"x[{i}]")
        hz = _require(raw, "horizons", "")
        if not isinstance(hz, dict):
            raise ConfigError("horizons", "expected an object")
        _int(_require(hz, "N", "horizons"), "horizons.N", 1)
        if "guard" in hz:
            _int(hz["guard"], "horizons.guard", 2)
        grids = raw.get("grids", {})
        if not isinstance(grids, dict):
            raise ConfigError("grids", "expected an object")
        if "scan" in grids:
            try:
                parse_grid(str(grids["scan"]))
            except ValueError as exc:
                raise ConfigError("grids.scan", str(exc)) from None
        seeds = raw.get("seeds", {})
        if not isinstance(seeds, dict):
            raise ConfigError("seeds", "expected an object")
        for k, v in seeds.items():
            _int(v, f"seeds.{k}", 0)
        outputs = raw.get("outputs", {})
        if not isinstance(outputs, dict):
            raise ConfigError("outputs", "expected an object")
        if "histogram_bins" in outputs:
            _int(outputs["histogram_bins"], "outputs.histogram_bins", 1)
        return cls(obs, alpha, xs, hz, grids, seeds, outputs)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(_read_json(path))


@dataclass(frozen=True)
class VerifyConfig:
    """A config of the form {"verify": {"suite": ..., "seed": ...}, "outputs": {...}}."""

    suite: str
    seed: int
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "VerifyConfig":
        for key in raw:
            if key not in ("verify", "outputs"):
                raise ConfigError(key, "unknown field in a verify config")
        body = raw["verify"]
        if not isinstance(body, dict):
            raise ConfigError("verify", "expected an object")
        suite = body.get("suite", "all")
        if suite not in ("exact", "statistical", "all", "measure"):
            raise ConfigError("verify.suite", "must be exact, statistical, all or measure")
        seed = _int(body.get("seed", acceptance.SEED), "verify.seed", 0)
        return cls(suite, seed, raw.get("outputs", {}))


def _read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("--config", f"no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"not valid JSON: {exc}") from None


def load_config(path: str | Path) -> "ExperimentConfig | VerifyConfig":
    raw = _read_json(path)
    if isinstance(raw, dict) and "verify" in raw:
        return VerifyConfig.from_dict(raw)
    return ExperimentConfig.from_dict(raw)


def _validate_observable(obs) -> None:
    if not isinstance(obs, dict):
        raise ConfigError("observable", "expected an object with b and beta")
    b, beta = _require(obs, "b", "observable"), _require(obs, "beta", "observable")
    if not isinstance(b, list) or not isinstance(beta, list):
        raise ConfigError("observable", "b and beta must be lists")
    for name, seq in (("b", b), ("beta", beta)):
        for i, v in enumerate(seq):
            try:
                parse_rational(v)
            except (ValueError, TypeError, ZeroDivisionError) as exc:
                raise ConfigError(f"observable.{name}[{i}]", str(exc)) from None
    try:
        SawtoothCombo(tuple(b), tuple(beta))
    except ValueError as exc:
        raise ConfigError("observable", str(exc)) from None


def _validate_alpha(alpha) -> None:
    if not isinstance(alpha, dict):
        raise ConfigError("alpha", "expected an object")
    kind = _require(alpha, "kind", "alpha")
    if kind not in ALPHA_KINDS:
        raise ConfigError("alpha.kind", f"must be one of {', '.join(ALPHA_KINDS)}")
    if kind == "digits":
        digits = _require(alpha, "digits", "alpha")
        if not isinstance(digits, list) or not digits:
            raise ConfigError("alpha.digits", "expected a non-empty list")
        for i, a in enumerate(digits):
            _int(a, f"alpha.digits[{i}]", 1)
    elif kind == "constant":
        _int(_require(alpha, "a", "alpha"), "alpha.a", 1)
        _int(_require(alpha, "length", "alpha"), "alpha.length", 1)
    elif kind == "gauss_random":
        _int(_require(alpha, "length", "alpha"), "alpha.length", 1)
        _int(_require(alpha, "seed", "alpha"), "alpha.seed", 0)
    else:
        _int(alpha.get("M", 1), "alpha.M", 1)
        _int(alpha.get("stages", 3), "alpha.stages", 1)
        _int(alpha.get("growth", 3), "alpha.growth", 1)
        _int(alpha.get("tail", 150), "alpha.tail", 0)
        if alpha.get("filler", "ones") not in ("ones", "gauss"):
            raise ConfigError("alpha.filler", "must be 'ones' or 'gauss'")


def _validate_x(spec, path: str) -> None:
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    kind = _require(spec, "kind", path)
    if kind == "rational":
        try:
            parse_rational(_require(spec, "value", path))
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError(f"{path}.value", str(exc)) from None
    elif kind == "random":
        _int(_require(spec, "seed", path), f"{path}.seed", 0)
    else:
        raise ConfigError(f"{path}.kind", "must be 'rational' or 'random'")


# --- building blocks from config ---------------------------------------------------


def build_observable(obs: dict) -> SawtoothCombo:
    return SawtoothCombo(tuple(obs["b"]), tuple(obs["beta"]))


def build_alpha(alpha: dict, f: SawtoothCombo) -> tuple[CfDigits, dict]:
    """Digits plus provenance (the planting plan for built numbers)."""
    kind = alpha["kind"]
    if kind == "digits":
        return CfDigits.from_any(alpha["digits"], alpha.get("finite_exact", False)), {}
    if kind == "constant":
        return constant_digits(alpha["a"], alpha["length"]), {}
    if kind == "gauss_random":
        return gauss_random(alpha["length"], alpha["seed"]), {}
    nset = syndetic_scan(f, alpha.get("eps0"), alpha.get("n_max", 1000))
    d, plan = build_in_A(nset, alpha.get("M", 1), alpha.get("stages", 3), seed=alpha.get("seed"),
                         filler=alpha.get("filler", "ones"), tail=alpha.get("tail", 150),
                         growth=alpha.get("growth", 3))
    return d, {"plan": plan.to_dict()}


def build_x(spec: dict) -> Fraction:
    if spec["kind"] == "rational":
        return parse_rational(spec["value"])
    return random_x(random.Random(spec["seed"]))


# --- outputs ---------------------------------------------------------------------


def with_digest_header(text: str, digest: str) -> str:
    return f"# config_digest={digest}\n{text}"


def csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow(list(row))
    return buf.getvalue()


def json_text(payload: dict, digest: str) -> str:
    return json.dumps({"config_digest": digest, **payload}, indent=2, sort_keys=True) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, files: Sequence[str], digest: str) -> Path:
    entries = [{"file": name, "sha256": sha256_file(out / name)} for name in sorted(files)]
    path = out / "manifest.json"
    path.write_text(json_text({"version": __version__, "files": entries}, digest))
    return path


# --- run -------------------------------------------------------------------------


def _row_job(args: tuple) -> dict:
    """Everything for one starting point; runs in a worker on immutable inputs."""
    index, cfg_dict = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    f = build_observable(cfg.observable)
    d, _ = build_alpha(cfg.alpha, f)
    x = build_x(cfg.x[index])
    N = cfg.horizons["N"]
    grid = parse_grid(str(cfg.grids["scan"])) if "scan" in cfg.grids else []
    grid = [g for g in grid if g <= N] or [N]
    try:
        ctx = make_context(d, max(N, max(grid)), cfg.horizons.get("guard", DEFAULT_GUARD))
        e = ensemble(f, ctx, x, N)
        rows = scan_tdlt(f, ctx, x, grid)
        return {
            "index": index,
            "x": f"{x.numerator}/{x.denominator}",
            "ok": True,
            "ensemble": [(n, repr(float(v))) for n, v in enumerate(e.values, start=1)],
            "scan": rows,
            "histogram": histogram_csv(e, cfg.outputs.get("histogram_bins", 50)),
            "error_bound": e.provenance["error_bound"],
        }
    except Exception as exc:  # recorded per row; other rows still run
        return {"index": index, "x": f"{x.numerator}/{x.denominator}", "ok": False,
                "error": f"{type(exc).__name__}: {exc}"}


def run(cfg: ExperimentConfig, out: str | Path, threads: int = 1) -> dict:
    """Execute a config into ``out``; returns the summary that is also written to summary.json."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    f = build_observable(cfg.observable)
    d, provenance = build_alpha(cfg.alpha, f)
    results = parallel_map(_row_job, [(i, cfg.to_dict()) for i in range(len(cfg.x))], threads)
    results.sort(key=lambda r: r["index"])
    files = []
    rows_summary = []
    for r in results:
        i = r["index"]
        entry = {"index": i, "x": r["x"], "ok": r["ok"]}
        if r["ok"]:
            names = {"ensemble": f"ensemble_{i}.csv", "scan": f"scan_{i}.csv", "histogram": f"histogram_{i}.csv"}
            (out / names["ensemble"]).write_text(with_digest_header(csv_text(["n", "S_n"], r["ensemble"]), digest))
            (out / names["scan"]).write_text(scan_csv(r["scan"], f"config_digest={digest}"))
            (out / names["histogram"]).write_text(with_digest_header(r["histogram"], digest))
            files.extend(names.values())
            entry["error_bound"] = r["error_bound"]
            entry["files"] = sorted(names.values())
        else:
            entry["error"] = r["error"]
        rows_summary.append(entry)
    summary = {
        "alpha_digits": len(d),
        "alpha_provenance": provenance,
        "observable": f.to_dict(),
        "N": cfg.horizons["N"],
        "rows": rows_summary,
        "config": cfg.to_dict(),
    }
    (out / "summary.json").write_text(json_text(summary, digest))
    files.append("summary.json")
    write_manifest(out, files, digest)
    return summary


# --- acceptance runs -------------------------------------------------------------


def run_verify(suite: str, seed: int, out: str | Path | None, threads: int = 1, fmt: str = "csv"):
    """Run a suite; returns (results, exit_status). Only exact failures set a nonzero status."""
    if suite == "measure":
        rows = acceptance.measure_battery(seed)
        if out is not None:
            _write_measure(rows, Path(out), seed, fmt)
        return rows, 0
    numbers = [n for n, (_, s, _, _) in acceptance.CRITERIA.items() if suite == "all" or s == suite]
    if not numbers:
        raise ConfigError("--suite", f"unknown suite {suite!r}")
    results = parallel_map(partial(acceptance.run_criterion, seed=seed), numbers, threads)
    status = 1 if any(not r.passed and r.suite == acceptance.EXACT for r in results) else 0
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        digest = hashlib.sha256(f"{__version__}|verify|{suite}|{seed}".encode()).hexdigest()
        rows = [r.to_dict() for r in results]
        for row in rows:
            row.pop("seconds")  # wall time would break byte-for-byte reproducibility
        if fmt == "json":
            name = "verify.json"
            (out / name).write_text(json_text({"suite": suite, "seed": seed, "criteria": rows}, digest))
        else:
            name = "verify.csv"
            header = ["criterion", "title", "suite", "passed", "detail", "seed"]
            (out / name).write_text(with_digest_header(csv_text(header, ([r[h] for h in header] for r in rows)),
                                                       digest))
        write_manifest(out, [name], digest)
    return results, status


def _write_measure(rows: list[dict], out: Path, seed: int, fmt: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(f"{__version__}|measure|{seed}".encode()).hexdigest()
    if fmt == "json":
        name = "measure.json"
        (out / name).write_text(json_text({"rows": rows}, digest))
    else:
        name = "measure.csv"
        header = ["op", "params", "mean", "stderr", "n", "seed"]
        body = ([r["op"], json.dumps(r["params"], sort_keys=True), r["mean"], r["stderr"], r["n"], r["seed"]]
                for r in rows)
        (out / name).write_text(with_digest_header(csv_text(header, body), digest))
    write_manifest(out, [name], digest)
