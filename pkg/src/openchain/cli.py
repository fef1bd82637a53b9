"""Command-line front end: ``openchain {check,spectrum,bethe,sov} [flags]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bethe import BetheSolution, track_eigenvalues
from .boundary import BoundaryParams
from .checks import GENERIC_SUITES, SUITES, CheckRecord, resolve_suites, run_check_suite
from .errors import DegenerateError, WorkbenchError
from .rmatrix import HALF, SpinLabel
from .transfer import ModelParams, transfer

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "spin": "1/2",
    "sites": 2,
    "eta": 1.0,
    "p": 0.8,
    "q": 1.2,
    "xi": 0.6,
    "varsigma": 0.0,
    "theta": None,
    "samples": 10,
    "tol": None,
    "seed": 0,
    "suite": "all",
    "out": None,
    "format": "json",
}
COMMAND_SUITES = {
    "check": None,
    "spectrum": "",
    "bethe": "tq,bethe",
    "sov": "sov,scalar",
}


class UsageError(Exception):
    pass


def parse_complex(text) -> complex:
    """``1.5``, ``0.3+0.1i``, ``-2i`` or a ``[re, im]`` pair."""
    if isinstance(text, (int, float, complex)) and not isinstance(text, bool):
        return complex(text)
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return complex(float(text[0]), float(text[1]))
    if not isinstance(text, str):
        raise UsageError(f"cannot read {text!r} as a complex number")
    t = text.strip().replace(" ", "")
    if t.endswith("i"):
        t = t[:-1] + "j"
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"cannot read {text!r} as a complex number") from None


def parse_theta(text, N: int):
    if text is None:
        return None
    if isinstance(text, str) and text.strip() == "zero":
        return (0j,) * N
    items = text if isinstance(text, list) else [x for x in str(text).split(",") if x.strip()]
    values = tuple(parse_complex(x) for x in items)
    if len(values) != N:
        raise UsageError(f"--theta gives {len(values)} values for {N} sites")
    return values


def seeded_theta(N: int, seed: int, params_factory) -> tuple[complex, ...]:
    """Inhomogeneities drawn from the seed, redrawn until they are generic."""
    rng = np.random.default_rng(seed)
    for _ in range(100):
        theta = tuple(complex(round(x, 6)) for x in rng.uniform(-0.4, 0.4, N))
        try:
            params_factory(theta).check_generic()
        except DegenerateError:
            continue
        return theta
    raise UsageError("could not draw generic inhomogeneities")


def fmt_complex(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    suites: list[str]
    samples: int
    seed: int
    tol: float | None
    out: str | None
    format: str
    theta_source: str

    def to_json(self) -> dict:
        p = self.params
        bp = p.boundary
        return {
            "command": self.command,
            "spin": str(p.s),
            "sites": p.N,
            "eta": fmt_complex(p.eta),
            "p": fmt_complex(bp.p),
            "q": fmt_complex(bp.q),
            "xi": fmt_complex(bp.xi),
            "varsigma": fmt_complex(bp.varsigma),
            "theta": [fmt_complex(x) for x in p.theta],
            "theta_source": self.theta_source,
            "suites": self.suites,
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "dim": p.dim,
        }


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spin", help='spin label, e.g. "1/2", "1", "3/2"')
    common.add_argument("--sites", type=int, help="number of sites N")
    common.add_argument("--eta", help="crossing parameter (re or re+imi)")
    common.add_argument("--p", help="boundary parameter p")
    common.add_argument("--q", help="boundary parameter q")
    common.add_argument("--xi", help="boundary parameter xi")
    common.add_argument("--varsigma", help="boundary parameter varsigma")
    common.add_argument("--theta", help='comma list of inhomogeneities or "zero"')
    common.add_argument("--samples", type=int, help="random spectral points per identity")
    common.add_argument("--tol", type=float, help="override every tolerance")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--config", help="JSON file with defaults (flags win)")
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--format", choices=["json", "csv"], help="report format")

    parser = argparse.ArgumentParser(prog="openchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check", parents=[common], help="run identity check suites")
    check.add_argument("--suite", help=f"comma list from {', '.join(SUITES)}, all")
    sub.add_parser("spectrum", parents=[common], help="eigenvalues of t(u) at sample points")
    sub.add_parser("bethe", parents=[common], help="Bethe roots, residuals and fidelities")
    sub.add_parser("sov", parents=[common], help="separated-variable basis and scalar products")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    merged = dict(DEFAULTS)
    if ns.config:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(loaded)
    for key in DEFAULTS:
        val = getattr(ns, key, None)
        if val is not None:
            merged[key] = val
    command = ns.command
    if COMMAND_SUITES[command] is not None:
        merged["suite"] = COMMAND_SUITES[command]
    if merged["format"] not in ("json", "csv"):
        raise UsageError(f"unknown format {merged['format']!r}")

    try:
        spin = SpinLabel.of(merged["spin"])
        N = int(merged["sites"])
        seed = int(merged["seed"])
        samples = int(merged["samples"])
        if samples < 1:
            raise UsageError("--samples must be positive")
        tol = None if merged["tol"] is None else float(merged["tol"])
        bp = BoundaryParams(
            parse_complex(merged["p"]),
            parse_complex(merged["q"]),
            parse_complex(merged["xi"]),
            parse_complex(merged["varsigma"]),
        )
        eta = parse_complex(merged["eta"])

        def factory(theta):
            return ModelParams(spin, N, eta, bp, theta)

        theta = parse_theta(merged["theta"], N)
        source = "given"
        if theta is None:
            factory((0j,) * N)  # dimension and basic validation before drawing
            theta = seeded_theta(N, seed, factory)
            source = "seed"
        params = factory(theta)
        suites_arg = merged["suite"]
        names = suites_arg if isinstance(suites_arg, list) else str(suites_arg).split(",")
        suites = resolve_suites(names)
    except UsageError:
        raise
    except (ValueError, TypeError, WorkbenchError) as exc:
        raise UsageError(str(exc)) from None

    generic_needed = [s for s in suites if s in GENERIC_SUITES]
    if generic_needed:
        try:
            params.check_generic()
        except DegenerateError as exc:
            if command == "sov" or "all" not in str(merged["suite"]).split(","):
                raise UsageError(f"suites {', '.join(generic_needed)} need generic theta: {exc}") from None
            suites = [s for s in suites if s not in GENERIC_SUITES]
            print(f"note: skipping {', '.join(generic_needed)} (theta not generic)", file=sys.stderr)
    if any(s in suites for s in ("gauge", "sov", "scalar", "bethe")) and bp.varsigma != 0:
        raise UsageError("gauge, sov, scalar and bethe suites need varsigma = 0")
    return RunConfig(command, params, suites, samples, seed, tol, merged["out"], merged["format"], source)


# ---------------------------------------------------------------------------
# report assembly

def bethe_summary(sol: BetheSolution) -> dict:
    return {
        "eigen_index": sol.index,
        "roots": [fmt_complex(r) for r in sorted(sol.roots, key=lambda z: (round(z.real, 9), round(z.imag, 9)))],
        "tq_residual": sol.tq_residual,
        "bae_residual": sol.bae_residual,
        "fidelity_left": sol.fidelity_left,
        "fidelity_right": sol.fidelity_right,
        "eigen_residual": sol.eigen_residual,
        "refined": sol.refined,
    }


def spectrum_table(cfg: RunConfig) -> list[dict]:
    params = cfg.params
    tracks, ustar = track_eigenvalues(params, cfg.seed)
    rng = np.random.default_rng(cfg.seed + 3)
    points = [ustar] + [complex(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)) * params.eta
                        for _ in range(cfg.samples - 1)]
    rows = []
    for u in points:
        for tr in tracks:
            rows.append({"eigen_index": tr.index, "u": fmt_complex(u), "value": fmt_complex(tr(u))})
    return rows


def spectrum_checks(cfg: RunConfig) -> list[CheckRecord]:
    params = cfg.params
    tracks, _ = track_eigenvalues(params, cfg.seed)
    rng = np.random.default_rng(cfg.seed + 3)
    trace = resid = 0.0
    for _ in range(cfg.samples):
        u = complex(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)) * params.eta
        t = transfer(params, HALF, u)
        trace = max(trace, abs(sum(tr(u) for tr in tracks) - np.trace(t)) / np.linalg.norm(t))
        resid = max(resid, max(tr.residual(u) for tr in tracks) / np.linalg.norm(t, 2))
    tol = cfg.tol
    return [
        CheckRecord("spectrum.trace", "completeness of the spectrum", trace, tol or 1e-8),
        CheckRecord("spectrum.eigen_residual", "commuting transfer matrices", resid, tol or 1e-8),
    ]


def build_report(cfg: RunConfig) -> tuple[dict, list[CheckRecord], list[BetheSolution]]:
    ctx = run_check_suite(cfg.params, cfg.suites, samples=cfg.samples, seed=cfg.seed, tol=cfg.tol)
    records = list(ctx.records)
    report = {"config": cfg.to_json()}
    sols: list[BetheSolution] = []
    if cfg.command == "spectrum":
        records += spectrum_checks(cfg)
        report["spectrum"] = spectrum_table(cfg)
    if ctx._bethe is not None:
        sols = ctx._bethe
    report["checks"] = [r.to_json() for r in records]
    report["bethe"] = [bethe_summary(s) for s in sols]
    report["pass"] = all(r.passed for r in records)
    return report, records, sols


def render(report: dict, records: list[CheckRecord], sols: list[BetheSolution], cfg: RunConfig) -> str:
    if cfg.format == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if cfg.command == "bethe":
        writer.writerow(["eigen_index", "lambda_re", "lambda_im", "bae_residual", "fidelity"])
        for sol in sols:
            for root in sorted(sol.roots, key=lambda z: (round(z.real, 9), round(z.imag, 9))):
                writer.writerow([sol.index, repr(root.real), repr(root.imag),
                                 repr(sol.bae_residual), repr(sol.fidelity)])
    elif cfg.command == "spectrum":
        writer.writerow(["eigen_index", "u_re", "u_im", "value_re", "value_im"])
        for row in report["spectrum"]:
            u, v = complex(*_pair(row["u"])), complex(*_pair(row["value"]))
            writer.writerow([row["eigen_index"], repr(u.real), repr(u.imag), repr(v.real), repr(v.imag)])
    else:
        writer.writerow(["name", "anchor", "residual", "tol", "pass"])
        for r in records:
            writer.writerow([r.name, r.anchor, repr(r.residual), repr(r.tol), str(r.passed).lower()])
    return buf.getvalue()


def _pair(v):
    return (v, 0.0) if not isinstance(v, list) else tuple(v)


def emit_report(text: str, path: str | None) -> None:
    """Write atomically via a temporary file in the target directory."""
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{target.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, target)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve_config(ns)
    except UsageError as exc:
        print(f"openchain: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report, records, sols = build_report(cfg)
    except WorkbenchError as exc:
        report = {"config": cfg.to_json(), "checks": [], "bethe": [], "pass": False, "error": str(exc)}
        records, sols = [], []
        emit_report(json.dumps(report, sort_keys=True, indent=2) + "\n" if cfg.format == "json" else "", cfg.out)
        print(f"openchain: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    emit_report(render(report, records, sols, cfg), cfg.out)
    return EXIT_OK if report["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
