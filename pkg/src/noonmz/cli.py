"""Command-line front end.

    noonmz fringe-scan --config paper_dl1_0 --out out/ --no-noise
    noonmz hom-scan --config paper_hom --out out/
    noonmz envelope-scan --config paper_single_photon --out out/
    noonmz ghz-noon --n 3 --out out/ --no-noise
    noonmz fit --csv out/scan.csv --column p_D1D2 --out out/

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error,
3 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import json
import math
import sys
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from .analysis import (
    FitError,
    FitReport,
    envelope_amplitude_extraction,
    fit_envelope,
    fit_fringe,
    hom_visibility,
    poisson_errors,
)
from .config import ConfigError, RunConfig, load_config, parse_length
from .elements import BS_CONVENTION
from .experiment import (
    COINCIDENCE_CHANNELS,
    ScanResult,
    Scenario,
    SourceKind,
    fringe_grid,
    ghz_to_noon,
    hom_scan,
    scan,
)
from .fock import ModeLabel, Path, Pol, make_state

EXIT_OK, EXIT_PARSE, EXIT_RUNTIME, EXIT_FIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- output helpers -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_csv(path: FsPath, header: Sequence[str], columns: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_report(path: FsPath, report: dict) -> None:
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def scenario_echo(s: Scenario) -> dict:
    d = dataclasses.asdict(s)
    grid = s.delta_l2_grid_um
    d["delta_l2_grid_um"] = {"start": grid[0], "stop": grid[-1], "points": len(grid)}
    return d


def fit_summary(fit: FitReport, length_unit_nm: float = 1e3) -> dict:
    out = {
        "model": fit.model.value,
        "visibility": fit.visibility,
        "visibility_err": fit.visibility_err,
        "residual_rms": fit.residual_rms,
        "iterations": fit.iterations,
        "params": fit.params,
        "uncertainties": fit.uncertainties,
    }
    if "period" in fit.params:
        out["period_nm"] = fit.params["period"] * length_unit_nm
        out["period_err_nm"] = fit.uncertainties["period"] * length_unit_nm
    if "fwhm" in fit.params:
        out["fwhm_um"] = fit.params["fwhm"]
        out["fwhm_err_um"] = fit.uncertainties["fwhm"]
    return out


# -- scenario handling --------------------------------------------------------

def _scenario(cfg: RunConfig, args) -> Scenario:
    s = cfg.scenario
    if args.seed is not None:
        s = s.with_(seed=args.seed)
    if args.grid_step is not None and args.command in ("fringe-scan", "ghz-noon"):
        g = s.delta_l2_grid_um
        s = s.with_(delta_l2_grid_um=fringe_grid(g[0], g[-1], _step(args)))
    return s


def _step(args) -> float:
    step = parse_length(args.grid_step)
    if not step > 0:
        raise ConfigError("--grid-step must be positive", key="grid-step")
    return step


def _rescaled_grid(grid: Sequence[float], args) -> tuple[float, ...]:
    if args.grid_step is None:
        return tuple(grid)
    return fringe_grid(grid[0], grid[-1], _step(args))


def _fit_channel(res: ScanResult, channel: str) -> FitReport | None:
    """Fit a channel, or None when its expected value does not oscillate."""
    p = res.probabilities[channel]
    if np.ptp(p) <= 1e-12 * max(1e-12, float(np.max(np.abs(p)))):
        return None
    return _fit_counts(res, channel)


def _fit_counts(res: ScanResult, channel: str) -> FitReport:
    return fit_fringe(res.grid, res.counts[channel], poisson=True)


# -- commands -----------------------------------------------------------------

def cmd_fringe_scan(args, cfg: RunConfig, out: FsPath) -> dict:
    s = _scenario(cfg, args)
    res = scan(s, noisy=not args.no_noise)
    _write_scan(res, out / "scan.csv")
    fits = {}
    for c in res.channels:
        write_csv(out / f"scan_{c}.csv", ("delta_L2_um", c, f"n_{c}", f"err_{c}"),
                  (res.grid, res.probabilities[c], res.counts[c], res.errors(c)))
        fit = _fit_channel(res, c)
        fits[c] = fit_summary(fit) if fit else {"flat": True}
    closure = _closure(res)
    return {
        "command": "fringe-scan",
        "fits": fits,
        "closure_max_error": closure,
    }


def _closure(res: ScanResult) -> float:
    p = res.probabilities
    if res.scenario.source is SourceKind.SINGLE_PHOTON:
        eta = res.scenario.coupling_efficiency
        return float(np.max(np.abs(p["P7"] + p["P8"] - eta)))
    # pattern probabilities over the whole ensemble sum to its weight
    total = sum(res.patterns.values())
    return float(np.max(np.abs(total - total[0])))


def _write_scan(res: ScanResult, path: FsPath) -> None:
    header = ["delta_L2_um"]
    cols: list = [res.grid]
    single = res.scenario.source is SourceKind.SINGLE_PHOTON
    names = ("P7", "P8") if single else ("P7", "P8") + COINCIDENCE_CHANNELS
    counted = ("P7", "P8") if single else COINCIDENCE_CHANNELS
    for c in names:
        header.append(c)
        cols.append(res.probabilities[c])
    for c in counted:
        header.append(f"n_{c.removeprefix('p_')}")
        cols.append(res.counts[c])
    for c in counted:
        header.append(f"err_{c.removeprefix('p_')}")
        cols.append(res.errors(c))
    write_csv(path, header, cols)


def cmd_hom_scan(args, cfg: RunConfig, out: FsPath) -> dict:
    s = _scenario(cfg, args)
    grid = _rescaled_grid(cfg.hom_grid_um, args)
    data = hom_scan(s, grid, noisy=not args.no_noise)
    err = poisson_errors(data["counts"])
    write_csv(out / "hom.csv", ("delta_L1_um", "C_norm", "p_coinc", "n_coinc", "err_coinc"),
              (data["grid"], data["normalized"], data["probability"], data["counts"], err))
    if args.no_noise:
        fit = fit_envelope(data["grid"], data["normalized"], dip=True)
        plat, dip = 1.0, float(np.min(data["normalized"]))
    else:
        fit = fit_envelope(data["grid"], data["counts"], err, dip=True)
        plat, dip = fit.params["offset"], float(np.min(data["counts"]))
    return {
        "command": "hom-scan",
        "V_HOM": fit.visibility,
        "V_HOM_err": fit.visibility_err,
        "V_HOM_extrema": hom_visibility(plat, min(max(dip, 0.0), plat)),
        "fwhm_um": fit.params["fwhm"],
        "fit": fit_summary(fit),
    }


def cmd_envelope_scan(args, cfg: RunConfig, out: FsPath) -> dict:
    s = _scenario(cfg, args)
    s = s.with_(spectral=s.spectral.with_(enabled=True))
    n = s.photon_number
    period = s.spectral.lambda0_um / n
    centers = np.asarray(_rescaled_grid(cfg.envelope_grid_um, args))
    if len(centers) > 1 and np.min(np.diff(centers)) <= 2 * period:
        raise ConfigError("envelope step must exceed two fringe periods", key="grid.envelope_step")
    offsets = np.linspace(-period, period, 33)
    dense = (centers[:, None] + offsets[None, :]).ravel()
    res = scan(s.with_(delta_l2_grid_um=tuple(dense)), noisy=not args.no_noise, apply_envelope=True)
    channel = "P7" if n == 1 else "p_D1D2"
    _, amps = envelope_amplitude_extraction(res.grid, res.counts[channel], centers, period * (1 + 1e-9), period=period)
    name = channel.removeprefix("p_")
    write_csv(out / "envelope.csv", ("delta_L2_um", f"amp_{name}"), (centers, amps))
    fit = fit_envelope(centers, amps)
    expected = s.spectral.xi_single_um if n == 1 else s.spectral.xi_pump_um
    return {
        "command": "envelope-scan",
        "channel": channel,
        "fwhm_um": fit.params["fwhm"],
        "configured_coherence_length_um": expected,
        "fit": fit_summary(fit),
    }


def cmd_ghz_noon(args, cfg: RunConfig, out: FsPath) -> dict:
    n = args.n
    s = _scenario(cfg, args).with_(source=SourceKind.GHZ, n_photons=n)
    res = scan(s, noisy=not args.no_noise)
    keys = sorted(res.patterns, key=lambda k: (-k[0], k[1]))
    header = ["delta_L2_um"] + [f"P_{a}_{b}" for a, b in keys] + ["p_D1D2", "p_D3D4", "p_D2D3", "n_D1D2", "err_D1D2"]
    cols = [res.grid] + [res.patterns[k] for k in keys]
    cols += [res.probabilities[c] for c in COINCIDENCE_CHANNELS]
    cols += [res.counts["p_D1D2"], res.errors("p_D1D2")]
    write_csv(out / "ghz.csv", header, cols)
    channel = "P7" if n == 1 else "p_D1D2"
    fit = _fit_counts(res, channel)
    phi = 0.3
    pre = ghz_to_noon(n, phi, s.spectral.lambda0_nm)
    noon = make_state(
        [
            ({ModeLabel(Path.P5, Pol.V, 0): n}, np.exp(1j * n * phi) / math.sqrt(2)),
            ({ModeLabel(Path.P6, Pol.V, 0): n}, 1 / math.sqrt(2)),
        ]
    )
    return {
        "command": "ghz-noon",
        "n_photons": n,
        "channel": channel,
        "period_nm": fit.params["period"] * 1e3,
        "expected_period_nm": s.spectral.lambda0_nm / n,
        "noon_state_matches": pre.allclose(noon, atol=1e-9),
        "fit": fit_summary(fit),
    }


def cmd_fit(args, out: FsPath) -> dict:
    with open(args.csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FitError(f"{args.csv} holds no data rows")
    try:
        x = np.array([float(r[args.x_column]) for r in rows])
        y = np.array([float(r[args.column]) for r in rows])
        err = np.array([float(r[args.err_column]) for r in rows]) if args.err_column else None
    except KeyError as exc:
        raise UsageError(f"column {exc} not found in {args.csv}") from None
    if args.model == "sinusoid":
        fit = fit_fringe(x, y, err)
    else:
        fit = fit_envelope(x, y, err, dip=args.model == "dip")
    return {"command": "fit", "csv": str(args.csv), "column": args.column, "fit": fit_summary(fit)}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="noonmz", description="Simulate the overlap-free two-photon interferometer.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required: bool):
        sp.add_argument("--config", required=config_required, help="bundled config name or path to an INI file")
        sp.add_argument("--out", required=True, type=FsPath, help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--grid-step", help="override the scan step, with unit (e.g. '20 nm')")
        sp.add_argument("--no-noise", action="store_true", help="emit expected values instead of Poisson draws")

    common(sub.add_parser("hom-scan", help="HOM dip at the first splitter"), False)
    common(sub.add_parser("fringe-scan", help="fringes versus the interferometer delay"), True)
    common(sub.add_parser("envelope-scan", help="interference envelope over a wide delay range"), True)
    g = sub.add_parser("ghz-noon", help="N-photon GHZ input, lambda/N fringes")
    common(g, False)
    g.add_argument("--n", type=int, required=True, help="photon number (1-6)")
    f = sub.add_parser("fit", help="fit a column of a CSV file")
    f.add_argument("--csv", required=True, type=FsPath)
    f.add_argument("--column", required=True)
    f.add_argument("--x-column", default="delta_L2_um")
    f.add_argument("--err-column")
    f.add_argument("--model", choices=("sinusoid", "envelope", "dip"), default="sinusoid")
    f.add_argument("--out", required=True, type=FsPath)
    return p


COMMANDS = {
    "fringe-scan": cmd_fringe_scan,
    "hom-scan": cmd_hom_scan,
    "envelope-scan": cmd_envelope_scan,
    "ghz-noon": cmd_ghz_noon,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "fit":
            args.out.mkdir(parents=True, exist_ok=True)
            report = cmd_fit(args, args.out)
            write_report(args.out / "fit_report.json", report)
            return EXIT_OK
        if args.command == "ghz-noon" and not 1 <= args.n <= 6:
            raise UsageError("--n must lie in 1..6")
        default_cfg = {"hom-scan": "paper_hom"}.get(args.command)
        cfg = load_config(args.config or default_cfg)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"noonmz: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FitError as exc:
        print(f"noonmz: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except Exception as exc:  # noqa: BLE001
        print(f"noonmz: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        report = COMMANDS[args.command](args, cfg, args.out)
    except ConfigError as exc:
        print(f"noonmz: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FitError as exc:
        print(f"noonmz: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except Exception as exc:  # noqa: BLE001
        print(f"noonmz: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    report["config"] = cfg.name
    report["scenario"] = scenario_echo(_scenario(cfg, args))
    report["conventions"] = {
        "beam_splitter": BS_CONVENTION,
        "phase": "phi = 2 pi dL2 / lambda0",
        "detectors": "P7 splitter -> D1 (transmitted), D2 (reflected); P8 splitter -> D3, D4",
    }
    report["noise"] = not args.no_noise
    write_report(args.out / "report.json", report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
