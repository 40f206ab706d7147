"""Batch command line: ``qubitnoise <subcommand> [--config C] [--seed S] [--out DIR] [--jobs N]``.

Every run writes into ``--out``:

* the stage artifacts (CSV/JSON),
* ``config.resolved.json``, the fully resolved configuration,
* ``report.json``, the numeric payload (byte-identical on reruns),
* ``timings.json``, wall-clock timings kept apart from the payload,
* ``manifest.json``, SHA-256 of every file above plus the config hash.

Exit codes: 0 success, 2 schema or input error, 3 numerical or fit error.
"""

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .config import PipelineConfig
from .dephasing import (
    coherence_exponent,
    cpmg_grid,
    fit_trace,
    monte_carlo_coherence,
    simulate_signal,
)
from .errors import DomainError, NumericalError, QubitNoiseError, SchemaError
from .filters import CPMGSequence, filter_table, rectangular_approximation
from .loss import ParticipationTable, fit_loss_tangents, guide_curves, t1_limit
from .noise import PowerLawPSD
from .spectroscopy import extract_psd, fit_power_law
from .transduction import FluxTuningCurve, TransmonModel, flux_sensitivity

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3


class StageError(Exception):
    """Wraps a package error with the name of the stage that raised it."""

    def __init__(self, stage, error):
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error


@dataclass
class RunReport:
    command: str
    config_hash: str
    version: str = __version__
    stages: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def payload(self):
        """Everything except timings; deterministic for a given config and input."""
        return {"command": self.command, "config_hash": self.config_hash,
                "version": self.version, "stages": self.stages}


class _Stage:
    def __init__(self, report, name):
        self.report = report
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.report.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and isinstance(exc, QubitNoiseError):
            raise StageError(self.name, exc) from exc
        return False


# --------------------------------------------------------------------------
# helpers


def _out_dir(config):
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SchemaError(f"cannot create output directory: {exc.strerror}", out) from None
    return out


def _source(config):
    tc = config.transduction
    if tc.kind == "transmon":
        return TransmonModel(tc.ej_sum_hz, tc.ec_hz, tc.asymmetry, tc.flux_offset_phi0)
    if tc.kind == "curve":
        if tc.curve_csv is None:
            raise SchemaError("transduction.curve_csv is required for kind 'curve'")
        cols, _ = io.read_csv(tc.curve_csv, ("flux_phi0", "freq_hz"))
        return FluxTuningCurve(np.array(cols["flux_phi0"]), np.array(cols["freq_hz"]))
    raise SchemaError(f"transduction.kind must be 'transmon' or 'curve', got {tc.kind!r}")


def _psd_model(config):
    return PowerLawPSD.from_dict(vars(config.synthesis.psd))


def _taus(config):
    sc = config.synthesis
    if not 0 < sc.tau_min_s < sc.tau_max_s or sc.n_tau < 2:
        raise DomainError("synthesis needs 0 < tau_min_s < tau_max_s and n_tau >= 2")
    return np.logspace(math.log10(sc.tau_min_s), math.log10(sc.tau_max_s), sc.n_tau)


def _fit_one(args):
    trace, fc = args
    return fit_trace(trace, noise_floor_sigma=fc["noise_floor_sigma"],
                     n_restarts=fc["n_restarts"], fit_tau0=fc["fit_tau0"])


def _fit_traces(traces, config):
    fc = vars(config.fit)
    jobs = max(1, int(config.jobs))
    work = [(t, fc) for t in traces]
    if jobs == 1 or len(work) == 1:
        return [_fit_one(w) for w in work]
    # map preserves input order, so the merge is deterministic
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_fit_one, work))


def _load_traces(config):
    if config.inputs.traces_dir is None:
        raise SchemaError("inputs.traces_dir is required")
    return io.read_trace_dir(config.inputs.traces_dir)


def _finish(report, config, out):
    """Write resolved config, payload, timings and manifest."""
    io.dump_json(config.to_dict(), out / "config.resolved.json")
    io.dump_json(report.payload(), out / "report.json")
    io.dump_json(report.timings, out / "timings.json")
    names = sorted(set(report.files) | {"config.resolved.json", "report.json"})
    manifest = {
        "version": report.version,
        "config_hash": report.config_hash,
        "files": {n: io.sha256_file(out / n) for n in names},
    }
    io.dump_json(manifest, out / "manifest.json")
    return report


# --------------------------------------------------------------------------
# runners


def run_synthesis(config):
    """Write synthetic traces (one CSV + sidecar per pulse count) and ``truth.json``."""
    report = RunReport("synthesize", config.config_hash())
    out = _out_dir(config)
    sc = config.synthesis
    with _Stage(report, "synthesize"):
        source = _source(config)
        flux = config.transduction.flux_phi0
        sens = flux_sensitivity(source, flux)
        psd = _psd_model(config)
        taus = _taus(config)
        traces = simulate_signal(
            psd, sens, cpmg_grid(sc.n_pulses, taus, sc.tau0_s), sc.t1_s, sc.a0, sc.a,
            sc.noise_rms, config.seed, acquisition_time=sc.acquisition_time_s,
            qubit_id=sc.qubit_id, flux=flux,
        )
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for tr in traces:
            csv_path, side = io.write_trace(tr, tdir / f"trace_N{tr.n_pulses:03d}.csv")
            report.files += [str(csv_path.relative_to(out)), str(side.relative_to(out))]
        truth = {
            "psd": psd.to_dict(),
            "transduction": source.to_dict() if hasattr(source, "to_dict") else None,
            "flux_phi0": flux,
            "sensitivity_rad_per_s_per_phi0": sens,
            "n_pulses": list(sc.n_pulses),
            "tau_s": taus,
            "t1_s": sc.t1_s,
            "a0": sc.a0,
            "a": sc.a,
            "noise_rms": sc.noise_rms,
            "tau0_s": sc.tau0_s,
            "acquisition_time_s": sc.acquisition_time_s,
            "seed": config.seed,
        }
        io.dump_json(truth, out / "truth.json")
        report.files.append("truth.json")
        report.stages["synthesize"] = {
            "n_traces": len(traces),
            "n_records": int(sum(len(t) for t in traces)),
            "truth": truth["psd"],
        }
    return _finish(report, config, out)


def _fit_stage(report, config, out, traces):
    with _Stage(report, "fit-trace"):
        fits = _fit_traces(traces, config)
        summary = [dict(f.to_dict(), qubit_id=t.qubit_id) for t, f in zip(traces, fits)]
        io.dump_json(summary, out / "fits.json")
        report.files.append("fits.json")
        report.stages["fit-trace"] = summary
    return fits


def _extract_stage(report, config, out, traces, fits):
    with _Stage(report, "extract-psd"):
        flux = config.transduction.flux_phi0
        est = extract_psd(traces, fits, _source(config), flux,
                          noise_floor_sigma=config.fit.noise_floor_sigma)
        io.write_psd(est, out / "psd.csv")
        report.files.append("psd.csv")
        report.stages["extract-psd"] = {
            "n_points": int(est.freq.size),
            "f_min_hz": float(est.freq.min()),
            "f_max_hz": float(est.freq.max()),
            "n_pulses": sorted(int(n) for n in set(est.n_pulses.tolist())),
        }
    return est


def _power_law_stage(report, config, out, est):
    with _Stage(report, "fit-psd"):
        fr = config.fit.freq_range_hz
        pl = fit_power_law(est, None if fr is None else tuple(fr), pivot=config.fit.pivot_hz)
        io.dump_json(pl.to_dict(), out / "power_law.json")
        report.files.append("power_law.json")
        report.stages["fit-psd"] = pl.to_dict()
    return pl


def run_fit_traces(config):
    report = RunReport("fit-trace", config.config_hash())
    out = _out_dir(config)
    with _Stage(report, "ingest"):
        traces = _load_traces(config)
    _fit_stage(report, config, out, traces)
    return _finish(report, config, out)


def run_extract_psd(config):
    report = RunReport("extract-psd", config.config_hash())
    out = _out_dir(config)
    with _Stage(report, "ingest"):
        traces = _load_traces(config)
    fits = _fit_stage(report, config, out, traces)
    _extract_stage(report, config, out, traces, fits)
    return _finish(report, config, out)


def run_spectroscopy(config):
    """Trace fits, PSD inversion and power-law fit.

    With ``inputs.psd_csv`` set and no trace directory, only the power-law
    fit runs, on the stored estimate.
    """
    report = RunReport("fit-psd", config.config_hash())
    out = _out_dir(config)
    if config.inputs.traces_dir is None and config.inputs.psd_csv is not None:
        with _Stage(report, "ingest"):
            est = io.read_psd(config.inputs.psd_csv)
    else:
        with _Stage(report, "ingest"):
            traces = _load_traces(config)
        fits = _fit_stage(report, config, out, traces)
        est = _extract_stage(report, config, out, traces, fits)
    _power_law_stage(report, config, out, est)
    return _finish(report, config, out)


def run_loss_budget(config):
    report = RunReport("loss-budget", config.config_hash())
    out = _out_dir(config)
    lc = config.loss
    with _Stage(report, "ingest"):
        if config.inputs.participations_csv is None or config.inputs.t1_csv is None:
            raise SchemaError("inputs.participations_csv and inputs.t1_csv are required")
        table = io.read_participations(config.inputs.participations_csv)
        t1_data = io.read_t1_dataset(config.inputs.t1_csv)
        missing = [d for d in t1_data if d not in table.design_ids]
        if missing:
            raise SchemaError(f"T1 rows without participations: {missing}", config.inputs.t1_csv)
        rows = [table[d] for d in t1_data]
        t1 = np.array([v[0] for v in t1_data.values()])
        fq = np.array([v[1] for v in t1_data.values()])
    with _Stage(report, "fit-loss"):
        fit = fit_loss_tangents(rows, t1, fq, free=tuple(lc.free),
                                fit_other_rate=lc.fit_other_rate, t1_rel_sigma=lc.t1_rel_sigma)
        io.dump_json(fit.to_dict(), out / "loss_model.json")
        predicted = [t1_limit(r, fit.model, f) for r, f in zip(rows, fq)]
        io.write_csv(out / "predicted_vs_measured.csv",
                     ("design_id", "p_ms", "f_q_hz", "t1_measured_s", "t1_predicted_s"),
                     ([r.design_id, r.p_ms, f, m, p] for r, f, m, p in zip(rows, fq, t1, predicted)))
        p_grid = np.logspace(math.log10(lc.guide_p_ms_min), math.log10(lc.guide_p_ms_max),
                             lc.guide_points)
        g = guide_curves(p_grid, tan_ms=lc.tan_ms_reference, tan_bulk=fit.model.tan_bulk,
                         p_bulk=lc.guide_p_bulk, f_q=lc.guide_f_q_hz)
        io.write_csv(out / "guide_curves.csv",
                     ("p_ms", "t1_constant_tangent_s", "t1_bulk_s", "t1_combined_s"),
                     zip(g["p_ms"], g["constant_tangent"], g["bulk"], g["combined"]))
        report.files += ["loss_model.json", "predicted_vs_measured.csv", "guide_curves.csv"]
        report.stages["loss-budget"] = fit.to_dict()
    return _finish(report, config, out)


def run_filter(config):
    report = RunReport("filter-fn", config.config_hash())
    out = _out_dir(config)
    fc = config.filter
    with _Stage(report, "filter-fn"):
        seq = CPMGSequence(fc.n_pulses, fc.tau_s)
        omega_max = fc.omega_max_rad_s or 8 * math.pi * fc.n_pulses / fc.tau_s
        omega, g = filter_table(seq, omega_max, fc.n_points)
        io.write_csv(out / "filter.csv", ("omega_rad_s", "g"), zip(omega, g))
        rect = rectangular_approximation(seq)
        summary = {
            "n_pulses": fc.n_pulses,
            "tau_s": fc.tau_s,
            "omega_c_rad_s": rect.omega_c,
            "freq_c_hz": rect.freq_c,
            "height": rect.height,
            "width_rad_s": rect.width,
            "area_rad_s": rect.area,
            "truncated_fraction": rect.truncated_fraction,
        }
        io.dump_json(summary, out / "rect_filter.json")
        report.files += ["filter.csv", "rect_filter.json"]
        report.stages["filter-fn"] = summary
    return _finish(report, config, out)


def run_mc_validate(config):
    report = RunReport("mc-validate", config.config_hash())
    out = _out_dir(config)
    mc = config.monte_carlo
    with _Stage(report, "mc-validate"):
        sens = flux_sensitivity(_source(config), config.transduction.flux_phi0)
        psd = _psd_model(config)
        seq = CPMGSequence(mc.n_pulses, mc.tau_s)
        t_acq = mc.acquisition_time_s or 20.0 * mc.tau_s
        chi = coherence_exponent(psd, sens, seq, t_acq)
        res = monte_carlo_coherence(psd, sens, seq, mc.n_traj, config.seed,
                                    acquisition_time=t_acq, n_bootstrap=mc.n_bootstrap)
        tol = max(0.02, 3 * res.stderr)
        summary = {
            "n_pulses": mc.n_pulses,
            "tau_s": mc.tau_s,
            "chi": chi,
            "coherence_integral": math.exp(-chi),
            "coherence_mc": res.coherence,
            "stderr_mc": res.stderr,
            "gaussian_coherence_mc": res.gaussian_coherence,
            "tolerance": tol,
            "agrees": bool(abs(res.coherence - math.exp(-chi)) <= tol),
            "n_traj": res.n_traj,
            "dt_s": res.dt,
            "acquisition_time_s": res.acquisition_time,
        }
        io.dump_json(summary, out / "mc_validate.json")
        report.files.append("mc_validate.json")
        report.stages["mc-validate"] = summary
    return _finish(report, config, out)


COMMANDS = {
    "synthesize": run_synthesis,
    "fit-trace": run_fit_traces,
    "extract-psd": run_extract_psd,
    "fit-psd": run_spectroscopy,
    "loss-budget": run_loss_budget,
    "filter-fn": run_filter,
    "mc-validate": run_mc_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="qubitnoise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, help="worker processes for per-trace fits")
    return parser


def resolve_config(args):
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    changes = {k: getattr(args, k) for k in ("seed", "out", "jobs") if getattr(args, k) is not None}
    if "seed" in changes and not 0 <= changes["seed"] < 2**64:
        raise SchemaError("--seed must be an unsigned 64-bit integer")
    return config.replace(**changes)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.error, NumericalError) else EXIT_SCHEMA
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QubitNoiseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
