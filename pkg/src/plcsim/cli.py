"""Command-line entry points.

``plcsim simulate`` (also installed as the bare ``simulate`` command) runs a
seeded sweep, writes the delimited results plus a JSON snapshot, renders the
report figures next to them, and can dump the per-probe chain traces.

Config files are YAML with optional ``ofdm``, ``noise``, ``acdl`` and ``run``
sections whose keys mirror the dataclass fields; command-line flags override
file values. Exit status is nonzero if any sweep point failed, with a
per-point report on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np
import yaml

from . import acdl as acdl_mod
from . import noise as noise_mod
from .harness import CHAINS, LinkConfig, SweepSpec, emit_results, run_sweep
from .ofdm import OfdmConfig
from .signals import estimate_psd, write_psd_csv, write_trace_csv


def parse_values(text: str) -> list[float]:
    """Parse '0:2:14' (start:step:stop, inclusive) or '0,2,4' lists."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError("range syntax is start:step:stop")
        start, step, stop = parts
        if step == 0:
            raise ValueError("range step must be nonzero")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(n, 0))]
    return [float(p) for p in text.split(",") if p.strip()]


_OFDM_KEY_ALIASES = {
    "data_carrier_lo": "data_carrier_lo",
    "data_carrier_hi": "data_carrier_hi",
    "fs_adc_hz": "fs_adc_hz",
    "rolloff": "rrc_rolloff",
}
_ACDL_KEY_ALIASES = {"tau_s": "tau_s", "t0_s": "t0_s"}


def _build_link(cfg: dict) -> LinkConfig:
    ofdm_kw = dict(cfg.get("ofdm", {}))
    for alias, name in _OFDM_KEY_ALIASES.items():
        if alias in ofdm_kw and alias != name:
            ofdm_kw[name] = ofdm_kw.pop(alias)
    noise_kw = dict(cfg.get("noise", {}))
    acdl_kw = dict(cfg.get("acdl", {}))
    run_kw = dict(cfg.get("run", {}))
    link_fields = {f.name for f in dataclasses.fields(LinkConfig)}
    link_kw = {k: v for k, v in run_kw.items() if k in link_fields and k not in ("ofdm", "noise", "acdl")}
    ofdm = OfdmConfig(**ofdm_kw)
    if "signal_bandwidth_hz" not in acdl_kw:
        acdl_kw["signal_bandwidth_hz"] = ofdm.signal_bandwidth_hz
    return LinkConfig(ofdm=ofdm, noise=noise_mod.NoiseConfig(**noise_kw),
                      acdl=acdl_mod.AcdlConfig(**acdl_kw), **link_kw)


def _dump_probes(link: LinkConfig, seed: int, out_dir: Path) -> None:
    from .harness import _frame_bits, _modulate_frame, calibrate_link
    from .plots import plot_probe_panels, plot_qtf_convergence

    out_dir.mkdir(parents=True, exist_ok=True)
    calib = calibrate_link(link, seed)
    ofdm = link.ofdm
    bits = _frame_bits(ofdm, link.preamble_symbols + 8, seed)
    tx = _modulate_frame(ofdm, bits)
    nz = noise_mod.realize_noise(link.noise, tx.duration, tx.sample_rate,
                                 calib.noise_targets, seed + 1, n_samples=len(tx))
    for tag, comp in (("thermal", nz.awgn), ("cyclostationary", nz.cyclostationary),
                      ("asynchronous", nz.asynchronous)):
        write_trace_csv(comp, out_dir / f"noise_{tag}.csv")
    r = tx.with_samples(tx.samples + nz.total(), "channel")
    res = acdl_mod.acdl_process(r, calib.acdl_cfg, ofdm.oversample_factor,
                                collect_probes=True, init_qtf=calib.warm_qtf,
                                aux_stride=64)
    for tag, buf in res.probes.items():
        write_trace_csv(buf, out_dir / f"probe_{tag}.csv")
        write_psd_csv(estimate_psd(buf, min(8192, len(buf))), out_dir / f"psd_{tag}.csv")
    plot_probe_panels(res.probes, out_dir / "probe_panels.png")
    if res.aux is not None:
        plot_qtf_convergence(res.aux, tx.sample_rate, out_dir / "qtf_tracking.png")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plcsim", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command")
    sim = sub.add_parser("simulate", help="run a seeded Monte Carlo sweep")
    _add_simulate_args(sim)
    return p


def _add_simulate_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file")
    p.add_argument("--axis", choices=("eb_n0", "sir", "beta", "threshold"))
    p.add_argument("--values", type=str, help="sweep values, '0:2:14' or '0,4,8'")
    p.add_argument("--chain", choices=CHAINS)
    p.add_argument("--ebn0", type=float, help="fixed Eb/N0 in dB (when not the axis)")
    p.add_argument("--sir", type=float, help="fixed SIR in dB (when not the axis)")
    p.add_argument("--beta", type=float, help="fixed Tukey coefficient")
    p.add_argument("--seed", type=int)
    p.add_argument("--bits-min", type=int, dest="bits_min")
    p.add_argument("--stop-at-errors", type=int, dest="stop_at_errors")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV output path")
    p.add_argument("--json", type=Path, dest="json_out", help="JSON output path")
    p.add_argument("--dump-probes", type=Path, dest="dump_probes", metavar="DIR")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _run_simulate(args: argparse.Namespace) -> int:
    cfg = {}
    if args.config:
        cfg = yaml.safe_load(Path(args.config).read_text()) or {}
    run_cfg = dict(cfg.get("run", {}))

    axis = args.axis or run_cfg.get("axis", "eb_n0")
    chain = args.chain or run_cfg.get("chain", "linear")
    if args.values is not None:
        values = parse_values(args.values)
    elif "values" in run_cfg:
        values = [float(v) for v in run_cfg["values"]]
    else:
        values = [float(args.ebn0)] if (axis == "eb_n0" and args.ebn0 is not None) else [10.0]
    seed = args.seed if args.seed is not None else int(run_cfg.get("seed", 42))
    bits_min = args.bits_min if args.bits_min is not None else int(run_cfg.get("bits_min", 100_000))
    stop = args.stop_at_errors if args.stop_at_errors is not None else run_cfg.get("stop_at_errors", 100)
    out = args.out or (Path(run_cfg["out"]) if "out" in run_cfg else Path("results.csv"))

    link = _build_link(cfg)
    noise_over = {}
    if args.ebn0 is not None and axis != "eb_n0":
        noise_over["eb_n0_db"] = args.ebn0
    if args.sir is not None and axis != "sir":
        noise_over["sir_db"] = args.sir
    if noise_over:
        link = link.replace(noise=dataclasses.replace(link.noise, **noise_over))
    if args.beta is not None and axis != "beta":
        link = link.replace(acdl=link.acdl.replace(beta=args.beta))

    spec = SweepSpec(axis=axis, values=tuple(values), chain=chain,
                     bits_min=bits_min, stop_at_errors=stop, base_seed=seed)
    try:
        results = run_sweep(spec, link, n_jobs=args.jobs)
        status = 0
    except RuntimeError as exc:
        results = getattr(exc, "results", [])
        print(f"error: {exc}", file=sys.stderr)
        status = 1

    if results:
        emit_results(results, "csv", out, link=link, spec=spec)
        json_path = args.json_out or out.with_suffix(".json")
        emit_results(results, "json", json_path, link=link, spec=spec)
        print(f"wrote {out} and {json_path}")
        if not args.no_figures:
            from .plots import render_report
            for fig_path in render_report(results, out, axis):
                print(f"wrote {fig_path}")
    if args.dump_probes:
        _dump_probes(link.replace(chain="acdl"), seed, args.dump_probes)
        print(f"wrote probe dumps under {args.dump_probes}")
    return status


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    if args.command == "simulate":
        return _run_simulate(args)
    return 2


def main_simulate(argv: list[str] | None = None) -> int:
    """Entry point for the bare ``simulate`` console script."""
    p = argparse.ArgumentParser(prog="simulate", description="run a seeded Monte Carlo sweep")
    _add_simulate_args(p)
    return _run_simulate(p.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
