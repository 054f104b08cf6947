"""``dcqe`` command line: simulate, analyze, audit, report, presets.

Exit codes: 0 success, 2 validation failure, 3 audit found a paradox
topology, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from ..scenarios import run_scenario
from ..spacetime import Verdict, audit_topology
from .config import PRESET_DIR_ENV, ConfigError, ScenarioConfig, config_from_dict, list_presets, preset_path, resolve_config
from .report import analyze_stream
from .streams import StreamFormatError, StreamHeader, read_stream, write_stream

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARADOX = 3
EXIT_IO = 4

log = logging.getLogger("dcqe")


class HashMismatch(Exception):
    pass


def _load(ref: str, seed: int | None = None, n: int | None = None) -> ScenarioConfig:
    cfg = resolve_config(ref)
    return cfg.with_overrides(seed, n) if seed is not None or n is not None else cfg


def simulate(cfg: ScenarioConfig, out: Path, chunks: int = 1) -> dict:
    """Run the scenario and write the stream file; returns a summary."""
    start = time.perf_counter()
    stream = run_scenario(cfg.scenario, cfg.model, cfg.seed, cfg.n_emissions, n_chunks=chunks)
    header = StreamHeader(1, cfg.seed, cfg.hash, cfg.n_emissions, len(stream), cfg.data)
    write_stream(out, stream, header)
    return {
        "out": str(out),
        "n_emissions": cfg.n_emissions,
        "n_events": len(stream),
        "duration_s": float(stream.t.max() - stream.t.min()),
        "counts": stream.counts(),
        "elapsed_s": round(time.perf_counter() - start, 3),
    }


def analyze(stream_path: Path, outdir: Path, cfg: ScenarioConfig | None = None, force: bool = False):
    """Analyze one stream file.  Without ``cfg`` the embedded config is used."""
    header, stream = read_stream(stream_path)
    embedded = config_from_dict(header.config, f"{stream_path} (embedded config)")
    if embedded.hash != header.scenario_hash and not force:
        raise HashMismatch(f"{stream_path}: embedded config does not match header hash")
    if cfg is None:
        cfg = embedded
    else:
        cfg = cfg.with_overrides(header.seed, header.n_emissions)
        if cfg.hash != header.scenario_hash:
            if not force:
                raise HashMismatch(
                    f"{stream_path}: scenario hash {header.scenario_hash[:12]} does not match config "
                    f"{cfg.hash[:12]}; pass --force-hash-mismatch to analyze anyway"
                )
            log.warning("analyzing %s against a config with a different hash", stream_path)
    return analyze_stream(cfg, stream, outdir)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _summarize(report) -> dict:
    d = report.data
    out = {"scenario": d["scenario"], "model": d["model"], "counts": d["counts"]}
    if "phase_difference" in d:
        out["phase_difference_rad"] = d["phase_difference"]["rad"]
    for key in ("mutual_information", "onset", "tau", "marking_scan", "message"):
        sec = d.get(key, {})
        if sec and "skipped" not in sec:
            out[key] = {k: v for k, v in sec.items() if not isinstance(v, (list, dict)) or key == "mutual_information"}
    out["audit_verdict"] = d["audit"].get("verdict")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcqe", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def seeded(sp):
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--n", type=int, help="override the number of emissions")
        sp.add_argument("--chunks", type=int, default=1, help="parallel generation chunks (output is unchanged)")

    sp = sub.add_parser("simulate", help="generate an event stream file")
    sp.add_argument("config", help="scenario file or preset name")
    sp.add_argument("--out", required=True, type=Path, help="stream file to write")
    seeded(sp)

    sp = sub.add_parser("analyze", help="analyze stream file(s) into a report directory")
    sp.add_argument("streams", nargs="+", type=Path)
    sp.add_argument("--config", help="scenario the streams must match (default: embedded config)")
    sp.add_argument("--out", required=True, type=Path, help="report directory")
    sp.add_argument("--force-hash-mismatch", action="store_true", help="analyze despite a config/stream hash mismatch")

    sp = sub.add_parser("audit", help="causal audit of a scenario's geometry")
    sp.add_argument("config")
    sp.add_argument("--out", type=Path, help="also write the audit as JSON")

    sp = sub.add_parser("report", help="simulate and analyze in one step")
    sp.add_argument("config")
    sp.add_argument("--out", required=True, type=Path, help="report directory (stream goes to events.csv)")
    seeded(sp)

    sp = sub.add_parser("presets", help=f"list or dump scenario presets (directory override: ${PRESET_DIR_ENV})")
    psub = sp.add_subparsers(dest="action", required=True)
    psub.add_parser("list")
    dp = psub.add_parser("dump")
    dp.add_argument("name")
    dp.add_argument("--out", type=Path)
    return p


def _run(args) -> int:
    if args.command == "simulate":
        cfg = _load(args.config, args.seed, args.n)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        _print_json(simulate(cfg, args.out, args.chunks))
        return EXIT_OK

    if args.command == "analyze":
        cfg = resolve_config(args.config) if args.config else None
        many = len(args.streams) > 1
        for path in args.streams:
            outdir = args.out / path.stem if many else args.out
            report = analyze(path, outdir, cfg, args.force_hash_mismatch)
            _print_json(_summarize(report))
        return EXIT_OK

    if args.command == "audit":
        cfg = _load(args.config)
        try:
            audit = audit_topology(cfg.scenario)
        except KeyError as exc:
            raise ConfigError([f"geometry: {exc.args[0]}"], args.config) from None
        _print_json(audit.to_dict())
        if args.out:
            args.out.write_text(json.dumps(audit.to_dict(), indent=2, sort_keys=True) + "\n")
        return EXIT_PARADOX if audit.verdict is Verdict.PARADOX_TOPOLOGY else EXIT_OK

    if args.command == "report":
        cfg = _load(args.config, args.seed, args.n)
        args.out.mkdir(parents=True, exist_ok=True)
        summary = simulate(cfg, args.out / "events.csv", args.chunks)
        report = analyze(args.out / "events.csv", args.out, cfg)
        _print_json({"simulate": summary, "analysis": _summarize(report)})
        return EXIT_OK

    if args.command == "presets":
        if args.action == "list":
            for name in list_presets():
                print(name)
            return EXIT_OK
        text = preset_path(args.name).read_text()
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"error: invalid scenario {exc.source or ''}".rstrip(), file=sys.stderr)
        for line in exc.errors:
            print(f"  - {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except HashMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_VALIDATION
    except StreamFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
