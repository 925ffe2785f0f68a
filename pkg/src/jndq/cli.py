"""Operator command line: dataset generation, simulation, local test runs,
rating analysis, and the session service.

Every command that writes results also writes a run_manifest.json with the
resolved parameters, seeds, and SHA-256 of inputs and outputs, so any run
can be reproduced and verified bit-for-bit. Exit codes: 0 success, 2 usage
error, 3 input-data error, 4 runtime failure.

The JNDQ_DATA_ROOT environment variable supplies a base directory for any
output path not given explicitly.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import (
    SchemaError,
    clean_ratings,
    compare_groups,
    mos_per_condition,
    pass_rate_table,
    read_lab_mos_csv,
    read_ratings_csv,
    render_comparison_table,
    render_pass_rate_table,
    split_by_screening,
)
from .audio import AudioError, build_stimulus_set, file_sha256, load_wav, save_wav, synthesize_voice
from .listenersim import (
    LISTENER_PRESETS,
    SimulatedListener,
    convergence_point,
    preset_listener,
    run_staircase,
    screening_outcomes,
    simulate_staircase,
)
from .screening import Screening, ScreeningConfig
from .seeds import derive_seed
from .staircase import ConfigError, Staircase, StaircaseConfig
from .trials import ANSWER_FIRST, ANSWER_NOT_DETECTABLE, ANSWER_SECOND

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class DataError(Exception):
    """Bad input files or configuration payloads (exit code 3)."""


def _data_root() -> Path | None:
    root = os.environ.get("JNDQ_DATA_ROOT")
    return Path(root) if root else None


def _resolve_out(value: str | None, default_name: str) -> Path:
    if value:
        return Path(value)
    root = _data_root()
    if root is None:
        raise DataError(
            f"no output directory given and JNDQ_DATA_ROOT is not set "
            f"(would default to <root>/{default_name})"
        )
    return root / default_name


def write_run_manifest(
    out_dir: Path,
    command: str,
    params: dict,
    inputs: list[Path],
    outputs: list[Path],
) -> Path:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "params": params,
        "inputs": {str(p): file_sha256(p) for p in sorted(inputs)},
        "outputs": {
            str(p.relative_to(out_dir)): file_sha256(p) for p in sorted(outputs)
        },
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def _parse_levels(text: str) -> list[int]:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        levels = list(range(int(lo), int(hi) + 1))
    else:
        levels = [int(part) for part in text.split(",") if part.strip()]
    if not levels:
        raise DataError(f"no SNR levels parsed from {text!r}")
    return levels


# -- gen-sources -------------------------------------------------------------

def cmd_gen_sources(args: argparse.Namespace) -> int:
    out = _resolve_out(args.out, "sources")
    out.mkdir(parents=True, exist_ok=True)
    if args.n < 1:
        raise DataError("need at least one source")
    outputs = []
    for index in range(args.n):
        # Alternate higher/lower pitch so the set is not homogeneous.
        f0 = 210.0 if index % 2 == 0 else 125.0
        buffer = synthesize_voice(
            duration_s=args.duration,
            sample_rate=args.sample_rate,
            f0_hz=f0,
            seed=derive_seed(args.seed, "source", index),
        )
        path = out / f"voice{index + 1:02d}.wav"
        save_wav(buffer, path)
        outputs.append(path)
    write_run_manifest(
        out,
        "gen-sources",
        {
            "n": args.n,
            "seed": args.seed,
            "duration_s": args.duration,
            "sample_rate": args.sample_rate,
        },
        inputs=[],
        outputs=outputs,
    )
    print(f"wrote {len(outputs)} synthetic sources to {out}")
    return EXIT_OK


# -- gen-stimuli ---------------------------------------------------------------

def cmd_gen_stimuli(args: argparse.Namespace) -> int:
    sources_dir = Path(args.sources)
    if not sources_dir.is_dir():
        raise DataError(f"sources directory not found: {sources_dir}")
    wavs = sorted(sources_dir.glob("*.wav"))
    if not wavs:
        raise DataError(f"no .wav sources in {sources_dir}")
    out = _resolve_out(args.out, "stimuli")
    out.mkdir(parents=True, exist_ok=True)
    levels = _parse_levels(args.levels)
    sources = [(path.stem, load_wav(path)) for path in wavs]
    stimulus_set = build_stimulus_set(sources, levels, args.seed, out)
    outputs = [out / entry.file for entry in stimulus_set.stimuli]
    outputs += [out / "sources" / f"{sid}.wav" for sid, _ in stimulus_set.sources]
    outputs.append(stimulus_set.manifest_path)
    write_run_manifest(
        out,
        "gen-stimuli",
        {"seed": args.seed, "levels_db": levels, "n_sources": len(sources)},
        inputs=wavs,
        outputs=outputs,
    )
    print(
        f"rendered {len(stimulus_set.stimuli)} stimuli "
        f"({len(sources)} sources x {len(levels)} levels) into {out}"
    )
    return EXIT_OK


# -- simulate --------------------------------------------------------------------

def _listener_from_spec(spec: dict, seed: int) -> tuple[str, SimulatedListener]:
    if "preset" in spec:
        name = spec.get("name", spec["preset"])
        return name, preset_listener(spec["preset"], rng_seed=seed)
    try:
        name = spec.get("name", f"mu{spec['mu_db']}")
        listener = SimulatedListener(
            mu_db=float(spec["mu_db"]),
            sigma_db=float(spec.get("sigma_db", 1.0)),
            guess_rate=float(spec.get("guess_rate", 0.5)),
            lapse_rate=float(spec.get("lapse_rate", 0.02)),
            rng_seed=seed,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"bad listener spec {spec!r}: {exc}") from exc
    return name, listener


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.is_file():
        raise DataError(f"scenario file not found: {scenario_path}")
    try:
        scenario = json.loads(scenario_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"scenario is not valid JSON: {exc}") from exc
    out = _resolve_out(args.out, "simulation")
    out.mkdir(parents=True, exist_ok=True)

    seed = args.seed if args.seed is not None else int(scenario.get("seed", 0))
    listener_specs = scenario.get("listeners")
    if not listener_specs:
        raise DataError("scenario lists no listeners")

    summary: dict = {"seed": seed, "listeners": {}}
    run_rows: list[dict] = []
    rate_rows: list[dict] = []
    for listener_index, spec in enumerate(listener_specs):
        name, listener = _listener_from_spec(
            spec, derive_seed(seed, "listener", listener_index)
        )
        entry: dict = {
            "parameters": {
                "mu_db": listener.mu_db,
                "sigma_db": listener.sigma_db,
                "guess_rate": listener.guess_rate,
                "lapse_rate": listener.lapse_rate,
            },
            "convergence_point_db": convergence_point(listener),
        }
        stair_cfg = scenario.get("staircase")
        if stair_cfg:
            n_runs = int(stair_cfg.get("n_runs", 0))
            if n_runs < 1:
                raise DataError("staircase.n_runs must be >= 1")
            result = simulate_staircase(
                listener,
                StaircaseConfig(order_seed=derive_seed(seed, "staircase", name)),
                n_runs,
            )
            entry["staircase"] = {
                "n_runs": result.n_runs,
                "mean_jnd_db": result.mean_jnd_db,
                "sd_jnd_db": result.sd_jnd_db,
                "n_invalid": result.n_invalid,
            }
            for run_index, run in enumerate(result.results):
                run_rows.append(
                    {
                        "listener": name,
                        "run": run_index,
                        "valid": int(run.valid),
                        "jnd_db": "" if run.jnd_db is None else run.jnd_db,
                        "n_reversals_used": run.n_reversals_used,
                    }
                )
        screen_cfg = scenario.get("screening")
        if screen_cfg:
            n_runs = int(screen_cfg.get("n_runs", 0))
            if n_runs < 1:
                raise DataError("screening.n_runs must be >= 1")
            levels = [int(v) for v in screen_cfg.get("levels_db", [10, 8, 6])]
            criteria = [int(v) for v in screen_cfg.get("acceptance_k", [1, 2, 3, 4])]
            rates: dict[str, dict[str, float]] = {}
            for level in levels:
                outcomes = screening_outcomes(
                    listener,
                    ScreeningConfig(
                        jnd_level_db=level,
                        order_seed=derive_seed(seed, "screening", name, level),
                    ),
                    n_runs,
                )
                rates[str(level)] = {
                    str(k): sum(1 for n in outcomes if n >= k) / len(outcomes)
                    for k in criteria
                }
                for k in criteria:
                    rate_rows.append(
                        {
                            "listener": name,
                            "jnd_level_db": level,
                            "acceptance_k": k,
                            "pass_rate": rates[str(level)][str(k)],
                            "n_runs": n_runs,
                        }
                    )
            entry["screening_pass_rates"] = rates
        summary["listeners"][name] = entry

    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs = [summary_path]
    if run_rows:
        runs_path = out / "staircase_runs.csv"
        with open(runs_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(run_rows[0]))
            writer.writeheader()
            writer.writerows(run_rows)
        outputs.append(runs_path)
    if rate_rows:
        rates_path = out / "screening_pass_rates.csv"
        with open(rates_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(rate_rows[0]))
            writer.writeheader()
            writer.writerows(rate_rows)
        outputs.append(rates_path)
    write_run_manifest(
        out, "simulate", {"seed": seed}, inputs=[scenario_path], outputs=outputs
    )
    print(f"simulation summary written to {summary_path}")
    return EXIT_OK


# -- local interactive / simulated runs ------------------------------------------

_KEY_TO_ANSWER = {
    "1": ANSWER_FIRST,
    "a": ANSWER_FIRST,
    "2": ANSWER_SECOND,
    "b": ANSWER_SECOND,
    "0": ANSWER_NOT_DETECTABLE,
    "n": ANSWER_NOT_DETECTABLE,
}


def _interactive_answer(prompt: str) -> str:
    while True:
        raw = input(prompt).strip().lower()
        if raw in _KEY_TO_ANSWER:
            return _KEY_TO_ANSWER[raw]
        print("answer with 1/a (first), 2/b (second) or 0/n (not detectable)")


def _load_source_buffers(args: argparse.Namespace) -> dict:
    sources_dir = Path(args.sources)
    wavs = sorted(sources_dir.glob("*.wav")) if sources_dir.is_dir() else []
    if not wavs:
        raise DataError(
            f"interactive mode needs --sources with mono WAVs (got {args.sources!r})"
        )
    return {path.stem: load_wav(path) for path in wavs}


def _drive_locally(machine, buffers: dict, player: str) -> None:
    """Run a session in the terminal, rendering each pair on the fly."""
    import shlex
    import subprocess
    import tempfile

    from .audio import mix_at_snr

    with tempfile.TemporaryDirectory(prefix="jndq-trial-") as tmp:
        while not machine.is_complete:
            spec = machine.current_trial()
            paths = []
            for label, stim in (("A", spec.first), ("B", spec.second)):
                path = Path(tmp) / f"trial{spec.trial_index:02d}_{label}.wav"
                source = buffers[stim.source_id]
                save_wav(mix_at_snr(source, stim.snr_db, stim.noise_seed).buffer, path)
                paths.append((label, path))
            print(f"\ntrial {spec.trial_index}")
            for label, path in paths:
                if player:
                    subprocess.run(shlex.split(player) + [str(path)], check=False)
                else:
                    print(f"  play {label}: {path}")
            machine.submit_answer(
                _interactive_answer("which sounded better? [1/2/0] ")
            )


def _simulated_listener_from_args(args: argparse.Namespace) -> SimulatedListener:
    if args.preset:
        return preset_listener(args.preset, rng_seed=args.seed)
    if args.mu is None:
        raise DataError("--simulate requires --preset or --mu")
    return SimulatedListener(
        mu_db=args.mu,
        sigma_db=args.sigma,
        guess_rate=args.guess,
        lapse_rate=args.lapse,
        rng_seed=args.seed,
    )


def _write_session_output(args: argparse.Namespace, document: dict) -> None:
    text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_run_staircase(args: argparse.Namespace) -> int:
    config = StaircaseConfig(order_seed=args.seed)
    if args.simulate:
        listener = _simulated_listener_from_args(args)
        session = run_staircase(listener, config)
    else:
        buffers = _load_source_buffers(args)
        session = Staircase(replace(config, source_ids=tuple(sorted(buffers))))
        _drive_locally(session, buffers, args.player)
    result = session.threshold()
    _write_session_output(
        args, {"result": result.to_dict(), "session": session.to_dict()}
    )
    return EXIT_OK


def cmd_run_screening(args: argparse.Namespace) -> int:
    config = ScreeningConfig(
        jnd_level_db=args.level, acceptance_k=args.k, order_seed=args.seed
    )
    if args.simulate:
        listener = _simulated_listener_from_args(args)
        session = Screening(config)
        while not session.is_complete:
            session.submit_answer(listener.respond(session.current_trial()))
    else:
        buffers = _load_source_buffers(args)
        session = Screening(replace(config, source_ids=tuple(sorted(buffers))))
        _drive_locally(session, buffers, args.player)
    _write_session_output(
        args,
        {
            "verdict": session.final_verdict(),
            "n_correct": session.n_correct,
            "session": session.to_dict(),
        },
    )
    return EXIT_OK


# -- analyze -----------------------------------------------------------------------

def cmd_analyze(args: argparse.Namespace) -> int:
    ratings_path = Path(args.ratings)
    lab_path = Path(args.lab_mos)
    for path in (ratings_path, lab_path):
        if not path.is_file():
            raise DataError(f"input file not found: {path}")
    records = read_ratings_csv(ratings_path)
    lab_mos = read_lab_mos_csv(lab_path)
    out = _resolve_out(args.out, "analysis")
    out.mkdir(parents=True, exist_ok=True)
    criteria = [int(k) for k in args.criteria.split(",") if k.strip()]
    if not criteria:
        raise DataError("no acceptance criteria given")

    cleaned = clean_ratings(records)
    kept = list(cleaned.kept)
    if not kept:
        raise DataError("no ratings survive data cleansing")
    levels = sorted({r.jnd_level_db for r in kept}, reverse=True)

    reports = []
    mos_rows: list[dict] = []
    skipped: list[str] = []
    for level in levels:
        level_records = [r for r in kept if r.jnd_level_db == level]
        for k in criteria:
            passed, failed = split_by_screening(level_records, k)
            if not passed or not failed:
                skipped.append(f"level {level} k {k}: a group is empty")
                continue
            passed_mos = mos_per_condition(passed)
            failed_mos = mos_per_condition(failed)
            common = (
                {c.condition_id for c in passed_mos}
                & {c.condition_id for c in failed_mos}
                & set(lab_mos)
            )
            if len(common) < 4:
                skipped.append(
                    f"level {level} k {k}: only {len(common)} shared conditions"
                )
                continue
            if len(common) < len(lab_mos):
                print(
                    f"warning: level {level} k {k}: comparing "
                    f"{len(common)}/{len(lab_mos)} conditions",
                    file=sys.stderr,
                )
            passed_mos = [c for c in passed_mos if c.condition_id in common]
            failed_mos = [c for c in failed_mos if c.condition_id in common]
            lab_common = {c: lab_mos[c] for c in common}
            reports.append(
                compare_groups(passed_mos, failed_mos, lab_common, level, k, args.tail)
            )
            for group, group_mos in (("passed", passed_mos), ("failed", failed_mos)):
                for condition in group_mos:
                    mos_rows.append(
                        {
                            "jnd_level_db": level,
                            "acceptance_k": k,
                            "condition_id": condition.condition_id,
                            "group": group,
                            "mos": condition.mos,
                            "ci95": condition.ci95,
                            "n_votes": condition.n_votes,
                        }
                    )
            for condition_id in sorted(common):
                mos_rows.append(
                    {
                        "jnd_level_db": level,
                        "acceptance_k": k,
                        "condition_id": condition_id,
                        "group": "lab",
                        "mos": lab_mos[condition_id],
                        "ci95": "",
                        "n_votes": "",
                    }
                )

    if not reports:
        raise DataError(
            "no (level, criterion) cell could be compared: " + "; ".join(skipped)
        )

    # Pass rates count each submitted assignment once.
    by_assignment: dict[str, tuple[int, int]] = {}
    for record in kept:
        key = record.assignment_id
        value = (record.jnd_level_db, record.n_correct)
        if by_assignment.setdefault(key, value) != value:
            raise DataError(
                f"assignment {key!r} carries inconsistent screening outcomes"
            )
    rates = pass_rate_table(by_assignment.values())

    report_json = {
        "cleansing": {
            "kept": len(cleaned.kept),
            "removed": len(cleaned.removed),
            "reasons": dict(cleaned.reason_counts),
        },
        "tail": args.tail,
        "comparisons": [r.to_dict() for r in reports],
        "pass_rates": {
            "levels_db": list(rates.levels_db),
            "criteria": list(rates.criteria),
            "percentages": {
                f"{level}/{k}": rates.rate(level, k)
                for level in rates.levels_db
                for k in rates.criteria
            },
            "n_per_level": {str(lv): n for lv, n in rates.n_per_level.items()},
        },
        "skipped": skipped,
    }
    outputs = []
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report_json, indent=2, sort_keys=True) + "\n")
    outputs.append(report_path)
    table_path = out / "report.txt"
    table_path.write_text(render_comparison_table(reports), encoding="utf-8")
    outputs.append(table_path)
    rates_path = out / "pass_rates.txt"
    rates_path.write_text(render_pass_rate_table(rates), encoding="utf-8")
    outputs.append(rates_path)
    mos_path = out / "per_condition_mos.csv"
    with open(mos_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(mos_rows[0]))
        writer.writeheader()
        writer.writerows(mos_rows)
    outputs.append(mos_path)
    write_run_manifest(
        out,
        "analyze",
        {"criteria": criteria, "tail": args.tail},
        inputs=[ratings_path, lab_path],
        outputs=outputs,
    )
    print(render_comparison_table(reports))
    print(render_pass_rate_table(rates))
    print(f"report files written to {out}")
    return EXIT_OK


# -- serve -------------------------------------------------------------------------

def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app
    from .service.core import ServiceError, SessionService

    try:
        service = SessionService(
            manifest_path=args.manifest,
            data_root=_resolve_out(args.data, "service-data"),
            gate_on_fail=args.gate_on_fail,
        )
    except ServiceError as exc:
        raise DataError(exc.message) from exc
    uvicorn.run(
        create_app(service), host=args.host, port=args.port, log_level="warning"
    )
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jndq",
        description="JND-of-quality listening test toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sources", help="synthesize placeholder speech-like sources")
    p.add_argument("--out", help="output directory")
    p.add_argument("--n", type=int, default=4, help="number of sources")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=3.0, help="seconds per source")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.set_defaults(handler=cmd_gen_sources)

    p = sub.add_parser("gen-stimuli", help="render the SNR-degraded stimulus grid")
    p.add_argument("--sources", required=True, help="directory of clean mono WAVs")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument(
        "--levels", default="35:50", help="SNR levels: 'lo:hi' or comma list"
    )
    p.set_defaults(handler=cmd_gen_stimuli)

    p = sub.add_parser("simulate", help="Monte-Carlo validation of the procedures")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p.set_defaults(handler=cmd_simulate)

    for name, fn in (("run-staircase", cmd_run_staircase), ("run-screening", cmd_run_screening)):
        p = sub.add_parser(name, help=f"run one {name.split('-')[1]} session locally")
        p.add_argument("--simulate", action="store_true", help="answer with a simulated listener")
        p.add_argument("--preset", choices=sorted(LISTENER_PRESETS), default=None)
        p.add_argument("--mu", type=float, default=None, help="listener midpoint (dB)")
        p.add_argument("--sigma", type=float, default=1.0)
        p.add_argument("--guess", type=float, default=0.5)
        p.add_argument("--lapse", type=float, default=0.02)
        p.add_argument("--sources", default="", help="clean sources for interactive playback")
        p.add_argument("--player", default="", help="playback command, e.g. 'aplay -q'")
        p.add_argument("--seed", type=int, default=0, help="session order seed")
        p.add_argument("--out", default="", help="write session JSON here")
        if name == "run-screening":
            p.add_argument("--level", type=int, default=10, help="JND level in dB")
            p.add_argument("--k", type=int, default=3, help="acceptance criterion")
        p.set_defaults(handler=fn)

    p = sub.add_parser("analyze", help="compare passed vs failed rating groups")
    p.add_argument("--ratings", required=True, help="ratings CSV")
    p.add_argument("--lab-mos", required=True, help="laboratory MOS CSV")
    p.add_argument("--out", help="output directory")
    p.add_argument("--criteria", default="1,2,3", help="acceptance criteria, comma list")
    p.add_argument("--tail", choices=("two-sided", "one-sided"), default="two-sided")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--manifest", required=True, help="stimulus manifest.json")
    p.add_argument("--data", help="session data directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument(
        "--gate-on-fail",
        action="store_true",
        help="report failed screenings as blocking the rating task",
    )
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (DataError, SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AudioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
