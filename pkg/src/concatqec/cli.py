"""Command-line driver: estimate, train, concat, and report.

A thin sequential wrapper around the library.  Every command is
deterministic given ``--seed``; wall-clock timestamps go to a metadata
sidecar so the records files themselves are byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .channels import (
    NAMED_CHANNELS,
    ChannelError,
    PauliChannel,
    named_channel,
    worst_case_infidelity,
)
from .estimator import ChannelEstimate
from .pipeline import (
    CodeSpec,
    LevelRecord,
    PipelineError,
    PipelinePolicy,
    overhead_ratio,
    plan_and_run,
    run_level,
)
from .stabilizer import CODE_REGISTRY
from .train import TrainConfig, TrainedCode, train_code


class CliError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing and formatting helpers
# ---------------------------------------------------------------------------

def parse_noise(spec: str) -> PauliChannel:
    """Either ``NAME:P`` (e.g. yflip:0.1) or an explicit ``X,Y,Z`` triple."""
    try:
        if "," in spec:
            parts = [float(x) for x in spec.split(",")]
            if len(parts) != 3:
                raise CliError(f"expected three probabilities, got {spec!r}")
            return PauliChannel(*parts)
        if ":" in spec:
            name, _, value = spec.partition(":")
            return named_channel(name.strip(), float(value))
    except (ValueError, ChannelError) as exc:
        raise CliError(f"invalid noise spec {spec!r}: {exc}")
    raise CliError(
        f"invalid noise spec {spec!r}: use NAME:P with NAME in "
        f"{sorted(NAMED_CHANNELS)} or an X,Y,Z triple"
    )


def format_p(value: float) -> str:
    """Two significant figures below 1e-3, three decimals otherwise."""
    if value < 1e-3:
        return f"{value:.2g}"
    return f"{value:.3f}"


def format_channel(ch: PauliChannel) -> str:
    qx, qy, qz = ch.proportions
    return f"p={format_p(ch.p)} X:{qx:.2f} Y:{qy:.2f} Z:{qz:.2f}"


_TABLE_COLUMNS = ("code", "level", "p", "X/p", "Y/p", "Z/p")


def records_table(records) -> str:
    """Aligned text table with exactly the code/level/p/X/p/Y/p/Z/p columns."""
    rows = [_TABLE_COLUMNS]
    for record in records:
        qx, qy, qz = record.estimate.probs.proportions
        rows.append((record.code.label, str(record.level),
                     format_p(record.estimate.probs.p),
                     f"{qx:.2f}", f"{qy:.2f}", f"{qz:.2f}"))
    widths = [max(len(row[c]) for row in rows) for c in range(len(_TABLE_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


def curve_csv(records) -> str:
    lines = ["level,qubits,infidelity"]
    for record in records:
        lines.append(f"{record.level},{record.cumulative_qubits},"
                     f"{record.worst_case_infidelity!r}")
    return "\n".join(lines) + "\n"


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_meta(out: Path, command: str) -> None:
    _write_json(out / "meta.json",
                {"command": command, "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")})


def _load_code(ref: str) -> CodeSpec:
    if ref in CODE_REGISTRY:
        return CodeSpec.from_stabilizer(ref)
    path = Path(ref)
    if path.is_file():
        return CodeSpec.from_trained(TrainedCode.from_dict(json.loads(path.read_text())))
    raise CliError(
        f"unknown code {ref!r}: expected one of {sorted(CODE_REGISTRY)} "
        f"or a trained-code artifact path"
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_estimate(args) -> int:
    channel = parse_noise(args.noise)
    code = _load_code(args.code)
    estimate = run_level(code, channel)
    print(format_channel(estimate.probs))
    if estimate.non_pauli_flagged:
        print(f"warning: fit residual {estimate.residual:.3g} "
              "indicates a non-Pauli effective channel", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "estimate.json", estimate.to_dict())
        _write_meta(out, "estimate")
    return 0


def cmd_train(args) -> int:
    channel = parse_noise(args.noise)
    config = TrainConfig(seed=args.seed, restarts=args.restarts,
                         max_iterations=args.max_iterations,
                         recovery_ancillas=args.r)
    trained = train_code(args.n, channel, config)
    spec = CodeSpec.from_trained(trained)
    estimate = run_level(spec, channel)
    wc = worst_case_infidelity(estimate.probs)
    for name, value in sorted(trained.losses.items()):
        print(f"{name}: {value:.6g}")
    print("effective channel:", format_channel(estimate.probs))
    print(f"worst-case infidelity: {wc:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / f"trained_n{trained.n}_r{trained.r}.json", trained.to_dict())
        _write_json(out / "estimate.json", estimate.to_dict())
        _write_meta(out, "train")
    return 0


_CONCAT_DEFAULTS = {
    "noise": None,
    "tau": PipelinePolicy.structure_threshold,
    "target": PipelinePolicy.target_infidelity,
    "max_levels": PipelinePolicy.max_levels,
    "sizes": list(PipelinePolicy.variational_sizes),
    "fallback": PipelinePolicy.fallback_code_id,
    "selection_iterations": PipelinePolicy.selection_iterations,
    "seed": TrainConfig.seed,
    "restarts": TrainConfig.restarts,
    "max_iterations": TrainConfig.max_iterations,
    "out": None,
}


def _load_concat_config(args) -> dict:
    """Merged settings with precedence flags > config file > defaults."""
    merged = dict(_CONCAT_DEFAULTS)
    if args.config:
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text())
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise CliError(f"config {path}, line {exc.lineno}: {exc.msg}")
        unknown = set(loaded) - set(merged)
        if unknown:
            raise CliError(f"unknown config keys {sorted(unknown)}")
        merged.update(loaded)
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if merged["noise"] is None:
        raise CliError("no noise specified (flag --noise or config key 'noise')")
    return merged


def cmd_concat(args) -> int:
    settings = _load_concat_config(args)
    channel = parse_noise(settings["noise"])
    policy = PipelinePolicy(
        structure_threshold=float(settings["tau"]),
        target_infidelity=float(settings["target"]),
        max_levels=int(settings["max_levels"]),
        variational_sizes=tuple(settings["sizes"]),
        fallback_code_id=str(settings["fallback"]),
        selection_iterations=int(settings["selection_iterations"]),
    )
    config = TrainConfig(seed=int(settings["seed"]),
                         restarts=int(settings["restarts"]),
                         max_iterations=int(settings["max_iterations"]))
    records = plan_and_run(channel, policy, config)
    table = records_table(records)
    print(table, end="")
    if settings["out"]:
        out = Path(settings["out"])
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "records.json", {
            "initial_channel": channel.to_dict(),
            "policy": dataclasses.asdict(policy),
            "seed": config.seed,
            "records": [record.to_dict() for record in records],
        })
        (out / "table.txt").write_text(table)
        (out / "curve.csv").write_text(curve_csv(records))
        _write_meta(out, "concat")
    return 0


def load_records(run_dir: str):
    """Records list and initial channel saved by ``concat --out``."""
    path = Path(run_dir) / "records.json"
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    records = [LevelRecord.from_dict(r) for r in payload["records"]]
    return records, PauliChannel.from_dict(payload["initial_channel"])


def cmd_report(args) -> int:
    hybrid, hybrid_initial = load_records(args.hybrid)
    baseline, baseline_initial = load_records(args.baseline)
    if hybrid_initial.as_tuple() != baseline_initial.as_tuple():
        raise CliError(
            f"runs start from different channels "
            f"({hybrid_initial.as_tuple()} vs {baseline_initial.as_tuple()})"
        )
    if args.target is not None:
        target = args.target
    else:
        target = min(record.worst_case_infidelity for record in hybrid)
    try:
        ratio = overhead_ratio(hybrid, baseline, target)
    except PipelineError as exc:
        raise CliError(str(exc))
    hybrid_qubits = next(r.cumulative_qubits for r in hybrid
                         if r.worst_case_infidelity <= target)
    print(f"target infidelity: {target!r}")
    print(f"hybrid qubits: {hybrid_qubits}")
    print(f"baseline qubits (log-linear interpolation): "
          f"{hybrid_qubits * ratio:.1f}")
    print(f"overhead ratio: {ratio:.1f}")
    return 0


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concatqec",
        description="Noise-tailored quantum code concatenation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="effective channel of one level")
    p_est.add_argument("--code", required=True,
                       help="stabilizer code id or trained-code artifact path")
    p_est.add_argument("--noise", required=True, help="NAME:P or X,Y,Z")
    p_est.add_argument("--out", help="output directory")
    p_est.set_defaults(func=cmd_estimate)

    p_train = sub.add_parser("train", help="train a variational code")
    p_train.add_argument("--n", type=int, required=True, help="physical qubits")
    p_train.add_argument("--r", type=int, help="recovery ancillas (default 0)")
    p_train.add_argument("--noise", required=True, help="NAME:P or X,Y,Z")
    p_train.add_argument("--seed", type=int, default=TrainConfig.seed)
    p_train.add_argument("--restarts", type=int, default=TrainConfig.restarts)
    p_train.add_argument("--max-iterations", type=int,
                         default=TrainConfig.max_iterations)
    p_train.add_argument("--out", help="output directory")
    p_train.set_defaults(func=cmd_train)

    p_cat = sub.add_parser("concat", help="run the concatenation pipeline")
    p_cat.add_argument("--config", help="JSON config file")
    p_cat.add_argument("--noise", help="NAME:P or X,Y,Z")
    p_cat.add_argument("--tau", type=float, help="structure threshold")
    p_cat.add_argument("--target", type=float, help="target infidelity")
    p_cat.add_argument("--max-levels", type=int, dest="max_levels")
    p_cat.add_argument("--sizes", type=lambda s: [int(x) for x in s.split(",") if x],
                       help="comma-separated variational sizes ('' disables)")
    p_cat.add_argument("--fallback", help="fallback stabilizer code id")
    p_cat.add_argument("--selection-iterations", type=int,
                       dest="selection_iterations")
    p_cat.add_argument("--seed", type=int)
    p_cat.add_argument("--restarts", type=int)
    p_cat.add_argument("--max-iterations", type=int, dest="max_iterations")
    p_cat.add_argument("--out", help="output directory")
    p_cat.set_defaults(func=cmd_concat)

    p_rep = sub.add_parser("report", help="overhead ratio of two concat runs")
    p_rep.add_argument("--hybrid", required=True, help="hybrid run directory")
    p_rep.add_argument("--baseline", required=True, help="baseline run directory")
    p_rep.add_argument("--target", type=float,
                       help="target infidelity (default: best hybrid level)")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
