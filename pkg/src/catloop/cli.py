"""Command-line front end.

Subcommands:

* ``validate``  - score candidate CIF files and aggregate failure rates
* ``textify``   - render adsorption systems (CIF + sidecar metadata) as text
* ``grpo``      - advantages / KL / loss for logged candidate groups (JSONL)
* ``mmtg``      - max-min gated combination of two task losses
* ``search``    - run the closed-loop exemplar search with the surrogates
* ``geometry``  - periodic distances and neighbor summaries for CIF files

Shared flags: ``--config`` (JSON), ``--seed``, ``--jobs``, ``--out`` (artifact
directory), ``--format`` (json or table).  Every artifact embeds a run
manifest: command, effective config, sha256 of each input file, tool
version, seed, and an id over those fields.  Wall-clock time goes only to
stderr, so identical manifest inputs produce byte-identical artifacts.

Exit codes: 0 on completion (even when candidates fail their checks), 1 on
usage or configuration errors, 2 when no input could be processed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .cif import composition_of, parse_cif
from .elements import is_element
from .geometry import DEFAULT_NEIGHBOR_SCALE, build_neighbor_list, min_pair_distance, volume_per_atom
from .policy import (
    GrpoConfig,
    MmtgConfig,
    group_from_json_line,
    group_report,
    mmtg_loss,
)
from .reward import (
    DEFAULT_PHYS,
    DEFAULT_WEIGHTS,
    PhysConfig,
    RewardBreakdown,
    RewardWeights,
    corpus_failure_rates,
    pvcp_from_outcome,
)
from .search import (
    DefectRates,
    MutationGenerator,
    PairPotentialSurrogate,
    PoolInitializationError,
    SearchConfig,
    run_search,
)
from .textify import SystemMetadata, to_system_text


class CliError(Exception):
    """Configuration or usage problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 (argparse's default is 2, reserved here for
    # "no processable inputs")
    def error(self, message: str):  # noqa: D102
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return obj


def _build_weights(config: dict) -> RewardWeights:
    section = config.get("weights", {})
    try:
        return replace(DEFAULT_WEIGHTS, **section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad weights config: {exc}") from None


def _build_phys(config: dict) -> PhysConfig:
    section = config.get("phys", {})
    try:
        return replace(DEFAULT_PHYS, **section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad phys config: {exc}") from None


def parse_composition_arg(text: str) -> dict[str, int]:
    """Parse a composition argument like ``Cu:4,O:1``."""
    comp: dict[str, int] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        el, _, num = part.partition(":")
        el = el.strip()
        if not is_element(el):
            raise CliError(f"unknown element {el!r} in composition {text!r}")
        try:
            count = int(num)
        except ValueError:
            raise CliError(f"bad count {num!r} for {el!r} in composition") from None
        if count < 0:
            raise CliError(f"negative count for {el!r} in composition")
        comp[el] = comp.get(el, 0) + count
    if not comp:
        raise CliError(f"empty composition {text!r}")
    return comp


# ---------------------------------------------------------------------------
# run manifest


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def build_manifest(
    command: str,
    config: dict,
    inputs: dict[str, bytes],
    seed: int | None,
) -> dict:
    """Deterministic manifest: config snapshot, input digests, version, id.

    Wall-clock time is deliberately not part of the manifest so that equal
    inputs always produce byte-identical artifacts.
    """
    core = {
        "command": command,
        "config": config,
        "inputs": {name: _sha256_bytes(data) for name, data in inputs.items()},
        "tool_version": __version__,
        "seed": seed,
    }
    digest = _sha256_bytes(
        json.dumps(core, sort_keys=True, separators=(",", ":")).encode()
    )
    return {**core, "id": digest}


def _log(message: str) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    print(f"[{stamp}] {message}", file=sys.stderr)


def _emit(
    artifact: dict, args: argparse.Namespace, filename: str, table: Callable[[dict], str]
) -> None:
    """Print per --format and, with --out, write the JSON artifact."""
    rendered = json.dumps(artifact, indent=2, sort_keys=True) + "\n"
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / filename).write_text(rendered)
    if args.format == "json":
        sys.stdout.write(rendered)
    else:
        sys.stdout.write(table(artifact))


def _read_inputs(paths: Sequence[str]) -> tuple[dict[str, bytes], list[str]]:
    """Read every path; returns (name -> bytes, unreadable paths)."""
    blobs: dict[str, bytes] = {}
    errors: list[str] = []
    for p in paths:
        try:
            blobs[p] = Path(p).read_bytes()
        except OSError as exc:
            _log(f"skipping {p}: {exc}")
            errors.append(p)
    return blobs, errors


def _map_jobs(fn: Callable, items: Iterable, jobs: int) -> list:
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    weights = _build_weights(config)
    phys = _build_phys(config)
    blobs, unreadable = _read_inputs(args.paths)
    if not blobs:
        _log("no readable input files")
        return 2

    per_file_targets: dict[str, dict[str, int]] = {}
    if args.targets_file:
        try:
            raw = Path(args.targets_file).read_bytes()
        except OSError as exc:
            raise CliError(f"cannot read targets file: {exc}") from None
        blobs[args.targets_file] = raw
        try:
            table = json.loads(raw.decode("utf-8"))
            if not isinstance(table, dict):
                raise ValueError("top level must be an object")
            for name, comp in table.items():
                per_file_targets[name] = {str(k): int(v) for k, v in comp.items()}
        except (ValueError, TypeError, AttributeError) as exc:
            raise CliError(f"bad targets file: {exc}") from None
    uniform_target = parse_composition_arg(args.target) if args.target else None

    cfg_snapshot = {
        "weights": vars(weights),
        "phys": vars(phys),
        "target": uniform_target,
        "targets_file": args.targets_file,
    }
    manifest = build_manifest("validate", cfg_snapshot, blobs, args.seed)
    _log(f"validate manifest {manifest['id']}")

    paths = [p for p in args.paths if p in blobs and p != args.targets_file]

    def score_one(path: str) -> tuple[dict, RewardBreakdown]:
        outcome = parse_cif(blobs[path])
        target = per_file_targets.get(path) or per_file_targets.get(Path(path).name)
        if target is None:
            target = uniform_target
        if target is None:
            # default: score the file against its own composition
            target = composition_of(outcome.structure) if outcome.ok else {}
        breakdown = pvcp_from_outcome(outcome, target, weights, phys)
        record = {
            "path": path,
            "ok": outcome.ok,
            "defects": [d.to_json_dict() for d in outcome.defects],
            "target": dict(sorted(target.items())),
            "reward": breakdown.to_json_dict(),
        }
        return record, breakdown

    scored = _map_jobs(score_one, paths, args.jobs)
    reports = [record for record, _ in scored]
    artifact = {
        "manifest": manifest,
        "files": reports,
        "unreadable": unreadable,
        "failure_rates": corpus_failure_rates(br for _, br in scored),
    }

    def table(art: dict) -> str:
        lines = [
            f"{rep['path']}: total={rep['reward']['total']:.4f} "
            f"flags={','.join(rep['reward']['failure_flags']) or '-'}"
            for rep in art["files"]
        ]
        rates = art["failure_rates"]
        lines.append(
            "rates: " + "  ".join(f"{k}={rates[k]:.2f}%" for k in sorted(rates))
        )
        return "\n".join(lines) + "\n"

    _emit(artifact, args, "validate_report.json", table)
    return 0


def cmd_textify(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    scale = config.get("neighbor_scale", DEFAULT_NEIGHBOR_SCALE)
    separator = config.get("separator", "</s>")
    blobs, unreadable = _read_inputs(args.paths)

    sidecars: dict[str, bytes] = {}
    for p in list(blobs):
        meta_path = str(Path(p).with_suffix("")) + ".meta.json"
        try:
            sidecars[p] = Path(meta_path).read_bytes()
            blobs[meta_path] = sidecars[p]
        except OSError:
            pass

    cfg_snapshot = {"neighbor_scale": scale, "separator": separator}
    manifest = build_manifest("textify", cfg_snapshot, blobs, args.seed)
    _log(f"textify manifest {manifest['id']}")

    systems = []
    errors = []
    for p in args.paths:
        if p not in blobs:
            continue
        record = {"path": p}
        if p not in sidecars:
            record["error"] = "missing sidecar metadata"
            errors.append(record)
            continue
        outcome = parse_cif(blobs[p])
        if not outcome.ok:
            record["error"] = "parse failure: " + ", ".join(outcome.defect_codes())
            errors.append(record)
            continue
        try:
            meta = SystemMetadata.from_json_dict(json.loads(sidecars[p].decode()))
            text = to_system_text(
                outcome.structure, meta, scale=scale, separator=separator
            )
        except (ValueError, json.JSONDecodeError) as exc:
            record["error"] = str(exc)
            errors.append(record)
            continue
        record.update(
            {
                "adsorbate_part": text.adsorbate_part,
                "surface_part": text.surface_part,
                "configuration_part": text.configuration_part,
                "text": text.joined,
            }
        )
        systems.append(record)

    for record in errors:
        _log(f"textify {record['path']}: {record['error']}")
    if not systems:
        _log("no system could be textified")
        return 2
    artifact = {"manifest": manifest, "systems": systems, "errors": errors}
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "systems.txt").write_text(
            "".join(rec["text"] + "\n" for rec in systems)
        )

    def table(art: dict) -> str:
        return "".join(rec["text"] + "\n" for rec in art["systems"])

    _emit(artifact, args, "textify_report.json", table)
    return 0


def cmd_grpo(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    section = dict(config.get("grpo", {}))
    if args.beta is not None:
        section["beta"] = args.beta
    if args.epsilon is not None:
        section["epsilon"] = args.epsilon
    try:
        cfg = GrpoConfig(**section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad grpo config: {exc}") from None

    blobs, _unreadable = _read_inputs([args.groups])
    if args.groups not in blobs:
        _log("no readable input files")
        return 2
    manifest = build_manifest(
        "grpo", {"beta": cfg.beta, "epsilon": cfg.epsilon}, blobs, args.seed
    )
    _log(f"grpo manifest {manifest['id']}")

    reports = []
    errors = []
    for lineno, line in enumerate(blobs[args.groups].decode("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            group = group_from_json_line(line, default_epsilon=cfg.epsilon)
        except ValueError as exc:
            errors.append({"line": lineno, "error": str(exc)})
            _log(f"grpo line {lineno}: {exc}")
            continue
        reports.append(group_report(group, cfg))
    if not reports:
        _log("no valid group records")
        return 2
    artifact = {"manifest": manifest, "groups": reports, "errors": errors}

    def table(art: dict) -> str:
        lines = [
            f"{g['prompt_id']}: K={g['n_members']} loss={g['loss']:.6f} "
            "advantages=" + ",".join(f"{a:.4f}" for a in g["advantages"])
            for g in art["groups"]
        ]
        return "\n".join(lines) + "\n"

    _emit(artifact, args, "grpo_report.json", table)
    return 0


def cmd_mmtg(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    section = dict(config.get("mmtg", {}))
    if args.gating is not None:
        section["gating"] = args.gating
    try:
        cfg = MmtgConfig(**section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad mmtg config: {exc}") from None

    pairs: list[tuple[float, float]] = []
    blobs: dict[str, bytes] = {}
    if args.pairs:
        raw, _ = _read_inputs([args.pairs])
        if args.pairs not in raw:
            _log("no readable input files")
            return 2
        blobs = raw
        try:
            data = json.loads(raw[args.pairs].decode())
            pairs = [(float(a), float(b)) for a, b in data]
        except (ValueError, TypeError) as exc:
            raise CliError(f"bad pairs file: {exc}") from None
    if args.losses:
        pairs.append((args.losses[0], args.losses[1]))
    if not pairs:
        raise CliError("provide two positional losses or --pairs FILE")

    manifest = build_manifest("mmtg", {"gating": cfg.gating}, blobs, args.seed)
    _log(f"mmtg manifest {manifest['id']}")
    try:
        results = [
            {"loss_a": a, "loss_b": b, "combined": mmtg_loss(a, b, cfg)}
            for a, b in pairs
        ]
    except ValueError as exc:
        raise CliError(str(exc)) from None
    artifact = {"manifest": manifest, "results": results}

    def table(art: dict) -> str:
        return (
            "\n".join(
                f"({r['loss_a']}, {r['loss_b']}) -> {r['combined']:.6f}"
                for r in art["results"]
            )
            + "\n"
        )

    _emit(artifact, args, "mmtg_report.json", table)
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    section = dict(config.get("search", {}))
    if "target_composition" in section:
        section["target_composition"] = {
            str(k): int(v) for k, v in section["target_composition"].items()
        }
    if args.seed is not None:
        section["seed"] = args.seed
    try:
        cfg = SearchConfig(**section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad search config: {exc}") from None
    if not cfg.target_composition:
        raise CliError("search config needs a non-empty target_composition")
    for el in cfg.target_composition:
        if not is_element(el):
            raise CliError(f"unknown element {el!r} in target_composition")

    gen_section = dict(config.get("generator", {}))
    rates = DefectRates(**gen_section.pop("defect_rates", {}))
    try:
        generator = MutationGenerator(defect_rates=rates, **gen_section)
        predictor = PairPotentialSurrogate(**config.get("predictor", {}))
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad generator/predictor config: {exc}") from None
    weights = _build_weights(config)
    phys = _build_phys(config)

    manifest = build_manifest(
        "search",
        {
            "search": cfg.to_json_dict(),
            "weights": vars(weights),
            "phys": vars(phys),
            "generator": {**gen_section, "defect_rates": vars(rates)},
            "predictor": config.get("predictor", {}),
        },
        {},
        cfg.seed,
    )
    _log(f"search manifest {manifest['id']}")
    try:
        report = run_search(generator, predictor, cfg, weights, phys)
    except PoolInitializationError as exc:
        _log(f"search failed: {exc}")
        return 2
    artifact = {"manifest": manifest, "report": report.to_json_dict()}

    def table(art: dict) -> str:
        rep = art["report"]
        lines = [
            f"init: generated={rep['init']['generated']} "
            f"passed={rep['init']['passed']} rounds={rep['init']['rounds']}"
        ]
        lines += [
            f"iter {log['iteration']:2d}: pool=[{log['pool_min']:.4f}, "
            f"{log['pool_max']:.4f}] admitted={log['admitted']} "
            f"best|dE|={log['best_abs_delta']}"
            for log in rep["iterations"]
        ]
        lines.append(
            f"success={rep['success']} best_abs_delta={rep['best_abs_delta']} "
            f"best_energy={rep['best_energy']}"
        )
        return "\n".join(lines) + "\n"

    _emit(artifact, args, "search_report.json", table)
    return 0


def cmd_geometry(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    scale = args.scale if args.scale is not None else config.get(
        "neighbor_scale", DEFAULT_NEIGHBOR_SCALE
    )
    blobs, unreadable = _read_inputs(args.paths)
    if not blobs:
        _log("no readable input files")
        return 2
    manifest = build_manifest("geometry", {"neighbor_scale": scale}, blobs, args.seed)
    _log(f"geometry manifest {manifest['id']}")

    def inspect(path: str) -> dict:
        outcome = parse_cif(blobs[path])
        if not outcome.ok:
            return {
                "path": path,
                "ok": False,
                "defects": [d.to_json_dict() for d in outcome.defects],
            }
        s = outcome.structure
        nl = build_neighbor_list(s, scale=scale)
        record = {
            "path": path,
            "ok": True,
            "n_sites": len(s.sites),
            "volume": s.lattice.volume,
            "volume_per_atom": volume_per_atom(s),
            "min_pair_distance": min_pair_distance(s),
            "n_neighbor_entries": len(nl),
        }
        if args.neighbors:
            record["neighbors"] = nl.to_json_list()
        return record

    reports = _map_jobs(inspect, [p for p in args.paths if p in blobs], args.jobs)
    if not any(r["ok"] for r in reports):
        _log("no input parsed into a structure")
        return 2
    artifact = {"manifest": manifest, "files": reports, "unreadable": unreadable}

    def table(art: dict) -> str:
        lines = []
        for r in art["files"]:
            if r["ok"]:
                lines.append(
                    f"{r['path']}: sites={r['n_sites']} "
                    f"min_dist={r['min_pair_distance']:.4f} "
                    f"vpa={r['volume_per_atom']:.3f} "
                    f"neighbors={r['n_neighbor_entries']}"
                )
            else:
                lines.append(f"{r['path']}: parse failure")
        return "\n".join(lines) + "\n"

    _emit(artifact, args, "geometry_report.json", table)
    return 0


# ---------------------------------------------------------------------------
# wiring


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument(
        "--jobs", type=int, default=1, help="parallel workers for file batches"
    )
    parser.add_argument("--out", help="directory for JSON artifacts")
    parser.add_argument(
        "--format", choices=("json", "table"), default="table",
        help="stdout rendering",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="catloop",
        description="Score, textify, and search generated crystal structures.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="score candidate CIF files")
    p.add_argument("paths", nargs="+", help="CIF files to score")
    p.add_argument("--target", help="uniform target composition, e.g. Cu:4,O:1")
    p.add_argument(
        "--targets-file", help="JSON map of file name to target composition"
    )
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("textify", help="render adsorption systems as text")
    p.add_argument("paths", nargs="+", help="CIF files with .meta.json sidecars")
    _add_common(p)
    p.set_defaults(func=cmd_textify)

    p = sub.add_parser("grpo", help="advantages and loss for logged groups")
    p.add_argument("groups", help="JSONL file of candidate groups")
    p.add_argument("--beta", type=float, default=None, help="KL coefficient")
    p.add_argument(
        "--epsilon", type=float, default=None, help="z-score denominator epsilon"
    )
    _add_common(p)
    p.set_defaults(func=cmd_grpo)

    p = sub.add_parser("mmtg", help="max-min gated two-task loss")
    p.add_argument(
        "losses", nargs="*", type=float, metavar="LOSS",
        help="two task losses",
    )
    p.add_argument("--gating", type=float, default=None, help="gating in (0, 1]")
    p.add_argument("--pairs", help="JSON file with an array of [a, b] pairs")
    _add_common(p)
    p.set_defaults(func=cmd_mmtg)

    p = sub.add_parser("search", help="run the closed-loop exemplar search")
    _add_common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("geometry", help="periodic geometry summaries")
    p.add_argument("paths", nargs="+", help="CIF files to inspect")
    p.add_argument("--scale", type=float, default=None, help="neighbor cutoff scale")
    p.add_argument(
        "--neighbors", action="store_true", help="include full neighbor lists"
    )
    _add_common(p)
    p.set_defaults(func=cmd_geometry)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "mmtg" and args.losses and len(args.losses) != 2:
        print("catloop mmtg: provide exactly two losses", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliError as exc:
        print(f"catloop {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
