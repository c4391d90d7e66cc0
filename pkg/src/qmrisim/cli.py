"""Command-line surface: simulate, sample, pair, replay, noise, metrics.

Every randomized subcommand demands a seed (flag or QMRISIM_SEED) and writes
a provenance sidecar sufficient for exact replay. Exit codes: 0 success,
1 verification/diff failure, 2 usage error, 3 I/O or validation error.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .augment import AugmentationConfig
from .errors import QMRISimError
from .metrics import dice, hd95, multiclass_dice, psnr
from .nifti import read_nifti, read_qmri_set, write_nifti
from .pipeline import (
    PairMode,
    as_mode,
    generate_batch,
    manifest_from_json,
    manifest_to_json,
    regenerate_from_manifest,
)
from .rng import RngState
from .sampler import SamplerConfig, sample_sequence
from .signal import NoiseParams, SequenceKind, SequenceParams, add_rician, as_kind, simulate_volume

EXIT_OK = 0
EXIT_DIFF = 1
EXIT_USAGE = 2
EXIT_ERROR = 3


@dataclass
class RunConfig:
    """Resolved settings for a pair-generation run."""

    mode: PairMode
    sampler: SamplerConfig
    augmentation: AugmentationConfig
    seed: int
    maps_path: Path
    out_dir: Path
    count: int
    workers: int
    distinct: str = "record"


def load_config_file(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise QMRISimError(f"config root must be a mapping: {path}")
    return data


def _build_configs(cfg: dict):
    aug_raw = dict(cfg.get("augmentation", {}))
    samp_raw = dict(cfg.get("sampler", {}))
    try:
        acfg = AugmentationConfig(**aug_raw)
        scfg = SamplerConfig(**samp_raw)
    except TypeError as exc:
        raise QMRISimError(f"bad config key: {exc}") from None
    distinct = str(cfg.get("pair", {}).get("seqinv_distinct", "record"))
    return acfg, scfg, distinct


def _resolve_seed(args, parser) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QMRISIM_SEED")
    if env is not None:
        return int(env)
    parser.error("--seed is required (or set QMRISIM_SEED)")


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get("QMRISIM_WORKERS")
    return int(env) if env else 1


def _write_sidecar(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


_SEQ_FLAGS = ("te", "tr", "ti", "tx", "td", "alpha_deg", "n")


def _params_from_args(args, parser) -> SequenceParams:
    kind = as_kind(args.sequence)
    fields = {name: getattr(args, name) for name in _SEQ_FLAGS}
    if fields["te"] is None or fields["tr"] is None:
        parser.error(f"--te and --tr are required for {kind.value}")
    required = {
        SequenceKind.FSE: (),
        SequenceKind.GRE: ("alpha_deg",),
        SequenceKind.FLAIR: ("ti",),
        SequenceKind.MPRAGE: ("ti", "tx", "alpha_deg", "n"),
    }[kind]
    for name in required:
        if fields[name] is None:
            flag = "--alpha" if name == "alpha_deg" else f"--{name}"
            parser.error(f"{flag} is required for {kind.value}")
    if kind is SequenceKind.MPRAGE and fields["td"] is None:
        fields["td"] = max(
            0.0, fields["tr"] - fields["ti"] - fields["n"] * fields["tx"]
        )
    present = {k: v for k, v in fields.items() if v is not None}
    return SequenceParams(kind=kind, **present)


def cmd_simulate(args, parser) -> int:
    maps = read_qmri_set(args.maps)
    if args.sample:
        seed = _resolve_seed(args, parser)
        rng = RngState(seed)
        scfg = SamplerConfig()
        if args.config:
            _, scfg, _ = _build_configs(load_config_file(args.config))
        params = sample_sequence(args.sequence, scfg, rng)
        provenance = {"sampled": True, "seed": rng.seed}
    else:
        params = _params_from_args(args, parser)
        provenance = {"sampled": False}

    vol = simulate_volume(maps, params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_nifti(vol, out)
    sidecar = out.with_name(out.name.split(".")[0] + ".params.json")
    _write_sidecar(sidecar, {"sequence": params.to_dict(), **provenance})
    print(f"wrote {out} and {sidecar}")
    return EXIT_OK


def cmd_sample(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    scfg = SamplerConfig()
    if args.config:
        _, scfg, _ = _build_configs(load_config_file(args.config))
    rng = RngState(seed)
    for _ in range(args.count):
        params = sample_sequence(args.sequence, scfg, rng)
        print(json.dumps(params.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_pair(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    cfg_raw = load_config_file(args.config) if args.config else {}
    acfg, scfg, distinct = _build_configs(cfg_raw)
    run = RunConfig(
        mode=as_mode(args.mode),
        sampler=scfg,
        augmentation=acfg,
        seed=seed,
        maps_path=Path(args.maps),
        out_dir=Path(args.out),
        count=args.count,
        workers=_resolve_workers(args),
        distinct=distinct,
    )

    maps = read_qmri_set(run.maps_path)
    source_id = run.maps_path.name or str(run.maps_path)
    pairs = generate_batch(
        [maps],
        run.mode,
        run.augmentation,
        run.sampler,
        run.seed,
        run.count,
        workers=run.workers,
        source_ids=[source_id],
        distinct=run.distinct,
    )

    run.out_dir.mkdir(parents=True, exist_ok=True)
    for index, pair in enumerate(pairs):
        pair_dir = run.out_dir / f"{index:04d}"
        pair_dir.mkdir(parents=True, exist_ok=True)
        write_nifti(pair.view_a, pair_dir / "view_a.nii.gz")
        write_nifti(pair.view_b, pair_dir / "view_b.nii.gz")
        (pair_dir / "manifest.json").write_text(manifest_to_json(pair.manifest) + "\n")
    print(f"wrote {len(pairs)} pair(s) under {run.out_dir}")
    return EXIT_OK


def _first_voxel_diff(a: np.ndarray, b: np.ndarray):
    bad = a != b
    if not bad.any():
        return None
    flat = int(np.flatnonzero(bad.ravel(order="F"))[0])
    return tuple(int(c) for c in np.unravel_index(flat, bad.shape, order="F"))


def cmd_replay(args, parser) -> int:
    pair_dir = Path(args.pair)
    manifest_path = pair_dir / "manifest.json"
    if not manifest_path.exists():
        parser.error(f"no manifest.json in {pair_dir}")
    manifest = manifest_from_json(manifest_path.read_text())
    maps = read_qmri_set(args.maps)

    regenerated = regenerate_from_manifest(maps, manifest)
    status = EXIT_OK
    for name, regen in (("view_a", regenerated.view_a), ("view_b", regenerated.view_b)):
        stored = read_nifti(pair_dir / f"{name}.nii.gz")
        where = _first_voxel_diff(stored.data, regen.data)
        if where is not None:
            print(f"{name}: first differing voxel at {where}")
            status = EXIT_DIFF
        else:
            print(f"{name}: identical")
    return status


def cmd_noise(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    vol = read_nifti(args.input)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_nifti(add_rician(vol, NoiseParams(args.sigma), seed), out)
    sidecar = out.with_name(out.name.split(".")[0] + ".noise.json")
    _write_sidecar(
        sidecar, {"input": str(args.input), "sigma": args.sigma, "seed": seed}
    )
    print(f"wrote {out} and {sidecar}")
    return EXIT_OK


def cmd_metrics(args, parser) -> int:
    ref = read_nifti(args.ref)
    test = read_nifti(args.test)
    if args.metric == "psnr":
        if args.peak is None:
            parser.error("--peak is required for psnr (a number or 'auto')")
        if args.peak == "auto":
            peak = float(ref.data.max() - ref.data.min())
        else:
            peak = float(args.peak)
        result = {"psnr": psnr(ref, test, peak), "peak": peak}
    elif args.metric == "dice":
        if args.labels:
            labels = [int(v) for v in args.labels.split(",")]
            per = multiclass_dice(ref, test, labels)
            result = {"dice": {str(k): v for k, v in per.items()}}
        else:
            result = {"dice": dice(ref, test)}
    else:
        result = {"hd95": hd95(ref, test)}
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmrisim",
        description="Simulate MRI contrasts from quantitative maps, build "
        "augmented view pairs, and evaluate image metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate one sequence from a map set")
    p_sim.add_argument("--maps", required=True, help="directory with pd/r1/r2[.nii.gz]")
    p_sim.add_argument("--sequence", required=True, help="fse|gre|flair|mprage")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--sample", action="store_true", help="draw parameters randomly")
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--config", help="YAML config with a sampler section")
    p_sim.add_argument("--te", type=float)
    p_sim.add_argument("--tr", type=float)
    p_sim.add_argument("--ti", type=float)
    p_sim.add_argument("--tx", type=float)
    p_sim.add_argument("--td", type=float)
    p_sim.add_argument("--alpha", dest="alpha_deg", type=float)
    p_sim.add_argument("--n", type=int)
    p_sim.set_defaults(func=cmd_simulate)

    p_sample = sub.add_parser("sample", help="emit sampled parameters as JSON lines")
    p_sample.add_argument("--sequence", required=True)
    p_sample.add_argument("--count", type=int, default=1)
    p_sample.add_argument("--seed", type=int)
    p_sample.add_argument("--config")
    p_sample.set_defaults(func=cmd_sample)

    p_pair = sub.add_parser("pair", help="generate augmented view pairs")
    p_pair.add_argument("--maps", required=True)
    p_pair.add_argument("--mode", required=True, help="base|seqaug|seqinv")
    p_pair.add_argument("--count", type=int, default=1)
    p_pair.add_argument("--seed", type=int)
    p_pair.add_argument("--out", required=True)
    p_pair.add_argument("--workers", type=int)
    p_pair.add_argument("--config", help="YAML config (augmentation/sampler/pair)")
    p_pair.set_defaults(func=cmd_pair)

    p_replay = sub.add_parser("replay", help="verify a pair against its manifest")
    p_replay.add_argument("--maps", required=True)
    p_replay.add_argument("--pair", required=True, help="pair directory")
    p_replay.set_defaults(func=cmd_replay)

    p_noise = sub.add_parser("noise", help="apply Rician corruption to a volume")
    p_noise.add_argument("--input", required=True)
    p_noise.add_argument("--sigma", type=float, required=True)
    p_noise.add_argument("--seed", type=int)
    p_noise.add_argument("--out", required=True)
    p_noise.set_defaults(func=cmd_noise)

    p_metrics = sub.add_parser("metrics", help="compare two volumes")
    p_metrics.add_argument("metric", choices=("psnr", "dice", "hd95"))
    p_metrics.add_argument("--ref", required=True)
    p_metrics.add_argument("--test", required=True)
    p_metrics.add_argument("--peak", help="peak value for psnr, or 'auto'")
    p_metrics.add_argument("--labels", help="comma-separated labels for multi-class dice")
    p_metrics.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except QMRISimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
