"""View-pair generation: Base, SeqAug and SeqInv modes.

A pair is two augmented renderings of the same anatomy. Base simulates one
MPRAGE and augments it twice; SeqAug samples a single random sequence and
augments the one simulation twice; SeqInv samples two distinct sequences and
augments each simulation once. Every pair carries a manifest (mode, per-view
sequence parameters, fully resolved augmentation plans, seeds, source id)
from which both views regenerate bit-exactly.

Randomness is split into three fixed substreams of the pair seed: sequence
sampling, view-a plan, view-b plan.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

from .augment import AugmentationConfig, AugmentationPlan, apply_plan, make_plan
from .errors import MissingSourceError, SchemaMismatchError
from .rng import RngState, derive_seed, normalize_seed
from .sampler import SamplerConfig, sample_sequence, sequence_kinds
from .signal import SequenceParams, simulate_volume
from .volume import QMRIMaps, Volume3D

MANIFEST_SCHEMA_VERSION = 1

# Substream ids under the pair seed.
_STREAM_SEQUENCE = 0
_STREAM_AUG_A = 1
_STREAM_AUG_B = 2

_MAX_REDRAWS = 1000


class PairMode(str, Enum):
    BASE = "base"
    SEQAUG = "seqaug"
    SEQINV = "seqinv"


def as_mode(value) -> PairMode:
    if isinstance(value, PairMode):
        return value
    try:
        return PairMode(str(value).lower())
    except ValueError:
        raise ValueError(
            f"unknown pair mode {value!r}; expected one of "
            f"{[m.value for m in PairMode]}"
        ) from None


@dataclass(frozen=True, eq=False)
class ViewPair:
    """Two augmented views plus the manifest that regenerates them."""

    view_a: Volume3D
    view_b: Volume3D
    manifest: dict


def _draw_kind(rng: RngState):
    kinds = sequence_kinds()
    return kinds[rng.choice_index(len(kinds))]


def generate_pair(
    maps: QMRIMaps,
    mode,
    acfg: AugmentationConfig,
    scfg: SamplerConfig,
    seed: int,
    source_id: str = "unknown",
    distinct: str = "record",
) -> ViewPair:
    """Generate one view pair; deterministic in (maps, mode, configs, seed).

    `distinct` controls SeqInv strictness: "record" re-draws until the two
    (kind, parameters) records differ, "kind" until the kinds differ.
    """
    mode = as_mode(mode)
    if distinct not in ("record", "kind"):
        raise ValueError("distinct must be 'record' or 'kind'")
    root = RngState(seed)
    seq_rng = root.substream(_STREAM_SEQUENCE)

    if mode is PairMode.BASE:
        params_a = params_b = sample_sequence("mprage", scfg, seq_rng)
    elif mode is PairMode.SEQAUG:
        params_a = params_b = sample_sequence(_draw_kind(seq_rng), scfg, seq_rng)
    else:
        params_a = sample_sequence(_draw_kind(seq_rng), scfg, seq_rng)
        for _ in range(_MAX_REDRAWS):
            params_b = sample_sequence(_draw_kind(seq_rng), scfg, seq_rng)
            if distinct == "kind" and params_b.kind is not params_a.kind:
                break
            if distinct == "record" and params_b != params_a:
                break
        else:
            raise RuntimeError("could not draw a distinct second sequence")

    plan_a = make_plan(acfg, maps.grid, root.substream(_STREAM_AUG_A))
    plan_b = make_plan(acfg, maps.grid, root.substream(_STREAM_AUG_B))

    vol_a = simulate_volume(maps, params_a)
    vol_b = vol_a if params_b == params_a else simulate_volume(maps, params_b)

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "mode": mode.value,
        "seed": normalize_seed(seed),
        "source_id": source_id,
        "views": [
            {"sequence": params_a.to_dict(), "plan": plan_a.to_dict()},
            {"sequence": params_b.to_dict(), "plan": plan_b.to_dict()},
        ],
    }
    return ViewPair(
        view_a=apply_plan(vol_a, plan_a),
        view_b=apply_plan(vol_b, plan_b),
        manifest=manifest,
    )


def _resolve_source(maps, manifest: dict) -> QMRIMaps:
    if isinstance(maps, QMRIMaps):
        return maps
    source_id = manifest.get("source_id")
    try:
        return maps[source_id]
    except KeyError:
        raise MissingSourceError(f"no map set with id {source_id!r}") from None


def regenerate_from_manifest(maps, manifest: dict) -> ViewPair:
    """Rebuild both views of a pair, bit-identical to the original emission.

    `maps` is either the QMRIMaps the manifest was generated from, or a
    mapping from source id to map set.
    """
    version = manifest.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"manifest schema_version {version!r} not supported "
            f"(expected {MANIFEST_SCHEMA_VERSION})"
        )
    source = _resolve_source(maps, manifest)

    views = []
    for view in manifest["views"]:
        params = SequenceParams.from_dict(view["sequence"])
        plan = AugmentationPlan.from_dict(view["plan"])
        views.append(apply_plan(simulate_volume(source, params), plan))

    return ViewPair(view_a=views[0], view_b=views[1], manifest=manifest)


def manifest_to_json(manifest: dict) -> str:
    """Canonical JSON serialization (sorted keys, exact float round-trip)."""
    return json.dumps(manifest, sort_keys=True, indent=2)


def manifest_from_json(text: str) -> dict:
    return json.loads(text)


# Worker-side context for batch generation; populated by the pool initializer
# so each task message carries only (index, seed).
_BATCH_CTX: dict = {}


def _batch_init(maps_list, source_ids, mode, acfg, scfg, distinct):
    _BATCH_CTX["args"] = (maps_list, source_ids, mode, acfg, scfg, distinct)


def _batch_task(item):
    index, pair_seed = item
    maps_list, source_ids, mode, acfg, scfg, distinct = _BATCH_CTX["args"]
    maps = maps_list[index % len(maps_list)]
    source_id = source_ids[index % len(source_ids)]
    return generate_pair(maps, mode, acfg, scfg, pair_seed, source_id, distinct)


def generate_batch(
    maps_list,
    mode,
    acfg: AugmentationConfig,
    scfg: SamplerConfig,
    seed: int,
    count: int,
    workers: int = 1,
    source_ids=None,
    distinct: str = "record",
) -> list[ViewPair]:
    """Generate `count` pairs with per-pair seeds derived from (seed, index).

    Map sets are assigned round-robin. Output order is by index and the
    result is identical for any worker count, because each pair is a pure
    function of its derived seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if isinstance(maps_list, QMRIMaps):
        maps_list = [maps_list]
    maps_list = list(maps_list)
    if source_ids is None:
        source_ids = [f"maps-{i}" for i in range(len(maps_list))]
    source_ids = list(source_ids)
    if len(source_ids) != len(maps_list):
        raise ValueError("source_ids must match maps_list in length")

    mode = as_mode(mode)
    items = [(i, derive_seed(seed, i)) for i in range(count)]

    if workers == 1:
        _batch_init(maps_list, source_ids, mode, acfg, scfg, distinct)
        return [_batch_task(item) for item in items]

    with ProcessPoolExecutor(
        max_workers=workers,
        initializer=_batch_init,
        initargs=(maps_list, source_ids, mode, acfg, scfg, distinct),
    ) as pool:
        return list(pool.map(_batch_task, items))
