"""Per-group optimization and dataset generation.

Targets are grouped (one class or camera per group, one attribute list
learned per group), optimized independently, and rendered out to a labeled
dataset with backgrounds and occluders plus a manifest that records enough
to regenerate every foreground bit-exactly.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attributes import (
    AttributeDistribution,
    AttributeVector,
    SearchSpace,
    default_distribution,
)
from .camera import CameraIntrinsics, PlacementMapping
from .metric import (
    FeatureExtractor,
    GaussianStats,
    StatsCache,
    default_extractor,
    extract,
    fit_stats,
)
from .optimizer import (
    ObjectiveContext,
    OptimizationTrace,
    attribute_descent,
    derive_seed,
)
from .render import (
    ObjectModel,
    RenderMode,
    RenderOptions,
    composite,
    load_image,
    render,
    save_image,
)

WORKERS_ENV = "ATTRDESC_WORKERS"

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass(frozen=True)
class TargetGroup:
    """One class/camera worth of target images with precomputed stats."""

    group_id: str
    image_paths: tuple[str, ...]
    stats: GaussianStats

    def __post_init__(self):
        if len(self.image_paths) < 2:
            raise ValueError(
                f"group {self.group_id!r} needs >= 2 images for statistics"
            )


@dataclass(frozen=True)
class ManifestRecord:
    path: str  # relative to the manifest's directory
    label: str  # identity / class label (model label)
    group_id: str
    attributes: AttributeVector
    background_id: int  # index into the background pool, -1 if none
    occluded: bool
    seed: int  # per-image seed for sampling and compositing

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "label": self.label,
            "group_id": self.group_id,
            "attributes": self.attributes.as_dict(),
            "background_id": self.background_id,
            "occluded": self.occluded,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRecord":
        return cls(
            path=d["path"],
            label=d["label"],
            group_id=d["group_id"],
            attributes=AttributeVector.from_dict(d["attributes"]),
            background_id=int(d["background_id"]),
            occluded=bool(d["occluded"]),
            seed=int(d["seed"]),
        )


@dataclass
class DatasetManifest:
    SCHEMA = "dataset-manifest/1"

    dataset_id: str
    config_digest: str
    records: list[ManifestRecord] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": self.SCHEMA,
                "dataset_id": self.dataset_id,
                "config_digest": self.config_digest,
                "records": [r.to_dict() for r in self.records],
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("schema") != cls.SCHEMA:
            raise ValueError(f"unsupported schema: {doc.get('schema')!r}")
        return cls(
            dataset_id=doc["dataset_id"],
            config_digest=doc["config_digest"],
            records=[ManifestRecord.from_dict(d) for d in doc["records"]],
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text())


def _list_images(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def _group_dataset_id(group_id: str, paths: list[Path]) -> str:
    digest = hashlib.sha256()
    digest.update(group_id.encode())
    for p in paths:
        digest.update(p.name.encode())
        digest.update(str(p.stat().st_size).encode())
    return digest.hexdigest()[:16]


def ingest_target(
    target_dir,
    extractor: FeatureExtractor | None = None,
    cache_dir=None,
) -> list[TargetGroup]:
    """Assemble target groups from a directory.

    A subdirectory per group (class or camera) yields one group each; a flat
    directory of images collapses to the single group ``"all"``. Statistics
    are computed once per (group contents, extractor config) and cached.
    """
    target_dir = Path(target_dir)
    if not target_dir.is_dir():
        raise FileNotFoundError(f"target directory not found: {target_dir}")
    extractor = extractor or default_extractor()
    cache = StatsCache(cache_dir) if cache_dir is not None else None

    subdirs = sorted(p for p in target_dir.iterdir() if p.is_dir())
    if subdirs:
        layout = [(d.name, _list_images(d)) for d in subdirs]
    else:
        layout = [("all", _list_images(target_dir))]

    groups = []
    for group_id, paths in layout:
        if not paths:
            raise ValueError(f"group {group_id!r} contains no images")

        def compute(paths=paths):
            images = [load_image(p) for p in paths]
            return fit_stats(extract(images, extractor))

        if cache is not None:
            stats = cache.get_or_compute(
                _group_dataset_id(group_id, paths), extractor, compute
            )
        else:
            stats = compute()
        groups.append(
            TargetGroup(
                group_id=group_id,
                image_paths=tuple(str(p) for p in paths),
                stats=stats,
            )
        )
    return groups


@dataclass(frozen=True)
class GroupResult:
    group_id: str
    distribution: AttributeDistribution | None
    trace: OptimizationTrace | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _optimize_one(args) -> GroupResult:
    (group, models, extractor, intrinsics, mapping, dataset_size,
     init, space, epochs, order, seed) = args
    try:
        ctx = ObjectiveContext(
            models=models,
            extractor=extractor,
            target_stats=group.stats,
            intrinsics=intrinsics,
            mapping=mapping,
            dataset_size=dataset_size,
        )
        dist, trace = attribute_descent(
            ctx,
            init,
            space,
            epochs=epochs,
            order=order,
            seed=derive_seed(seed, hash(group.group_id) & 0x7FFFFFFF),
        )
        return GroupResult(group.group_id, dist, trace)
    except Exception as exc:  # per-group isolation: report, don't abort
        return GroupResult(group.group_id, None, None, error=str(exc))


def optimize_groups(
    groups: list[TargetGroup],
    models: tuple[ObjectModel, ...],
    extractor: FeatureExtractor | None = None,
    intrinsics: CameraIntrinsics = CameraIntrinsics(),
    mapping: PlacementMapping = PlacementMapping(),
    dataset_size: int = 100,
    init: AttributeDistribution | None = None,
    space: SearchSpace | None = None,
    epochs: int = 2,
    order: list[int] | None = None,
    seed: int = 0,
) -> dict[str, GroupResult]:
    """Run attribute descent independently for every group.

    One failed group is reported in its result instead of aborting the rest.
    Set the ``ATTRDESC_WORKERS`` environment variable above 1 to optimize
    groups in parallel processes; results are identical either way.
    """
    if not groups:
        raise ValueError("at least one target group required")
    extractor = extractor or default_extractor()
    init = init or default_distribution()
    space = space or SearchSpace.build()
    jobs = [
        (g, models, extractor, intrinsics, mapping, dataset_size,
         init, space, epochs, order, seed)
        for g in groups
    ]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_optimize_one, jobs))
    else:
        results = [_optimize_one(job) for job in jobs]
    return {r.group_id: r for r in results}


def _config_digest(parts: dict) -> str:
    return hashlib.sha256(
        json.dumps(parts, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


def generate(
    distributions: dict[str, AttributeDistribution],
    models: tuple[ObjectModel, ...],
    images_per_model: int,
    out_dir,
    opts: RenderOptions = RenderOptions(mode=RenderMode.GENERATION),
    intrinsics: CameraIntrinsics = CameraIntrinsics(),
    mapping: PlacementMapping = PlacementMapping(),
    seed: int = 0,
    save_foregrounds: bool = False,
    dataset_id: str = "generated",
) -> DatasetManifest:
    """Render the final dataset and write its manifest.

    Each (model, sequence) slot is assigned a group round-robin, so group
    counts deviate from equal proportions by less than one image per model.
    Foregrounds are rendered in Optimization mode from a per-image seed that
    the manifest records; backgrounds and occluders are composited on top,
    so re-rendering from the manifest reproduces every foreground exactly.
    """
    if not models:
        raise ValueError("at least one model required")
    if images_per_model < 1:
        raise ValueError("images_per_model must be >= 1")
    if not distributions:
        raise ValueError("at least one learned distribution required")
    if opts.mode is not RenderMode.GENERATION:
        raise ValueError("generation requires Generation-mode render options")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fg_dir = out_dir / "foregrounds"
    if save_foregrounds:
        fg_dir.mkdir(exist_ok=True)

    group_ids = sorted(distributions)
    fg_opts = RenderOptions()  # Optimization mode: black background
    manifest = DatasetManifest(
        dataset_id=dataset_id,
        config_digest=_config_digest(
            {
                "groups": group_ids,
                "models": [m.label for m in models],
                "images_per_model": images_per_model,
                "seed": seed,
                "intrinsics": intrinsics,
                "mapping": mapping,
                "occlusion_probability": opts.occlusion_probability,
                "backgrounds": len(opts.background_pool),
            }
        ),
    )

    slot = 0
    seq: dict[tuple[str, str], int] = {}
    for model in models:
        for _ in range(images_per_model):
            group_id = group_ids[slot % len(group_ids)]
            image_seed = derive_seed(seed, slot)
            slot += 1
            attrs = distributions[group_id].sample(1, image_seed)[0]
            result = render(model, attrs, intrinsics, mapping, fg_opts)

            rng = np.random.default_rng(derive_seed(image_seed, 0xB6))
            if opts.background_pool:
                background_id = int(rng.integers(0, len(opts.background_pool)))
                background = opts.background_pool[background_id]
            else:
                background_id = -1
                background = np.zeros_like(result.image)
            final, occluded = composite(
                result.image,
                result.mask,
                background,
                opts.occluder_pool,
                opts.occlusion_probability,
                seed=derive_seed(image_seed, 0x0C),
            )

            key = (group_id, model.label)
            seq[key] = seq.get(key, 0) + 1
            name = f"{group_id}_{model.label}_{seq[key]:04d}.png"
            save_image(final, out_dir / name)
            if save_foregrounds:
                save_image(result.image, fg_dir / name)
            manifest.records.append(
                ManifestRecord(
                    path=name,
                    label=model.label,
                    group_id=group_id,
                    attributes=attrs,
                    background_id=background_id,
                    occluded=occluded,
                    seed=image_seed,
                )
            )
    manifest.save(out_dir / "manifest.json")
    return manifest


def regenerate_foreground(
    record: ManifestRecord,
    model: ObjectModel,
    intrinsics: CameraIntrinsics = CameraIntrinsics(),
    mapping: PlacementMapping = PlacementMapping(),
) -> np.ndarray:
    """Re-render one manifest record's pre-composite foreground
    (Optimization mode, recorded attributes)."""
    return render(
        model, record.attributes, intrinsics, mapping, RenderOptions()
    ).image
