"""Command-line front end: optimize, generate, score, benchmark, analyze.

All subcommands are thin drivers over the library modules; configuration
travels in a single JSON file plus a few flag overrides. Exit status is 0
on success and 1 on any handled error (argparse usage errors exit 2).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attributes import (
    AttributeKind,
    AttributeDistribution,
    SearchSpace,
    default_distribution,
)
from .camera import CameraIntrinsics, PlacementMapping
from .metric import (
    ColorGradHist,
    GrayDownsample,
    RandomProjection,
    default_extractor,
    extract,
    fit_stats,
    frechet_distance,
)
from .optimizer import ObjectiveContext, attribute_descent
from .render import (
    OccluderStamp,
    RenderMode,
    RenderOptions,
    load_image,
    make_demo_model,
    render,
)
from . import analysis, closedloop, pipeline


def _kind_map(doc: dict | None, cast) -> dict | None:
    if doc is None:
        return None
    return {AttributeKind(name): cast(v) for name, v in doc.items()}


class Config:
    """Parsed pipeline configuration file (all keys optional)."""

    def __init__(self, doc: dict):
        self.doc = doc
        self.target = doc.get("target", "closed-loop")
        self.epochs = int(doc.get("epochs", 2))
        self.images_per_eval = int(doc.get("images_per_eval", 100))
        self.seed = int(doc.get("seed", 0))
        self.cache_dir = doc.get("cache_dir")
        self.component_counts = _kind_map(doc.get("component_counts"), int)
        self.grid_steps = _kind_map(doc.get("grid_steps"), int)
        self.model_count = int(doc.get("models", {}).get("count", 1))
        self.mapping = PlacementMapping(**doc.get("mapping", {}))
        self.intrinsics = CameraIntrinsics(**doc.get("intrinsics", {}))
        self.occlusion_probability = float(doc.get("occlusion_probability", 0.3))
        self.background_count = int(doc.get("backgrounds", {}).get("count", 4))
        self.background_seed = int(doc.get("backgrounds", {}).get("seed", 7))
        ex = doc.get("extractor", {"strategy": "RandomProjection"})
        self.extractor = self._build_extractor(ex)

    @staticmethod
    def _build_extractor(doc: dict):
        strategies = {
            "GrayDownsample": GrayDownsample,
            "RandomProjection": RandomProjection,
            "ColorGradHist": ColorGradHist,
        }
        doc = dict(doc)
        name = doc.pop("strategy", "RandomProjection")
        if name not in strategies:
            raise ValueError(f"unknown extractor strategy: {name!r}")
        return strategies[name](**doc)

    @classmethod
    def load(cls, path) -> "Config":
        return cls(json.loads(Path(path).read_text()))

    def models(self):
        return tuple(
            make_demo_model(label=f"model{i:02d}", hue=i / max(self.model_count, 1))
            for i in range(self.model_count)
        )


def _apply_overrides(cfg: Config, args) -> Config:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    if getattr(args, "images_per_eval", None) is not None:
        cfg.images_per_eval = args.images_per_eval
    return cfg


def _parse_order(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _demo_backgrounds(count: int, seed: int, intr: CameraIntrinsics):
    """Deterministic soft-gradient backgrounds for generation mode."""
    rng = np.random.default_rng(seed)
    h, w = intr.image_height, intr.image_width
    pool = []
    for _ in range(count):
        top = rng.uniform(0.1, 0.9, size=3)
        bottom = rng.uniform(0.1, 0.9, size=3)
        t = np.linspace(0.0, 1.0, h)[:, None, None]
        img = (1 - t) * top[None, None, :] + t * bottom[None, None, :]
        pool.append(np.broadcast_to(img, (h, w, 3)).astype(np.float32))
    return tuple(pool)


DEMO_OCCLUDERS = (
    OccluderStamp("box", (0.25, 0.25, 0.25)),
    OccluderStamp("disk", (0.6, 0.55, 0.5)),
)


def _closed_loop_stats(cfg: Config, n_target: int = 200, target_seed: int = 12345):
    """Target statistics rendered from the hidden benchmark parameters."""
    model = make_demo_model()
    hidden = closedloop.hidden_distribution()
    images = [
        render(model, a, cfg.intrinsics, cfg.mapping).image
        for a in hidden.sample(n_target, target_seed)
    ]
    return fit_stats(extract(images, cfg.extractor))


def cmd_optimize(args) -> int:
    cfg = _apply_overrides(Config.load(args.config), args)
    out_dir = Path(args.out or "attrdesc_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    order = _parse_order(args.order)
    init = default_distribution(cfg.component_counts, grid_steps=cfg.grid_steps)
    space = SearchSpace.build(
        component_counts=cfg.component_counts, grid_steps=cfg.grid_steps
    )

    if cfg.target == "closed-loop":
        ctx = ObjectiveContext(
            models=cfg.models(),
            extractor=cfg.extractor,
            target_stats=_closed_loop_stats(cfg),
            intrinsics=cfg.intrinsics,
            mapping=cfg.mapping,
            dataset_size=cfg.images_per_eval,
        )
        dist, trace = attribute_descent(
            ctx, init, space, epochs=cfg.epochs, order=order, seed=cfg.seed
        )
        results = {"closed-loop": (dist, trace)}
    else:
        groups = pipeline.ingest_target(
            cfg.target, cfg.extractor, cache_dir=cfg.cache_dir
        )
        by_group = pipeline.optimize_groups(
            groups,
            models=cfg.models(),
            extractor=cfg.extractor,
            intrinsics=cfg.intrinsics,
            mapping=cfg.mapping,
            dataset_size=cfg.images_per_eval,
            init=init,
            space=space,
            epochs=cfg.epochs,
            order=order,
            seed=cfg.seed,
        )
        failed = [r for r in by_group.values() if not r.ok]
        for r in failed:
            print(f"group {r.group_id!r} failed: {r.error}", file=sys.stderr)
        results = {
            gid: (r.distribution, r.trace)
            for gid, r in by_group.items()
            if r.ok
        }
        if not results:
            return 1

    for gid, (dist, trace) in sorted(results.items()):
        (out_dir / f"theta_{gid}.json").write_text(dist.to_json())
        (out_dir / f"trace_{gid}.jsonl").write_text(trace.to_jsonl())
        print(
            f"{gid}: best FID {trace.best_score:.6g} "
            f"after {len(trace)} evaluations"
        )
    return 0


def cmd_generate(args) -> int:
    cfg = _apply_overrides(Config.load(args.config), args)
    theta_dir = Path(args.thetas)
    distributions = {}
    for path in sorted(theta_dir.glob("theta_*.json")):
        gid = path.stem[len("theta_"):]
        distributions[gid] = AttributeDistribution.from_json(path.read_text())
    if not distributions:
        print(f"no theta_*.json files in {theta_dir}", file=sys.stderr)
        return 1
    opts = RenderOptions(
        mode=RenderMode.GENERATION,
        background_pool=_demo_backgrounds(
            cfg.background_count, cfg.background_seed, cfg.intrinsics
        ),
        occluder_pool=DEMO_OCCLUDERS,
        occlusion_probability=cfg.occlusion_probability,
    )
    manifest = pipeline.generate(
        distributions,
        models=cfg.models(),
        images_per_model=args.images_per_model,
        out_dir=args.out or "attrdesc_dataset",
        opts=opts,
        intrinsics=cfg.intrinsics,
        mapping=cfg.mapping,
        seed=cfg.seed,
        save_foregrounds=args.save_foregrounds,
    )
    print(f"wrote {len(manifest.records)} images to {args.out}")
    return 0


def _load_image_set(path: Path) -> list:
    if path.is_file():  # manifest
        manifest = pipeline.DatasetManifest.load(path)
        base = path.parent
        return [load_image(base / r.path) for r in manifest.records]
    files = sorted(
        p for p in path.iterdir()
        if p.is_file() and p.suffix.lower() in pipeline.IMAGE_SUFFIXES
    )
    if not files:
        raise FileNotFoundError(f"no images under {path}")
    return [load_image(p) for p in files]


def cmd_score(args) -> int:
    extractor = default_extractor()
    stats = []
    for spec in (args.set_a, args.set_b):
        images = _load_image_set(Path(spec))
        stats.append(fit_stats(extract(images, extractor)))
    print(f"{frechet_distance(stats[0], stats[1]):.6g}")
    return 0


def cmd_benchmark(args) -> int:
    bench = closedloop.make_benchmark()
    results = closedloop.run_method_comparison(
        bench, epochs=args.epochs if args.epochs is not None else 2,
        seed=args.seed if args.seed is not None else 0,
    )
    lines = ["method,evaluations,final_fid"]
    for r in results:
        lines.append(f"{r.method},{r.budget},{r.final_score:.6g}")
    table = "\n".join(lines) + "\n"
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "benchmark.csv").write_text(table)
    print(table, end="")
    return 0


def cmd_analyze(args) -> int:
    out_dir = Path(args.out or "attrdesc_analysis")
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = PlacementMapping(
        **json.loads(Path(args.config).read_text()).get("mapping", {})
    ) if args.config else PlacementMapping()

    if args.theta:
        dist = AttributeDistribution.from_json(Path(args.theta).read_text())
        samples = analysis.viewpoint_cloud(
            dist, args.samples, mapping=mapping, seed=args.seed or 0
        )
        attr_source = dist.sample(args.samples, (args.seed or 0) + 1)
    elif args.manifest:
        manifest = pipeline.DatasetManifest.load(args.manifest)
        samples = [
            analysis.viewpoint_cloud(
                _SingleSampler(r.attributes), 1, mapping=mapping,
                group_id=r.group_id,
            )[0]
            for r in manifest.records
        ]
        attr_source = manifest
    else:
        print("analyze requires --theta or --manifest", file=sys.stderr)
        return 1

    analysis.export_viewpoints(samples, out_dir / "viewpoints.csv")
    for kind in AttributeKind:
        table = analysis.attribute_histogram(attr_source, kind, bins=args.bins)
        analysis.export_histogram(table, out_dir / f"hist_{kind.value}.csv")
    print(f"wrote analysis files to {out_dir}")
    return 0


class _SingleSampler:
    """Adapts one fixed AttributeVector to the sampler interface."""

    def __init__(self, attrs):
        self.attrs = attrs

    def sample(self, n, seed):
        return [self.attrs] * n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrdesc",
        description="Attribute-distribution search against target image sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run per-group attribute descent")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--config", dest="config_flag", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--images-per-eval", type=int, dest="images_per_eval")
    p.add_argument("--order", help="comma-separated parameter indices")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("generate", help="render a dataset from learned thetas")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--config", dest="config_flag", default=None)
    p.add_argument("--thetas", required=True, help="directory of theta_*.json")
    p.add_argument("--images-per-model", type=int, default=4)
    p.add_argument("--save-foregrounds", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", help="Frechet distance between two image sets")
    p.add_argument("set_a", help="image directory or manifest file")
    p.add_argument("set_b", help="image directory or manifest file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("benchmark", help="descent vs random baselines")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("analyze", help="viewpoint cloud and histograms")
    p.add_argument("--theta")
    p.add_argument("--manifest")
    p.add_argument("--config", default=None)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--bins", type=int, default=12)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config_flag = getattr(args, "config_flag", None)
    if config_flag is not None:
        args.config = config_flag
    if args.command in ("optimize", "generate") and args.config is None:
        parser.error(f"{args.command} requires a config file")
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
