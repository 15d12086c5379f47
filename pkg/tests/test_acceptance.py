"""System-level acceptance checks.

Each test prints exactly one PASS/FAIL line (visible even under pytest
capture) and asserts the same condition. The closed-loop tests render and
optimize for real; the full file takes roughly 15-20 minutes on one CPU
core. Stated tolerances:

1. Frechet closed forms within 1e-9 (symmetry 1e-8 relative), < 1 s.
2. PSD sqrtm relative residual < 1e-8 over 100 random matrices, < 10 s.
3. Rotation orthonormality/determinant within 1e-9 over 10^4 poses;
   center -> principal point within 1e-9; azimuth periodicity bit-exact.
4. Default-configuration descent trace: exactly 278 evaluations,
   best-so-far exactly non-increasing, full grid swept per iteration,
   single-coordinate updates throughout.
5. Hidden-parameter recovery within one grid step (circular for angles,
   azimuth under mode matching) in >= 8/10 seeds, all 10 runs < 10 min.
6. Descent <= random search (equal budget) and < random attributes in
   >= 9/10 seeds.
7. Final FIDs of the two sweep orders within 15% relative (paired
   common-seed evaluation of the two final distributions) on 5/5 seeds;
   orientation-first lower after epoch 1 in >= 4/5 seeds.
8. Freezing orientation degrades final FID more than freezing lighting
   or camera in >= 4/5 seeds.
9. 10 models x 4 images -> 40-record manifest; foregrounds regenerate
   bit-exactly (uint8 equality); viewpoint vectors unit-norm within 1e-9
   with the strict >30-degree roll flag exact.
"""
import time

import numpy as np
import pytest

from attrdesc import cli
from attrdesc.attributes import SearchSpace, default_distribution
from attrdesc.camera import (
    CameraIntrinsics,
    extrinsics,
    project,
    projection_matrix,
)
from attrdesc.closedloop import make_benchmark, recovery_report
from attrdesc.metric import (
    GaussianStats,
    default_extractor,
    extract,
    fit_stats,
    frechet_distance,
    sqrtm_psd,
)
from attrdesc.optimizer import (
    attribute_descent,
    derive_seed,
    evaluate,
    random_attributes,
    random_search,
)
from attrdesc.pipeline import DatasetManifest, generate, regenerate_foreground
from attrdesc.render import (
    RenderMode,
    RenderOptions,
    load_image,
    make_demo_model,
    render,
    to_uint8,
)

RECOVERY_SEEDS = range(10)
ORDER_SEEDS = range(5)


def _canonical(dist):
    """Sort each kind's mixture components by mean.

    Equal-weight mixture components are exchangeable: two runs that learn
    the same azimuth modes in opposite component slots describe the same
    distribution, so they must be sampled identically in paired
    evaluations."""
    from attrdesc.attributes import AttributeDistribution

    return AttributeDistribution(
        tuple(
            tuple(sorted(comps, key=lambda c: c.mean))
            for comps in dist.components
        )
    )


def _report(capsys, n, name, ok, detail=""):
    with capsys.disabled():
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"\nACCEPTANCE CRITERION {n} [{name}]: {status}{suffix}")
    assert ok, f"criterion {n} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def bench():
    return make_benchmark()


@pytest.fixture(scope="module")
def descent_runs(bench):
    """Default-order 2-epoch descent for seeds 0-9, shared by criteria 5-8."""
    t0 = time.monotonic()
    runs = {
        seed: attribute_descent(
            bench.ctx, bench.init, bench.space, epochs=2, seed=seed
        )
        for seed in RECOVERY_SEEDS
    }
    return runs, time.monotonic() - t0


def test_criterion_1_frechet_closed_forms(capsys):
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    failures = []

    # (a) univariate (0,1) vs (1,4): 1 + (1 + 4 - 2*sqrt(4)) = 2.
    a = GaussianStats(np.array([0.0]), np.array([[1.0]]), n=2)
    b = GaussianStats(np.array([1.0]), np.array([[4.0]]), n=2)
    if abs(frechet_distance(a, b, regularization=0.0) - 2.0) > 1e-9:
        failures.append("univariate")

    # (b) identical stats -> 0.
    m = rng.standard_normal((5, 5))
    s = GaussianStats(rng.standard_normal(5), m @ m.T, n=10)
    if abs(frechet_distance(s, s, regularization=0.0)) > 1e-9:
        failures.append("identical")

    # (c) diagonal-covariance oracle, 100 random d=8 cases.
    for _ in range(100):
        mu_a, mu_b = rng.standard_normal(8), rng.standard_normal(8)
        da, db = rng.uniform(0.1, 5.0, 8), rng.uniform(0.1, 5.0, 8)
        got = frechet_distance(
            GaussianStats(mu_a, np.diag(da), n=10),
            GaussianStats(mu_b, np.diag(db), n=10),
            regularization=0.0,
        )
        oracle = np.sum((mu_a - mu_b) ** 2) + np.sum(da + db - 2 * np.sqrt(da * db))
        if abs(got - oracle) > 1e-9:
            failures.append("diagonal")
            break

    # (d) symmetry within 1e-8 relative.
    for _ in range(10):
        ma, mb = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
        sa = GaussianStats(rng.standard_normal(8), ma @ ma.T, n=10)
        sb = GaussianStats(rng.standard_normal(8), mb @ mb.T, n=10)
        d_ab = frechet_distance(sa, sb, regularization=0.0)
        d_ba = frechet_distance(sb, sa, regularization=0.0)
        if abs(d_ab - d_ba) > 1e-8 * max(abs(d_ab), abs(d_ba)):
            failures.append("symmetry")
            break

    elapsed = time.monotonic() - t0
    if elapsed >= 1.0:
        failures.append(f"runtime {elapsed:.2f}s")
    _report(
        capsys, 1, "Frechet closed forms", not failures,
        f"{elapsed:.2f}s" + (f"; failed: {failures}" if failures else ""),
    )


def test_criterion_2_matrix_square_root(capsys):
    t0 = time.monotonic()
    rng = np.random.default_rng(1)
    worst = 0.0
    for d in (2, 16, 64, 128):
        for _ in range(25):  # 100 matrices total
            m = rng.standard_normal((d, d))
            sigma = m @ m.T
            root = sqrtm_psd(sigma)
            rel = np.linalg.norm(root @ root - sigma) / np.linalg.norm(sigma)
            worst = max(worst, rel)
    elapsed = time.monotonic() - t0
    ok = worst < 1e-8 and elapsed < 10.0
    _report(
        capsys, 2, "PSD matrix square root", ok,
        f"max rel err {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_3_camera_geometry(capsys):
    rng = np.random.default_rng(2)
    worst_orth = worst_det = 0.0
    for _ in range(10_000):
        extr = extrinsics(
            rng.uniform(0, 360), rng.uniform(0, 100),
            rng.uniform(0, 100), rng.uniform(0, 360),
        )
        R = extr.rotation
        worst_orth = max(worst_orth, np.abs(R.T @ R - np.eye(3)).max())
        worst_det = max(worst_det, abs(np.linalg.det(R) - 1.0))

    intr = CameraIntrinsics()
    worst_pp = 0.0
    for _ in range(100):
        extr = extrinsics(
            rng.uniform(0, 360), rng.uniform(0, 100),
            rng.uniform(0, 100), rng.uniform(0, 360),
        )
        px = project(projection_matrix(intr, extr), np.zeros(3), intr)
        worst_pp = max(
            worst_pp,
            np.abs(px - [intr.image_width / 2, intr.image_height / 2]).max(),
        )

    periodic = True
    for _ in range(100):
        az, h, d, roll = (
            rng.uniform(0, 360), rng.uniform(0, 100),
            rng.uniform(0, 100), rng.uniform(0, 360),
        )
        e1, e2 = extrinsics(az, h, d, roll), extrinsics(az + 360.0, h, d, roll)
        if not (
            np.array_equal(e1.rotation, e2.rotation)
            and np.array_equal(e1.translation, e2.translation)
        ):
            periodic = False
            break

    ok = worst_orth < 1e-9 and worst_det < 1e-9 and worst_pp < 1e-9 and periodic
    _report(
        capsys, 3, "camera geometry", ok,
        f"orth {worst_orth:.1e}, det {worst_det:.1e}, "
        f"principal point {worst_pp:.1e}, periodicity {periodic}",
    )


def test_criterion_4_descent_mechanics(capsys):
    # Default configuration: 13 parameters, 139 candidates/epoch, 2 epochs.
    model = make_demo_model()
    extractor = default_extractor()
    init = default_distribution()
    space = SearchSpace.build()
    target = init.with_parameter(4, 120.0).with_parameter(9, 66.0)
    images = [render(model, a).image for a in target.sample(100, seed=11)]
    ctx_kwargs = dict(
        models=(model,),
        extractor=extractor,
        target_stats=fit_stats(extract(images, extractor)),
    )
    from attrdesc.optimizer import ObjectiveContext

    _, trace = attribute_descent(
        ObjectiveContext(**ctx_kwargs), init, space, epochs=2, seed=0
    )

    count_ok = len(trace) == 278 == 2 * (3 * 12 + 6 * 12 + 10 + 6 + 10 + 5)
    best = trace.best_so_far()
    monotone_ok = all(b2 <= b1 for b1, b2 in zip(best, best[1:]))

    # Coordinate isolation: iterations appear in order, each sweeps its full
    # grid, and accepted moves change exactly the swept coordinate.
    expected_iters = [(e, i) for e in (1, 2) for i in range(13)]
    seen_iters = []
    isolation_ok = True
    theta = init.theta().copy()
    idx = 0
    for epoch, i in expected_iters:
        sweep = trace.entries[idx : idx + len(space.grids[i])]
        idx += len(sweep)
        seen_iters.append((epoch, i))
        if [(s.epoch, s.param_index) for s in sweep] != [(epoch, i)] * len(sweep):
            isolation_ok = False
        if [s.candidate for s in sweep] != list(space.grids[i]):
            isolation_ok = False
        for s in sweep:
            if s.accepted:
                theta[i] = s.candidate  # only coordinate i may move
    replay_ok = bool(np.allclose(theta, trace.best_theta))

    ok = count_ok and monotone_ok and isolation_ok and replay_ok
    _report(
        capsys, 4, "Alg. 1 mechanics", ok,
        f"evals {len(trace)}, monotone {monotone_ok}, "
        f"isolation {isolation_ok}, replay {replay_ok}",
    )


def test_criterion_5_closed_loop_recovery(bench, descent_runs, capsys):
    runs, elapsed = descent_runs
    successes = 0
    per_seed = []
    for seed in RECOVERY_SEEDS:
        dist, _ = runs[seed]
        report = recovery_report(bench, dist)
        recovered = all(report.values())
        successes += recovered
        if not recovered:
            per_seed.append(
                f"seed {seed} missed "
                + ",".join(k for k, v in report.items() if not v)
            )
    ok = successes >= 8 and elapsed < 600.0
    _report(
        capsys, 5, "closed-loop recovery", ok,
        f"{successes}/10 seeds, {elapsed:.0f}s"
        + ("; " + "; ".join(per_seed) if per_seed else ""),
    )


def test_criterion_6_baseline_dominance(bench, descent_runs, capsys):
    runs, _ = descent_runs
    wins = 0
    for seed in RECOVERY_SEEDS:
        _, trace = runs[seed]
        _, rs_trace = random_search(
            bench.ctx, bench.init, bench.space, budget=len(trace), seed=seed
        )
        ra_score = evaluate(
            bench.ctx, random_attributes(bench.space, seed), derive_seed(seed, 0xFA)
        )
        if trace.best_score <= rs_trace.best_score and trace.best_score < ra_score:
            wins += 1
    ok = wins >= 9
    _report(capsys, 6, "baseline dominance", ok, f"{wins}/10 seeds")


def test_criterion_7_order_robustness(bench, descent_runs, capsys):
    runs, _ = descent_runs
    order_b = bench.order_for(("lighting", "camera", "orientation"))
    within = 0
    epoch1_first_lower = 0
    details = []
    for seed in ORDER_SEEDS:
        dist_a, trace_a = runs[seed]  # default = orientation-first
        dist_b, trace_b = attribute_descent(
            bench.ctx, bench.init, bench.space, epochs=2, order=order_b, seed=seed
        )
        # Final FIDs via paired evaluation: both final distributions are
        # canonicalized (component order is arbitrary) and scored once under
        # a common seed so the comparison reflects the learned parameters,
        # not per-run evaluation noise.
        eval_seed = derive_seed(0xC7, seed)
        fid_a = evaluate(bench.ctx, _canonical(dist_a), eval_seed)
        fid_b = evaluate(bench.ctx, _canonical(dist_b), eval_seed)
        rel = abs(fid_a - fid_b) / max(fid_a, fid_b)
        within += rel < 0.15
        e1_a = min(e.best_score for e in trace_a.entries if e.epoch == 1)
        e1_b = min(e.best_score for e in trace_b.entries if e.epoch == 1)
        epoch1_first_lower += e1_a < e1_b
        details.append(f"s{seed} rel {rel:.3f}")
    ok = within == 5 and epoch1_first_lower >= 4
    _report(
        capsys, 7, "order robustness", ok,
        f"within 15%: {within}/5, epoch-1 orientation-first lower: "
        f"{epoch1_first_lower}/5; " + ", ".join(details),
    )


def test_criterion_8_ablation_direction(bench, descent_runs, capsys):
    runs, _ = descent_runs
    by_group = bench.param_indices_by_group()
    freeze_orders = {
        "orientation": by_group["lighting"] + by_group["camera"],
        "lighting": by_group["orientation"] + by_group["camera"],
        "camera": by_group["orientation"] + by_group["lighting"],
    }
    wins = 0
    for seed in ORDER_SEEDS:
        full = runs[seed][1].best_score
        degradation = {}
        for frozen, order in freeze_orders.items():
            _, trace = attribute_descent(
                bench.ctx, bench.init, bench.space, epochs=2, order=order, seed=seed
            )
            degradation[frozen] = trace.best_score - full
        if degradation["orientation"] > degradation["lighting"] and (
            degradation["orientation"] > degradation["camera"]
        ):
            wins += 1
    ok = wins >= 4
    _report(capsys, 8, "ablation direction", ok, f"{wins}/5 seeds")


def test_criterion_9_pipeline_integrity(tmp_path, capsys):
    models = tuple(
        make_demo_model(f"model{i:02d}", hue=i / 10) for i in range(10)
    )
    distributions = {
        "g0": default_distribution(),
        "g1": default_distribution().with_parameter(4, 150.0),
    }
    rng = np.random.default_rng(9)
    backgrounds = tuple(rng.random((64, 64, 3)).astype(np.float32) for _ in range(3))
    out = tmp_path / "dataset"
    manifest = generate(
        distributions,
        models,
        images_per_model=4,
        out_dir=out,
        opts=RenderOptions(
            mode=RenderMode.GENERATION,
            background_pool=backgrounds,
            occluder_pool=cli.DEMO_OCCLUDERS,
            occlusion_probability=0.3,
        ),
        seed=123,
        save_foregrounds=True,
    )

    count_ok = (
        len(manifest.records) == 40
        and len(DatasetManifest.load(out / "manifest.json").records) == 40
    )

    by_label = {m.label: m for m in models}
    mismatches = 0
    for record in manifest.records:
        saved = to_uint8(load_image(out / "foregrounds" / record.path))
        regen = to_uint8(regenerate_foreground(record, by_label[record.label]))
        if not np.array_equal(saved, regen):
            mismatches += 1

    analysis_dir = tmp_path / "analysis"
    rc = cli.main(
        [
            "analyze", "--manifest", str(out / "manifest.json"),
            "--out", str(analysis_dir),
        ]
    )
    viewpoints_ok = rc == 0
    rows = (analysis_dir / "viewpoints.csv").read_text().strip().splitlines()[1:]
    flags_ok = len(rows) == 40
    for row in rows:
        x, y, z, in_plane, high_roll, _ = row.split(",")
        direction = np.array([float(x), float(y), float(z)])
        if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            viewpoints_ok = False
        if int(high_roll) != int(float(in_plane) > 30.0):
            flags_ok = False

    ok = count_ok and mismatches == 0 and viewpoints_ok and flags_ok
    _report(
        capsys, 9, "pipeline integrity", ok,
        f"records 40: {count_ok}, foreground mismatches: {mismatches}, "
        f"unit-norm: {viewpoints_ok}, roll flags: {flags_ok}",
    )
