"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run alone with ``python3 -m pytest tests/test_acceptance.py``; the terminal
summary lists PASS/FAIL for every criterion.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from mddra import cli, generator
from mddra.catalog import BANDS, DistractionClass, band_for, default_catalog
from mddra.classifiers import PRESETS, evaluate, kruskal_wallis_ranks, train
from mddra.dbn import estimate_cpts, filter_trip
from mddra.segmentation import optimal_partition
from mddra.severity import FrameObservation, assess_stream, frame_severity, risk_matrix, score_frames
from mddra.stats import descriptive, ols_fit, t_two_sided_p
from mddra.trip import TripRecord

import oracles
from benchdata import bench_split
from published import bench_entries, published_ranks

CAT = default_catalog()
S, C, D, X = DistractionClass.SAFE, DistractionClass.CARELESS, DistractionClass.DANGEROUS, DistractionClass.EXTREMELY_DANGEROUS


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def _below(x):
    return math.nextafter(x, 0.0)


# score -> (colour, distraction class)
CANONICAL_BANDS = [
    (0.05, "Light Green", S),
    (0.175, "Green", S),
    (0.325, "Yellow", S),
    (0.5, "Dark Yellow", C),
    (0.7, "Orange", D),
    (0.85, "Dark Orange", D),
    (0.95, "Red", X),
]
BOUNDARY_SCORES = [
    (0.0, "Light Green", S),
    (0.0999, "Light Green", S),
    (_below(0.1), "Light Green", S),
    (0.1, "Green", S),
    (0.2499, "Green", S),
    (_below(0.25), "Green", S),
    (0.25, "Yellow", S),
    (0.399, "Yellow", S),
    (_below(0.4), "Yellow", S),
    (0.4, "Dark Yellow", C),
    (0.599, "Dark Yellow", C),
    (_below(0.6), "Dark Yellow", C),
    (0.6, "Orange", D),
    (0.79, "Orange", D),
    (_below(0.8), "Orange", D),
    (0.8, "Dark Orange", D),
    (_below(0.9), "Dark Orange", D),
    (0.9, "Red", X),
    (0.99, "Red", X),
    (1.0, "Red", X),
]

RISK_GRID = [
    ("Extreme", [7, 7, 14, 21, 28]),
    ("Very High", [6, 6, 12, 18, 24]),
    ("High", [5, 5, 10, 15, 20]),
    ("Medium", [4, 4, 8, 12, 16]),
    ("Low", [3, 3, 6, 9, 12]),
    ("Slight/Very low", [2, 2, 4, 6, 8]),
    ("No Impact", [1, 1, 2, 3, 4]),
]

T_POINTS = [
    (0.0, 1), (0.5, 1), (1.0, 2), (2.0, 3), (-2.5, 4), (1.96, 5), (3.0, 7), (0.25, 10), (-1.3, 12), (2.228, 10),
    (4.5, 15), (1.0, 20), (-2.086, 20), (6.0, 30), (0.8, 50), (2.6, 100), (10.0, 8), (1.5, 0.5), (3.3, 2.5), (12.0, 200),
]


def _random_frames(n, seed):
    rng = np.random.default_rng(seed)
    codes = [rng.integers(0, len(p.labels), n) for p in CAT.parameters]
    speeds = rng.uniform(0.0, 150.0, n)
    labels = [p.labels for p in CAT.parameters]
    return [FrameObservation(i, *(labels[c][codes[c][i]] for c in range(9)), float(speeds[i])) for i in range(n)]


@criterion(1, "severity band table: 7 canonical bands + 20 boundary scores, < 1 s")
def test_criterion_01_band_table():
    t0 = time.perf_counter()
    assert len(CANONICAL_BANDS) == 7 and len(BOUNDARY_SCORES) == 20
    for score, colour, cls in CANONICAL_BANDS + BOUNDARY_SCORES:
        band = band_for(score)
        assert (band.color, band.distraction_class) == (colour, cls), score
    assert [b.color for b in BANDS] == [c for _, c, _ in CANONICAL_BANDS]
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "risk matrix: all 35 cells")
def test_criterion_02_risk_matrix():
    rendered = risk_matrix()
    assert [label for label, _ in rendered] == [label for label, _ in RISK_GRID]
    cells = [(a, b) for (_, ra), (_, rb) in zip(rendered, RISK_GRID) for a, b in zip(ra, rb)]
    assert len(cells) == 35
    assert all(a == b for a, b in cells)


@criterion(3, "rank table: accuracy ranks exact, z within 0.01")
def test_criterion_03_rank_table():
    table = kruskal_wallis_ranks(bench_entries())
    expected = published_ranks()
    assert len(table.rows) == 21
    for row in table.rows:
        acc_rank, _, _, z = expected[row.model]
        assert row.accuracy_rank == acc_rank, row.model
        assert abs(row.z - z) <= 0.01, row.model
    assert table.row("Boosted Trees").accuracy_rank == table.row("Fine Gaussian SVM").accuracy_rank == 1.5
    assert abs(table.row("Bagged Trees").z - 1.65) <= 0.01
    assert abs(table.row("Boosted Trees").z + 1.57) <= 0.01
    assert abs(table.row("Fine KNN").z + 0.50) <= 0.01


@criterion(4, "severity engine: range, monotonicity, trailing-mean oracle, 1e5 frames < 1 s")
def test_criterion_04_severity_engine():
    frames = _random_frames(100_000, seed=0)
    t0 = time.perf_counter()
    scores = score_frames(frames, CAT)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, elapsed
    assert np.all((scores.frame_score >= 0) & (scores.frame_score <= 1))
    assert np.all((scores.aggregate_score >= 0) & (scores.aggregate_score <= 1))
    assert scores.aggregate_score.tolist() == oracles.trailing_mean(scores.frame_score.tolist(), 5)

    rng = np.random.default_rng(1)
    checked = 0
    while checked < 10_000:
        f = frames[int(rng.integers(len(frames)))]
        which = int(rng.integers(9))
        spec = CAT.parameters[which]
        i = spec.index(f.actions()[which])
        if i == len(spec.labels) - 1:
            continue
        actions = list(f.actions())
        actions[which] = spec.labels[int(rng.integers(i + 1, len(spec.labels)))]
        g = FrameObservation(f.index, *actions, f.speed)
        assert frame_severity(g, CAT) >= frame_severity(f, CAT)
        checked += 1


@criterion(5, "segmentation: exact optimality on 200 small instances, monotone in k, 1e5 points k=7 < 2 s")
def test_criterion_05_segmentation():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        values = (rng.integers(0, 20, n) / 4).tolist() if rng.random() < 0.5 else rng.random(n).round(6).tolist()
        values.sort()
        losses = []
        for k in range(1, min(4, n) + 1):
            part = optimal_partition(values, k)
            exact = oracles.exact_partition_loss(values, part.boundaries)
            best, _ = oracles.brute_partition(values, k)
            assert exact == best, (values, k)
            losses.append(exact)
        assert all(a >= b for a, b in zip(losses, losses[1:]))
    big = np.sort(np.random.default_rng(6).random(100_000))
    t0 = time.perf_counter()
    part = optimal_partition(big, 7)
    assert time.perf_counter() - t0 < 2.0
    assert len(part.boundaries) == 7


@criterion(6, "statistics: OLS oracle 1e-8, orthogonality, skew, kurtosis, t p-values 1e-9")
def test_criterion_06_statistics():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n, p = int(rng.integers(20, 80)), int(rng.integers(1, 5))
        Xm = rng.normal(size=(n, p))
        y = Xm @ rng.normal(size=p) + 1.5 + rng.normal(size=n)
        fit = ols_fit(Xm, y)
        beta, se = oracles.ols_normal_equations(Xm, y)
        assert np.max(np.abs(fit.estimates - beta)) < 1e-8
        assert np.max(np.abs(fit.std_errors - se)) < 1e-8
        design = np.hstack([Xm, np.ones((n, 1))])
        assert np.max(np.abs(design.T @ fit.residuals)) < 1e-8
    for _ in range(20):
        half = rng.exponential(2.0, size=400)
        assert abs(descriptive(np.concatenate([5 + half, 5 - half])).skewness) < 1e-12
    assert descriptive([-1.0, 1.0] * 50).kurtosis == 1.0
    for t, df in T_POINTS:
        assert abs(t_two_sided_p(t, df) - oracles.t_two_sided_p(t, df)) < 1e-9


@criterion(7, "DBN: recovery within 0.05, normalised posteriors, +10 points over stationary baseline")
def test_criterion_07_dbn():
    truth = generator.ground_truth_cpts()
    trip = generator.generate(generator.dbn_scenario(10_000, seed=0))
    est = estimate_cpts([list(zip(trip.frames, trip.labels))])
    for name, fam in truth.families.items():
        assert np.max(np.abs(est.families[name].table - fam.table)) <= 0.05, name
    assert np.max(np.abs(est.transition - truth.transition)) <= 0.05
    w, v = np.linalg.eig(est.transition.T)
    pi = np.real(v[:, np.argmax(np.real(w))])
    baseline_state = est.states[int(np.argmax(pi / pi.sum()))]
    hits = base = total = 0
    for seed in (1001, 1002, 1003):
        test = generator.generate(generator.dbn_scenario(1000, seed=seed))
        post = filter_trip(test, est)
        assert all(abs(b.probs.sum() - 1.0) <= 1e-9 for b in post)
        hits += sum(b.argmax == l for b, l in zip(post, test.labels))
        base += sum(l == baseline_state for l in test.labels)
        total += len(test.labels)
    assert hits / total >= base / total + 0.10


@criterion(8, "classifier bench: bagged trees >= 90% and beats majority and coarse KNN; fine KNN 100% on train; deterministic")
def test_criterion_08_classifier_bench():
    assert PRESETS["Bagged Trees"].hyperparameters["tree_count"] == 50
    assert PRESETS["Fine KNN"].hyperparameters["k"] == 1
    Xa, ya, Xb, yb = bench_split()
    assert Xa.shape[0] + Xb.shape[0] == 5000
    reports = {}
    for name in ("Bagged Trees", "Coarse KNN"):
        model = train(PRESETS[name], Xa, ya, seed=0)
        reports[name] = evaluate(model, Xb, yb)
        again = evaluate(train(PRESETS[name], Xa, ya, seed=0), Xb, yb)
        assert again.deterministic_document() == reports[name].deterministic_document()
    majority = 100.0 * np.mean(yb == np.argmax(np.bincount(ya, minlength=3)))
    bag = reports["Bagged Trees"].accuracy
    assert bag >= 90.0 and bag > majority and bag > reports["Coarse KNN"].accuracy
    fine = evaluate(train(PRESETS["Fine KNN"], Xa, ya), Xa, ya)
    assert fine.accuracy == 100.0
    for r in list(reports.values()) + [fine]:
        m = r.matrix
        truth = yb if r is not fine else ya
        assert m.sum() == truth.size
        assert m.sum(axis=1).tolist() == np.bincount(truth, minlength=3).tolist()


@criterion(9, "takeover: fires once, at the first dangerous frame")
def test_criterion_09_takeover():
    calm = [p.labels[0] for p in CAT.parameters]
    hot = [p.labels[-1] for p in CAT.parameters]
    pattern = [calm] * 8 + [hot] * 12
    frames = [FrameObservation(i, *acts, 70.0) for i, acts in enumerate(pattern)]
    out = assess_stream(TripRecord(frames), CAT)
    agg = [a.aggregate_score for a in out]
    crossings = sum(1 for a, b in zip(agg, agg[1:]) if a < 0.6 <= b)
    assert crossings == 1 and agg[0] < 0.6
    fired = [a.frame_index for a in out if a.takeover]
    first = next(a.frame_index for a in out if a.band.distraction_class.is_dangerous)
    assert fired == [first]


@criterion(10, "end-to-end: generate, score, train, evaluate are byte-identical across runs")
def test_criterion_10_end_to_end(tmp_path):
    import shutil

    root = tmp_path / "run"

    def pipeline():
        root.mkdir()
        for preset, seed, frames in (("escalating", 11, 400), ("safe_cruise", 12, 300)):
            assert cli.main(["generate", "--preset", preset, "--frames", str(frames), "--seed", str(seed), "-o", str(root / f"{preset}.csv"), "-q"]) == 0
        assert cli.main(["score", str(root / "escalating.csv"), "-o", str(root / "scores.csv"), "-q"]) == 0
        assert cli.main(["train", str(root / "escalating.csv"), str(root / "safe_cruise.csv"), "--seed", "3", "-o", str(root / "model.json"), "-q"]) == 0
        assert cli.main(["evaluate", str(root / "model.json"), str(root / "escalating.csv"), "-o", str(root / "evaluation.csv"), "-q"]) == 0
        files = {p.name: p.read_bytes() for p in sorted(root.iterdir())}
        shutil.rmtree(root)
        return files

    # same command lines twice; manifests record output paths, so both runs use one directory
    first = pipeline()
    second = pipeline()
    assert len(first) == 10  # five outputs plus their manifests
    assert first == second

if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
