import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import pdist, squareform

from oracles import bottleneck, brute_rips, prim_mst_lengths, strict_local_minima, sweep_sublevel
from tdasleep.diagram import PersistenceDiagram, diagrams_from_csv, diagrams_to_csv
from tdasleep.errors import EmbeddingError, ParseError
from tdasleep.tda import (PointCloud, maxmin_subsample, rips_persistence, sublevel_persistence,
                          takens_embed)


def _bars(dgm, finite_only=False):
    rows = [tuple(map(float, r)) for r in dgm.expanded()]
    if finite_only:
        rows = [r for r in rows if math.isfinite(r[1])]
    return sorted(rows)


# ---------------------------------------------------------------- takens

def test_takens_small():
    f = np.arange(10.0)
    pc = takens_embed(f, 2, 3)
    assert len(pc) == 6
    assert tuple(pc.points[0]) == (0.0, 2.0, 4.0)
    assert tuple(pc.points[-1]) == (5.0, 7.0, 9.0)


def test_takens_full_window():
    pc = takens_embed(np.zeros(180 * 256), 256, 3)
    assert len(pc) == 45568


def test_takens_constant_signal():
    pc = takens_embed(np.full(50, 3.5), 4, 3)
    assert np.all(pc.points == 3.5)


@pytest.mark.parametrize("n,tau,d", [(4, 2, 3), (2, 1, 3), (0, 1, 2)])
def test_takens_too_short(n, tau, d):
    with pytest.raises(EmbeddingError):
        takens_embed(np.zeros(n), tau, d)


@given(st.integers(5, 200), st.integers(1, 10), st.integers(2, 5))
def test_takens_count(n, tau, d):
    if n <= (d - 1) * tau:
        return
    f = np.random.default_rng(n).normal(size=n)
    pc = takens_embed(f, tau, d)
    assert len(pc) == n - (d - 1) * tau
    i = len(pc) // 2
    np.testing.assert_array_equal(pc.points[i], f[i + tau * np.arange(d)])


# ---------------------------------------------------------------- maxmin

def test_maxmin_all_points():
    pc = takens_embed(np.random.default_rng(0).normal(size=40), 1, 3)
    out = maxmin_subsample(pc, len(pc), seed=5)
    assert sorted(map(tuple, out.points)) == sorted(map(tuple, pc.points))


def test_maxmin_corners():
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    rng = np.random.default_rng(1)
    dupes = corners[2] + 1e-6 * rng.uniform(size=(100, 2))
    pts = np.vstack([dupes[:50], corners, dupes[50:]])
    for seed in range(10):
        sub = maxmin_subsample(PointCloud(pts, 2, 1), 4, seed=seed)
        # every corner is represented (corner 2 possibly by one of its duplicates)
        for c in corners:
            assert np.min(np.linalg.norm(sub.points - c, axis=1)) < 1e-5


def test_maxmin_single():
    pts = np.random.default_rng(2).normal(size=(30, 3))
    sub = maxmin_subsample(PointCloud(pts, 3, 1), 1, seed=9)
    assert len(sub) == 1
    assert any(np.array_equal(sub.points[0], p) for p in pts)


def test_maxmin_deterministic():
    pts = np.random.default_rng(3).normal(size=(200, 3))
    a = maxmin_subsample(PointCloud(pts, 3, 1), 20, seed=4)
    b = maxmin_subsample(PointCloud(pts, 3, 1), 20, seed=4)
    np.testing.assert_array_equal(a.points, b.points)


def test_maxmin_covering_radius_shrinks():
    pts = np.random.default_rng(4).uniform(size=(300, 2))
    cloud = PointCloud(pts, 2, 1)

    def cover(k):
        sub = maxmin_subsample(cloud, k, seed=0).points
        return np.max(np.min(np.linalg.norm(pts[:, None] - sub[None], axis=-1), axis=1))

    assert cover(64) < cover(16) < cover(4)


# ---------------------------------------------------------------- rips

def test_rips_unit_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    h0, h1 = rips_persistence(sq, max_dim=1)
    assert _bars(h0) == [(0.0, 1.0)] * 3 + [(0.0, math.inf)]
    assert _bars(h1) == [(1.0, math.sqrt(2))]
    ref0, ref1 = brute_rips(sq)
    assert _bars(h0, True) == ref0 and _bars(h1) == ref1


def test_rips_equilateral():
    s = 2.5
    tri = np.array([[0, 0], [s, 0], [s / 2, s * math.sqrt(3) / 2]])
    h0, h1 = rips_persistence(tri, max_dim=1)
    np.testing.assert_allclose([d for _, d in _bars(h0, True)], [s, s], rtol=1e-15)
    assert len(h1) == 0
    assert brute_rips(tri)[1] == []


def test_rips_identical_points():
    h0, h1 = rips_persistence(np.ones((7, 3)), max_dim=1)
    assert _bars(h0) == [(0.0, 0.0)] * 6 + [(0.0, math.inf)]
    assert len(h1) == 0


def test_rips_single_point():
    h0, h1 = rips_persistence(np.zeros((1, 3)), max_dim=1)
    assert _bars(h0) == [(0.0, math.inf)]
    assert len(h1) == 0


def test_rips_h0_only():
    out = rips_persistence(np.random.default_rng(0).normal(size=(10, 2)), max_dim=0)
    assert len(out) == 1 and out[0].dim == 0


def test_rips_circle_has_one_big_loop():
    th = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    h0, h1 = rips_persistence(np.column_stack([np.cos(th), np.sin(th)]))
    life = h1.deaths - h1.births
    assert np.sum(life > 0.5) == 1


def test_rips_h0_matches_mst():
    rng = np.random.default_rng(10)
    for _ in range(100):
        n = int(rng.integers(2, 65))
        pts = rng.normal(size=(n, int(rng.integers(1, 4))))
        h0 = rips_persistence(pts, max_dim=0)[0]
        deaths = sorted(d for _, d in _bars(h0, True))
        np.testing.assert_allclose(deaths, prim_mst_lengths(pts), rtol=1e-12, atol=0)


def test_rips_h1_matches_brute_force():
    rng = np.random.default_rng(11)
    for trial in range(50):
        n = int(rng.integers(3, 13))
        if trial % 5 == 0:
            # integer grid points: many tied edge lengths
            pts = rng.integers(0, 3, size=(n, 2)).astype(float)
        else:
            pts = rng.normal(size=(n, int(rng.integers(2, 4))))
        dist = squareform(pdist(pts))
        ref0, ref1 = brute_rips(pts, dist)
        h0, h1 = rips_persistence(pts, max_dim=1)
        assert _bars(h1) == ref1, trial
        assert [b for b in _bars(h0, True) if b[1] > b[0]] == ref0


def test_rips_explicit_threshold_cuts_late_loops():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    h0, h1 = rips_persistence(sq, threshold=1.2)
    assert _bars(h1) == [(1.0, math.inf)]


def test_rips_deterministic():
    pts = np.random.default_rng(12).normal(size=(120, 3))
    a = diagrams_to_csv(rips_persistence(pts))
    b = diagrams_to_csv(rips_persistence(pts.copy()))
    assert a == b


# ---------------------------------------------------------------- sublevel

def test_sublevel_three_points():
    assert _bars(sublevel_persistence([0, 2, 1])) == [(0.0, math.inf), (1.0, 2.0)]
    assert sweep_sublevel([0, 2, 1]) == ([(1.0, 2.0)], 0.0)


def test_sublevel_five_points():
    f = [1, 0, 2, 0.5, 3]
    assert _bars(sublevel_persistence(f)) == [(0.0, math.inf), (0.5, 2.0)]
    assert sweep_sublevel(f)[0] == [(0.5, 2.0)]


def test_sublevel_increasing():
    assert _bars(sublevel_persistence(np.arange(1.0, 20.0))) == [(1.0, math.inf)]


def test_sublevel_plateau_counts_once():
    assert _bars(sublevel_persistence([3, 1, 1, 1, 3])) == [(1.0, math.inf)]
    assert _bars(sublevel_persistence([1, 1, 2, 1, 1])) == [(1.0, 2.0), (1.0, math.inf)]


def test_sublevel_source_label():
    dgm = sublevel_persistence([1.0, 0.0], source="sublevel_irr")
    assert dgm.key == "sublevel_irr_h0"


_series = st.lists(st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 3.0]) | st.floats(-5, 5),
                   min_size=1, max_size=64)


@settings(max_examples=1000)
@given(_series)
def test_sublevel_matches_sweep(f):
    dgm = sublevel_persistence(f)
    ref, fmin = sweep_sublevel(f)
    finite = _bars(dgm, True)
    assert [b for b in finite if b[1] > b[0]] == ref
    assert [b for b in _bars(dgm) if math.isinf(b[1])] == [(min(f), math.inf)]
    assert fmin == min(f)
    assert len(finite) + 1 == strict_local_minima(f)


@settings(max_examples=200)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12), st.integers(0, 2**32 - 1),
       st.floats(1e-4, 0.5))
def test_sublevel_stability(f, seed, eps):
    f = np.asarray(f)
    g = f + np.random.default_rng(seed).uniform(-eps, eps, size=len(f))
    a, b = sublevel_persistence(f), sublevel_persistence(g)
    assert bottleneck(_bars(a, True), _bars(b, True)) <= eps + 1e-12
    ea = [x for x, d in _bars(a) if math.isinf(d)]
    eb = [x for x, d in _bars(b) if math.isinf(d)]
    assert abs(ea[0] - eb[0]) <= eps + 1e-12


def test_sublevel_deterministic():
    f = np.random.default_rng(5).normal(size=5000)
    assert diagrams_to_csv([sublevel_persistence(f)]) == diagrams_to_csv([sublevel_persistence(f)])


def test_sublevel_empty():
    with pytest.raises(ValueError):
        sublevel_persistence([])


# ---------------------------------------------------------------- diagram container

def test_diagram_rejects_inverted_bar():
    with pytest.raises(ValueError):
        PersistenceDiagram([[1.0, 0.5]])


def test_diagram_d_max():
    dgm = PersistenceDiagram([[0, 1], [0, 3], [0, np.inf]])
    assert dgm.d_max == 3.0
    assert math.isnan(PersistenceDiagram([[0, np.inf]]).d_max)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(60, 3))
    dgms = rips_persistence(pts) + [sublevel_persistence(rng.normal(size=300))]
    text = diagrams_to_csv(dgms, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text() == text
    back = diagrams_from_csv(tmp_path / "d.csv")
    assert [d.key for d in back] == [d.key for d in dgms]
    for x, y in zip(dgms, back):
        assert x.same_bars(y)
    assert diagrams_to_csv(back) == text
    assert "inf" in text


def test_csv_merges_duplicates():
    dgm = PersistenceDiagram([[0, 1], [0, 1], [0, 2]])
    text = diagrams_to_csv([dgm])
    assert text.splitlines()[1:] == ["rips_airflow,0,0.0,1.0,2", "rips_airflow,0,0.0,2.0,1"]


def test_csv_bad_header():
    with pytest.raises(ParseError):
        diagrams_from_csv("a,b,c\n1,2,3\n")


def test_csv_bad_row():
    with pytest.raises(ParseError) as info:
        diagrams_from_csv("source,dim,birth,death,multiplicity\nrips_airflow,0,x,1,1\n")
    assert info.value.line == 1


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(0, 1e6)), max_size=30))
def test_csv_round_trip_property(rows):
    bars = np.array([(b, b + l) for b, l in rows], dtype=float).reshape(-1, 2)
    dgm = PersistenceDiagram(bars, 1, "sublevel_irr")
    back = diagrams_from_csv(diagrams_to_csv([dgm]) + "\n")
    if len(bars):
        assert back[0].same_bars(dgm)
    else:
        assert back == []
