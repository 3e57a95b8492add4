"""The twelve acceptance criteria, run at their stated tolerances.

Each test records one PASS/FAIL line (printed in the terminal summary) and
then asserts. Criteria 4 and 7 are known to be unattainable as stated; they
are implemented literally and fail with the measured values.
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from conftest import record
from scipy import integrate

from steklov_lab import lab
from steklov_lab.continuum import (
    CylinderModel,
    combination_ratio,
    cylinder_steklov_analytic,
    energy_ratio_check,
    fem_steklov,
)
from steklov_lab.graphs import BoundaryGraph, is_connected, lattice_graph, laplacian_lambda2, path_graph, star_graph
from steklov_lab.lab import ExperimentConfig, run_experiment
from steklov_lab.steklov import steklov_bruteforce, steklov_spectrum
from steklov_lab.surfaces import complex_to_mesh, flat_cylinder

SEED = 20240611

# Calibrated on the first full run (seed 7, eps 0.25, m 8): the observed
# minima of sigma_2 L / l were 0.73 (app2) and 0.85 (app3).
EXPANDER_LOWER = 0.5
SPREAD_MAX = 4.0
DEGREE_MAX = 30

SIGMA_GRID = np.round(np.arange(1, 25) / 100, 2)
LAMBDA_GRID = np.geomspace(0.25, 100.0, 25)

EXPERIMENT_ORDER = ("app1", "compare", "app2", "app3", "stability")


def _timed(label, budget, fn):
    t0 = time.perf_counter()
    out = fn()
    seconds = time.perf_counter() - t0
    return out, seconds, f"{seconds:.1f}s of {budget}s"


# --- experiment runs, shared by criteria 5 and 8-12 -------------------------


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_run1")
    lab.clear_cache()
    results, seconds = {}, {}
    for name in EXPERIMENT_ORDER:
        t0 = time.perf_counter()
        rows, text, _ = run_experiment(ExperimentConfig(name, out=str(out)))
        results[name] = rows
        seconds[name] = time.perf_counter() - t0
    return {"rows": results, "out": out, "seconds": seconds}


def _table(rows, *cols):
    return np.array([[getattr(r, c) for c in cols] for r in rows], dtype=float)


# --- 1 ---------------------------------------------------------------------


def test_criterion_01_discrete_exactness():
    cases = [
        ("3-path/ends", path_graph(3, boundary=(0, 2)), [0.0, 1.0]),
        ("K13/leaves", star_graph(3), [0.0, 1.0, 1.0]),
        ("2-path/full", path_graph(2), [0.0, 2.0]),
    ]
    t0 = time.perf_counter()
    errs = {name: float(np.abs(steklov_spectrum(g).sigmas - want).max()) for name, g, want in cases}
    seconds = time.perf_counter() - t0
    ok = all(e <= 1e-9 for e in errs.values()) and seconds < 1.0
    worst = max(errs.values())
    record("1 discrete Steklov exactness", ok, f"max abs error {worst:.1e}, {seconds:.2f}s")
    assert ok, errs


# --- 2 ---------------------------------------------------------------------


def _boundary_subsets(n):
    for mask in range(1, 2**n):
        yield tuple(i for i in range(n) if mask >> i & 1)


def _random_connected(rng, n):
    while True:
        p = rng.uniform(0.25, 0.8)
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p)
        g = BoundaryGraph(n, edges, (0,))
        if is_connected(g):
            return g


def test_criterion_02_oracle_equivalence():
    def run():
        worst, cases = 0.0, 0
        for h in nx.graph_atlas_g()[1:]:
            n = h.number_of_nodes()
            if n > 5 or not nx.is_connected(h):
                continue
            base = BoundaryGraph(n, tuple(h.edges()), (0,))
            for bnd in _boundary_subsets(n):
                g = base.with_boundary(bnd)
                worst = max(worst, float(np.abs(steklov_spectrum(g).sigmas - steklov_bruteforce(g)).max()))
                cases += 1
        rng = np.random.default_rng(SEED)
        for _ in range(500):
            n = int(rng.integers(6, 9))
            g = _random_connected(rng, n)
            k = int(rng.integers(1, n + 1))
            g = g.with_boundary(rng.choice(n, size=k, replace=False).tolist())
            worst = max(worst, float(np.abs(steklov_spectrum(g).sigmas - steklov_bruteforce(g)).max()))
            cases += 1
        return worst, cases

    (worst, cases), seconds, budget = _timed("2", 120, run)
    ok = worst <= 1e-7 and seconds < 120
    record("2 oracle equivalence", ok, f"{cases} cases, max deviation {worst:.1e}, {budget}")
    assert ok


# --- 3 ---------------------------------------------------------------------


def test_criterion_03_full_boundary_identity():
    def run():
        rng = np.random.default_rng(SEED + 3)
        worst = 0.0
        for _ in range(20):
            n = int(rng.integers(2, 51))
            g = _random_connected(rng, n) if n <= 12 else _sparse_connected(rng, n)
            g = g.with_boundary(range(n))
            lap = np.diag(g.degrees()).astype(float) - g.adjacency().toarray()
            ref = np.linalg.eigvalsh(lap)
            worst = max(worst, float(np.abs(steklov_spectrum(g).sigmas - ref).max()))
        return worst

    worst, seconds, budget = _timed("3", 10, run)
    ok = worst <= 1e-9 and seconds < 10
    record("3 full-boundary identity", ok, f"20 graphs, max deviation {worst:.1e}, {budget}")
    assert ok


def _sparse_connected(rng, n):
    # random spanning tree plus extra edges
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n)}
    for _ in range(int(rng.integers(0, 2 * n))):
        a, b = rng.choice(n, size=2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))
    return BoundaryGraph(n, tuple(edges), (0,))


# --- 4 ---------------------------------------------------------------------


def test_criterion_04_lattice_gap_scaling():
    ls = np.arange(4, 33)
    t0 = time.perf_counter()
    prod = np.array([laplacian_lambda2(lattice_graph(int(l))) * l * l for l in ls])
    seconds = time.perf_counter() - t0
    in_bracket = (prod >= 8.0) & (prod <= 12.0)
    steps = np.diff(prod)
    monotone = bool(np.all(steps > 0) or np.all(steps < 0))
    ok = bool(in_bracket.all()) and monotone and seconds < 30
    detail = (
        f"l*l*lambda_2 = {prod[0]:.3f} (l=4) ... {prod[-1]:.3f} (l=32), "
        f"{int((~in_bracket).sum())} of {ls.size} outside [8, 12] (l = {ls[~in_bracket].min()}..{ls[~in_bracket].max()}), "
        f"monotone {'increasing' if np.all(steps > 0) else 'no'}, {seconds:.1f}s"
        if (~in_bracket).any()
        else f"all in [8, 12], monotone {monotone}, {seconds:.1f}s"
    )
    record("4 lattice gap scaling", ok, detail)
    assert ok, detail


def test_lattice_gap_tends_to_pi_squared_from_below():
    # the property that does hold: the exact path eigenvalue increases to pi^2
    ls = np.array([4, 8, 16, 32, 64])
    prod = 4 * ls**2 * np.sin(np.pi / (2 * (ls + 1))) ** 2
    assert np.all(np.diff(prod) > 0) and np.all(prod < np.pi**2)
    assert laplacian_lambda2(lattice_graph(8)) * 64 == pytest.approx(prod[1], rel=1e-10)


# --- 5 ---------------------------------------------------------------------


def test_criterion_05_lemma24_bounds(runs):
    rows = [r for name in ("app1", "compare", "app2", "app3") for r in runs["rows"][name]]
    bad = [f"{r.experiment} l={r.l}" for r in rows if not (r.status != "error" and r.lemma24_ok)]
    low = min(r.lemma24_lower_slack for r in rows)
    up = min(r.lemma24_upper_slack for r in rows)
    ok = not bad
    record("5 discretization distance bounds", ok, f"{len(rows)} discretizations, min slack lower {low:.3g} upper {up:.3g}" + (f", failing {bad}" if bad else ""))
    assert ok, bad


def test_degree_invariant(runs):
    rows = [r for name in ("app1", "app2", "app3") for r in runs["rows"][name]]
    worst = max(rows, key=lambda r: r.max_degree)
    per = {name: max(r.max_degree for r in runs["rows"][name]) for name in ("app1", "app2", "app3")}
    ok = worst.max_degree <= DEGREE_MAX
    record("invariant: max degree <= 30", ok, f"max degree per experiment {per}")
    assert ok, per


# --- 6 ---------------------------------------------------------------------


def test_criterion_06_fem_cylinder():
    def run():
        ref = cylinder_steklov_analytic(CylinderModel.circle(1.0, 1.0, modes=10), 6)
        errs = {}
        for m in (16, 32):
            sig = fem_steklov(complex_to_mesh(flat_cylinder(), m), 6).sigmas
            errs[m] = np.abs(sig - ref) / np.where(ref > 0, ref, 1.0)
        return errs

    errs, seconds, budget = _timed("6", 120, run)
    e16, e32 = errs[16].max(), errs[32].max()
    ok = e16 <= 0.02 and e32 < e16 and seconds < 120
    record("6 FEM vs analytic cylinder", ok, f"max rel error {e16:.4f} (m=16), {e32:.4f} (m=32), {budget}")
    assert ok


# --- 7 ---------------------------------------------------------------------


def _collar_energy_quadrature(lam, sigma):
    x = np.sqrt(lam)

    def density(r):
        a = np.cosh(x * r) - sigma / x * np.sinh(x * r)
        da = x * np.sinh(x * r) - sigma * np.cosh(x * r)
        return da * da + lam * a * a

    val, _ = integrate.quad(density, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def test_criterion_07_energy_ratios():
    t0 = time.perf_counter()
    per_mode = np.zeros((SIGMA_GRID.size, LAMBDA_GRID.size))
    quad_dev = 0.0
    for i, s in enumerate(SIGMA_GRID):
        for j, lam in enumerate(LAMBDA_GRID):
            r = energy_ratio_check(CylinderModel((0.0, float(lam)), (1, 1)), 1, float(s))
            per_mode[i, j] = r.ratio
            # the closed form against direct quadrature of the mode profile
            quad_dev = max(quad_dev, abs(r.collar - _collar_energy_quadrature(lam, s)) / r.collar)
    rng = np.random.default_rng(SEED + 7)
    combo_excess, combo_fail = -np.inf, 0
    for _ in range(200):
        k = int(rng.integers(1, 9))
        sig = rng.choice(SIGMA_GRID, size=k)
        coeffs = rng.standard_normal(k)
        ratio = combination_ratio(LAMBDA_GRID[:k], sig, coeffs)
        combo_excess = max(combo_excess, ratio - k / 8)
        combo_fail += ratio > k / 8 + 1e-12
    seconds = time.perf_counter() - t0
    mode_fail = int((per_mode > 0.5 + 1e-12).sum())
    ok = mode_fail == 0 and combo_fail == 0 and quad_dev <= 1e-10 and seconds < 10
    i, j = np.unravel_index(np.argmax(per_mode), per_mode.shape)
    detail = (
        f"per-mode ratio max {per_mode.max():.4f} at sigma={SIGMA_GRID[i]}, lambda={LAMBDA_GRID[j]:.3g} "
        f"({mode_fail} of {per_mode.size} above 1/2); combinations: {combo_fail} of 200 above k/8 "
        f"(max excess {combo_excess:.3f}); closed form vs quadrature {quad_dev:.1e}; provable bound ratio <= 2 "
        f"{'holds' if per_mode.max() <= 2 else 'fails'}"
    )
    record("7 collar energy ratios", ok, detail)
    assert quad_dev <= 1e-10 and per_mode.max() <= 2.0
    assert ok, detail


# --- 8 ---------------------------------------------------------------------


def test_criterion_08_app1(runs):
    rows = runs["rows"]["app1"]
    t = _table(rows, "l", "isoperimetric", "sigma2_fem_L")
    increasing = bool(np.all(np.diff(t[:, 1]) > 0))
    spread = t[:, 2].max() / t[:, 2].min()
    ok = increasing and spread <= SPREAD_MAX and all(r.status == "ok" for r in rows)
    record(
        "8 app1 isoperimetric growth",
        ok,
        f"I = {np.round(t[:, 1], 2).tolist()}, sigma2*L spread {spread:.3f}, {runs['seconds']['app1']:.0f}s",
    )
    assert ok


# --- 9 ---------------------------------------------------------------------


def test_criterion_09_expander_surfaces(runs):
    problems = []
    lows = {}
    for name in ("app2", "app3"):
        rows = runs["rows"][name]
        for r in rows:
            if r.status == "error":
                problems.append(f"{name} l={r.l}: {r.reason}")
                continue
            if r.genus != r.l + 1:
                problems.append(f"{name} l={r.l}: genus {r.genus}")
            if name == "app3" and r.b != 1:
                problems.append(f"{name} l={r.l}: b={r.b}")
            if not r.sigma2_fem_L <= r.kokarev_bound:
                problems.append(f"{name} l={r.l}: Kokarev")
        lows[name] = min(r.sigma2_fem_L / r.l for r in rows)
        if lows[name] < EXPANDER_LOWER:
            problems.append(f"{name}: sigma2*L/l = {lows[name]:.3f} below {EXPANDER_LOWER}")
    ok = not problems
    secs = runs["seconds"]["app2"] + runs["seconds"]["app3"]
    record(
        "9 expander surfaces",
        ok,
        f"min sigma2*L/l app2 {lows['app2']:.3f}, app3 {lows['app3']:.3f} (gate {EXPANDER_LOWER}); genus, b and Kokarev checked; {secs:.0f}s"
        + (f"; {problems}" if problems else ""),
    )
    assert ok, problems


# --- 10 --------------------------------------------------------------------


def test_criterion_10_compare(runs):
    rows = runs["rows"]["compare"]
    ratios = _table(rows, "ratio")[:, 0]
    spread = ratios.max() / ratios.min()
    ok = spread <= SPREAD_MAX and all(r.status == "ok" for r in rows)
    higher = {r.l: np.round(r.sigma_k_ratios, 3).tolist() for r in rows}
    record("10 manifold/graph ratio", ok, f"sigma2 ratios {np.round(ratios, 3).tolist()}, spread {spread:.3f}; sigma_k ratios (logged) {higher}")
    assert ok


# --- 11 --------------------------------------------------------------------


def test_criterion_11_stability(runs):
    rows = runs["rows"]["stability"]
    problems = []
    for r in rows:
        ratios = np.asarray(r.sigma_k_ratios)
        a = r.stretch
        if r.status == "error" or ratios.size == 0:
            problems.append(f"l={r.l} A={a}: {r.reason}")
        elif a == 1.0 and np.abs(ratios - 1).max() > 1e-9:
            problems.append(f"l={r.l} A=1 ratios {ratios}")
        elif not np.all((ratios >= a**-10) & (ratios <= a**10)):
            problems.append(f"l={r.l} A={a} ratios {ratios}")
    ok = not problems
    span = {(r.l, r.stretch): (round(min(r.sigma_k_ratios), 3), round(max(r.sigma_k_ratios), 3)) for r in rows if r.sigma_k_ratios}
    record("11 quasi-isometry stability", ok, f"ratio ranges {span}, {runs['seconds']['stability']:.0f}s")
    assert ok, problems


# --- 12 --------------------------------------------------------------------


_SECOND_RUN = """
import sys
from steklov_lab.lab import ExperimentConfig, run_experiment
for name in sys.argv[2:]:
    run_experiment(ExperimentConfig(name, out=sys.argv[1]))
"""


def test_criterion_12_determinism(runs, tmp_path):
    env = dict(os.environ, PYTHONHASHSEED="12345")
    subprocess.run(
        [sys.executable, "-c", _SECOND_RUN, str(tmp_path), *EXPERIMENT_ORDER],
        check=True,
        env=env,
        timeout=3600,
    )
    first: Path = runs["out"]
    diffs = [name for name in EXPERIMENT_ORDER if (first / f"{name}.csv").read_bytes() != (tmp_path / f"{name}.csv").read_bytes()]
    ok = not diffs
    record("12 determinism", ok, f"{len(EXPERIMENT_ORDER)} CSVs compared byte for byte in a fresh process" + (f"; differing {diffs}" if diffs else ""))
    assert ok, diffs
