"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test prints (and records for the terminal summary) one line:
``PASS 7: ...`` or ``FAIL 7: ...``.
"""

import contextlib
import json
import math
import time

import numpy as np
import pytest

from lurlab import autodiff as ad
from lurlab.autodiff import central_difference, relative_error
from lurlab.cli import main as cli_main
from lurlab.core import ParamVector
from lurlab.engine import composite_objective, lur_total_gradient, theorem1_expansion, unlearn_run
from lurlab.engine import forget_gradient_at_inner
from lurlab.metrics import avg_gap, train_attacker
from lurlab.tasks import conflict_task, desk_config, gap_trial, theory_problem
from lurlab.theory import (DEFAULT_ALPHAS, alignment_compare, fit_slope, lemma1_residual,
                           remark1_residual, theorem1_residual)

from conftest import ACCEPTANCE_LINES
from test_metrics import brute_force_threshold

SWEEP_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
THETA2 = ParamVector([1.0, 1.0])
QR = ad.quadratic(np.diag([2.0, 1.0]))
QF = ad.quadratic([[1.0, 1.0], [1.0, 3.0]], [1.0, -1.0])


@contextlib.contextmanager
def criterion(number, title, budget):
    """Time the block, enforce the budget and emit a single PASS/FAIL line."""
    info = {}
    start = time.perf_counter()
    try:
        yield info
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"runtime {elapsed:.1f}s exceeds {budget}s"
    except AssertionError as exc:
        elapsed = time.perf_counter() - start
        line = f"FAIL {number}: {title} [{elapsed:.2f}s] {exc}".splitlines()[0]
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    detail = " ".join(f"{k}={v}" for k, v in info.items())
    line = f"PASS {number}: {title} [{elapsed:.2f}s] {detail}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)


def slope_votes(residual, seeds=range(10)):
    fits = []
    for seed in seeds:
        model, retain, forget = theory_problem(seed)
        fits.append(fit_slope(DEFAULT_ALPHAS, [residual(model, retain, forget, a)
                                               for a in DEFAULT_ALPHAS]))
    return sum(f.within(1.8, 2.2, 0.98) for f in fits), fits


def test_01_exact_gradient():
    with criterion(1, "exact LUR gradient vs central differences", 10) as info:
        worst = 0.0
        for seed in range(3):
            model, retain, forget = theory_problem(seed)
            for alpha in (1e-3, 1e-2, 1e-1):
                exact = lur_total_gradient(model, retain, forget, alpha, lam=1.0)
                numeric = central_difference(
                    lambda p: composite_objective(model.with_params(p), retain, forget, alpha, 1.0),
                    model.params)
                worst = max(worst, float(relative_error(exact.data, numeric.data).max()))
        info["max_rel_err"] = f"{worst:.2e}"
        assert worst <= 1e-4, f"max relative error {worst:.2e}"


def test_02_lemma1():
    with criterion(2, "Taylor-step remainder is second order", 30) as info:
        good, fits = slope_votes(lambda m, r, f, a: lemma1_residual(m, f, r, a))
        quad = max(lemma1_residual(THETA2, QF, QR, a) for a in DEFAULT_ALPHAS + (1.0, 3.0))
        info.update(seeds_in_band=f"{good}/10", quadratic_residual=f"{quad:.1e}")
        assert good >= 8, f"only {good}/10 seeds in band: {[round(f.slope, 3) for f in fits]}"
        assert quad < 1e-10


def test_03_theorem1():
    with criterion(3, "forget-gradient expansion error is second order", 30) as info:
        good, fits = slope_votes(lambda m, r, f, a: theorem1_residual(m, r, f, a))
        theta, l_r, l_f = ParamVector([1.0]), ad.quadratic([[1.0]]), ad.quadratic([[1.0]], [2.0])
        total = lur_total_gradient(theta, l_r, l_f, 0.1, lam=1.0).data[0]
        gap = abs(forget_gradient_at_inner(theta, l_r, l_f, 0.1).data[0]
                  - theorem1_expansion(theta, l_r, l_f, 0.1).data[0])
        info.update(seeds_in_band=f"{good}/10", total=f"{total:.15g}", gap=f"{gap:.15g}")
        assert good >= 8, f"only {good}/10 seeds in band: {[round(f.slope, 3) for f in fits]}"
        assert abs(total - 0.01) < 1e-14 and abs(gap - 0.01) < 1e-14


def test_04_remark1():
    with criterion(4, "implicit-regulariser surrogate is second order", 30) as info:
        good, fits = slope_votes(lambda m, r, f, a: remark1_residual(m, r, f, a, 1.0))
        zero = max(remark1_residual(*theory_problem(s), 0.0, 1.0) for s in range(10))
        info.update(seeds_in_band=f"{good}/10", alpha0_residual=f"{zero:.1e}")
        assert good >= 8, f"only {good}/10 seeds in band: {[round(f.slope, 3) for f in fits]}"
        assert zero < 1e-12


def test_05_degeneracy():
    with criterion(5, "alpha = 0 LUR reproduces LUR-b step for step", 10) as info:
        task, worst = conflict_task(), 0.0
        for seed in range(5):
            model, splits = task(seed)
            a = unlearn_run(model, splits, desk_config(alpha=0.0, seed=seed))
            b = unlearn_run(model, splits, desk_config(method="lur_b", seed=seed))
            assert len(a.records) == len(b.records)
            for ra, rb in zip(a.records, b.records):
                for key in ("loss_r", "loss_f", "grad_norm_r", "grad_norm_f", "cosine"):
                    worst = max(worst, abs(getattr(ra, key) - getattr(rb, key)))
            worst = max(worst, float(np.abs(a.final_params.data - b.final_params.data).max()))
        info["max_diff"] = f"{worst:.1e}"
        assert worst <= 1e-12


def test_06_alignment():
    with criterion(6, "LUR raises retain/forget gradient alignment", 120) as info:
        _, _, summary = alignment_compare(conflict_task(), range(10), desk_config(),
                                          desk_config(method="lur_b"))
        info.update(wins=f"{summary['wins']}/10", mean_lur=f"{summary['mean_lur']:.4f}",
                    mean_lur_b=f"{summary['mean_lur_b']:.4f}")
        assert summary["wins"] >= 8, f"LUR ahead on {summary['wins']}/10 seeds"


def test_07_gap_ordering():
    with criterion(7, "LUR Avg. Gap <= LUR-b Avg. Gap", 300) as info:
        wins, gaps = 0, []
        for seed in range(10):
            res = gap_trial(conflict_task(), seed, {"lur": desk_config(),
                                                     "lur_b": desk_config(method="lur_b")})
            g_lur, g_b = res["lur"][1].avg_gap, res["lur_b"][1].avg_gap
            wins += g_lur <= g_b
            gaps.append((g_lur, g_b))
        mean_lur, mean_b = np.mean(gaps, axis=0)
        info.update(wins=f"{wins}/10", mean_gap_lur=f"{mean_lur:.2f}", mean_gap_lur_b=f"{mean_b:.2f}")
        assert wins >= 7, f"LUR at or below LUR-b on {wins}/10 seeds"


def test_08_alpha_sweep():
    with criterion(8, "alpha sweep has an interior argmin", 600) as info:
        task = conflict_task()
        configs = {a: desk_config(alpha=a) for a in SWEEP_GRID}
        gaps = np.array([[res[a][1].avg_gap for a in SWEEP_GRID]
                         for res in (gap_trial(task, seed, configs) for seed in range(50))])
        argmins = gaps.reshape(10, 5, len(SWEEP_GRID)).mean(axis=1).argmin(axis=1)
        interior = int(((argmins > 0) & (argmins < len(SWEEP_GRID) - 1)).sum())
        counts = np.bincount(argmins, minlength=len(SWEEP_GRID))
        info.update(interior=f"{interior}/10",
                    argmin_counts="|".join(f"{a:g}:{c}" for a, c in zip(SWEEP_GRID, counts)))
        assert interior >= 7, f"interior argmin in {interior}/10 sweeps"


def test_09_published_gap():
    with criterion(9, "Avg. Gap arithmetic on the published rows", 1) as info:
        salun = dict(ua=1.93, ta=93.92, ra=99.89, mia=17.93)
        retrain = dict(ua=5.19, ta=94.26, ra=100.00, mia=13.05)
        value = avg_gap(salun, retrain).avg_gap
        info["avg_gap"] = f"{value:.4f}"
        assert abs(value - 2.15) <= 0.005


def test_10_attacker_brute_force():
    with criterion(10, "attacker threshold equals exhaustive sweep", 10) as info:
        rng = np.random.default_rng(2024)
        matched = 0
        for _ in range(100):
            members = np.round(rng.exponential(0.5, rng.integers(1, 40)), 2)
            others = np.round(rng.exponential(1.0, rng.integers(1, 40)), 2)
            att = train_attacker(members, others)
            t, ba = brute_force_threshold(members, others)
            matched += att.threshold == t and math.isclose(att.balanced_accuracy, ba, abs_tol=1e-12)
        info["matched"] = f"{matched}/100"
        assert matched == 100


def test_11_mask_contract():
    with criterion(11, "masked coordinates unchanged at sparsity 0.97", 30) as info:
        model, splits = conflict_task()(0)
        trace = unlearn_run(model, splits, desk_config(mask_sparsity=0.97))
        frozen = trace.mask.bits == 0.0
        same = trace.final_params.data[frozen].tobytes() == model.params.data[frozen].tobytes()
        info.update(frozen=f"{int(frozen.sum())}/{len(frozen)}")
        assert frozen.sum() == round(0.97 * len(model.params))
        assert same, "a masked coordinate moved"
        assert np.any(trace.final_params.data[~frozen] != model.params.data[~frozen])


def test_12_cli_determinism(tmp_path):
    with criterion(12, "CLI outputs byte-identical across executions", 60) as info:
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seeds": [0, 1], "alpha_grid": [1e-3, 1e-2, 1e-1],
                                   "method": "lur"}))
        commands = [["gen-data"], ["train"], ["unlearn", "--method", "lur,lur_b,ga,ft,retrain"],
                    ["verify"], ["sweep-alpha"], ["export", "--method", "lur", "--series", "cosine"]]
        for run in ("a", "b"):
            for cmd in commands:
                code = cli_main([cmd[0], "--config", str(cfg), "--out", str(tmp_path / run), *cmd[1:]])
                assert code == 0, f"{cmd[0]} exited {code}"
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        differing = [str(p) for p in files_a
                     if (tmp_path / "a" / p).read_bytes() != (tmp_path / "b" / p).read_bytes()]
        info["files"] = len(files_a)
        assert not differing, f"differing outputs: {differing}"
