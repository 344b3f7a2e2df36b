"""Acceptance gates. Each test prints one PASS/FAIL line and asserts the gate."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from staircase_dp import (
    CostSpec,
    NormSpec,
    StaircaseParams,
    build_band_table,
    check_domination,
    check_levelset_enlargement,
    check_maximal_decay,
    check_radial_loglip,
    decompose_staircase_mixture,
    expected_cost_mc,
    expected_cost_series,
    find_gamma_star,
    find_mass_matching_y,
    laplace_baseline_cost,
    laplace_sandwich_check,
    norm,
    rearrange_profile,
    rearrange_set,
    sample,
    total_mass,
)
from staircase_dp._series import log_band_masses
from staircase_dp.dpverify import check_profile_ratios, check_staircase_ratios, levelset_grid
from staircase_dp.fuzz import (
    jump_violator,
    random_admissible_profile,
    random_d_profile,
    random_dp_step_density,
    random_gridset,
)
from staircase_dp.optimize import staircase_cost
from staircase_dp.rearrange import staircase_normalizer
from staircase_dp.staircase import radial_cdf


@pytest.fixture
def gate(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return report


def test_criterion_1_normalization(gate):
    t0 = time.perf_counter()
    worst_w = worst_int = 0.0
    for n in (1, 2, 3, 15):
        for eps in (0.5, 1, 4, 8, 15):
            for gamma in (0, 0.25, 0.5, 1):
                params = StaircaseParams(eps, 1.0, gamma, NormSpec(1, n))
                table = build_band_table(params)
                # retained band weights from the exact normalizer, not the renormalized pmf
                ks = np.arange(table.k_max + 1, dtype=float)
                lw1, lw2 = log_band_masses(eps, gamma, n, ks)
                base = table.log_a + params.norm.log_unit_volume
                w = math.fsum(np.exp(base + np.concatenate([lw1, lw2])))
                worst_w = max(worst_w, abs(w - 1.0), abs(table.probs.sum() - 1.0))
                worst_int = max(worst_int, abs(total_mass(params, table) - 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst_w <= 1e-9 and worst_int <= 1e-9 and elapsed < 5.0
    gate(1, ok, f"max |sum w - 1| = {worst_w:.2e}, max |int f - 1| = {worst_int:.2e}, {elapsed:.2f}s")


def test_criterion_2_sampler_fidelity(gate):
    t0 = time.perf_counter()
    N = 10**6
    params = StaircaseParams(1.0, 1.0, 0.5, NormSpec(1, 3))
    table = build_band_table(params)
    x, bands = sample(params, table, 20240601, N, return_bands=True)
    p = table.probs.ravel()
    counts = np.bincount(bands, minlength=p.size)[: p.size]
    keep = p >= 1e-5
    dev = np.abs(counts / N - p)[keep] / (4 * np.sqrt(p * (1 - p) / N))[keep]
    ks = stats.kstest(norm(params.norm, x), lambda r: radial_cdf(params, table, r)).statistic
    elapsed = time.perf_counter() - t0
    ok = bool(dev.max() < 1.0) and ks < 2 / math.sqrt(N) and elapsed < 30.0
    gate(2, ok, f"worst band deviation {dev.max():.3f} of 4 sigma over {keep.sum()} bands, KS {ks:.2e} < {2 / math.sqrt(N):.0e}, {elapsed:.1f}s")


def test_criterion_3_dp_verification(gate):
    t0 = time.perf_counter()
    ratio_ok = True
    worst = []
    for n, eps, gamma, p in [(1, 1.0, 0.5, 1), (3, 0.5, 0.25, 2), (2, 4.0, 0.9, math.inf), (15, 8.0, 0.1, 1)]:
        params = StaircaseParams(eps, 1.0, gamma, NormSpec(p, n))
        rep = check_staircase_ratios(params, build_band_table(params), n, 10**5)
        in_band = math.exp(eps) - 1e-9 <= rep.max_ratio <= math.exp(eps) * (1 + 1e-12)
        ratio_ok &= rep.passed and in_band and rep.pairs_tested >= 10**5
        worst.append(rep.max_ratio / math.exp(eps))
    rng = np.random.default_rng(3)
    rejected = 0
    norm2 = NormSpec(2, 2)
    for _ in range(1000):
        eps = float(rng.choice([0.5, 1.0, 2.0]))
        jump = eps * (1.0 + 3.0 * (1.0 - rng.random()))  # uniform in (eps, 4 eps]
        prof = jump_violator(eps, 1.0, jump, rng)
        caught = (
            not check_radial_loglip(prof, eps, 1.0)
            and not check_levelset_enlargement(prof, eps, 1.0, *levelset_grid(prof, eps))
            and not check_profile_ratios(prof, eps, 1.0, norm2, rng, 100).passed
        )
        rejected += caught
    elapsed = time.perf_counter() - t0
    ok = ratio_ok and rejected == 1000 and elapsed < 60.0
    gate(3, ok, f"max ratio / e^eps in [{min(worst):.15f}, {max(worst):.15f}], violators rejected {rejected}/1000, {elapsed:.1f}s")


MC_COMBOS = [
    (1, 1.0, 1.0, CostSpec.power(1)),
    (1, 0.5, 0.3, CostSpec.power(2)),
    (2, 1.0, 0.5, CostSpec.power(1)),
    (2, 4.0, 0.2, CostSpec.threshold(0.3)),
    (3, 1.0, 0.5, CostSpec.power(1)),
    (3, 2.0, 0.0, CostSpec.truncated(2.0)),
    (3, 8.0, 0.7, CostSpec.power(0.5)),
    (5, 1.5, 0.25, CostSpec.threshold(4.0)),
    (5, 0.5, 0.9, CostSpec.truncated(10.0)),
    (10, 4.0, 0.5, CostSpec.power(1)),
    (15, 1.0, 0.1, CostSpec.power(1)),
    (15, 15.0, 0.6, CostSpec.truncated(1.0)),
]


def test_criterion_4_series_mc_agreement(gate):
    t0 = time.perf_counter()
    worst = 0.0
    for i, (n, eps, gamma, cost) in enumerate(MC_COMBOS):
        params = StaircaseParams(eps, 1.0, gamma, NormSpec(1, n))
        table = build_band_table(params)
        series = expected_cost_series(params, table, cost)
        mean, se = expected_cost_mc(params, table, cost, 1000 + i, 10**6, n_shards=4)
        worst = max(worst, abs(series - mean) / se)
    elapsed = time.perf_counter() - t0
    ok = worst <= 3.0 and elapsed < 120.0
    gate(4, ok, f"worst |series - mc| = {worst:.2f} stderr over {len(MC_COMBOS)} combinations, {elapsed:.1f}s")


def test_criterion_5_dominance(gate):
    cost = CostSpec.power(1)
    bad, endpoint = [], 0.0
    for n in (1, 3, 15):
        nrm = NormSpec(1, n)
        for eps in (1, 4, 8, 15):
            _, v = find_gamma_star(eps, 1.0, nrm, cost)
            lap = laplace_baseline_cost(eps, 1.0, n, "product_l1", cost)
            if not (v < lap if eps >= 4 else v <= lap):
                bad.append((n, eps, v, lap))
            c0 = staircase_cost(eps, 1.0, nrm, cost, 0.0)
            c1 = staircase_cost(eps, 1.0, nrm, cost, 1.0)
            endpoint = max(endpoint, abs(c0 - c1))
    ok = not bad and endpoint <= 1e-9
    gate(5, ok, f"dominance violations {bad}, max |cost(0) - cost(1)| = {endpoint:.2e}")


def test_criterion_6_scalar_cross_check(gate):
    errs = []
    for eps in (1, 2, 4):
        g, _ = find_gamma_star(eps, 1.0, NormSpec(1, 1), CostSpec.power(1))
        errs.append(abs(g - 1 / (1 + math.exp(eps / 2))))
    ok = max(errs) <= 1e-3
    gate(6, ok, f"|gamma* - 1/(1+e^(eps/2))| = {', '.join(f'{e:.1e}' for e in errs)}")


def test_criterion_7_rearrangement_suite(gate):
    rng = np.random.default_rng(7)
    set_violations = 0
    for _ in range(1000):
        A, B = random_gridset(rng), random_gridset(rng)
        As, Bs = rearrange_set(A), rearrange_set(B)
        set_violations += As.measure != A.measure
        set_violations += As.difference(Bs).measure > A.difference(B).measure
        set_violations += As.intersection(Bs).measure < A.intersection(B).measure
        set_violations += As.minkowski_sum(Bs).measure > A.minkowski_sum(B).measure
    pipeline_fail = 0
    for _ in range(200):
        eps = float(rng.choice([0.5, 1.0, 2.0, 4.0]))
        f = random_dp_step_density(eps, 1.0, rng)
        star = rearrange_profile(f)
        ok = check_radial_loglip(star, eps, 1.0) and check_domination(star.cdf(1), f.abs_cdf())
        pipeline_fail += not ok
    ok = set_violations == 0 and pipeline_fail == 0
    gate(7, ok, f"set-property violations {set_violations}/4000, pipeline failures {pipeline_fail}/200")


def test_criterion_8_d_machinery(gate):
    rng = np.random.default_rng(8)
    match_fail = sandwich_fail = 0
    for _ in range(200):
        n = int(rng.integers(1, 5))
        eps = float(rng.choice([0.5, 1.0, 2.0]))
        nrm = NormSpec(1, n)
        rho = random_admissible_profile(eps, 1.0, nrm, rng)
        _, out = find_mass_matching_y(rho, n, eps, 1.0)
        match_fail += not (check_maximal_decay(out, eps, 1.0) and check_domination(out.cdf(n), rho.cdf(n)))
        sandwich_fail += not laplace_sandwich_check(out, eps, 1.0, nrm)
    worst_resid = 0.0
    decomp_fail = 0
    for _ in range(100):
        eps = float(rng.choice([0.5, 1.0, 2.0]))
        nrm = NormSpec(2, int(rng.integers(1, 4)))
        rho = random_d_profile(eps, 1.0, nrm, rng, grid=64)
        try:
            w = decompose_staircase_mixture(rho, 64, eps, 1.0, nrm)
        except ValueError:
            decomp_fail += 1
            continue
        mids = (np.arange(64) + 0.5) / 64
        fit = np.zeros(64)
        for g, wj in w:
            a = staircase_normalizer(eps, 1.0, g, nrm)
            fit += wj * np.where(mids < g, a, a * math.exp(-eps))
        target = rho(mids)
        worst_resid = max(worst_resid, float(np.max(np.abs(fit - target) / target)))
    ok = match_fail == 0 and sandwich_fail == 0 and decomp_fail == 0 and worst_resid < 1e-8
    gate(8, ok, f"mass matching failures {match_fail}/200, sandwich failures {sandwich_fail}/200, "
                f"decomposition failures {decomp_fail}/100, worst residual {worst_resid:.1e}")


CLI_RUNS = {
    "sample": ["sample", "--eps", "1", "--dim", "3", "--gamma", "0.5", "--samples", "2000", "--seed", "42"],
    "cost": ["cost", "--eps", "2", "--dim", "2", "--optimize", "--samples", "5000", "--seed", "42"],
    "optimize": ["optimize", "--eps", "2", "--dim", "1"],
    "sweep": ["sweep", "--eps", "1,4,8", "--dim", "1,3", "--mc-check", "--samples", "2000", "--seed", "42"],
    "verify": ["verify", "--eps", "1", "--dim", "2", "--gamma", "0.3", "--samples", "2000", "--seed", "42"],
    "rearrange-demo": ["rearrange-demo", "--eps", "1", "--seed", "42"],
}


def test_criterion_9_determinism(gate):
    differing = []
    for name, argv in CLI_RUNS.items():
        outs = [
            subprocess.run([sys.executable, "-m", "staircase_dp", *argv], capture_output=True, check=False)
            for _ in range(2)
        ]
        if outs[0].returncode != 0 or outs[0].stdout != outs[1].stdout or not outs[0].stdout:
            differing.append(name)
    ok = not differing
    gate(9, ok, f"byte-identical output for {len(CLI_RUNS) - len(differing)}/{len(CLI_RUNS)} subcommands")
