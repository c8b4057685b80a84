"""Acceptance criteria 1-8; each test prints one PASS/FAIL line and asserts it."""

import math

import numpy as np
import pytest

from rydberg_crlb.config import ExperimentConfig
from rydberg_crlb.crlb import (crlb_idd, crlb_isd, crlb_multivariate, crlb_univariate, fisher_multivariate,
                               peak_shift_crlb, ratio_r, ratio_r0, schur_11)
from rydberg_crlb.errors import MaxIterationsExceeded
from rydberg_crlb.estimators import (estimate_isd, estimate_shift_multivariate, isd_batch, isd_phasors, polyfit_peak,
                                     univariate_batch)
from rydberg_crlb.families import TemplateFamily
from rydberg_crlb.harness import (THREADS_ENV, build_context, export, make_plan, run_campaign, run_cell,
                                  two_route_r0, ue_min_crlb)
from rydberg_crlb.noise_sim import NoiseSpec, ScanData, isd_waveform, sample_scan, scan_noise_block
from rydberg_crlb.quantum_model import MHZ, AtomicSystem, steady_state
from rydberg_crlb.response import MarginalCurve, PeakLineshape, find_curve_peaks, frequency_marginal

TRIALS = 10 ** 4
REFERENCE_RATIO = 0.8739 / 3.8006
EFFICIENCY = (0.9, 1.3)


def verdict(log, n, checks):
    """Record one summary line for criterion ``n`` from (label, ok) pairs and assert it."""
    ok = all(c for _, c in checks)
    bad = [label for label, c in checks if not c]
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({len(checks) - len(bad)}/{len(checks)} checks)"
    if bad:
        line += " failing: " + "; ".join(bad)
    print(line)
    log.append(line)
    assert ok, line


def efficiency(cell):
    return cell.mse / cell.crlb


# ---------------------------------------------------------------- shared campaigns

@pytest.fixture(scope="module")
def splitting_cells(surface):
    """Splitting cells at 10 and 15 MHz for both sampling strategies, N = 20."""
    out = {}
    for strategy in ("uniform", "maxslope"):
        cfg = ExperimentConfig(schemes=("UE", "ME", "5-PF"), signals=(10.0, 15.0), noises=(0.01, 0.02),
                               n_total=20, strategy=strategy, trials=TRIALS, seed=2024)
        for c in run_campaign(cfg, surface).cells:
            out[(strategy, c.scheme, c.signal, c.sigma0)] = c
    return out


@pytest.fixture(scope="module")
def intensity_cells(surface):
    out = {}
    for n in (20, 40):
        for scheme, signals in (("IDD", (2.0, 4.0)), ("ISD", (0.5,))):
            cfg = ExperimentConfig(schemes=(scheme,), signals=signals, noises=(0.01, 0.02), n_total=n,
                                   trials=TRIALS, seed=2024)
            for c in run_campaign(cfg, surface).cells:
                out[(n, c.scheme, c.signal, c.sigma0)] = c
    return out


# ---------------------------------------------------------------- 1

class _OffsetFamily:
    """Known lineshape plus an unknown baseline, so the Fisher matrix is 2 x 2."""

    labels = ("offset",)

    def __init__(self, lineshape):
        self.ls = lineshape

    def value(self, u, v):
        return self.ls(u) + v[0]

    def d_u(self, u, v):
        return self.ls.derivative(u)

    def d_v(self, u, v):
        return np.ones(np.shape(u) + (1,))


def test_criterion_1_formula_exactness(acceptance_log):
    checks = []
    unit = MarginalCurve(np.linspace(0, 10, 11), np.linspace(0, 10, 11))
    steep = MarginalCurve(np.linspace(0, 10, 11), 3.0 * np.linspace(0, 10, 11))
    rel = lambda a, b: abs(a - b) / abs(b)
    checks.append(("IDD unit slope", rel(crlb_idd(unit, 4.0, 1, 0.1).value, 0.01) <= 1e-12))
    checks.append(("IDD known N", rel(crlb_idd(steep, 4.0, 7, 0.3).value, 0.09 / (7 * 9.0)) <= 1e-12))
    checks.append(("ISD formula", rel(crlb_isd(steep, 4.0, 7, 0.3).value, 2 * 0.09 / (7 * 9.0)) <= 1e-12))
    checks.append(("ISD/IDD = 2", all(crlb_isd(c, 4.0, n, s).value / crlb_idd(c, 4.0, n, s).value == 2.0
                                      for c in (unit, steep) for n in (1, 20, 40) for s in (0.01, 0.3))))

    v = [1.0, 0.5, 0.0]
    right = PeakLineshape.gaussian(v)
    left = PeakLineshape.gaussian(v, side="left")
    fr = np.array([-1.0, 0.5, 2.0])
    fl = -fr[::-1]
    d = -2 * 0.5 * fr * np.exp(-0.5 * fr ** 2)
    k, sigma, n2 = 1.3, 0.02, 4
    want = k ** 2 * 2 * sigma ** 2 / (n2 * np.sum(d ** 2))
    got = crlb_univariate(left, right, fl, fr, n2, sigma, k, shifts=(0.0, 0.0)).value
    checks.append(("univariate known sums", rel(got, want) <= 1e-12))

    fam = _OffsetFamily(right)
    f = np.array([-1.5, -0.4, 0.3, 1.1, 2.2])
    dd = -2 * 0.5 * f * np.exp(-0.5 * f ** 2)
    m = f.size
    inv11 = sigma ** 2 / n2 * m / (m * np.sum(dd ** 2) - np.sum(dd) ** 2)
    jr = fisher_multivariate(fam, [0.0, 0.0], f, n2, sigma)
    jl = fisher_multivariate(fam, [0.0, 0.0], f, n2, sigma)
    me = crlb_multivariate(jl, jr, k).value
    checks.append(("multivariate 2x2 hand inverse", rel(me, 2 * k ** 2 * inv11) <= 1e-12))
    checks.append(("multivariate >= univariate", me >= 2 * k ** 2 * peak_shift_crlb(right, f, n2, sigma, 0.0)))
    verdict(acceptance_log, 1, checks)


# ---------------------------------------------------------------- 2

def test_criterion_2_mle_efficiency(acceptance_log, splitting_cells, intensity_cells):
    checks = []
    for key, c in sorted(intensity_cells.items()):
        e = efficiency(c)
        checks.append((f"{c.scheme} N={key[0]} x={c.signal:g} s={c.sigma0:g} eff={e:.3f}",
                       not c.invalid and EFFICIENCY[0] <= e <= EFFICIENCY[1]))
    for key, c in sorted(splitting_cells.items()):
        if c.scheme == "5-PF":
            continue
        e = efficiency(c)
        checks.append((f"{c.scheme} {key[0]} x={c.signal:g} s={c.sigma0:g} eff={e:.3f} fail={c.failures}",
                       not c.invalid and EFFICIENCY[0] <= e <= EFFICIENCY[1]))
    verdict(acceptance_log, 2, checks)


# ---------------------------------------------------------------- 3

def test_criterion_3_period_average_identity(acceptance_log):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n1, n2 = int(rng.integers(1, 7)), int(rng.integers(4, 17))
        slope = rng.uniform(0.005, 0.1) * rng.choice([-1, 1])
        z = isd_waveform(rng.uniform(0.5, 1.0), slope, rng.uniform(0, 2), rng.uniform(0, 2 * np.pi), n1, n2)
        z = z + rng.normal(0.0, rng.uniform(0.001, 0.05), z.size)
        dft = float(isd_batch(z, slope, n1, n2)[0])
        per_period = abs(np.mean(isd_phasors(z, n1, n2))) / abs(slope)
        rep = estimate_isd(z, slope, n1, n2)
        worst = max(worst, abs(per_period - dft) / dft, abs(rep.extras["per_period_coherent"] - dft) / dft)
    verdict(acceptance_log, 3, [(f"max relative gap {worst:.2e}", worst <= 1e-12)])


# ---------------------------------------------------------------- 4

def test_criterion_4_splitting_ordering(acceptance_log, splitting_cells):
    checks = []

    def mse(c):
        # a cell with too many failed trials has no usable MSE and ranks last
        return math.inf if c.invalid or not np.isfinite(c.mse) else c.mse

    for strategy in ("uniform", "maxslope"):
        for x in (10.0, 15.0):
            for s in (0.01, 0.02):
                ue, me, pf = (splitting_cells[(strategy, k, x, s)] for k in ("UE", "ME", "5-PF"))
                label = (f"{strategy} x={x:g} s={s:g} UE={mse(ue):.4g} ME={mse(me):.4g} 5-PF={mse(pf):.4g}"
                         f" (5-PF failures {pf.failures})")
                checks.append((f"(a) {label}", mse(ue) <= mse(me) <= mse(pf)))
    ratio = splitting_cells[("maxslope", "UE", 15.0, 0.01)].crlb / splitting_cells[("uniform", "UE", 15.0, 0.01)].crlb
    checks.append((f"(b) max-slope/uniform ratio {ratio:.4f} vs {REFERENCE_RATIO:.4f}",
                   abs(ratio / REFERENCE_RATIO - 1) <= 0.35))
    for x in (10.0, 15.0):
        for s in (0.01, 0.02):
            u, m = splitting_cells[("maxslope", "UE", x, s)].crlb, splitting_cells[("maxslope", "ME", x, s)].crlb
            checks.append((f"(c) x={x:g} s={s:g} U={u:.6g} M={m:.6g}", abs(u - m) <= 1e-6 * u))
    for strategy in ("uniform", "maxslope"):
        for scheme in ("UE", "ME"):
            for x in (10.0, 15.0):
                q = splitting_cells[(strategy, scheme, x, 0.02)].crlb / splitting_cells[(strategy, scheme, x, 0.01)].crlb
                checks.append((f"(d) {strategy} {scheme} x={x:g} ratio {q!r}", abs(q - 4.0) <= 1e-9))
    verdict(acceptance_log, 4, checks)


# ---------------------------------------------------------------- 5

def test_criterion_5_normalization_invariance(acceptance_log, surface):
    grids = {"IDD": (2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0), "ISD": (0.5,), "UE": (6.0, 8.0, 10.0, 15.0, 20.0)}
    cells = {}
    for sigma, n in ((0.01, 20), (0.001, 40)):
        for scheme, signals in grids.items():
            cfg = ExperimentConfig(schemes=(scheme,), signals=signals, noises=(sigma,), n_total=n, trials=TRIALS,
                                   seed=55)
            for c in run_campaign(cfg, surface).cells:
                cells[(sigma, c.scheme, c.signal)] = c
    checks = []
    for scheme, signals in grids.items():
        for x in signals:
            a, b = cells[(0.01, scheme, x)], cells[(0.001, scheme, x)]
            dc = abs(a.crlb_norm / b.crlb_norm - 1)
            dm = abs(a.mse_norm / b.mse_norm - 1)
            checks.append((f"{scheme} x={x:g} crlb gap {dc:.1e}", dc <= 0.02))
            checks.append((f"{scheme} x={x:g} mse gap {dm:.3f} ({a.mse_norm:.4g} vs {b.mse_norm:.4g})",
                           dm <= 0.10 and not (a.invalid or b.invalid)))
    verdict(acceptance_log, 5, checks)


# ---------------------------------------------------------------- 6

def test_criterion_6_comparison_ratios(acceptance_log, surface):
    ctx = build_context(ExperimentConfig(), surface)
    r0 = ratio_r0(surface, ctx.kappa)
    inner = {round(x, 1): ratio_r(surface, x, ctx.kappa) for x in np.arange(2.1, 6.0, 0.1)}
    outer = {round(x, 1): ratio_r(surface, x, ctx.kappa) for x in np.arange(6.1, 25.0, 0.1)}
    two = two_route_r0(ctx, 20, 0.01)
    gaps = []
    for x in (2.5, 4.0, 8.0, 10.0, 15.0, 20.0):
        direct = ue_min_crlb(ctx, x, 20, 0.01) / crlb_idd(ctx.intensity, x, 20, 0.01).value
        gaps.append(abs(ratio_r(surface, x, ctx.kappa) ** 2 / direct - 1))
    checks = [
        (f"r0 = {r0:.4f} > 1", r0 > 1),
        (f"max r in (2, 6) = {max(inner.values()):.4f} > 1", max(inner.values()) > 1),
        (f"min r above 6 = {min(outer.values()):.4f} < 1", min(outer.values()) < 1),
        (f"two-route r0 gap {abs(two / r0 - 1):.1e}", abs(two / r0 - 1) <= 1e-6),
        (f"r^2 vs bound ratio max gap {max(gaps):.1e}", max(gaps) <= 1e-6),
    ]
    verdict(acceptance_log, 6, checks)


# ---------------------------------------------------------------- 7

def test_criterion_7_physics_sanity(acceptance_log, surface, system):
    xs = np.array([10.0, 15.0, 20.0])
    seps = []
    for x in xs:
        p = find_curve_peaks(frequency_marginal(surface, x))
        seps.append(p[p > 0].min() - p[p < 0].max())
    slope = np.polyfit(xs, seps, 1)[0]
    residual = max(steady_state(system.replace(omega_rf=MHZ * x, delta_p=MHZ * f)).residual
                   for x in (0.0, 5.0, 15.0, 25.0) for f in (-30.0, -7.0, 0.0, 7.0, 30.0))
    rng = np.random.default_rng(7)
    broken = 0
    worst = 0.0
    for _ in range(1000):
        s = AtomicSystem(omega_p=MHZ * rng.uniform(0.01, 30), omega_c=MHZ * rng.uniform(0, 30),
                         omega_rf=MHZ * rng.uniform(0, 30), delta_p=MHZ * rng.uniform(-40, 40),
                         delta_c=MHZ * rng.uniform(-10, 10), gamma2=MHZ * rng.uniform(0.5, 50),
                         gamma3=MHZ * rng.uniform(0.001, 5), gamma4=MHZ * rng.uniform(0.001, 5))
        dm = steady_state(s)
        worst = max(worst, dm.residual)
        try:
            dm.check()
        except Exception:
            broken += 1
    checks = [
        (f"splitting slope {slope:.4f}", abs(slope - 1) <= 0.1),
        (f"preset residual {residual:.1e}", residual < 1e-9),
        (f"random draws residual {worst:.1e}", worst < 1e-9),
        (f"invariant violations {broken}/1000", broken == 0),
    ]
    verdict(acceptance_log, 7, checks)


# ---------------------------------------------------------------- 8

def test_criterion_8_estimator_units(acceptance_log, surface, peaks15, tmp_path, monkeypatch):
    checks = []
    for scheme, x in (("IDD", 4.0), ("ISD", 0.5), ("UE", 15.0), ("ME", 15.0)):
        cfg = ExperimentConfig(schemes=(scheme,), signals=(x,), noises=(0.0,), trials=1)
        c = run_cell(build_context(cfg, surface), scheme, 0, 0)
        checks.append((f"noiseless {scheme} error {math.sqrt(c.mse):.1e}", c.failures == 0 and c.mse <= 1e-12))
    f = np.linspace(3.0, 13.0, 10)
    quintic = ScanData(f, 1.0 - (f - 7.7) ** 2 + 0.01 * (f - 7.7) ** 4 - 1e-4 * (f - 7.7) ** 5)
    pf = polyfit_peak(quintic).estimate
    checks.append((f"noiseless 5-PF on a quintic peak error {abs(pf - 7.7):.1e}", abs(pf - 7.7) <= 1e-9))

    _, right = peaks15
    plan = make_plan("uniform", right, 10).frequencies
    z = right(plan - right.center) + scan_noise_block(1, 10, 0.05, 8, 3, range(200))
    starts = right.center + np.linspace(-4.0, 4.0, 200)
    q = np.array(univariate_batch(plan, z, right, s0=starts)["objective_trace"])
    checks.append(("univariate shift iterations never increase the objective", bool(np.all(np.diff(q, axis=0) <= 0))))
    fam = TemplateFamily(right)
    mono = True
    for seed in range(20):
        scan = sample_scan(right, plan, 1, NoiseSpec(0.01, seed=seed), shift=right.center)
        try:
            rep = estimate_shift_multivariate(scan, fam)
        except MaxIterationsExceeded as e:
            rep = e.report
        tr = np.array(rep.extras["objective_trace"])
        mono &= bool(np.all(np.diff(tr) <= 1e-15 * tr[0]))
    checks.append(("multivariate iterations never increase the objective", mono))

    rng = np.random.default_rng(8)
    viol = 0
    for _ in range(1000):
        m = int(rng.integers(2, 9))
        a = rng.standard_normal((m, m))
        J = a @ a.T + 0.1 * np.eye(m)
        vals = np.array([schur_11(J, k) for k in range(1, m + 1)])
        viol += int(np.any(np.diff(vals) < -1e-12 * vals.max()))
    checks.append((f"block-inversion violations {viol}/1000", viol == 0))

    cfg = ExperimentConfig(signals=(4.0, 15.0), noises=(0.01, 0.02), trials=500, seed=99)
    texts = []
    for i, threads in enumerate(("1", "1", "2", "2")):
        monkeypatch.setenv(THREADS_ENV, threads)
        out = export(run_campaign(cfg, surface), tmp_path / f"run{i}")
        texts.append(b"".join((out / name).read_bytes() for name in ("campaign.csv", "config.echo", "seeds.txt")))
    checks.append(("campaign bytes identical over runs and thread counts", len(set(texts)) == 1))
    verdict(acceptance_log, 8, checks)
