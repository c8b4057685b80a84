"""Monte Carlo campaigns, bound sweeps, sampling plans and result export.

Every cell (scheme, signal, noise level) draws its data from counter-keyed
generators, so results do not depend on how trials are split across threads.
Trials are processed in fixed-size chunks and squared errors are summed with an
exactly rounded sum, which keeps outputs byte-identical for any thread count.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_config
from .crlb import (crlb_idd, crlb_isd, crlb_multivariate, crlb_univariate, fisher_multivariate,
                   intensity_max_slope, normalization_reference, ratio_r, ratio_r0, splitting_max_slope)
from .errors import ConfigError, RydbergCrlbError, SingularFisher, UnresolvedSplitting
from .estimators import ShiftSolverConfig, idd_batch, isd_batch, multivariate_batch, polyfit_batch, univariate_batch
from .families import make_family
from .noise_sim import (STREAM_IDD, STREAM_ISD, STREAM_SCAN_LEFT, STREAM_SCAN_RIGHT, SamplingPlan,
                        isd_waveform, normal_block, scan_noise_block)
from .quantum_model import ResponseSurface, build_surface
from .response import (MarginalCurve, PeakLineshape, frequency_marginal, intensity_marginal, kappa_rabi,
                       max_slope_point, split_lineshapes)

THREADS_ENV = "RYDBERG_CRLB_THREADS"
CHUNK = 250


def thread_count() -> int:
    """Worker threads from the environment (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


# ---------------------------------------------------------------- plans

def _side_interval(lineshape: PeakLineshape) -> tuple[float, float]:
    lo, hi = lineshape.curve.domain
    return (1e-9, hi) if lineshape.side == "right" else (lo, -1e-9)


def make_plan(strategy: str, lineshape: PeakLineshape | None, n: int, span: float = 10.0,
              frequencies=None) -> SamplingPlan:
    """Probe frequencies for one side of a splitting scan.

    Args:
        strategy: ``uniform`` (n points over ``span`` MHz centred on the peak,
            endpoints included), ``maxslope`` (all n points at the side's
            max-|slope| frequency) or ``explicit`` (``frequencies`` as given).
        lineshape: the side's tabulated lineshape; its centre is the design shift.

    A uniform window that would cross the probe resonance is slid outwards so that
    its inner end sits half a spacing from resonance.
    """
    strategy = strategy.replace("max-slope", "maxslope")
    if strategy == "explicit":
        if frequencies is None:
            raise ValueError("explicit plans need frequencies")
        f = np.asarray(frequencies, float)
        side = lineshape.side if lineshape is not None else ("right" if np.all(f > 0) else "left")
        return SamplingPlan("explicit", f, side=side,
                            design_shift=None if lineshape is None else lineshape.center)
    if lineshape is None:
        raise ValueError(f"{strategy} plans need a lineshape")
    if n < 1:
        raise ValueError("n must be >= 1")
    c = lineshape.center
    if strategy == "uniform":
        if n == 1:
            f = np.array([c])
        else:
            step = span / (n - 1)
            lo = c - 0.5 * span
            if lineshape.side == "right":
                lo = max(lo, 0.5 * step)
            else:
                lo = min(lo, -0.5 * step - span)
            f = lo + step * np.arange(n)
        return SamplingPlan("uniform", f, side=lineshape.side, span=span, design_shift=c)
    if strategy == "maxslope":
        loc, _, flat = max_slope_point(lineshape.curve, _side_interval(lineshape))
        if flat:
            raise UnresolvedSplitting("flat lineshape has no max-slope point")
        return SamplingPlan("maxslope", np.full(n, loc), side=lineshape.side, design_shift=c)
    raise ValueError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------- results

CELL_COLUMNS = ("scheme", "signal", "sigma0", "strategy", "trials", "failures", "invalid", "mse", "crlb",
                "mse_norm", "crlb_norm", "bias", "truth", "reference", "samples_per_trial", "cell_seed",
                "consistency", "diagnostic")
_INT = {"trials", "failures", "samples_per_trial", "cell_seed"}
_STR = {"scheme", "strategy", "consistency", "diagnostic"}


@dataclass(eq=False)
class CellResult:
    """One (scheme, signal, noise) cell; MSE excludes failed trials."""

    scheme: str
    signal: float
    sigma0: float
    strategy: str
    trials: int
    failures: int
    invalid: bool
    mse: float
    crlb: float
    mse_norm: float
    crlb_norm: float
    bias: float
    truth: float
    reference: float
    samples_per_trial: int
    cell_seed: int
    consistency: str
    diagnostic: str = ""

    def __post_init__(self):
        # keep free text CSV-safe so export and import round-trip exactly
        self.diagnostic = self.diagnostic.replace(",", ";").replace("\n", " ")

    def row(self) -> str:
        out = []
        for k in CELL_COLUMNS:
            v = getattr(self, k)
            if isinstance(v, bool):
                out.append("1" if v else "0")
            elif isinstance(v, float):
                out.append(repr(float(v)))
            else:
                out.append(str(v))
        return ",".join(out)

    @classmethod
    def from_row(cls, line: str) -> "CellResult":
        parts = line.rstrip("\n").split(",")
        if len(parts) != len(CELL_COLUMNS):
            raise ValueError(f"expected {len(CELL_COLUMNS)} columns, got {len(parts)}")
        kw = {}
        for k, v in zip(CELL_COLUMNS, parts):
            if k == "invalid":
                kw[k] = v == "1"
            elif k in _INT:
                kw[k] = int(v)
            elif k in _STR:
                kw[k] = v
            else:
                kw[k] = float(v)
        return cls(**kw)

    def __eq__(self, other):
        if not isinstance(other, CellResult):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, float) and isinstance(b, float):
                if not (a == b or (math.isnan(a) and math.isnan(b))):
                    return False
            elif a != b:
                return False
        return True


@dataclass
class CampaignResult:
    cells: list
    config_echo: str = ""
    lineage: list = field(default_factory=list)

    def cell(self, scheme: str, signal: float, sigma0: float) -> CellResult:
        for c in self.cells:
            if c.scheme == scheme and c.signal == signal and c.sigma0 == sigma0:
                return c
        raise KeyError((scheme, signal, sigma0))

    def csv_text(self) -> str:
        return ",".join(CELL_COLUMNS) + "\n" + "".join(c.row() + "\n" for c in self.cells)


# ---------------------------------------------------------------- context

@dataclass
class Context:
    """Surface and derived curves shared by every cell of a campaign."""

    config: ExperimentConfig
    surface: ResponseSurface
    intensity: MarginalCurve
    kappa: float
    x_lo: float
    surface_digest: str


def build_context(config: ExperimentConfig, surface: ResponseSurface | None = None) -> Context:
    system = config.system()
    if surface is None:
        surface = build_surface(system, config.x_grid(), config.f_grid(), check_grid=False,
                                velocity_points=config.velocity_points)
    fi = intensity_marginal(surface)
    x_lo = config.x_lo if config.x_lo is not None else intensity_max_slope(surface)[0]
    digest = hashlib.sha256(np.ascontiguousarray(surface.values).tobytes()).hexdigest()
    return Context(config, surface, fi, kappa_rabi(system), float(x_lo), digest)


def cell_seed(master: int, i_signal: int, i_noise: int) -> int:
    """Seed shared by all schemes of one (signal, noise) pair."""
    ss = np.random.SeedSequence([int(master), int(i_signal), int(i_noise)])
    return int(ss.generate_state(1, np.uint64)[0] & np.uint64(0x7FFFFFFFFFFFFFFF))


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(np.ascontiguousarray(np.asarray(p, float)).tobytes() if not isinstance(p, str) else p.encode())
    return h.hexdigest()[:16]


@dataclass
class _SplitSetup:
    curve: MarginalCurve
    left: PeakLineshape
    right: PeakLineshape
    plan_l: SamplingPlan
    plan_r: SamplingPlan
    truth: float


def split_setup(ctx: Context, x: float) -> _SplitSetup:
    """Lineshapes and sampling plans at field x (raises UnresolvedSplitting)."""
    cfg = ctx.config
    fs = frequency_marginal(ctx.surface, x)
    left, right = split_lineshapes(fs)
    if cfg.strategy == "explicit":
        off = np.asarray(cfg.explicit_offsets, float)
        pl = make_plan("explicit", left, cfg.n_freq, frequencies=left.center + off)
        pr = make_plan("explicit", right, cfg.n_freq, frequencies=right.center + off)
    else:
        pl = make_plan(cfg.strategy, left, cfg.n_freq, cfg.span)
        pr = make_plan(cfg.strategy, right, cfg.n_freq, cfg.span)
    return _SplitSetup(fs, left, right, pl, pr, ctx.kappa * (right.center - left.center))


# ---------------------------------------------------------------- per-scheme trial blocks

def monotone_branch(curve: MarginalCurve, x: float) -> tuple[float, float]:
    """Largest node interval around x on which the sampled slope keeps one sign."""
    u = curve.inputs
    d = np.sign(curve.derivative(u))
    i = int(np.clip(np.searchsorted(u, x), 1, u.size - 1))
    i = i if abs(u[i] - x) <= abs(u[i - 1] - x) else i - 1
    s = d[i] if d[i] != 0 else d[min(i + 1, u.size - 1)]
    a = i
    while a > 0 and d[a - 1] == s:
        a -= 1
    b = i
    while b < u.size - 1 and d[b + 1] == s:
        b += 1
    return float(u[a]), float(u[b])


def _chunks(n: int):
    return [range(k, min(k + CHUNK, n)) for k in range(0, n, CHUNK)]


def _run_chunks(fn, n: int):
    """Apply fn to fixed trial chunks; results come back in chunk order."""
    chunks = _chunks(n)
    threads = thread_count()
    if threads == 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(fn, chunks))
    est = np.concatenate([p[0] for p in parts])
    ok = np.concatenate([p[1] for p in parts])
    return est, ok


def _idd_cell(ctx, x, sigma, seed):
    cfg = ctx.config
    fi = ctx.intensity
    n = cfg.n_total
    branch = monotone_branch(fi, x)
    y = float(fi(x))

    def fn(idx):
        z = y + sigma * normal_block(seed, STREAM_IDD, idx, n)
        est, ok = idd_batch(z, fi, branch)
        return est, ok

    bound = crlb_idd(fi, x, n, sigma)
    return fn, bound.value, x, n, _digest(np.array([x, y, bound.parts["slope"], n, sigma])), bound.diagnostic


def _isd_cell(ctx, x, sigma, seed):
    cfg = ctx.config
    fi = ctx.intensity
    n1, n2 = cfg.n_periods, cfg.per_period
    slope = float(fi.derivative(ctx.x_lo))
    clean = isd_waveform(float(fi(ctx.x_lo)), slope, x, cfg.isd_phase, n1, n2)

    def fn(idx):
        z = clean + sigma * normal_block(seed, STREAM_ISD, idx, clean.size)
        est = isd_batch(z, slope, n1, n2)
        return est, np.isfinite(est)

    bound = crlb_isd(fi, ctx.x_lo, n1 * n2, sigma)
    return fn, bound.value, x, n1 * n2, _digest(clean, np.array([ctx.x_lo, slope, sigma])), bound.diagnostic


def _split_cell(ctx, scheme, x, sigma, seed, setup: _SplitSetup):
    cfg = ctx.config
    n_avg = cfg.n_avg
    fr, fl = setup.plan_r.frequencies, setup.plan_l.frequencies
    yr, yl = setup.curve(fr), setup.curve(fl)
    single = setup.plan_r.distinct == 1 or setup.plan_l.distinct == 1
    solver = ShiftSolverConfig()
    k = ctx.kappa
    diag = ""

    def data(idx):
        zr = yr + scan_noise_block(n_avg, fr.size, sigma, seed, STREAM_SCAN_RIGHT, idx)
        zl = yl + scan_noise_block(n_avg, fl.size, sigma, seed, STREAM_SCAN_LEFT, idx)
        return zr, zl

    ue = crlb_univariate(setup.left, setup.right, fl, fr, n_avg, sigma, k)
    bound = ue.value
    if scheme == "UE":
        def fn(idx):
            zr, zl = data(idx)
            s0r = setup.plan_r.design_shift if single else None
            s0l = setup.plan_l.design_shift if single else None
            o_r = univariate_batch(fr, zr, setup.right, solver, s0r)
            o_l = univariate_batch(fl, zl, setup.left, solver, s0l)
            return k * (o_r["shift"] - o_l["shift"]), o_r["converged"] & o_l["converged"]
    elif scheme == "ME":
        fam_r = make_family(cfg.family, setup.right)
        fam_l = make_family(cfg.family, setup.left)
        v_r = _pseudo_true(fam_r, setup.right, fr)
        v_l = _pseudo_true(fam_l, setup.left, fl)
        free = not single
        try:
            # the bound scales as sigma^2, so evaluate at unit noise and rescale
            jr = fisher_multivariate(fam_r, np.r_[setup.right.center, v_r], fr, n_avg, 1.0, free)
            jl = fisher_multivariate(fam_l, np.r_[setup.left.center, v_l], fl, n_avg, 1.0, free)
            bound = sigma ** 2 * crlb_multivariate(jl, jr, k).value
        except SingularFisher as e:
            bound, diag = math.inf, f"singular Fisher matrix: {e}"

        def fn(idx):
            zr, zl = data(idx)
            if single:
                m_r = multivariate_batch(fr, zr, fam_r, solver, setup.right.center, v_r, free_nuisance=False)
                m_l = multivariate_batch(fl, zl, fam_l, solver, setup.left.center, v_l, free_nuisance=False)
            else:
                v0r = v_r if cfg.family != "gaussian" else None
                v0l = v_l if cfg.family != "gaussian" else None
                m_r = multivariate_batch(fr, zr, fam_r, solver, None, v0r)
                m_l = multivariate_batch(fl, zl, fam_l, solver, None, v0l)
            return k * (m_r["shift"] - m_l["shift"]), m_r["converged"] & m_l["converged"]
    elif scheme == "5-PF":
        # the polynomial baseline is compared against the univariate bound
        if single:
            diag = "polynomial fit needs more distinct frequencies than a single-frequency plan has"

            def fn(idx):
                return np.full(len(idx), np.nan), np.zeros(len(idx), bool)
        else:
            def fn(idx):
                zr, zl = data(idx)
                est = k * (polyfit_batch(fr, zr) - polyfit_batch(fl, zl))
                return est, np.isfinite(est)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    consistency = _digest(fr, fl, yr, yl, np.array([setup.right.center, setup.left.center, k, sigma, n_avg, bound]))
    return fn, bound, setup.truth, 2 * fr.size * n_avg, consistency, diag


def _pseudo_true(family, lineshape, freqs):
    """Family parameters reproducing the lineshape (nominal for templates, noiseless fit otherwise)."""
    if hasattr(family, "nominal"):
        return family.nominal
    u = np.linspace(-5.0, 5.0, 41)
    lo, hi = lineshape.argument_domain()
    u = u[(u >= lo) & (u <= hi)]
    z = lineshape(u)[None, :]
    out = multivariate_batch(u, z, family, ShiftSolverConfig(), s0=0.0)
    return out["params"][0]


def run_cell(ctx: Context, scheme: str, i_signal: int, i_noise: int, trials: int | None = None) -> CellResult:
    cfg = ctx.config
    x = cfg.signals[i_signal]
    sigma = cfg.noises[i_noise]
    trials = cfg.trials if trials is None else trials
    seed = cell_seed(cfg.seed, i_signal, i_noise)
    strategy = cfg.strategy if scheme in ("UE", "ME", "5-PF") else "-"
    ref = normalization_reference(ctx.intensity, cfg.n_total, sigma) if sigma > 0 else 0.0
    try:
        if scheme == "IDD":
            fn, bound, truth, used, cons, diag = _idd_cell(ctx, x, sigma, seed)
        elif scheme == "ISD":
            fn, bound, truth, used, cons, diag = _isd_cell(ctx, x, sigma, seed)
        else:
            fn, bound, truth, used, cons, diag = _split_cell(ctx, scheme, x, sigma, seed, split_setup(ctx, x))
    except RydbergCrlbError as e:
        return CellResult(scheme, x, sigma, strategy, trials, trials, True, math.nan, math.nan, math.nan, math.nan,
                          math.nan, math.nan, ref, 0, seed, "", f"{type(e).__name__}: {e}")
    if used != cfg.n_total:
        raise AssertionError(f"{scheme} consumed {used} samples per trial, budget is {cfg.n_total}")
    est, ok = _run_chunks(fn, trials)
    err = est[ok] - truth
    n_ok = int(ok.sum())
    failures = trials - n_ok
    if n_ok:
        mse = math.fsum((err * err).tolist()) / n_ok
        bias = math.fsum(err.tolist()) / n_ok
    else:
        mse = bias = math.nan
    invalid = failures > 0.05 * trials
    norm = (lambda v: v / ref) if ref > 0 else (lambda v: math.nan)
    return CellResult(scheme, x, sigma, strategy, trials, failures, invalid, float(mse), float(bound),
                      float(norm(mse)), float(norm(bound)), float(bias), float(truth), float(ref), used, seed,
                      cons, diag)


def run_campaign(config: ExperimentConfig, surface: ResponseSurface | None = None,
                 context: Context | None = None) -> CampaignResult:
    """All cells scheme x signal x noise, in that nesting order."""
    config.validate()
    ctx = context or build_context(config, surface)
    cells = []
    lineage = []
    for scheme in config.schemes:
        for i, x in enumerate(config.signals):
            for j, s in enumerate(config.noises):
                c = run_cell(ctx, scheme, i, j)
                cells.append(c)
                streams = {"IDD": str(STREAM_IDD), "ISD": str(STREAM_ISD)}.get(
                    scheme, f"{STREAM_SCAN_LEFT};{STREAM_SCAN_RIGHT}")
                lineage.append(f"{scheme} signal={x!r} sigma0={s!r} master={config.seed} "
                               f"cell_seed={c.cell_seed} streams={streams} indices=0..{c.trials - 1}")
    return CampaignResult(cells, config.echo(), lineage)


# ---------------------------------------------------------------- sweeps and reports

SWEEP_COLUMNS = ("signal", "sigma0", "scheme", "crlb", "crlb_norm", "mse", "mse_norm", "failures", "invalid")


def sweep_normalized(config: ExperimentConfig, surface: ResponseSurface | None = None,
                     monte_carlo: bool = True) -> str:
    """Normalized bound (and MSE) table versus field strength as CSV text.

    Without ``monte_carlo`` only the bounds are evaluated and MSE columns are NaN.
    """
    if monte_carlo:
        res = run_campaign(config, surface)
        cells = res.cells
    else:
        ctx = build_context(config, surface)
        cells = [crlb_cell(ctx, s, i, j) for s in config.schemes for i in range(len(config.signals))
                 for j in range(len(config.noises))]
    cells = sorted(cells, key=lambda c: (c.signal, c.sigma0, config.schemes.index(c.scheme)))
    lines = [",".join(SWEEP_COLUMNS)]
    for c in cells:
        lines.append(",".join([repr(c.signal), repr(c.sigma0), c.scheme, repr(c.crlb), repr(c.crlb_norm),
                               repr(c.mse), repr(c.mse_norm), str(c.failures), "1" if c.invalid else "0"]))
    return "\n".join(lines) + "\n"


def crlb_cell(ctx: Context, scheme: str, i_signal: int, i_noise: int) -> CellResult:
    """Bound-only cell (no trials)."""
    cfg = ctx.config
    x, sigma = cfg.signals[i_signal], cfg.noises[i_noise]
    ref = normalization_reference(ctx.intensity, cfg.n_total, sigma) if sigma > 0 else 0.0
    seed = cell_seed(cfg.seed, i_signal, i_noise)
    strategy = cfg.strategy if scheme in ("UE", "ME", "5-PF") else "-"
    try:
        if scheme == "IDD":
            _, bound, truth, used, cons, diag = _idd_cell(ctx, x, sigma, seed)
        elif scheme == "ISD":
            _, bound, truth, used, cons, diag = _isd_cell(ctx, x, sigma, seed)
        else:
            _, bound, truth, used, cons, diag = _split_cell(ctx, scheme, x, sigma, seed, split_setup(ctx, x))
    except RydbergCrlbError as e:
        return CellResult(scheme, x, sigma, strategy, 0, 0, True, math.nan, math.nan, math.nan, math.nan,
                          math.nan, math.nan, ref, 0, seed, "", f"{type(e).__name__}: {e}")
    norm = bound / ref if ref > 0 else math.nan
    return CellResult(scheme, x, sigma, strategy, 0, 0, False, math.nan, float(bound), math.nan, float(norm),
                      math.nan, float(truth), float(ref), used, seed, cons, diag)


COMPARE_COLUMNS = ("signal", "intensity_slope", "splitting_slope", "r", "crlb_ue_min", "crlb_idd", "r_two_route")


def compare_report(config: ExperimentConfig, surface: ResponseSurface | None = None, sigma0: float = 0.01) -> str:
    """r0 and r[x] over the signal grid with the direct CRLB-ratio cross-check."""
    ctx = build_context(config, surface)
    n = config.n_total
    r0 = ratio_r0(ctx.surface, ctx.kappa)
    lines = [f"# r0={r0!r}", f"# r0_two_route={two_route_r0(ctx, n, sigma0)!r}", ",".join(COMPARE_COLUMNS)]
    for x in config.signals:
        fi_s = float(ctx.intensity.derivative(x))
        try:
            fs_s = splitting_max_slope(ctx.surface, x)
            r = ratio_r(ctx.surface, x, ctx.kappa)
            ue_min = ue_min_crlb(ctx, x, n, sigma0)
        except RydbergCrlbError:
            fs_s, r, ue_min = math.nan, math.nan, math.nan
        idd = crlb_idd(ctx.intensity, x, n, sigma0).value
        two = math.sqrt(ue_min / idd) if np.isfinite(idd) and idd > 0 and np.isfinite(ue_min) else math.nan
        lines.append(",".join(repr(float(v)) for v in (x, fi_s, fs_s, r, ue_min, idd, two)))
    return "\n".join(lines) + "\n"


def ue_min_crlb(ctx: Context, x: float, n_total: int, sigma0: float) -> float:
    """Univariate bound with every sample at each side's max-slope frequency."""
    fs = frequency_marginal(ctx.surface, x)
    left, right = split_lineshapes(fs)
    per_side = n_total // 2
    pl = make_plan("maxslope", left, per_side)
    pr = make_plan("maxslope", right, per_side)
    return crlb_univariate(left, right, pl.frequencies, pr.frequencies, 1, sigma0, ctx.kappa).value


def two_route_r0(ctx: Context, n_total: int, sigma0: float, x_ref: float = 15.0) -> float:
    """sqrt(CRLB_UE,min(x_ref) / CRLB_ISD,min) from the closed-form bounds."""
    ue = ue_min_crlb(ctx, x_ref, n_total, sigma0)
    loc, _ = intensity_max_slope(ctx.surface)
    isd = crlb_isd(ctx.intensity, loc, n_total, sigma0).value
    return math.sqrt(ue / isd)


# ---------------------------------------------------------------- export / import

def export(result: CampaignResult, path) -> Path:
    """Write campaign.csv, config.echo and seeds.txt into directory ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "campaign.csv").write_text(result.csv_text())
        (out / "config.echo").write_text(result.config_echo)
        (out / "seeds.txt").write_text("".join(line + "\n" for line in result.lineage))
    except OSError as e:
        raise OSError(f"cannot write campaign outputs to {out}: {e}") from e
    return out


def import_result(path) -> CampaignResult:
    out = Path(path)
    try:
        lines = (out / "campaign.csv").read_text().splitlines()
        echo = (out / "config.echo").read_text()
        seeds = (out / "seeds.txt").read_text().splitlines()
    except OSError as e:
        raise OSError(f"cannot read campaign outputs from {out}: {e}") from e
    if not lines or lines[0] != ",".join(CELL_COLUMNS):
        raise ValueError(f"{out / 'campaign.csv'}: unexpected header")
    return CampaignResult([CellResult.from_row(line) for line in lines[1:] if line], echo, seeds)


def config_from_result(result: CampaignResult) -> ExperimentConfig:
    return parse_config(result.config_echo)
