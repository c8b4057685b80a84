"""Maximum-likelihood field estimators and the polynomial peak-fit baseline.

Each estimator has a batched core working on a stack of trials (rows) and a
single-dataset wrapper returning an EstimateReport. Field values are Omega_RF/2pi
in MHz; splitting estimates are kappa times the peak separation in MHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar

from .errors import (DegenerateDenominator, IllConditionedFit, MaxIterationsExceeded, NoInteriorExtremum,
                     ValueOutOfRange, ZeroSlope)
from .families import GaussianFamily, _smooth3
from .noise_sim import ScanData
from .quantum_model import MHZ, AtomicSystem
from .response import invert_intensity


@dataclass
class EstimateReport:
    estimate: float
    method: str
    iterations: int = 0
    iteration_trace: list = field(default_factory=list)
    converged: bool = True
    residual: float = 0.0
    field_v_per_m: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def rabi_rad_s(self) -> float:
        """Equivalent Omega_RF in rad/s."""
        return self.estimate * MHZ

    def attach_field(self, system: AtomicSystem) -> "EstimateReport":
        self.field_v_per_m = hbar * self.rabi_rad_s / system.mu_rf
        return self

    def to_text(self) -> str:
        keys = ("estimate", "method", "iterations", "converged", "residual", "field_v_per_m")
        return "".join(f"{k}={getattr(self, k)!r}\n" for k in keys)

    CSV_COLUMNS = ("method", "estimate", "iterations", "converged", "residual")

    def to_csv_row(self) -> str:
        return ",".join(repr(getattr(self, k)) if k != "method" else self.method for k in self.CSV_COLUMNS)


@dataclass
class ShiftSolverConfig:
    """Shift iteration settings; epsilon is in MHz (1e-3 MHz = 1 kHz)."""

    epsilon: float = 1e-3
    max_iterations: int = 100
    max_halvings: int = 8
    joint_tolerance: float = 1e-8
    max_rounds: int = 50
    bfgs_iterations: int = 100

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1 or self.max_rounds < 1:
            raise ValueError("iteration caps must be >= 1")


# ---------------------------------------------------------------- intensity

def idd_batch(z, curve, branch_hint):
    """Inverse-response estimates of mean(z) per row; NaN where the mean leaves the branch range."""
    y = np.atleast_2d(np.asarray(z, float)).mean(axis=-1)
    a, b = branch_hint
    ya, yb = curve(a), curve(b)
    ok = (y >= min(ya, yb)) & (y <= max(ya, yb))
    out = np.full(y.shape, np.nan)
    if np.any(ok):
        out[ok] = invert_intensity(curve, y[ok], branch_hint)
    return out, ok


def estimate_idd(z, curve, branch_hint) -> EstimateReport:
    """Field estimate F_I^-1(mean z) on the given monotone branch.

    Raises:
        ValueOutOfRange: when noise pushes the sample mean outside the branch range.
    """
    z = np.asarray(z, float)
    y = float(z.mean())
    try:
        x = invert_intensity(curve, y, branch_hint)
    except ValueOutOfRange as e:
        raise ValueOutOfRange(f"sample mean {y:.6g} outside branch {branch_hint}: {e}") from None
    return EstimateReport(estimate=float(x), method="IDD", residual=float(curve(x) - y))


def isd_phasors(z, n_periods: int, per_period: int) -> np.ndarray:
    """Per-period complex amplitudes (2/N2) sum_k z_k exp(-j 2 pi (k-1)/N2); shape (..., n_periods)."""
    z = np.asarray(z, float)
    zz = z.reshape(z.shape[:-1] + (n_periods, per_period))
    w = np.exp(-2j * np.pi * np.arange(per_period) / per_period)
    return 2.0 / per_period * (zz @ w)


def isd_batch(z, slope: float, n_periods: int, per_period: int):
    """Single-DFT amplitude estimate (2/(N F')) |sum_k z_k exp(-j 2 pi (k-1) N1 / N)| per row."""
    if abs(slope) <= 1e-15:
        raise ZeroSlope("local-oscillator slope is zero")
    z = np.atleast_2d(np.asarray(z, float))
    n = n_periods * per_period
    if z.shape[-1] != n:
        raise ValueError(f"waveform length {z.shape[-1]} != {n}")
    k = np.arange(n)
    w = np.exp(-2j * np.pi * k * n_periods / n)
    return 2.0 / (n * abs(slope)) * np.abs(z @ w)


def estimate_isd(z, slope: float, n_periods: int, per_period: int) -> EstimateReport:
    """Superheterodyne amplitude estimate from the beat-frequency DFT bin.

    Also evaluates the per-period path: the coherent mean of the single-period
    complex amplitudes, whose magnitude equals the single-DFT estimate. The
    incoherent mean of per-period magnitudes is reported for reference.
    """
    z = np.asarray(z, float)
    est = float(isd_batch(z, slope, n_periods, per_period)[0])
    ph = isd_phasors(z, n_periods, per_period) / abs(slope)
    coherent = float(np.abs(ph.mean()))
    incoherent = float(np.abs(ph).mean())
    rel = abs(coherent - est) / max(abs(est), 1e-300)
    if rel > 1e-9:
        raise AssertionError(f"per-period and single-DFT estimates disagree (rel={rel:.2e})")
    return EstimateReport(estimate=est, method="ISD",
                          extras={"per_period_coherent": coherent, "per_period_incoherent": incoherent,
                                  "per_period": np.abs(ph).tolist()})


# ---------------------------------------------------------------- peak shift

def _objective(z, model):
    return np.sum((z - model) ** 2, axis=-1)


def shift_batch(f, z, value, slope, s0, config: ShiftSolverConfig):
    """Safeguarded Gauss-Newton shift iteration on rows of (f, z).

    Args:
        f, z: arrays (B, N) of probe detunings and readouts.
        value, slope: callables of the argument u = f - s returning F(u) and F'(u)
            for arrays shaped like ``f``.
        s0: initial shifts (B,).

    Returns:
        dict with ``shift``, ``converged``, ``iterations``, ``objective``, ``trace``
        (list of per-iteration shift arrays) and ``degenerate`` masks.
    """
    f = np.atleast_2d(f)
    z = np.atleast_2d(z)
    s = np.asarray(s0, float).copy().reshape(-1)
    B = z.shape[0]
    f = np.broadcast_to(f, z.shape)
    active = np.ones(B, bool)
    converged = np.zeros(B, bool)
    degenerate = np.zeros(B, bool)
    iters = np.zeros(B, int)
    q = _objective(z, value(f - s[:, None]))
    trace = [s.copy()]
    qtrace = [q.copy()]
    for _ in range(config.max_iterations):
        if not active.any():
            break
        u = f - s[:, None]
        r = z - value(u)
        d = slope(u)
        den = np.sum(d * d, axis=-1)
        bad = active & (den < 1e-18)
        degenerate |= bad
        active &= ~bad
        step = np.where(active, -np.sum(r * d, axis=-1) / np.where(den > 0, den, 1.0), 0.0)
        accepted = np.zeros(B, bool)
        taken = np.zeros(B)
        for _h in range(config.max_halvings + 1):
            trial = s + step
            qt = _objective(z, value(f - trial[:, None]))
            good = active & ~accepted & (qt <= q)
            s = np.where(good, trial, s)
            q = np.where(good, qt, q)
            taken = np.where(good, step, taken)
            accepted |= good
            pending = active & ~accepted
            if not pending.any():
                break
            step = np.where(pending, 0.5 * step, step)
        iters += active
        # a rejected step after all halvings means no descent direction is left
        stalled = active & ~accepted
        small = np.abs(np.where(accepted, taken, step)) < config.epsilon
        done = active & (small | stalled)
        converged |= done & small
        active &= ~done
        trace.append(s.copy())
        qtrace.append(q.copy())
    return dict(shift=s, converged=converged & ~degenerate, iterations=iters, objective=q,
                trace=trace, objective_trace=qtrace, degenerate=degenerate)


def initial_shift(f, z) -> np.ndarray:
    """Frequency of the maximum of the 3-point moving average, per row."""
    f = np.atleast_2d(f)
    z = np.atleast_2d(z)
    zs = _smooth3(z)
    i = np.argmax(zs, axis=-1)
    fb = np.broadcast_to(f, z.shape)
    return fb[np.arange(z.shape[0]), i]


def scan_seed(f, z, value, step: float = 0.1) -> np.ndarray:
    """Shift on a coarse grid over the scan span that minimises the least-squares objective.

    ``value(u)`` evaluates the model at arguments u = f - s; rows are seeded
    independently. Ties keep the smallest candidate.
    """
    z = np.atleast_2d(z)
    f = np.broadcast_to(np.atleast_2d(f), z.shape)
    lo, hi = float(f.min()), float(f.max())
    cand = np.linspace(lo, hi, max(int(np.ceil((hi - lo) / step)) + 1, 2))
    best = np.full(z.shape[0], np.inf)
    seed = np.full(z.shape[0], cand[0])
    for c in cand:
        q = _objective(z, value(f - c))
        better = q < best
        best = np.where(better, q, best)
        seed = np.where(better, c, seed)
    return seed


def univariate_batch(f, z, lineshape, config: ShiftSolverConfig | None = None, s0=None, seed: str = "scan"):
    """Shift estimates with a fully known lineshape (peak at argument 0).

    Args:
        s0: explicit starting shifts; overrides ``seed``.
        seed: ``scan`` (coarse objective scan over the span) or ``argmax``
            (maximum of the 3-point moving average).
    """
    config = config or ShiftSolverConfig()
    z = np.atleast_2d(np.asarray(z, float))
    f = np.broadcast_to(np.atleast_2d(np.asarray(f, float)), z.shape)
    if s0 is None:
        s0 = scan_seed(f, z, lineshape) if seed == "scan" else initial_shift(f, z)
    s0 = np.broadcast_to(np.asarray(s0, float), (z.shape[0],))
    return shift_batch(f, z, lineshape, lineshape.derivative, s0, config)


def estimate_shift_univariate(scan: ScanData, lineshape, config: ShiftSolverConfig | None = None,
                              initial: float | None = None) -> EstimateReport:
    """Least-squares peak shift of one scan side against a known lineshape.

    Raises:
        DegenerateDenominator: if the summed squared slope vanishes.
        MaxIterationsExceeded: if the cap is hit (carries the best iterate).
    """
    if scan.side != lineshape.side:
        raise ValueError("scan side does not match lineshape side")
    config = config or ShiftSolverConfig()
    out = univariate_batch(scan.frequencies, scan.voltages, lineshape, config,
                           None if initial is None else [initial])
    trace = [float(t[0]) for t in out["trace"]]
    rep = EstimateReport(estimate=float(out["shift"][0]), method="UE-shift", iterations=int(out["iterations"][0]),
                         iteration_trace=trace, converged=bool(out["converged"][0]),
                         residual=float(out["objective"][0]),
                         extras={"objective_trace": [float(q[0]) for q in out["objective_trace"]]})
    if out["degenerate"][0]:
        raise DegenerateDenominator("sum of squared lineshape slopes below 1e-18")
    if not rep.converged:
        err = MaxIterationsExceeded(f"no convergence in {config.max_iterations} iterations")
        err.report = rep
        raise err
    return rep


def _bfgs_batch(fun_grad, x0, h0, max_iter: int, xtol: float = 1e-12):
    """Batched BFGS with Armijo backtracking.

    ``fun_grad(x)`` returns (values (B,), gradients (B, M)); invalid points return inf.
    Returns the final points, a per-row ill-conditioning flag and iteration counts.
    """
    x = x0.copy()
    B, M = x.shape
    H = h0.copy()
    fx, g = fun_grad(x)
    active = np.isfinite(fx)
    ill = np.zeros(B, bool)
    its = np.zeros(B, int)
    eye = np.eye(M)
    for _ in range(max_iter):
        if not active.any():
            break
        p = -np.einsum("bij,bj->bi", H, g)
        slope = np.einsum("bi,bi->b", g, p)
        reset = active & ~(slope < 0)
        if reset.any():
            H[reset] = h0[reset]
            p[reset] = -np.einsum("bij,bj->bi", h0[reset], g[reset])
            slope = np.einsum("bi,bi->b", g, p)
        t = np.ones(B)
        acc = ~active
        xn = x.copy()
        fn = fx.copy()
        gn = g.copy()
        for _ls in range(40):
            cand = x + t[:, None] * p
            fc, gc = fun_grad(cand)
            ok = ~acc & np.isfinite(fc) & (fc <= fx + 1e-4 * t * slope)
            xn[ok], fn[ok], gn[ok] = cand[ok], fc[ok], gc[ok]
            acc |= ok
            if acc.all():
                break
            t = np.where(acc, t, 0.5 * t)
        moved = active & acc
        failed_ls = active & ~acc
        sk = xn - x
        yk = gn - g
        sy = np.einsum("bi,bi->b", sk, yk)
        upd = moved & (sy > 1e-300)
        if upd.any():
            rho = 1.0 / sy[upd]
            V = eye - rho[:, None, None] * np.einsum("bi,bj->bij", sk[upd], yk[upd])
            Hn = V @ H[upd] @ np.transpose(V, (0, 2, 1)) + rho[:, None, None] * np.einsum("bi,bj->bij", sk[upd], sk[upd])
            finite = np.all(np.isfinite(Hn), axis=(1, 2))
            idx = np.flatnonzero(upd)
            H[idx[finite]] = Hn[finite]
            ill[idx[~finite]] = True
        x = np.where(moved[:, None], xn, x)
        fx = np.where(moved, fn, fx)
        g = np.where(moved[:, None], gn, g)
        its += active
        small = np.max(np.abs(sk), axis=1) <= xtol * (1.0 + np.max(np.abs(x), axis=1))
        active &= ~(failed_ls | small | ill)
    return x, ill, its


def multivariate_batch(f, z, family, config: ShiftSolverConfig | None = None, s0=None, v0=None,
                       free_nuisance: bool = True, seed: str = "scan"):
    """Alternating shift / quasi-Newton fit of a parametric peak family.

    Phase 1 updates the shift with the safeguarded Gauss-Newton step at fixed v;
    phase 2 minimises over v by BFGS at fixed shift. With ``free_nuisance`` false
    the family parameters stay at ``v0`` and only phase 1 runs.
    """
    config = config or ShiftSolverConfig()
    z = np.atleast_2d(np.asarray(z, float))
    B, N = z.shape
    f = np.broadcast_to(np.atleast_2d(np.asarray(f, float)), z.shape)
    if s0 is None:
        s0 = initial_shift(f, z)
        v = family.initial(f, z, s0) if v0 is None else np.broadcast_to(np.asarray(v0, float), (B, family.n_params))
        if seed == "scan":
            s0 = scan_seed(f, z, lambda u: family.value(u, v))
    s = np.broadcast_to(np.asarray(s0, float), (B,)).copy()
    v = family.initial(f, z, s) if v0 is None else np.broadcast_to(np.asarray(v0, float), (B, family.n_params)).copy()
    s = np.asarray(s, float).copy()
    v = np.asarray(v, float).copy()
    converged = np.zeros(B, bool)
    failed = np.zeros(B, bool)
    ill = np.zeros(B, bool)
    active = np.ones(B, bool)
    q = _objective(z, family.value(f - s[:, None], v))
    qtrace = [q.copy()]
    strace = [s.copy()]
    rounds = np.zeros(B, int)
    eps_cfg = ShiftSolverConfig(epsilon=config.epsilon, max_iterations=config.max_iterations,
                                max_halvings=config.max_halvings)
    for _ in range(config.max_rounds):
        if not active.any():
            break
        ia = np.flatnonzero(active)
        fa, za, va = f[ia], z[ia], v[ia]
        # phase 1: shift at fixed v
        out = shift_batch(fa, za, lambda u: family.value(u, va), lambda u: family.d_u(u, va), s[ia], eps_cfg)
        s_new = out["shift"]
        failed[ia[out["degenerate"]]] = True
        if free_nuisance:
            # phase 2: v at fixed shift
            u = fa - s_new[:, None]

            def fun_grad(vv, u=u, za=za):
                r = za - family.value(u, vv)
                val = np.sum(r * r, axis=-1)
                grad = -2.0 * np.einsum("bn,bnm->bm", r, family.d_v(u, vv))
                bad = ~family.valid(vv) | ~np.isfinite(val)
                val = np.where(bad, np.inf, val)
                return val, grad

            Jv = family.d_v(u, va)
            A = 2.0 * np.einsum("bnm,bnk->bmk", Jv, Jv)
            scale = np.trace(A, axis1=1, axis2=2) / family.n_params
            A = A + (1e-10 * scale + 1e-300)[:, None, None] * np.eye(family.n_params)
            try:
                h0 = np.linalg.inv(A)
            except np.linalg.LinAlgError:
                h0 = np.tile(np.eye(family.n_params), (ia.size, 1, 1))
            v_new, ill_a, _ = _bfgs_batch(fun_grad, va, h0, config.bfgs_iterations)
            ill[ia[ill_a]] = True
        else:
            v_new = va
        q_new = _objective(za, family.value(fa - s_new[:, None], v_new))
        ds = np.abs(s_new - s[ia]) / np.maximum(np.abs(s[ia]), 1.0)
        dv = np.max(np.abs(v_new - va) / np.maximum(np.abs(va), 1.0), axis=1)
        s[ia], v[ia], q[ia] = s_new, v_new, q_new
        rounds[ia] += 1
        done = np.maximum(ds, dv) < config.joint_tolerance
        if not free_nuisance:
            done[:] = True
        converged[ia[done]] = True
        active[ia[done]] = False
        active &= ~(failed | ill)
        qtrace.append(q.copy())
        strace.append(s.copy())
    return dict(shift=s, params=v, converged=converged & ~failed & ~ill, rounds=rounds, objective=q,
                objective_trace=qtrace, trace=strace, ill=ill, degenerate=failed)


def estimate_shift_multivariate(scan: ScanData, family=None, config: ShiftSolverConfig | None = None,
                                initial_shift_value: float | None = None, initial_params=None,
                                free_nuisance: bool = True) -> EstimateReport:
    """Joint (shift, lineshape parameters) least-squares fit for one scan side.

    Raises:
        IllConditionedFit: if the quasi-Newton curvature estimate breaks down.
        MaxIterationsExceeded: if the alternation cap is hit.
    """
    family = family or GaussianFamily()
    config = config or ShiftSolverConfig()
    s0 = None if initial_shift_value is None else [initial_shift_value]
    v0 = None if initial_params is None else [initial_params]
    out = multivariate_batch(scan.frequencies, scan.voltages, family, config, s0, v0, free_nuisance)
    rep = EstimateReport(estimate=float(out["shift"][0]), method="ME-shift", iterations=int(out["rounds"][0]),
                         iteration_trace=[float(t[0]) for t in out["trace"]], converged=bool(out["converged"][0]),
                         residual=float(out["objective"][0]),
                         extras={"params": out["params"][0].tolist(),
                                 "objective_trace": [float(q[0]) for q in out["objective_trace"]]})
    if out["ill"][0]:
        raise IllConditionedFit("quasi-Newton inverse Hessian became singular")
    if out["degenerate"][0]:
        raise DegenerateDenominator("sum of squared lineshape slopes below 1e-18")
    if not rep.converged:
        err = MaxIterationsExceeded(f"no convergence in {config.max_rounds} rounds")
        err.report = rep
        raise err
    return rep


def estimate_splitting(left: ScanData, right: ScanData, mode: str = "univariate", kappa: float = 1.0,
                       left_model=None, right_model=None, config: ShiftSolverConfig | None = None,
                       system: AtomicSystem | None = None, **kw) -> EstimateReport:
    """Field estimate kappa (f_R - f_L) from independent left and right scans.

    ``left_model``/``right_model`` are lineshapes (univariate) or families
    (multivariate). Errors from either side are re-raised with the side named.
    """
    if left.side != "left" or right.side != "right":
        raise ValueError("scans must be (left, right)")
    shifts = {}
    reps = {}
    for side, scan, model in (("left", left, left_model), ("right", right, right_model)):
        try:
            if mode == "univariate":
                reps[side] = estimate_shift_univariate(scan, model, config, kw.get(f"{side}_initial"))
            elif mode == "multivariate":
                reps[side] = estimate_shift_multivariate(scan, model, config, kw.get(f"{side}_initial"),
                                                         kw.get(f"{side}_params"), kw.get("free_nuisance", True))
            else:
                raise ValueError(f"unknown mode {mode!r}")
        except (DegenerateDenominator, MaxIterationsExceeded, IllConditionedFit) as e:
            raise type(e)(f"{side} peak: {e}") from e
        shifts[side] = reps[side].estimate
    est = kappa * (shifts["right"] - shifts["left"])
    rep = EstimateReport(estimate=est, method="UE" if mode == "univariate" else "ME",
                         iterations=reps["left"].iterations + reps["right"].iterations,
                         converged=reps["left"].converged and reps["right"].converged,
                         residual=reps["left"].residual + reps["right"].residual,
                         extras={"f_left": shifts["left"], "f_right": shifts["right"]})
    if system is not None:
        rep.attach_field(system)
    return rep


# ---------------------------------------------------------------- baseline

def polyfit_batch(f, z, order: int = 5):
    """Peak positions from a least-squares polynomial fit per row; NaN when no interior extremum."""
    z = np.atleast_2d(np.asarray(z, float))
    f = np.asarray(f, float).reshape(-1)
    if np.unique(f).size <= order + 1:
        raise ValueError(f"need more than {order + 1} distinct frequencies for an order-{order} fit")
    c0, w = 0.5 * (f.max() + f.min()), 0.5 * (f.max() - f.min())
    t = (f - c0) / w
    V = np.vander(t, order + 1, increasing=True)
    coef = np.linalg.lstsq(V, z.T, rcond=None)[0].T  # (B, order+1)
    dcoef = coef[:, 1:] * np.arange(1, order + 1)
    ia = np.argmax(z, axis=-1)
    out = np.full(z.shape[0], np.nan)
    for b in range(z.shape[0]):
        r = np.roots(dcoef[b, ::-1])
        r = r[np.abs(r.imag) < 1e-9].real
        r = r[(r >= -1.0) & (r <= 1.0)]
        if r.size:
            out[b] = c0 + w * r[np.argmin(np.abs(r - t[ia[b]]))]
    return out


def polyfit_peak(scan: ScanData, order: int = 5) -> EstimateReport:
    """Baseline peak location from a polynomial fit.

    Raises:
        NoInteriorExtremum: when no real derivative root lies inside the span.
    """
    pk = float(polyfit_batch(scan.frequencies, scan.voltages, order)[0])
    if not np.isfinite(pk):
        raise NoInteriorExtremum("fitted polynomial has no stationary point inside the scan span")
    return EstimateReport(estimate=pk, method=f"{order}-PF")
