"""Cramer-Rao bounds, Fisher information and scheme comparison ratios.

Field strengths are handled in Omega_RF/2pi (MHz) units, so bounds come out in
MHz^2. All slopes come from the response module's derivative accessors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import AllFlatSamples, SingularFisher
from .quantum_model import ResponseSurface
from .response import frequency_marginal, intensity_marginal, max_slope_point, split_lineshapes

SLOPE_FLOOR = 1e-12
COND_LIMIT = 1e12


@dataclass
class CrlbReport:
    """Bound for one scheme; ``value`` may be inf when the slope vanishes."""

    scheme: str
    value: float
    normalized: float | None = None
    parts: dict = field(default_factory=dict)
    diagnostic: str = ""


@dataclass
class FisherMatrix:
    matrix: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, float)
        if np.max(np.abs(self.matrix - self.matrix.T), initial=0.0) > 1e-12 * max(np.abs(self.matrix).max(), 1.0):
            raise ValueError("Fisher matrix must be symmetric")

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    @property
    def condition(self) -> float:
        ev = np.linalg.eigvalsh(self.matrix)
        return float(np.inf if ev.min() <= 0 else ev.max() / ev.min())

    def inverse_11(self) -> float:
        """[J^-1]_{1,1} via Cholesky with a condition-number guard."""
        if self.matrix.shape == (1, 1):
            if not self.matrix[0, 0] > 0:
                raise SingularFisher("zero Fisher information")
            return float(1.0 / self.matrix[0, 0])
        if self.condition > COND_LIMIT:
            raise SingularFisher(f"condition number {self.condition:.3e} exceeds {COND_LIMIT:.0e}")
        c = cho_factor(self.matrix)
        e1 = np.zeros(self.matrix.shape[0])
        e1[0] = 1.0
        return float(cho_solve(c, e1)[0])


def crlb_idd(curve, x: float, n: int, sigma0: float) -> CrlbReport:
    """sigma0^2 / (N F_I'(x)^2)."""
    s = float(curve.derivative(x))
    if abs(s) <= SLOPE_FLOOR:
        return CrlbReport("IDD", np.inf, parts={"slope": s}, diagnostic=f"zero slope at x={x}")
    return CrlbReport("IDD", sigma0 ** 2 / (n * s ** 2), parts={"slope": s})


def crlb_isd(curve, x_lo: float, n: int, sigma0: float) -> CrlbReport:
    """2 sigma0^2 / (N F_I'(x_LO)^2)."""
    s = float(curve.derivative(x_lo))
    if abs(s) <= SLOPE_FLOOR:
        return CrlbReport("ISD", np.inf, parts={"slope": s}, diagnostic=f"zero slope at x_LO={x_lo}")
    return CrlbReport("ISD", 2.0 * sigma0 ** 2 / (n * s ** 2), parts={"slope": s})


def peak_shift_crlb(lineshape, frequencies, n_avg: int, sigma0: float, shift: float | None = None) -> float:
    """Single-peak shift bound sigma0^2 / (N_SF,2 sum F'(f_i - f_R)^2)."""
    f_r = lineshape.center if shift is None else shift
    d = np.asarray(lineshape.derivative(np.asarray(frequencies, float) - f_r))
    info = float(np.sum(d ** 2))
    if info <= SLOPE_FLOOR ** 2:
        raise AllFlatSamples("all sampled frequencies sit on flat parts of the lineshape")
    return sigma0 ** 2 / (n_avg * info)


def crlb_univariate(left, right, f_left, f_right, n_avg: int, sigma0: float, kappa: float = 1.0,
                    shifts: tuple | None = None) -> CrlbReport:
    """kappa^2 (CRLB_R + CRLB_L) with each side's known lineshape."""
    sl, sr = shifts if shifts is not None else (None, None)
    cl = peak_shift_crlb(left, f_left, n_avg, sigma0, sl)
    cr = peak_shift_crlb(right, f_right, n_avg, sigma0, sr)
    return CrlbReport("UE", kappa ** 2 * (cl + cr), parts={"left": cl, "right": cr})


def fisher_multivariate(family, theta, frequencies, n_avg: int, sigma0: float, free_nuisance: bool = True) -> FisherMatrix:
    """(N_SF,2 / sigma0^2) sum_i dF/dtheta_a dF/dtheta_b with theta = [f_R, v...].

    With ``free_nuisance`` false only the shift is a parameter.

    Raises:
        SingularFisher: if the condition number exceeds 1e12.
    """
    theta = np.asarray(theta, float)
    f_r, v = theta[0], theta[1:]
    u = np.asarray(frequencies, float) - f_r
    g_shift = -np.asarray(family.d_u(u, v)).reshape(-1)
    if free_nuisance:
        g = np.column_stack([g_shift, np.asarray(family.d_v(u, v)).reshape(u.size, -1)])
        labels = ("f_R",) + tuple(family.labels)
    else:
        g = g_shift[:, None]
        labels = ("f_R",)
    J = (n_avg / sigma0 ** 2) * (g.T @ g)
    J = 0.5 * (J + J.T)
    fm = FisherMatrix(J, labels)
    if fm.condition > COND_LIMIT:
        raise SingularFisher(f"condition number {fm.condition:.3e} exceeds {COND_LIMIT:.0e}")
    return fm


def crlb_multivariate(fisher_left: FisherMatrix, fisher_right: FisherMatrix, kappa: float = 1.0) -> CrlbReport:
    """kappa^2 ([J_L^-1]_11 + [J_R^-1]_11)."""
    cl = fisher_left.inverse_11()
    cr = fisher_right.inverse_11()
    return CrlbReport("ME", kappa ** 2 * (cl + cr), parts={"left": cl, "right": cr})


def schur_11(J: np.ndarray, m: int) -> float:
    """[J^-1]_11 restricted to the leading ``m`` parameters (m >= 1)."""
    sub = np.asarray(J)[:m, :m]
    return float(np.linalg.inv(sub)[0, 0])


def _max_abs_slope(curve, interval) -> float:
    _, s, _ = max_slope_point(curve, interval)
    return abs(s)


def intensity_max_slope(surface: ResponseSurface, delta_p: float = 0.0) -> tuple[float, float]:
    """(x_LO, F_I'(x_LO)) at the steepest point of F_I."""
    fi = intensity_marginal(surface, delta_p)
    loc, s, _ = max_slope_point(fi, fi.domain)
    return loc, s


def splitting_max_slope(surface: ResponseSurface, x: float) -> float:
    """max_f |dG/df| at field x."""
    fs = frequency_marginal(surface, x)
    return _max_abs_slope(fs, fs.domain)


def ratio_r0(surface: ResponseSurface, kappa: float = 1.0, x_ref: float = 15.0, delta_p: float = 0.0) -> float:
    """sqrt(2) kappa max|F_I'| / max|F_S'| with F_S taken at the reference field ``x_ref``."""
    _, s_i = intensity_max_slope(surface, delta_p)
    s_s = splitting_max_slope(surface, x_ref)
    return float(np.sqrt(2.0) * kappa * abs(s_i) / s_s)


def ratio_r(surface: ResponseSurface, x: float, kappa: float = 1.0, delta_p: float = 0.0) -> float:
    """2 kappa |F_I'(x)| / max_f |F_S'(x, f)|; inf when the splitting slope vanishes."""
    fi = intensity_marginal(surface, delta_p)
    s_s = splitting_max_slope(surface, x)
    if s_s <= SLOPE_FLOOR:
        return np.inf
    return float(2.0 * kappa * abs(fi.derivative(x)) / s_s)


def max_slope_frequencies(surface: ResponseSurface, x: float):
    """Lineshapes at field x and the per-side max-slope probe frequencies."""
    fs = frequency_marginal(surface, x)
    left, right = split_lineshapes(fs)
    lo, hi = fs.domain
    fl, _, _ = max_slope_point(fs, (lo, -1e-9))
    fr, _, _ = max_slope_point(fs, (1e-9, hi))
    return left, right, fl, fr


def normalization_reference(curve, n: int, sigma0: float) -> float:
    """sigma0^2 / (N max|F_I'|^2), the scale both bounds and MSEs are divided by."""
    s = _max_abs_slope(curve, curve.domain)
    return sigma0 ** 2 / (n * s ** 2)


def normalize_report(value, reference: float):
    """Divide a bound or MSE (a CrlbReport or a number) by the reference scale."""
    if isinstance(value, CrlbReport):
        value.normalized = value.value / reference
        return value.normalized
    return np.asarray(value, float) / reference
