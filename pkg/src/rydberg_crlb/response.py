"""Marginal response curves, peak lineshapes, inversion and the splitting constant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from .errors import NonMonotoneBranch, OutOfRange, UnresolvedSplitting, ValueOutOfRange
from .quantum_model import TWO_PI, AtomicSystem, ResponseSurface

FIELD = "field-strength"
FREQUENCY = "probe-frequency"
PEAK_PROMINENCE = 0.02  # fraction of curve range


class MarginalCurve:
    """Cubic-spline curve through ordered (input, response) samples.

    Args:
        inputs: strictly increasing abscissae (MHz).
        responses: sampled values.
        axis: ``field-strength`` or ``probe-frequency``.
        fixed_value: the coordinate held fixed when slicing a surface.
        even_origin: the response is even about input 0 (first sample), so the
            spline is clamped to zero slope there.
    """

    def __init__(self, inputs, responses, axis: str = FIELD, fixed_value: float = 0.0, even_origin: bool = False):
        self.inputs = np.asarray(inputs, float)
        self.responses = np.asarray(responses, float)
        if self.inputs.ndim != 1 or self.inputs.shape != self.responses.shape:
            raise ValueError("inputs and responses must be 1-D and equal length")
        if self.inputs.size < 4 or np.any(np.diff(self.inputs) <= 0):
            raise ValueError("inputs must be strictly increasing with at least 4 samples")
        self.axis = axis
        self.fixed_value = float(fixed_value)
        if even_origin and self.inputs[0] != 0.0:
            raise ValueError("even_origin needs the first sample at input 0")
        bc = ((1, 0.0), "not-a-knot") if even_origin else "not-a-knot"
        self._spline = CubicSpline(self.inputs, self.responses, bc_type=bc)
        self._d1 = self._spline.derivative(1)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.inputs[0]), float(self.inputs[-1])

    @property
    def value_range(self) -> float:
        return float(self.responses.max() - self.responses.min())

    def _check(self, u):
        u = np.asarray(u, float)
        lo, hi = self.domain
        if np.any(u < lo - 1e-9) or np.any(u > hi + 1e-9):
            raise OutOfRange(f"input outside curve domain [{lo}, {hi}]")
        return u

    def __call__(self, u):
        u = self._check(u)
        out = self._spline(u)
        # sample inputs reproduce the stored samples exactly
        idx = np.clip(np.searchsorted(self.inputs, u), 0, self.inputs.size - 1)
        hit = self.inputs[idx] == u
        out = np.where(hit, self.responses[idx], out)
        return out if out.ndim else float(out)

    def derivative(self, u, order: int = 1):
        u = self._check(u)
        out = self._d1(u) if order == 1 else self._spline(u, order)
        return out if np.ndim(out) else float(out)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("input,response\n")
            for a, b in zip(self.inputs, self.responses):
                fh.write(f"{float(a)!r},{float(b)!r}\n")

    @classmethod
    def from_csv(cls, path, axis: str = FIELD, fixed_value: float = 0.0, even_origin: bool = False) -> "MarginalCurve":
        d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(d[:, 0], d[:, 1], axis=axis, fixed_value=fixed_value, even_origin=even_origin)


def intensity_marginal(surface: ResponseSurface, delta_p: float = 0.0) -> MarginalCurve:
    """F_I[x] = G[x, delta_p] over the surface x grid."""
    lo, hi = surface.f_grid[0], surface.f_grid[-1]
    if not lo - 1e-9 <= delta_p <= hi + 1e-9:
        raise OutOfRange(f"delta_p={delta_p} outside [{lo}, {hi}]")
    j = surface.f_index(delta_p)
    vals = surface.values[:, j] if j is not None else surface(surface.x_grid, np.full(surface.x_grid.size, delta_p))
    # G depends on Omega_RF only through its magnitude, so dF_I/dx vanishes at x = 0
    return MarginalCurve(surface.x_grid, vals, axis=FIELD, fixed_value=delta_p,
                         even_origin=bool(surface.x_grid[0] == 0.0))


def frequency_marginal(surface: ResponseSurface, x: float) -> MarginalCurve:
    """F_S[f] = G[x, f] over the surface detuning grid."""
    lo, hi = surface.x_grid[0], surface.x_grid[-1]
    if not lo - 1e-9 <= x <= hi + 1e-9:
        raise OutOfRange(f"x={x} outside [{lo}, {hi}]")
    i = surface.x_index(x)
    vals = surface.values[i] if i is not None else surface(np.full(surface.f_grid.size, x), surface.f_grid)
    return MarginalCurve(surface.f_grid, vals, axis=FREQUENCY, fixed_value=x)


def find_curve_peaks(curve: MarginalCurve, prominence: float = PEAK_PROMINENCE) -> np.ndarray:
    """Refined maxima locations with prominence >= ``prominence`` x curve range."""
    y = curve.responses
    rng = curve.value_range
    if rng <= 0:
        return np.array([])
    idx, _ = find_peaks(y, prominence=prominence * rng)
    locs = []
    u = curve.inputs
    for i in idx:
        a, b = u[max(i - 1, 0)], u[min(i + 1, u.size - 1)]
        r = minimize_scalar(lambda t: -curve._spline(t), bounds=(a, b), method="bounded",
                            options={"xatol": 1e-10})
        locs.append(float(r.x))
    return np.array(locs)


@dataclass
class PeakLineshape:
    """Intrinsic lineshape of one ATS peak, centred so its maximum is at argument 0.

    ``kind`` is ``tabulated`` (a shifted piece of F_S) or ``gaussian-like``
    (v1 * exp(-v2 u^2) + v3). For tabulated shapes the valid argument window stays
    on one side of the probe resonance; outside it the shape is held constant.
    """

    side: str
    kind: str = "tabulated"
    params: np.ndarray | None = None
    curve: MarginalCurve | None = None
    center: float = 0.0
    window: tuple[float, float] = (-np.inf, np.inf)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self.kind == "gaussian-like":
            self.params = np.asarray(self.params, float)
            if self.params.shape != (3,) or not self.params[1] > 0:
                raise ValueError("gaussian-like lineshape needs v=(v1, v2>0, v3)")
        elif self.kind == "tabulated":
            if self.curve is None:
                raise ValueError("tabulated lineshape needs a curve")
        else:
            raise ValueError(f"unknown lineshape kind {self.kind!r}")

    @classmethod
    def gaussian(cls, v, side: str = "right") -> "PeakLineshape":
        return cls(side=side, kind="gaussian-like", params=np.asarray(v, float))

    def _clip(self, u):
        lo, hi = self.window
        lo = max(lo, self.curve.domain[0] - self.center)
        hi = min(hi, self.curve.domain[1] - self.center)
        uc = np.clip(u, lo, hi)
        return uc, (u >= lo) & (u <= hi)

    def __call__(self, u):
        u = np.asarray(u, float)
        if self.kind == "gaussian-like":
            v1, v2, v3 = self.params
            out = v1 * np.exp(-v2 * u ** 2) + v3
        else:
            uc, _ = self._clip(u)
            out = self.curve._spline(uc + self.center)
        return out if np.ndim(out) else float(out)

    def derivative(self, u):
        u = np.asarray(u, float)
        if self.kind == "gaussian-like":
            v1, v2, _ = self.params
            out = -2.0 * v1 * v2 * u * np.exp(-v2 * u ** 2)
        else:
            uc, inside = self._clip(u)
            out = np.where(inside, self.curve._d1(uc + self.center), 0.0)
        return out if np.ndim(out) else float(out)

    def argument_domain(self) -> tuple[float, float]:
        if self.kind == "gaussian-like":
            return (-np.inf, np.inf)
        lo, hi = self.window
        return (max(lo, self.curve.domain[0] - self.center), min(hi, self.curve.domain[1] - self.center))

    def to_text(self) -> str:
        lines = [f"side={self.side}", f"kind={self.kind}", f"center={float(self.center)!r}"]
        if self.params is not None:
            lines += [f"v{i + 1}={float(p)!r}" for i, p in enumerate(self.params)]
        return "\n".join(lines) + "\n"


def split_lineshapes(curve: MarginalCurve, f_resonance: float = 0.0) -> tuple[PeakLineshape, PeakLineshape]:
    """Split F_S into left/right peak lineshapes about the probe resonance.

    Raises:
        UnresolvedSplitting: if there is no resolved maximum on each side with a
            local minimum between them.
    """
    peaks = find_curve_peaks(curve)
    right = peaks[peaks > f_resonance]
    left = peaks[peaks < f_resonance]
    if right.size == 0 or left.size == 0:
        raise UnresolvedSplitting(f"peaks at {peaks.tolist()} do not straddle f={f_resonance}")
    f_r = float(right.min())
    f_l = float(left.max())
    between = (curve.inputs > f_l) & (curve.inputs < f_r)
    if not np.any(between) or curve.responses[between].min() >= min(curve(f_l), curve(f_r)):
        raise UnresolvedSplitting("no local minimum between the two maxima")
    lo, hi = curve.domain
    r = PeakLineshape(side="right", curve=curve, center=f_r, window=(f_resonance - f_r, hi - f_r))
    l = PeakLineshape(side="left", curve=curve, center=f_l, window=(lo - f_l, f_resonance - f_l))
    return l, r


def _certify_monotone(curve: MarginalCurve, a: float, b: float, n: int = 32) -> int:
    s = np.sign(curve.derivative(np.linspace(a, b, n)))
    nz = s[s != 0]
    if nz.size == 0 or np.any(nz != nz[0]):
        raise NonMonotoneBranch(f"derivative changes sign on [{a}, {b}]")
    return int(nz[0])


def invert_intensity(curve: MarginalCurve, y, branch_hint: tuple[float, float]):
    """Solve curve(x) = y on a monotone branch by bisection.

    Works element-wise on array ``y``.

    Raises:
        NonMonotoneBranch: if the slope changes sign on ``branch_hint``.
        ValueOutOfRange: if any target lies outside the branch range.
    """
    a, b = map(float, branch_hint)
    lo, hi = curve.domain
    if a < lo - 1e-12 or b > hi + 1e-12 or not a < b:
        raise OutOfRange("branch_hint outside curve domain")
    sgn = _certify_monotone(curve, a, b)
    ya, yb = curve(a), curve(b)
    y = np.asarray(y, float)
    ymin, ymax = min(ya, yb), max(ya, yb)
    bad = (y < ymin) | (y > ymax) | ~np.isfinite(y)
    if np.any(bad):
        raise ValueOutOfRange(f"{int(np.sum(bad))} target(s) outside branch range [{ymin}, {ymax}]")
    left = np.full(y.shape, a)
    right = np.full(y.shape, b)
    for _ in range(64):
        mid = 0.5 * (left + right)
        above = (curve._spline(mid) - y) * sgn > 0
        right = np.where(above, mid, right)
        left = np.where(above, left, mid)
    x = 0.5 * (left + right)
    # exact node hits
    x = np.where(y == ya, a, np.where(y == yb, b, x))
    return x if x.ndim else float(x)


def max_slope_point(curve, interval: tuple[float, float], scan_factor: int = 10) -> tuple[float, float, bool]:
    """Location of maximal |slope| on ``interval``.

    Dense scan at ``scan_factor`` times the sample resolution, then golden-section
    refinement of |derivative|.

    Returns:
        (location, signed slope, flat) where ``flat`` marks a constant curve.
    """
    a, b = map(float, interval)
    step = np.min(np.diff(curve.inputs)) if hasattr(curve, "inputs") else (b - a) / 1000
    n = max(int(np.ceil((b - a) / step * scan_factor)) + 1, 11)
    u = np.linspace(a, b, n)
    d = np.abs(np.asarray(curve.derivative(u)))
    i = int(np.argmax(d))
    if d[i] <= 1e-15:
        return float(u[n // 2]), 0.0, True
    if 0 < i < n - 1 and d[i] > d[i - 1] and d[i] > d[i + 1]:
        tol = 1e-4 * step
        r = minimize_scalar(lambda t: -abs(curve.derivative(t)), bracket=(u[i - 1], u[i], u[i + 1]),
                            method="golden", options={"xtol": tol / max(abs(u[i]), 1.0)})
        loc = float(np.clip(r.x, u[i - 1], u[i + 1]))
        if abs(curve.derivative(loc)) < d[i]:
            loc = float(u[i])
    else:
        loc = float(u[i])
    return loc, float(curve.derivative(loc)), False


def kappa(system: AtomicSystem) -> float:
    """Splitting-to-field constant 2 pi lambda_p hbar / (lambda_c mu_RF) in V/m per Hz."""
    if not system.mu_rf > 0:
        raise ValueError("mu_rf must be positive")
    return TWO_PI * system.lambda_p * hbar / (system.lambda_c * system.mu_rf)



def splitting_per_rabi(system: AtomicSystem) -> float:
    """Observed probe-detuning splitting per unit Omega_RF/2pi.

    Thermal vapour rescales the splitting by lambda_c/lambda_p; without Doppler
    averaging the splitting equals Omega_RF/2pi.
    """
    return system.lambda_c / system.lambda_p if system.doppler_enabled else 1.0


def kappa_rabi(system: AtomicSystem) -> float:
    """Splitting-to-field constant with the field expressed as Omega_RF/2pi."""
    return 1.0 / splitting_per_rabi(system)


def rabi_to_field(omega_rf: float, system: AtomicSystem) -> float:
    """|E_RF| = hbar Omega_RF / mu_RF (Omega in rad/s, result in V/m)."""
    return hbar * omega_rf / system.mu_rf


def field_to_rabi(e_field: float, system: AtomicSystem) -> float:
    return e_field * system.mu_rf / hbar
