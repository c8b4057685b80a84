"""Four-level ladder steady state, Doppler averaging and the joint response surface.

Internally every angular frequency is expressed in rad/us (rad/s divided by 1e6),
so that a Rabi frequency of 2*pi*1 MHz becomes 2*pi. Surface axes are reported in
MHz: ``x`` is Omega_RF/2pi and ``f`` is the probe detuning (f_p - f_p,o).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import Boltzmann
from scipy.interpolate import RectBivariateSpline

from .errors import GridTooCoarse, NonConvergedQuadrature, OutOfRange, SingularLiouvillian

TWO_PI = 2.0 * np.pi
MHZ = TWO_PI * 1e6  # rad/s per MHz of cyclic frequency
_SCALE = 1e-6  # rad/s -> rad/us
_I4 = np.eye(4)


@dataclass(frozen=True)
class AtomicSystem:
    """Physical parameters of the ladder |1> -> |2> -> |3> -> |4>.

    Angular frequencies are in rad/s, dipoles in C*m, wavelengths in m.
    """

    omega_p: float
    omega_c: float
    omega_rf: float = 0.0
    delta_p: float = 0.0
    delta_c: float = 0.0
    delta_rf: float = 0.0
    gamma2: float = MHZ * 6.07
    gamma3: float = MHZ * 0.01
    gamma4: float = MHZ * 0.01
    mu_p: float = 3.584e-29
    mu_c: float = 1.0e-31
    mu_rf: float = 1.23e-26
    lambda_p: float = 780.24e-9
    lambda_c: float = 480e-9
    temperature: float = 303.15
    atom_mass: float = 1.4192e-25
    f_p_resonance: float = 384.230e12
    doppler_enabled: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("omega_p", "omega_c", "omega_rf", "gamma2", "gamma3", "gamma4"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        for name in ("temperature", "atom_mass", "lambda_p", "lambda_c"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")
        for name in ("delta_p", "delta_c", "delta_rf", "mu_p", "mu_c", "mu_rf"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        u = self.doppler_width
        if not (np.isfinite(u) and u > 0):
            raise ValueError("Doppler width must be finite and positive")

    @property
    def doppler_width(self) -> float:
        """Most-probable-speed scale u = sqrt(k_B T / m) in m/s."""
        return float(np.sqrt(Boltzmann * self.temperature / self.atom_mass))

    @property
    def k_p(self) -> float:
        return TWO_PI / self.lambda_p

    @property
    def k_c(self) -> float:
        return TWO_PI / self.lambda_c

    def replace(self, **changes) -> "AtomicSystem":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def preset(name: str = "rb85_effective") -> AtomicSystem:
    """Named parameter sets.

    ``rb85_nominal`` carries the nominal Rb-85 constants with Omega_p = 2pi*2 MHz and
    Omega_c = 2pi*4 MHz. ``rb85_effective`` is the Doppler-free working point used by
    the experiment harness. Its broad optical linewidth stands in for the flat
    thermal absorption background, and a broadened top level plus a strong probe
    give ATS peaks that are resolvable and estimable at desk-scale noise levels.
    """
    if name == "rb85_nominal":
        return AtomicSystem(omega_p=MHZ * 2.0, omega_c=MHZ * 4.0, doppler_enabled=False)
    if name == "rb85_effective":
        return AtomicSystem(omega_p=MHZ * 8.0, omega_c=MHZ * 6.0, gamma2=MHZ * 40.0, gamma4=MHZ * 2.0,
                            doppler_enabled=False)
    raise KeyError(f"unknown preset {name!r}")


PRESETS = ("rb85_nominal", "rb85_effective")


@dataclass
class DensityMatrix:
    """Steady-state ensemble density matrix plus solver diagnostics."""

    rho: np.ndarray
    residual: float = 0.0

    @property
    def rho21(self) -> complex:
        return complex(self.rho[1, 0])

    def check(self, tol: float = 1e-10, psd_tol: float = 1e-9) -> None:
        """Raise AssertionError if hermiticity, trace or positivity fail."""
        r = self.rho
        if np.max(np.abs(r - r.conj().T)) > tol:
            raise AssertionError("density matrix not Hermitian")
        if abs(np.trace(r) - 1.0) > tol:
            raise AssertionError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -psd_tol:
            raise AssertionError("density matrix not positive semi-definite")


def hamiltonian_batch(op, oc, orf, dp, dc, drf) -> np.ndarray:
    """Rotating-wave Hamiltonian divided by hbar, broadcast over detuning arrays."""
    dp, dc, drf = np.broadcast_arrays(np.asarray(dp, float), np.asarray(dc, float), np.asarray(drf, float))
    orf = np.broadcast_to(np.asarray(orf, float), dp.shape)
    H = np.zeros(dp.shape + (4, 4), complex)
    H[..., 0, 1] = H[..., 1, 0] = op / 2
    H[..., 1, 2] = H[..., 2, 1] = oc / 2
    H[..., 2, 3] = H[..., 3, 2] = orf / 2
    H[..., 1, 1] = -dp
    H[..., 2, 2] = -(dp + dc)
    H[..., 3, 3] = -(dp + dc + drf)
    return H


def hamiltonian(system: AtomicSystem) -> np.ndarray:
    """4x4 Hamiltonian/hbar in rad/us."""
    s = _SCALE
    return hamiltonian_batch(system.omega_p * s, system.omega_c * s, system.omega_rf * s,
                             system.delta_p * s, system.delta_c * s, system.delta_rf * s)


def dissipator(g2: float, g3: float, g4: float) -> np.ndarray:
    """Row-major vectorised Lindblad dissipator for the three cascade decays."""
    D = np.zeros((16, 16), complex)
    for lo, hi, rate in ((0, 1, g2), (1, 2, g3), (2, 3, g4)):
        s = np.zeros((4, 4))
        s[lo, hi] = 1.0
        n = s.T @ s
        D += rate * (np.kron(s, s) - 0.5 * np.kron(n, _I4) - 0.5 * np.kron(_I4, n.T))
    return D


def _liouvillian_batch(H: np.ndarray, D: np.ndarray) -> np.ndarray:
    # vec(A rho B) = (A kron B^T) vec(rho) for row-major vec
    shape = H.shape[:-2]
    left = np.einsum("...ij,kl->...ikjl", H, _I4).reshape(shape + (16, 16))
    right = np.einsum("ij,...lk->...ikjl", _I4, H).reshape(shape + (16, 16))
    return -1j * (left - right) + D


def _gammas(system: AtomicSystem) -> tuple:
    return (system.gamma2 * _SCALE, system.gamma3 * _SCALE, system.gamma4 * _SCALE)


def liouvillian(system: AtomicSystem) -> np.ndarray:
    """16x16 Liouvillian superoperator (rad/us) for a single configuration."""
    return _liouvillian_batch(hamiltonian(system), dissipator(*_gammas(system)))


def _solve_constrained(L: np.ndarray) -> np.ndarray:
    A = L.copy()
    A[..., 0, :] = _I4.reshape(-1)
    b = np.zeros(A.shape[:-1], complex)
    b[..., 0] = 1.0
    x = np.linalg.solve(A, b[..., None])[..., 0]
    return x.reshape(A.shape[:-2] + (4, 4))


def steady_state(system: AtomicSystem) -> DensityMatrix:
    """Steady state of the Lindblad equation via the trace-constrained linear system.

    Raises:
        SingularLiouvillian: if the constrained system is rank deficient.
    """
    if system.gamma2 == 0 and system.gamma3 == 0 and system.gamma4 == 0:
        raise SingularLiouvillian("all decay rates are zero; steady state is not unique")
    L = liouvillian(system)
    A = L.copy()
    A[0, :] = _I4.reshape(-1)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SingularLiouvillian(f"constrained Liouvillian rank deficient (sigma_min/sigma_max={sv[-1] / sv[0]:.3e})")
    rho = _solve_constrained(L)
    rho = 0.5 * (rho + rho.conj().T)
    res = float(np.linalg.norm(L @ rho.reshape(-1)))
    return DensityMatrix(rho=rho, residual=res)


def rho21_grid(system: AtomicSystem, delta_p_mhz, omega_rf_mhz=None, delta_c_mhz=None) -> np.ndarray:
    """Doppler-free rho_21 on broadcast arrays of detunings (MHz) and RF Rabi (MHz).

    Args:
        delta_p_mhz: probe detuning Delta_p/2pi in MHz.
        omega_rf_mhz: Omega_RF/2pi in MHz; defaults to the system value.
        delta_c_mhz: coupling detuning in MHz; defaults to the system value.
    """
    s = _SCALE
    orf = system.omega_rf * s if omega_rf_mhz is None else TWO_PI * np.asarray(omega_rf_mhz, float)
    dc = system.delta_c * s if delta_c_mhz is None else TWO_PI * np.asarray(delta_c_mhz, float)
    dp = TWO_PI * np.asarray(delta_p_mhz, float)
    dp, dc, orf = np.broadcast_arrays(dp, dc, orf)
    H = hamiltonian_batch(system.omega_p * s, system.omega_c * s, orf, dp, dc, system.delta_rf * s)
    L = _liouvillian_batch(H, dissipator(*_gammas(system)))
    return _solve_constrained(L)[..., 1, 0]


def _velocity_coherence(system: AtomicSystem, v: np.ndarray) -> np.ndarray:
    s = _SCALE
    dp = system.delta_p * s - system.k_p * v * s
    dc = system.delta_c * s + system.k_c * v * s
    H = hamiltonian_batch(system.omega_p * s, system.omega_c * s, system.omega_rf * s, dp, dc, system.delta_rf * s)
    L = _liouvillian_batch(H, dissipator(*_gammas(system)))
    return _solve_constrained(L)[..., 1, 0]


def _trapezoid_average(system: AtomicSystem, n: int, chunk: int = 8192) -> complex:
    u = system.doppler_width
    v = np.linspace(-3 * u, 3 * u, n)
    vals = np.concatenate([_velocity_coherence(system, v[i:i + chunk]) for i in range(0, n, chunk)])
    w = np.exp(-(v / u) ** 2)
    # normalise by the truncated weight so a constant integrand is reproduced exactly
    return complex(np.trapezoid(vals * w, v) / np.trapezoid(w, v))


def doppler_average(system: AtomicSystem, velocity_points: int = 129, tol: float = 1e-6,
                    max_points: int = 2 ** 17 + 1) -> complex:
    """Velocity-averaged coherence rho_21 over v in [-3u, 3u].

    The Maxwell-Boltzmann weight is renormalised over the truncated interval. The
    composite trapezoid rule starts from ``velocity_points`` nodes and keeps
    halving the step until the relative change drops below ``tol``.

    Raises:
        NonConvergedQuadrature: if ``max_points`` is reached first.
    """
    if velocity_points < 16:
        raise ValueError("velocity_points must be >= 16")
    if not system.doppler_enabled:
        raise ValueError("doppler_enabled is false for this system")
    n = int(velocity_points)
    prev = _trapezoid_average(system, n)
    while True:
        n2 = 2 * n - 1
        if n2 > max_points:
            raise NonConvergedQuadrature(f"no convergence up to {n} nodes (tol={tol})")
        cur = _trapezoid_average(system, n2)
        if abs(cur - prev) <= tol * max(abs(cur), 1e-300):
            return cur
        n, prev = n2, cur


def transmittance(rho21_im, system: AtomicSystem | None = None):
    """Cell transmittance exp(C Im rho_21) with the prefactor C fixed to 1."""
    return np.exp(np.asarray(rho21_im, float))


def default_x_grid() -> np.ndarray:
    return np.round(np.arange(0, 251) * 0.1, 10)


def default_f_grid() -> np.ndarray:
    return np.round(np.arange(-600, 601) * 0.05, 10)


@dataclass
class ResponseSurface:
    """Normalized joint response G[x, f] on a rectangular grid.

    ``x_grid`` is Omega_RF/2pi (MHz) and ``f_grid`` the probe detuning (MHz).
    Values are exact at nodes; off-node evaluation and partial derivatives use a
    bicubic interpolating spline.
    """

    x_grid: np.ndarray
    f_grid: np.ndarray
    values: np.ndarray
    reference: float = 1.0
    order: int = 3
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x_grid = np.asarray(self.x_grid, float)
        self.f_grid = np.asarray(self.f_grid, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.x_grid.size, self.f_grid.size):
            raise ValueError("values shape does not match grids")
        for g in (self.x_grid, self.f_grid):
            if g.size < 4 or np.any(np.diff(g) <= 0):
                raise ValueError("grids must be strictly increasing with at least 4 nodes")
        self._spline = RectBivariateSpline(self.x_grid, self.f_grid, self.values, kx=self.order, ky=self.order, s=0)

    def _check(self, x, f):
        x = np.asarray(x, float)
        f = np.asarray(f, float)
        tol = 1e-9
        if np.any(x < self.x_grid[0] - tol) or np.any(x > self.x_grid[-1] + tol):
            raise OutOfRange("x outside surface grid")
        if np.any(f < self.f_grid[0] - tol) or np.any(f > self.f_grid[-1] + tol):
            raise OutOfRange("f outside surface grid")
        return np.broadcast_arrays(x, f)

    def __call__(self, x, f, dx: int = 0, df: int = 0):
        """Evaluate G or its partial derivatives at (x, f)."""
        x, f = self._check(x, f)
        xr, fr = x.ravel(), f.ravel()
        out = self._spline.ev(xr, fr, dx=dx, dy=df)
        if dx == 0 and df == 0:
            # nodes return the tabulated value exactly
            i = np.clip(np.searchsorted(self.x_grid, xr), 0, self.x_grid.size - 1)
            j = np.clip(np.searchsorted(self.f_grid, fr), 0, self.f_grid.size - 1)
            hit = (self.x_grid[i] == xr) & (self.f_grid[j] == fr)
            out[hit] = self.values[i[hit], j[hit]]
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)

    def d_dx(self, x, f):
        return self(x, f, dx=1)

    def d_df(self, x, f):
        return self(x, f, df=1)

    def x_index(self, x: float) -> int | None:
        i = int(np.argmin(np.abs(self.x_grid - x)))
        return i if abs(self.x_grid[i] - x) < 1e-9 else None

    def f_index(self, f: float) -> int | None:
        j = int(np.argmin(np.abs(self.f_grid - f)))
        return j if abs(self.f_grid[j] - f) < 1e-9 else None

    def richardson_error(self) -> float:
        """Interpolation error estimate relative to the surface range.

        Fits the spline on every other node and compares against the dropped nodes;
        for a cubic rule the full-grid error is about 1/15 of that discrepancy.
        """
        xs, fs, V = self.x_grid, self.f_grid, self.values
        errs = []
        if xs.size >= 9:
            sp = RectBivariateSpline(xs[::2], fs, V[::2], kx=3, ky=3, s=0)
            errs.append(np.max(np.abs(sp(xs[1:-1:2], fs) - V[1:-1:2])))
        if fs.size >= 9:
            sp = RectBivariateSpline(xs, fs[::2], V[:, ::2], kx=3, ky=3, s=0)
            errs.append(np.max(np.abs(sp(xs, fs[1:-1:2]) - V[:, 1:-1:2])))
        rng = float(V.max() - V.min()) or 1.0
        return float(max(errs, default=0.0) / 15.0 / rng)

    def to_csv(self, out_dir) -> Path:
        """Write ``surface.csv`` (x,f_p,G) and ``surface.meta.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        X, F = np.meshgrid(self.x_grid, self.f_grid, indexing="ij")
        with open(out / "surface.csv", "w") as fh:
            fh.write("x,f_p,G\n")
            for a, b, c in zip(X.ravel(), F.ravel(), self.values.ravel()):
                fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
        meta = dict(self.meta)
        meta.update(
            x_grid=dict(start=float(self.x_grid[0]), stop=float(self.x_grid[-1]), n=int(self.x_grid.size)),
            f_grid=dict(start=float(self.f_grid[0]), stop=float(self.f_grid[-1]), n=int(self.f_grid.size)),
            x_units="Omega_RF/2pi [MHz]", f_units="probe detuning [MHz]",
            reference_transmittance=self.reference, reference_point=[0.0, 0.0], order=self.order,
        )
        (out / "surface.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return out / "surface.csv"

    @classmethod
    def from_csv(cls, out_dir) -> "ResponseSurface":
        out = Path(out_dir)
        data = np.loadtxt(out / "surface.csv", delimiter=",", skiprows=1, ndmin=2)
        meta = json.loads((out / "surface.meta.json").read_text())
        xs = np.unique(data[:, 0])
        fs = np.unique(data[:, 1])
        vals = data[:, 2].reshape(xs.size, fs.size)
        extra = {k: v for k, v in meta.items() if k not in ("x_grid", "f_grid", "reference_transmittance", "order",
                                                             "x_units", "f_units", "reference_point")}
        return cls(xs, fs, vals, reference=meta["reference_transmittance"], order=meta["order"], meta=extra)


def build_surface(system: AtomicSystem, x_grid=None, f_grid=None, check_grid: bool = True,
                  velocity_points: int = 129) -> ResponseSurface:
    """Tabulate G[x, f] = T(x, f) / T(0, 0).

    Args:
        system: atomic parameters; ``omega_rf`` and ``delta_p`` are overridden by the grid.
        x_grid: Omega_RF/2pi values in MHz (strictly increasing).
        f_grid: probe detunings in MHz, symmetric about 0.
        check_grid: run the Richardson interpolation check.
        velocity_points: fixed trapezoid node count when Doppler averaging is on.

    Raises:
        GridTooCoarse: if the interpolation error estimate exceeds 1e-4 of the range.
    """
    xs = default_x_grid() if x_grid is None else np.asarray(x_grid, float)
    fs = default_f_grid() if f_grid is None else np.asarray(f_grid, float)
    if xs.size == 0 or fs.size == 0:
        raise ValueError("grids must be non-empty")
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(fs) <= 0):
        raise ValueError("grids must be strictly increasing")
    if abs(fs[0] + fs[-1]) > 1e-9 * max(1.0, abs(fs[0])):
        raise ValueError("f_grid must span the probe resonance symmetrically")
    if system.gamma2 == 0 and system.gamma3 == 0 and system.gamma4 == 0:
        raise SingularLiouvillian("all decay rates are zero")

    if system.doppler_enabled:
        u = system.doppler_width
        v = np.linspace(-3 * u, 3 * u, velocity_points)
        w = np.exp(-(v / u) ** 2)
        norm = np.trapezoid(w, v)

        def coherence(x_row, f_vals):
            out = np.empty(f_vals.size, complex)
            for j, f in enumerate(f_vals):
                sysv = system.replace(omega_rf=MHZ * x_row, delta_p=MHZ * f)
                out[j] = np.trapezoid(_velocity_coherence(sysv, v) * w, v) / norm
            return out
    else:
        def coherence(x_row, f_vals):
            return rho21_grid(system, f_vals, omega_rf_mhz=x_row)

    im = np.empty((xs.size, fs.size))
    for i, x in enumerate(xs):
        im[i] = coherence(x, fs).imag
    T = transmittance(im)
    i0 = int(np.argmin(np.abs(xs)))
    j0 = int(np.argmin(np.abs(fs)))
    if abs(xs[i0]) < 1e-12 and abs(fs[j0]) < 1e-12:
        ref = float(T[i0, j0])
    else:
        ref = float(transmittance(coherence(0.0, np.array([0.0])).imag)[0])
    vals = T / ref
    if abs(xs[i0]) < 1e-12 and abs(fs[j0]) < 1e-12:
        vals[i0, j0] = 1.0
    meta = {"system": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                       for k, v in system.to_dict().items()}}
    surf = ResponseSurface(xs, fs, vals, reference=ref, meta=meta)
    if check_grid:
        err = surf.richardson_error()
        surf.meta["richardson_error"] = err
        if err > 1e-4:
            raise GridTooCoarse(f"interpolation error estimate {err:.2e} exceeds 1e-4 of range")
    return surf
