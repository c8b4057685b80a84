"""Parametric peak families F(u; v) with u = f - f_R."""

from __future__ import annotations

import numpy as np


class GaussianFamily:
    """v1 * exp(-v2 u^2) + v3 (amplitude, inverse width squared, offset)."""

    name = "gaussian"
    n_params = 3
    labels = ("v1", "v2", "v3")

    def value(self, u, v):
        v = np.asarray(v, float)
        return v[..., 0:1] * np.exp(-v[..., 1:2] * u ** 2) + v[..., 2:3]

    def d_u(self, u, v):
        v = np.asarray(v, float)
        return -2.0 * v[..., 0:1] * v[..., 1:2] * u * np.exp(-v[..., 1:2] * u ** 2)

    def d_v(self, u, v):
        """Partial derivatives w.r.t. v; shape u.shape + (3,)."""
        v = np.asarray(v, float)
        e = np.exp(-v[..., 1:2] * u ** 2)
        return np.stack([e, -v[..., 0:1] * u ** 2 * e, np.ones_like(u * e)], axis=-1)

    def valid(self, v) -> np.ndarray:
        return np.asarray(v)[..., 1] > 0

    def initial(self, f, z, shift):
        """Data-driven start: amplitude and offset from the extremes, v2 from the half-maximum width."""
        f = np.atleast_2d(f)
        z = np.atleast_2d(z)
        zs = _smooth3(z)
        v1 = zs.max(axis=-1) - zs.min(axis=-1)
        v3 = zs.min(axis=-1)
        half = v3 + 0.5 * v1
        above = zs >= half[:, None]
        width = np.where(above.any(axis=-1),
                         np.where(above, f, -np.inf).max(axis=-1) - np.where(above, f, np.inf).min(axis=-1), 0.0)
        span = f.max(axis=-1) - f.min(axis=-1)
        width = np.where(width > 0, width, np.maximum(span / 2, 1e-3))
        # FWHM = 2 sqrt(ln 2 / v2)
        v2 = 4.0 * np.log(2.0) / np.maximum(width, 1e-6) ** 2
        v1 = np.where(v1 > 0, v1, 1e-3)
        return np.stack([v1, v2, v3], axis=-1)


class TemplateFamily:
    """Affine copy of a known lineshape T with unknown gain, offset and optionally width.

    F(u; v) = g * (T(w u) - T(0)) + c. The default free set is (gain, offset), an
    unknown detector gain and baseline; ``with_width`` adds the width scale w.
    The nominal parameters reproduce T exactly.
    """

    name = "template"

    def __init__(self, lineshape, with_width: bool = False):
        self.lineshape = lineshape
        self.t0 = float(lineshape(0.0))
        self.with_width = with_width
        self.labels = ("gain", "width", "offset") if with_width else ("gain", "offset")
        self.n_params = len(self.labels)

    @property
    def nominal(self) -> np.ndarray:
        return np.array([1.0, 1.0, self.t0]) if self.with_width else np.array([1.0, self.t0])

    def _split(self, v):
        v = np.asarray(v, float)
        if self.with_width:
            return v[..., 0:1], v[..., 1:2], v[..., 2:3]
        return v[..., 0:1], np.ones_like(v[..., 0:1]), v[..., 1:2]

    def value(self, u, v):
        g, w, c = self._split(v)
        return g * (self.lineshape(w * u) - self.t0) + c

    def d_u(self, u, v):
        g, w, _ = self._split(v)
        return g * w * self.lineshape.derivative(w * u)

    def d_v(self, u, v):
        g, w, c = self._split(v)
        s = w * u
        cols = [self.lineshape(s) - self.t0]
        if self.with_width:
            cols.append(g * u * self.lineshape.derivative(s))
        cols.append(np.ones_like(u * s))
        return np.stack(cols, axis=-1)

    def valid(self, v) -> np.ndarray:
        g, w, _ = self._split(v)
        return ((w > 0.2) & (w < 5.0))[..., 0] & np.isfinite(g[..., 0])

    def initial(self, f, z, shift):
        n = np.atleast_2d(z).shape[0]
        return np.tile(self.nominal, (n, 1))


def _smooth3(z: np.ndarray) -> np.ndarray:
    """3-point moving average with edge samples averaged over their two neighbours."""
    z = np.atleast_2d(z)
    if z.shape[-1] < 3:
        return z.copy()
    out = np.empty_like(z)
    out[:, 1:-1] = (z[:, :-2] + z[:, 1:-1] + z[:, 2:]) / 3.0
    out[:, 0] = 0.5 * (z[:, 0] + z[:, 1])
    out[:, -1] = 0.5 * (z[:, -1] + z[:, -2])
    return out


def make_family(name: str, lineshape=None):
    if name == "gaussian":
        return GaussianFamily()
    if name in ("template", "template-width"):
        if lineshape is None:
            raise ValueError("template family needs a lineshape")
        return TemplateFamily(lineshape, with_width=name == "template-width")
    raise ValueError(f"unknown family {name!r}")
