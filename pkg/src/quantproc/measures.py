"""Distorted probability measures induced by quantile processes.

The pushforward law of Z_t = Q(F(t, Y_t)) has distribution function
F_Z(t, z) = F_Y(t, Q_dist(t, F_quantile(z))); its density against the
driver's law is a four-density ratio evaluated at the driver's own state.
Chaining conditional density ratios with money-market discounting yields a
pricing-kernel process whose discounted value is a martingale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import drivers as drv
from . import transforms as tr
from ._util import TimeParam, adaptive_quad, as_time_fn
from .errors import CapabilityError, NumericError, ParameterError

__all__ = [
    "DistortedLaw",
    "distorted_cdf",
    "distorted_pdf",
    "rn_derivative",
    "conditional_rn",
    "PricingKernelPath",
    "pricing_kernel",
    "money_market",
]

_U_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class DistortedLaw:
    """The marginal law of the quantile process built from (map, base driver)."""

    map: tr.CompositeMap
    base: drv.Driver
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def dist(self) -> tr.DistributionSpec:
        if "dist" not in self._cache:
            self._cache["dist"] = self.map.dist_for(self.base)
        return self._cache["dist"]

    def support(self, t: float) -> tuple[float, float]:
        return self.map.quantile.support(t)


def distorted_cdf(law: DistortedLaw, t: float, z):
    """F_Z(t, z): probability the quantile process sits at or below z.

    Events below the quantile family's range get probability 0, above it 1.
    """
    if t <= 0:
        raise ParameterError("distorted laws are defined for t > 0")
    zv = np.asarray(z, dtype=float)
    u = np.asarray(law.map.quantile.cdf(t, zv), dtype=float)
    dist = law.dist()
    inner = u > 0.0
    out = np.zeros_like(u)
    out[u >= 1.0] = 1.0
    mid = inner & (u < 1.0)
    if np.any(mid):
        y = dist.quantile(t, u[mid])
        out[mid] = law.base.marginal_cdf(t, y)
    return out if np.ndim(z) else float(out)


def distorted_pdf(law: DistortedLaw, t: float, z):
    """Density of the quantile process at z (zero off the family's range)."""
    if t <= 0:
        raise ParameterError("distorted laws are defined for t > 0")
    zv = np.atleast_1d(np.asarray(z, dtype=float))
    q = law.map.quantile
    dist = law.dist()
    u = np.asarray(q.cdf(t, zv), dtype=float)
    fz = np.asarray(q.pdf(t, zv), dtype=float)
    out = np.zeros_like(u)
    ok = (u > 0.0) & (u < 1.0) & (fz > 0.0)
    if np.any(ok):
        y = dist.quantile(t, u[ok])
        denom = dist.pdf(t, y)
        out[ok] = law.base.marginal_pdf(t, y) * fz[ok] / denom
    return out if np.ndim(z) else float(out[0])


def _mapped_point(cmap: tr.CompositeMap, dist: tr.DistributionSpec, t: float,
                  y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """w = Q_dist(t, F_quantile(y)) with the in-range mask and quantile density."""
    u = np.asarray(cmap.quantile.cdf(t, y), dtype=float)
    fz = np.asarray(cmap.quantile.pdf(t, y), dtype=float)
    ok = (u > 0.0) & (u < 1.0) & (fz > 0.0)
    w = np.zeros_like(u)
    if np.any(ok):
        w[ok] = dist.quantile(t, u[ok])
    return w, ok, fz


def rn_derivative(cmap: tr.CompositeMap, base: drv.Driver, t: float, y):
    """Density of the distorted measure against the driver's law at state y.

    Evaluates f_Y(t, w) f_quantile(y) / (f_dist(t, w) f_Y(t, y)) with
    w = Q_dist(t, F_quantile(y)); returns 0 where y lies outside the quantile
    family's range (the distorted measure puts no mass there).
    """
    if t <= 0:
        raise ParameterError("the density ratio is defined for t > 0")
    if base.is_discrete:
        return _rn_derivative_discrete(cmap, base, t, y)
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    dist = cmap.dist_for(base)
    w, ok, fz = _mapped_point(cmap, dist, t, yv)
    out = np.zeros_like(yv)
    if np.any(ok):
        num = base.marginal_pdf(t, w[ok]) * fz[ok]
        den = dist.pdf(t, w[ok]) * base.marginal_pdf(t, yv[ok])
        if np.any(den <= 0):
            bad = yv[ok][den <= 0]
            raise NumericError(f"density-ratio denominator underflow at y={bad[:3]}")
        out[ok] = num / den
    return out if np.ndim(y) else float(out[0])


def _rn_derivative_discrete(cmap: tr.CompositeMap, base: drv.Driver, t: float, y):
    """Mass-function ratio for the Poisson-pivot composite.

    With a counting driver N and a discrete quantile family, the distorted
    measure sits on the integers and the density ratio becomes
    p_Z(k) / p_N(k): the mass the composite output puts at k over the mass
    the driver puts there.  Z = j exactly when the composite level F(N) falls
    inside (F_quantile(j-1), F_quantile(j)].
    """
    if not isinstance(base, drv.InhomogeneousPoisson):
        raise CapabilityError("discrete density ratios are supported for Poisson drivers")
    if not getattr(cmap.quantile, "is_discrete", False):
        raise CapabilityError(
            "discrete density ratios need a discrete quantile family (Poisson pivot)")
    dist = cmap.dist_for(base)
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    k = np.floor(yv).astype(int)

    def mass_z_at(j: np.ndarray) -> np.ndarray:
        # P(Z <= j) = P(F(N) <= F_quantile(j)) = P(N <= count_level(F_quantile(j)))
        def level(c: np.ndarray) -> np.ndarray:
            # largest count with dist CDF at or below c (-1 when none)
            ks = np.arange(0, 4 * int(base.cumulative_intensity(t)) + 200)
            cdfs = np.asarray(dist.cdf(t, ks.astype(float)), dtype=float)
            idx = np.searchsorted(cdfs, np.asarray(c) * (1 + 1e-12), side="right") - 1
            return idx

        hi = level(np.asarray(cmap.quantile.cdf(t, j.astype(float))))
        lo = level(np.asarray(cmap.quantile.cdf(t, j.astype(float) - 1.0)))
        cdf_hi = np.where(hi >= 0, base.marginal_cdf(t, hi.astype(float)), 0.0)
        cdf_lo = np.where(lo >= 0, base.marginal_cdf(t, lo.astype(float)), 0.0)
        return cdf_hi - cdf_lo

    mass_z = mass_z_at(k)
    mass_y = base.marginal_pmf(t, k)
    out = np.where(mass_y > 0, mass_z / np.where(mass_y > 0, mass_y, 1.0), 0.0)
    return out if np.ndim(y) else float(out[0])


def conditional_rn(cmap: tr.CompositeMap, base: drv.Driver, s: float, t: float,
                   state, y):
    """Conditional density ratio given the driver's state at time s < t.

    Same four-density ratio as the unconditional case with the driver's
    marginal density replaced by its Markov transition density from
    (s, state); s <= 0 recovers the unconditional ratio.
    """
    if t <= s:
        raise ParameterError("conditional ratio needs s < t")
    if s <= 0:
        return rn_derivative(cmap, base, t, y)
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    sv = np.broadcast_to(np.asarray(state, dtype=float), yv.shape)
    dist = cmap.dist_for(base)
    w, ok, fz = _mapped_point(cmap, dist, t, yv)
    out = np.zeros_like(yv)
    if np.any(ok):
        num = base.transition_pdf(s, t, sv[ok], w[ok]) * fz[ok]
        den = dist.pdf(t, w[ok]) * base.transition_pdf(s, t, sv[ok], yv[ok])
        if np.any(den <= 0):
            bad = yv[ok][den <= 0]
            raise NumericError(f"conditional density-ratio underflow at y={bad[:3]}")
        out[ok] = num / den
    return out if np.ndim(y) else float(out[0])


# ---------------------------------------------------------------------------
# money market and pricing kernel
# ---------------------------------------------------------------------------

def money_market(rate: TimeParam, t: float) -> float:
    """Accumulation factor B_t = exp(integral of the short rate to t)."""
    r = as_time_fn(rate)
    if t == 0.0:
        return 1.0
    return math.exp(adaptive_quad(r, 0.0, t, tol=1e-12, what="short-rate integral"))


@dataclass(frozen=True)
class PricingKernelPath:
    """Per-path state-price deflator chained from conditional density ratios.

    phi starts at 1 on the first grid time; discounted phi * B is a
    martingale under the driver's law.
    """

    grid: drv.TimeGrid
    phi: np.ndarray
    money_market: np.ndarray

    def deflated(self) -> np.ndarray:
        """phi_t B_t, the martingale component, per path and grid time."""
        return self.phi * self.money_market


def pricing_kernel(cmap: tr.CompositeMap, base: drv.Driver,
                   ensemble: drv.PathEnsemble, rate: TimeParam = 0.0) -> PricingKernelPath:
    """Build the deflator phi along each path of the ensemble.

    phi at the first grid time is 1; between consecutive grid times it picks
    up the conditional density ratio and the inverse money-market growth.
    """
    times = ensemble.grid.times
    if times.size < 2:
        raise ParameterError("pricing kernel needs a grid with at least 2 points")
    r = as_time_fn(rate)
    for probe in np.linspace(times[0], times[-1], 7):
        if r(float(probe)) < 0:
            raise ParameterError("short rate must be non-negative")
    bank = np.array([money_market(rate, float(t)) for t in times])
    n, K = ensemble.paths.shape
    phi = np.empty((n, K))
    phi[:, 0] = 1.0
    for k in range(K - 1):
        s, t = float(times[k]), float(times[k + 1])
        rho = conditional_rn(cmap, base, s, t, ensemble.paths[:, k], ensemble.paths[:, k + 1])
        phi[:, k + 1] = rho * phi[:, k] * bank[k] / bank[k + 1]
    return PricingKernelPath(grid=ensemble.grid, phi=phi, money_market=bank)
