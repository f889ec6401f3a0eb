"""Poisson network sampling, user association and conditional distance laws.

The three distance distributions used throughout are all truncated
Rayleigh-type laws of the form 2*pi*lam*r*exp(-pi*lam*r^2) restricted to an
interval (lo, hi):

* serving distance of a user with an exclusion disk of radius r0: support
  (r0, inf);
* serving distance conditioned on the distance r2 to another base station:
  support (r0, r2), because the serving station is the nearest one;
* serving distance of a foreign user conditioned on the distance r between
  the two users and the tagged user's own serving distance x: support
  (max(r0, x - r), x + r) by the triangle inequalities.

Samplers invert the closed-form CDFs; no rejection sampling in the hot
path. Everything is stable in the far tail (expm1/log1p forms).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, RealizationError
from .params import SystemParams

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# truncated Rayleigh core
# ---------------------------------------------------------------------------

def _trunc_mass(lam: float, lo, hi):
    """P(lo < R < hi) for the untruncated law, computed stably.

    An infinite upper edge needs no special casing: expm1(-inf) = -1.
    """
    q = math.pi * lam
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.exp(-q * lo ** 2) * (-np.expm1(-q * (hi ** 2 - lo ** 2)))


def trunc_rayleigh_pdf(r, lam: float, lo, hi):
    r = np.asarray(r, dtype=float)
    q = math.pi * lam
    dens = 2.0 * q * r * np.exp(-q * r ** 2) / _trunc_mass(lam, lo, hi)
    return np.where((r > lo) & (r < hi), dens, 0.0)


def trunc_rayleigh_cdf(r, lam: float, lo, hi):
    r = np.asarray(r, dtype=float)
    q = math.pi * lam
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    frac = (np.expm1(-q * (r ** 2 - lo ** 2))
            / np.expm1(-q * (hi ** 2 - lo ** 2)))
    return np.clip(np.where(r <= lo, 0.0, np.where(r >= hi, 1.0, frac)), 0.0, 1.0)


def trunc_rayleigh_sample(lam: float, lo, hi, rng: np.random.Generator,
                          size=None):
    q = math.pi * lam
    u = rng.random(size)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = u * (-np.expm1(-q * (hi ** 2 - lo ** 2)))
    return np.sqrt(lo ** 2 - np.log1p(-span) / q)


# ---------------------------------------------------------------------------
# the three laws
# ---------------------------------------------------------------------------

def serving_pdf(r, lam: float, r0: float):
    """Density of the nearest-base-station distance outside the r0 disk."""
    if r0 < 0:
        raise DomainError(f"r0 must be >= 0, got {r0!r}")
    return trunc_rayleigh_pdf(r, lam, r0, np.inf)


def serving_cdf(r, lam: float, r0: float):
    return trunc_rayleigh_cdf(r, lam, r0, np.inf)


def serving_sample(lam: float, r0: float, rng: np.random.Generator, size=None):
    return trunc_rayleigh_sample(lam, r0, np.inf, rng, size)


def serving_given_bs_pdf(r1, r2, lam: float, r0: float):
    """Serving-distance density given the distance r2 to another station."""
    if np.any(np.asarray(r2) <= r0):
        raise DomainError(f"conditioning distance must exceed r0={r0!r}")
    return trunc_rayleigh_pdf(r1, lam, r0, r2)


def serving_given_bs_cdf(r1, r2, lam: float, r0: float):
    if np.any(np.asarray(r2) <= r0):
        raise DomainError(f"conditioning distance must exceed r0={r0!r}")
    return trunc_rayleigh_cdf(r1, lam, r0, r2)


def serving_given_bs_sample(r2, lam: float, r0: float,
                            rng: np.random.Generator, size=None):
    if np.any(np.asarray(r2) <= r0):
        raise DomainError(f"conditioning distance must exceed r0={r0!r}")
    return trunc_rayleigh_sample(lam, r0, r2, rng, size)


def _pair_support(r, x, r0: float):
    r = np.asarray(r, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x <= r0):
        raise DomainError(f"tagged serving distance must exceed r0={r0!r}")
    if np.any(r <= 0):
        raise DomainError("user-to-user distance must be positive")
    return np.maximum(r0, x - r), x + r


def serving_given_user_pair_pdf(s, r, x, lam: float, r0: float):
    """Foreign user's serving-distance density given the user-to-user
    distance r and the tagged user's serving distance x."""
    lo, hi = _pair_support(r, x, r0)
    return trunc_rayleigh_pdf(s, lam, lo, hi)


def serving_given_user_pair_cdf(s, r, x, lam: float, r0: float):
    lo, hi = _pair_support(r, x, r0)
    return trunc_rayleigh_cdf(s, lam, lo, hi)


def serving_given_user_pair_sample(r, x, lam: float, r0: float,
                                   rng: np.random.Generator, size=None):
    lo, hi = _pair_support(r, x, r0)
    return trunc_rayleigh_sample(lam, lo, hi, rng, size)


# ---------------------------------------------------------------------------
# network realization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointSet:
    """Points of one process realization inside a [0, window]^2 square (km)."""

    points: np.ndarray
    window: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if pts.size and (pts.min() < -1e-12 or pts.max() > self.window + 1e-12):
            raise DomainError("points outside window")

    def __len__(self):
        return self.points.shape[0]


def sample_hppp(lam: float, window: float, rng: np.random.Generator) -> PointSet:
    """Homogeneous Poisson process of density lam on a window x window square."""
    if lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam!r}")
    if window <= 0:
        raise DomainError(f"window side must be > 0, got {window!r}")
    n = rng.poisson(lam * window * window)
    pts = rng.random((n, 2)) * window
    return PointSet(points=pts, window=window)


@dataclass
class NetworkRealization:
    """One sampled geometry: base stations, per-cell users, associations.

    ``users[j]`` holds exactly K user coordinates for every valid cell;
    rows of invalid cells (could not furnish K users beyond r0 inside
    their Voronoi cell within the attempt budget) are NaN. Association is
    by construction: user (j, k) is served by base station j, its nearest.
    """

    bs: np.ndarray               # (n_bs, 2)
    users: np.ndarray            # (n_bs, K, 2)
    serving: np.ndarray          # (n_bs, K) distance to own BS
    valid: np.ndarray            # (n_bs,) bool
    window: float

    @property
    def n_bs(self) -> int:
        return self.bs.shape[0]

    @property
    def k(self) -> int:
        return self.users.shape[1]

    def central_cells(self, margin: float) -> np.ndarray:
        """Indices of valid cells whose BS lies in the margin-trimmed core."""
        lo, hi = margin, self.window - margin
        inside = np.all((self.bs >= lo) & (self.bs <= hi), axis=1)
        return np.flatnonzero(inside & self.valid)

    def to_json_dict(self) -> dict:
        """Debug dump of coordinates and associations for external plotting."""
        return {
            "window_km": self.window,
            "base_stations": self.bs.tolist(),
            "users": [
                {"cell": int(j),
                 "valid": bool(self.valid[j]),
                 "coords": (self.users[j].tolist() if self.valid[j] else []),
                 "serving_km": (self.serving[j].tolist() if self.valid[j] else [])}
                for j in range(self.n_bs)
            ],
        }


def build_network(params: SystemParams, window: float,
                  rng: np.random.Generator,
                  attempts_per_cell: int = 10_000) -> NetworkRealization:
    """Sample base stations and populate each cell with K eligible users.

    Users are drawn uniformly over the window and kept for their nearest
    cell when farther than r0 from it, which is distribution-identical to
    per-cell uniform sampling over the Voronoi polygon minus the exclusion
    disk. Cells still short of users after the attempt budget are flagged
    invalid and excluded from measurement.
    """
    bs_set = sample_hppp(params.lam, window, rng)
    if len(bs_set) == 0:
        raise RealizationError("no base stations fell in the window")
    bs = bs_set.points
    n_bs = bs.shape[0]
    k = params.k

    users = np.full((n_bs, k, 2), np.nan)
    serving = np.full((n_bs, k), np.nan)
    fill = np.zeros(n_bs, dtype=np.int64)

    # Global batches amortize the nearest-station search over all cells.
    batch = max(1024, 8 * n_bs * k)
    budget = attempts_per_cell * n_bs
    drawn = 0
    while drawn < budget and (fill < k).any():
        pts = rng.random((batch, 2)) * window
        drawn += batch
        idx, dist = _kernels.nearest_bs(pts, bs)
        keep = dist > params.r0
        kidx, kpts, kdist = idx[keep], pts[keep], dist[keep]
        for j in np.unique(kidx):
            need = k - fill[j]
            if need <= 0:
                continue
            sel = np.flatnonzero(kidx == j)[:need]
            got = sel.shape[0]
            users[j, fill[j]:fill[j] + got] = kpts[sel]
            serving[j, fill[j]:fill[j] + got] = kdist[sel]
            fill[j] += got

    valid = fill >= k
    if not valid.all():
        log.info("excluded %d/%d cells that could not furnish %d users",
                 int((~valid).sum()), n_bs, k)
        users[~valid] = np.nan
        serving[~valid] = np.nan
    return NetworkRealization(bs=bs, users=users, serving=serving,
                              valid=valid, window=window)


# ---------------------------------------------------------------------------
# distance bundle for one tagged user
# ---------------------------------------------------------------------------

@dataclass
class DistanceBundle:
    """Every distance family entering the SINR of one tagged user.

    Arrays are aligned on the first axis with ``other_cells`` (valid
    interfering cells, sorted by increasing distance to the tagged user);
    columns of the 2-D arrays run over the K users of each cell.
    """

    cell_index: int
    pilot_index: int
    x: float                         # serving distance of the tagged user
    other_cells: np.ndarray          # (n_o,) indices into the realization
    bs_to_user: np.ndarray           # (n_o,)   BS j -> tagged user
    bs_to_bs: np.ndarray             # (n_o,)   BS j -> serving BS
    cross_serving: np.ndarray        # (n_o, K) user (j,k') -> its own BS
    cross_to_desired_bs: np.ndarray  # (n_o, K) user (j,k') -> serving BS
    user_to_user: np.ndarray         # (n_o, K) user (j,k') -> tagged user

    @property
    def n_other(self) -> int:
        return self.other_cells.shape[0]


def extract_bundle(net: NetworkRealization, cell: int, k: int,
                   margin: float = 1.0) -> DistanceBundle | None:
    """Collect the tagged user's distances; ``None`` when the tagged cell
    falls outside the central measurement region (border-effect guard).
    Interference always comes from the full window."""
    if not net.valid[cell]:
        raise DomainError(f"cell {cell} holds no eligible users")
    if cell not in net.central_cells(margin):
        return None

    pos = net.users[cell, k]
    bs_l = net.bs[cell]
    others = np.flatnonzero(net.valid)
    others = others[others != cell]

    d_bs_user = np.hypot(*(net.bs[others] - pos).T)
    order = np.argsort(d_bs_user, kind="stable")
    others = others[order]
    d_bs_user = d_bs_user[order]

    d_bs_bs = np.hypot(*(net.bs[others] - bs_l).T)
    cross_serving = net.serving[others]
    flat = net.users[others].reshape(-1, 2)
    cross_to_bs = np.hypot(*(flat - bs_l).T).reshape(len(others), net.k)
    user_user = np.hypot(*(flat - pos).T).reshape(len(others), net.k)

    return DistanceBundle(
        cell_index=int(cell), pilot_index=int(k),
        x=float(net.serving[cell, k]),
        other_cells=others, bs_to_user=d_bs_user, bs_to_bs=d_bs_bs,
        cross_serving=cross_serving, cross_to_desired_bs=cross_to_bs,
        user_to_user=user_user)
