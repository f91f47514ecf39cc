"""Critical-function geometry: rho, Whitney-type covers, partition of unity.

The critical function

    rho_nu(x) = (1/16) min{ 1/|x|, 1, x_j : nu_j > -1/2 }

sets the local scale of the theory: balls of radius rho_nu(center) are
"critical", smaller balls require cancellation from atoms.  rho is stable
under moves of up to 4 rho (values change by at most a factor 2), which is
what makes greedy Vitali selection produce a bounded-overlap cover.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError
from .specfun import NuIndex

__all__ = [
    "rho",
    "rho_coord",
    "gamma_nu",
    "Ball",
    "Cover",
    "whitney_cover",
    "partition_of_unity",
    "ball_volume",
]


def rho(nu, x):
    """rho_nu at a point of (0,inf)^n, or componentwise on (..., n) arrays."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts[None]
    squeeze = False
    if pts.shape[-1] != nu.n:
        raise DomainError(f"points must have last dimension {nu.n}")
    if pts.ndim == 1:
        pts = pts[None, :]
        squeeze = True
    if np.any(pts <= 0):
        raise DomainError("rho requires strictly positive coordinates")
    norms = np.sqrt(np.sum(pts * pts, axis=-1))
    val = np.minimum(1.0 / norms, 1.0)
    for j in nu.j_set:
        val = np.minimum(val, pts[..., j])
    val = val / 16.0
    if squeeze:
        return float(val[0])
    return val


def rho_coord(nu_j: float, x_j):
    """One-dimensional critical function of a single coordinate."""
    nu_j = float(nu_j)
    if not nu_j >= -0.5:
        raise DomainError(f"nu_j must be >= -1/2, got {nu_j}")
    x = np.asarray(x_j, dtype=float)
    if np.any(x <= 0):
        raise DomainError("rho_coord requires x_j > 0")
    if nu_j == -0.5:
        val = np.minimum(1.0, 1.0 / x) / 16.0
    else:
        val = np.minimum(x, 1.0 / x) / 16.0
    return float(val) if np.isscalar(x_j) else val


def gamma_nu(nu) -> float:
    """Hoelder exponent min{1, nu_min + 1/2} of the Riesz kernel."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    return nu.gamma


def ball_volume(n: int, r: float) -> float:
    """Euclidean volume of an n-ball of radius r."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * r ** n


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        if any(c <= 0 for c in center):
            raise DomainError("ball center must be strictly positive componentwise")
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return ball_volume(self.n, self.radius)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=-1)
        return d2 < self.radius ** 2


@dataclass
class Cover:
    """Whitney-type cover: balls B(x_xi, rho(x_xi)) with recorded overlap."""

    nu: NuIndex
    region: tuple
    balls: list
    overlap_bound: int

    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls])

    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    def covering_indices(self, x) -> list:
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        d2 = np.sum((self.centers() - pt) ** 2, axis=1)
        return list(np.nonzero(d2 < self.radii() ** 2)[0])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"center_{j+1}" for j in range(self.balls[0].n)] + ["radius"])
            for b in self.balls:
                w.writerow([f"{c:.17g}" for c in b.center] + [f"{b.radius:.17g}"])

    @property
    def metadata(self) -> dict:
        return {
            "nu": list(self.nu.nu),
            "region": [[a, b] for a, b in self.region],
            "overlap_bound": int(self.overlap_bound),
            "ball_count": len(self.balls),
        }

    def write_metadata(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata, fh, indent=2)
            fh.write("\n")


def _check_region(region, n: int) -> tuple:
    reg = tuple((float(a), float(b)) for a, b in region)
    if len(reg) != n:
        raise DomainError(f"region must have {n} axes")
    for a, b in reg:
        if not (0 < a < b):
            raise DomainError("region must satisfy 0 < a_j < b_j on every axis")
    return reg


def greedy_disjoint(centers: np.ndarray, radii: np.ndarray, scale: float,
                    budget: int) -> list:
    """Vitali-style greedy selection, largest radius first.

    Selects indices whose scaled balls B(c, scale*r) are pairwise disjoint;
    stops adding once `budget` balls are selected.
    """
    order = np.argsort(-radii, kind="stable")
    sel: list = []
    sel_c = np.empty((0, centers.shape[1]))
    sel_r = np.empty(0)
    for idx in order:
        c = centers[idx]
        r = radii[idx]
        if sel:
            d2 = np.sum((sel_c - c) ** 2, axis=1)
            if np.any(d2 < (scale * (sel_r + r)) ** 2):
                continue
        sel.append(int(idx))
        sel_c = np.vstack([sel_c, c[None, :]])
        sel_r = np.append(sel_r, r)
        if len(sel) >= budget:
            break
    return sel


def _coverage_and_overlap(points: np.ndarray, centers: np.ndarray,
                          radii: np.ndarray) -> tuple:
    """Per-point cover counts, chunked so memory stays bounded."""
    counts = np.zeros(len(points), dtype=int)
    r2 = radii ** 2
    step = max(1, int(2e6 / max(1, len(centers))))
    for lo in range(0, len(points), step):
        chunk = points[lo:lo + step]
        d2 = np.sum((chunk[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        counts[lo:lo + step] = np.sum(d2 < r2[None, :], axis=1)
    return counts


def whitney_cover(nu, region, budget: int) -> Cover:
    """Cover an axis-aligned box in (0,inf)^n by balls B(x, rho(x)).

    Greedy Vitali selection over a candidate lattice of pitch
    (min rho over the region)/10: fifth-radius balls come out pairwise
    disjoint and the full-radius balls cover the box.  Raises
    CapacityError (with an uncovered witness point) if `budget` balls do
    not suffice.
    """
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    region = _check_region(region, nu.n)
    if budget < 1:
        raise DomainError("budget must be >= 1")

    far_corner = np.array([b for _, b in region])
    near_corner = np.array([a for a, _ in region])
    rho_min = min(1.0, 1.0 / float(np.linalg.norm(far_corner)))
    for j in nu.j_set:
        rho_min = min(rho_min, near_corner[j])
    rho_min /= 16.0
    pitch = rho_min / 10.0

    axes = [np.arange(a, b + pitch / 2, pitch) for a, b in region]
    total = int(np.prod([len(ax) for ax in axes]))
    if total > 4_000_000:
        raise CapacityError(
            f"candidate lattice has {total} points; shrink the region")
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=-1)
    radii = np.atleast_1d(rho(nu, cand))

    # Separation at 2/5 of the radii: fifth-radius disjointness follows a
    # fortiori, coverage still holds (rejected candidates sit within 4/5 of
    # a selected radius), and the overlap count drops well below 20.
    sel = greedy_disjoint(cand, radii, 0.4, budget)
    centers = cand[sel]
    sel_radii = radii[sel]

    counts = _coverage_and_overlap(cand, centers, sel_radii)
    if np.any(counts == 0):
        witness = cand[int(np.argmin(counts))]
        raise CapacityError(
            f"budget {budget} exhausted before the region was covered",
            witness=tuple(float(v) for v in witness))

    balls = [Ball(tuple(c), float(r)) for c, r in zip(centers, sel_radii)]
    return Cover(nu=nu, region=region, balls=balls,
                 overlap_bound=int(counts.max()))


def partition_of_unity(cover: Cover, x) -> list:
    """Weights of the indicator-ratio partition of unity at x.

    Returns [(ball index, weight)] for the balls containing x; weights are
    1/m for m covering balls with the last one adjusted so the floating
    point sum is exactly 1.
    """
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    for (a, b), v in zip(cover.region, pt):
        if not (a <= v <= b):
            raise DomainError(f"point {tuple(pt)} lies outside the covered region")
    idx = cover.covering_indices(pt)
    if not idx:
        raise DomainError(f"point {tuple(pt)} is not inside any cover ball")
    m = len(idx)
    w = [1.0 / m] * m
    if m > 1:
        partial = 0.0
        for v in w[:-1]:
            partial += v
        w[-1] = 1.0 - partial
    return list(zip(idx, w))
