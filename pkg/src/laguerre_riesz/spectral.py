"""Truncated Laguerre expansions and the exact diagonal calculus.

A LaguerreCoeffs holds finitely many coefficients of f = sum c_k phi_k^nu
together with the basis tag nu.  The ladder maps delta_j and delta_j^*
return coefficients in a *different* basis (nu + e_j, nu - e_j); keeping nu
on the object makes mixing bases a hard error, which is the main
bookkeeping hazard of this calculus:

    delta_j   phi_k^nu = -2 sqrt(k_j)   phi_{k-e_j}^{nu+e_j}
    delta_j^* phi_k^mu = -2 sqrt(k_j+1) phi_{k+e_j}^{mu-e_j}   (mu_j >= 1/2)

with phi_{k-e_j} = 0 when k_j = 0.  Heat flow, inverse square roots and
spectral projections act diagonally through the eigenvalues
lambda_k = 4|k| + 2|nu| + 2n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResolutionError
from .specfun import MultiIndex, NuIndex, laguerre_function_table, multi_abs

__all__ = [
    "GridFunction",
    "LaguerreCoeffs",
    "eigenvalue",
    "default_degree_cap",
    "default_grid_spec",
    "expand",
    "synthesize",
    "apply_heat",
    "apply_inv_sqrt",
    "apply_delta",
    "apply_delta_star",
    "spectral_projection",
    "coeff_inner",
    "write_coeffs_csv",
    "read_coeffs_csv",
    "degree_simplex",
]

ORTHONORMALITY_TOL = 1e-6


def eigenvalue(k, nu) -> float:
    """lambda_k = 4|k| + 2|nu| + 2n; strictly positive on the domain."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if np.isscalar(k):
        k = (int(k),)
    if len(k) != nu.n:
        raise DomainError(f"multi-index length {len(k)} != n = {nu.n}")
    if any(int(kj) != kj or kj < 0 for kj in k):
        raise DomainError("multi-index components must be nonnegative integers")
    return 4.0 * multi_abs(k) + 2.0 * nu.total + 2.0 * nu.n


def default_degree_cap(n: int) -> int:
    return 40 if n == 1 else 20


def default_grid_spec(n: int) -> tuple:
    """(box, nodes per axis) resolving phi_k up to the default degree cap.

    The upper edge must clear the classical turning point sqrt(lambda_K)
    (~12.9 for K=40) with room for the evanescent tail, and the lower edge
    must be far below the first Gauss-Legendre node so no x^{nu+1/2} mass
    is lost; (1e-12, 16) x 700 gives per-axis Gram residuals ~1e-12 for
    half-integer-type nu.
    """
    if n == 1:
        return ((1e-12, 16.0),), (700,)
    return ((1e-12, 13.0),) * n, (300,) * n


def gauss_legendre_nodes(a: float, b: float, m: int) -> tuple:
    x, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class GridFunction:
    """Values on a tensor-product Gauss-Legendre grid over a positive box."""

    box: tuple
    nodes: tuple
    weights: tuple
    values: np.ndarray

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        object.__setattr__(self, "box", box)
        for a, b in box:
            if not 0 < a < b:
                raise DomainError("grid box must satisfy 0 < a_j < b_j")
        for nd, wt in zip(self.nodes, self.weights):
            if len(nd) < 2:
                raise DomainError("need at least 2 nodes per axis")
            if np.any(wt <= 0):
                raise DomainError("quadrature weights must be positive")
        shape = tuple(len(nd) for nd in self.nodes)
        if self.values.shape != shape:
            raise DomainError(f"values shape {self.values.shape} != grid shape {shape}")

    @classmethod
    def from_callable(cls, f, box, num_nodes) -> "GridFunction":
        box = tuple((float(a), float(b)) for a, b in box)
        if np.isscalar(num_nodes):
            num_nodes = (int(num_nodes),) * len(box)
        nodes, weights = [], []
        for (a, b), m in zip(box, num_nodes):
            x, w = gauss_legendre_nodes(a, b, m)
            nodes.append(x)
            weights.append(w)
        mesh = np.meshgrid(*nodes, indexing="ij")
        vals = np.asarray(f(*mesh), dtype=float)
        return cls(box=box, nodes=tuple(nodes), weights=tuple(weights), values=vals)

    @property
    def n(self) -> int:
        return len(self.box)

    def weight_grid(self) -> np.ndarray:
        w = self.weights[0]
        for wj in self.weights[1:]:
            w = np.multiply.outer(w, wj)
        return w

    def integrate(self) -> float:
        return float(np.sum(self.weight_grid() * self.values))

    def inner(self, other: "GridFunction") -> float:
        return float(np.sum(self.weight_grid() * self.values * other.values))

    def norm_lq(self, q: float) -> float:
        if q == math.inf:
            return float(np.max(np.abs(self.values)))
        return float(np.sum(self.weight_grid() * np.abs(self.values) ** q) ** (1.0 / q))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(box=self.box, nodes=self.nodes,
                            weights=self.weights, values=values)

    def mesh_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class LaguerreCoeffs:
    """Finite expansion sum_{|k| <= K} c_k phi_k^nu, tagged with its basis."""

    nu: NuIndex
    entries: dict
    degree_cap: int

    def __post_init__(self):
        for k, v in self.entries.items():
            if len(k) != self.nu.n:
                raise DomainError(f"index {k} has wrong length for n={self.nu.n}")
            if any(int(kj) != kj or kj < 0 for kj in k):
                raise DomainError(f"index {k} has negative/non-integer components")
            if multi_abs(k) > self.degree_cap:
                raise DomainError(f"index {k} exceeds degree cap {self.degree_cap}")

    def coeff(self, k) -> float:
        return self.entries.get(tuple(k), 0.0)

    def map_entries(self, fn) -> "LaguerreCoeffs":
        return LaguerreCoeffs(self.nu, {k: fn(k, v) for k, v in self.entries.items()},
                              self.degree_cap)

    def max_abs_diff(self, other: "LaguerreCoeffs") -> float:
        keys = set(self.entries) | set(other.entries)
        return max((abs(self.coeff(k) - other.coeff(k)) for k in keys), default=0.0)


def degree_simplex(n: int, cap: int):
    """All multi-indices with |k| <= cap, lexicographic."""
    if n == 1:
        for k in range(cap + 1):
            yield (k,)
        return

    def rec(prefix, remaining, axes_left):
        if axes_left == 1:
            for k in range(remaining + 1):
                yield prefix + (k,)
            return
        for k in range(remaining + 1):
            yield from rec(prefix + (k,), remaining - k, axes_left - 1)

    yield from rec((), cap, n)


def _axis_tables(f: GridFunction, nu: NuIndex, k_max: int) -> list:
    return [laguerre_function_table(k_max, nu[j], f.nodes[j]) for j in range(f.n)]


def expand(f: GridFunction, nu, K: int) -> LaguerreCoeffs:
    """Coefficients <f, phi_k^nu> for |k| <= K by tensor quadrature.

    Raises ResolutionError when the grid's per-axis Gram matrix for the
    phi_k deviates from the identity by more than 1e-6.
    """
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if f.n != nu.n:
        raise DomainError("grid dimension does not match nu")
    if K < 0:
        raise DomainError("K must be >= 0")
    tables = _axis_tables(f, nu, K)
    for j, tab in enumerate(tables):
        gram = (tab * f.weights[j][None, :]) @ tab.T
        resid = float(np.max(np.abs(gram - np.eye(K + 1))))
        if resid > ORTHONORMALITY_TOL:
            raise ResolutionError(
                f"axis {j} orthonormality residual {resid:.2e} > {ORTHONORMALITY_TOL}")
    weighted = f.values
    # Contract axis by axis: result has one degree axis per space axis.
    for j, tab in enumerate(tables):
        weighted = np.tensordot(tab * f.weights[j][None, :], weighted, axes=([1], [j]))
        # tensordot puts the new degree axis first; rotate it behind the
        # previously produced degree axes.
        weighted = np.moveaxis(weighted, 0, j)
    entries = {}
    for k in degree_simplex(nu.n, K):
        entries[k] = float(weighted[k])
    return LaguerreCoeffs(nu=nu, entries=entries, degree_cap=K)


def synthesize(c: LaguerreCoeffs, x):
    """Evaluate sum c_k phi_k^nu at a point (n,) or points (m, n)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts)
    if c.nu.n == 1 and pts.shape[1] != 1 and pts.shape[0] == 1:
        pts = pts.T
    if pts.shape[1] != c.nu.n:
        raise DomainError(f"points must have {c.nu.n} columns")
    if not c.entries:
        out = np.zeros(pts.shape[0])
        return float(out[0]) if single else out
    k_max = max(max(k) for k in c.entries)
    tables = [laguerre_function_table(k_max, c.nu[j], pts[:, j]) for j in range(c.nu.n)]
    out = np.zeros(pts.shape[0])
    for k, v in c.entries.items():
        if v == 0.0:
            continue
        term = tables[0][k[0]].copy()
        for j in range(1, c.nu.n):
            term = term * tables[j][k[j]]
        out += v * term
    return float(out[0]) if single else out


def apply_heat(c: LaguerreCoeffs, t: float, shift: float = 0.0) -> LaguerreCoeffs:
    """Diagonal heat flow: c_k -> exp(-t (lambda_k + shift)) c_k."""
    if t < 0:
        raise DomainError("heat flow requires t >= 0")
    if shift < 0:
        raise DomainError("spectral shift must be >= 0")
    return c.map_entries(lambda k, v: math.exp(-t * (eigenvalue(k, c.nu) + shift)) * v)


def apply_inv_sqrt(c: LaguerreCoeffs, shift: float = 0.0) -> LaguerreCoeffs:
    """Diagonal inverse square root: c_k -> (lambda_k + shift)^{-1/2} c_k."""
    if shift < 0:
        raise DomainError("spectral shift must be >= 0")
    return c.map_entries(lambda k, v: v / math.sqrt(eigenvalue(k, c.nu) + shift))


def apply_delta(c: LaguerreCoeffs, j: int) -> LaguerreCoeffs:
    """Ladder map into the nu + e_j basis; indices with k_j = 0 drop out."""
    if not 0 <= j < c.nu.n:
        raise DomainError(f"axis {j} out of range")
    out = {}
    for k, v in c.entries.items():
        if k[j] == 0:
            continue
        kk = list(k)
        kk[j] -= 1
        out[tuple(kk)] = -2.0 * math.sqrt(k[j]) * v
    return LaguerreCoeffs(nu=c.nu.shifted(j, +1), entries=out,
                          degree_cap=max(c.degree_cap - 1, 0))


def apply_delta_star(c: LaguerreCoeffs, j: int) -> LaguerreCoeffs:
    """Adjoint ladder map into the mu - e_j basis; requires mu_j >= 1/2."""
    if not 0 <= j < c.nu.n:
        raise DomainError(f"axis {j} out of range")
    if c.nu[j] < 0.5:
        raise DomainError(
            f"apply_delta_star needs mu_j >= 1/2 (target order >= -1/2), got {c.nu[j]}")
    out = {}
    for k, v in c.entries.items():
        kk = list(k)
        kk[j] += 1
        out[tuple(kk)] = -2.0 * math.sqrt(k[j] + 1.0) * v
    return LaguerreCoeffs(nu=c.nu.shifted(j, -1), entries=out,
                          degree_cap=c.degree_cap + 1)


def spectral_projection(c: LaguerreCoeffs, ell: int) -> LaguerreCoeffs:
    """Keep the |k| = ell shell."""
    if ell < 0:
        raise DomainError("ell must be >= 0")
    return LaguerreCoeffs(
        nu=c.nu,
        entries={k: v for k, v in c.entries.items() if multi_abs(k) == ell},
        degree_cap=c.degree_cap)


def coeff_inner(c: LaguerreCoeffs, d: LaguerreCoeffs) -> float:
    """l^2 pairing of two expansions over the same basis."""
    if c.nu != d.nu:
        raise DomainError("cannot pair expansions over different nu bases")
    keys = set(c.entries) & set(d.entries)
    return float(sum(c.entries[k] * d.entries[k] for k in keys))


def write_coeffs_csv(c: LaguerreCoeffs, path) -> None:
    """CSV rows (k_1, ..., k_n, value) under a JSON header comment line."""
    header = {"nu": list(c.nu.nu), "K": int(c.degree_cap)}
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header) + "\n")
        fh.write(",".join(f"k{j+1}" for j in range(c.nu.n)) + ",value\n")
        for k in sorted(c.entries):
            fh.write(",".join(str(int(kj)) for kj in k) + f",{c.entries[k]:.17g}\n")


def read_coeffs_csv(path) -> LaguerreCoeffs:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise DomainError("missing JSON header line")
        header = json.loads(first[2:])
        fh.readline()
        entries = {}
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            entries[tuple(int(p) for p in parts[:-1])] = float(parts[-1])
    return LaguerreCoeffs(nu=NuIndex(header["nu"]), entries=entries,
                          degree_cap=int(header["K"]))
