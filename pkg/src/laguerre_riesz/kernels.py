"""Heat, q_t and Riesz kernels in closed form, with spectral-series oracles.

The one-dimensional heat kernel of the operator
-(d/dx)^2 + x^2 + (nu^2 - 1/4)/x^2 has the closed form (r = e^{-4t})

    p_t^nu(x,y) = 2 (r x y)^{1/2} / (1-r)
                  * exp(-((1+r)/(2(1-r))) (x^2+y^2)) I_nu(2 sqrt(r) x y / (1-r)),

evaluated here in the cancellation-free grouping

    p_t^nu(x,y) = sqrt(xy)/sinh(2t)
                  * exp(-coth(2t) (x-y)^2 / 2 - tanh(t) x y)
                  * [e^{-z} I_nu(z)],        z = x y / sinh(2t),

which is the same expression with the overflow-prone e^{+z} folded into the
exponent algebra.  n-dimensional kernels are products of these factors.

Ladder derivatives never differentiate the Bessel series directly; they use
the order-raising recursion

    delta p_t^nu      = -(2/(e^{4t}-1)) x p_t^nu + y p_t^{nu+1} / sinh(2t)
    delta^* p_t^mu    =  (2/(1-e^{-4t})) x p_t^mu - (2 mu / x) p_t^mu
                         - y p_t^{mu+1} / sinh(2t)

(delta^* maps order mu to mu - 1, its zeroth-order coefficient is
(mu - 1/2)/x).  Riesz kernels are subordination integrals
(1/Gamma(1/2)) \int_0^inf t^{-1/2} (delta p_t)(x,y) dt, computed by panelled
Gauss-Legendre quadrature in v = sqrt(t) with node-doubling verification;
the explicit 1/Gamma(1/2) makes the kernel route agree with the diagonal
lambda^{-1/2} calculus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError, SingularityError
from .specfun import NuIndex, bessel_i_scaled, laguerre_function_table
from .spectral import default_degree_cap, eigenvalue

__all__ = [
    "QuadratureConfig",
    "INV_SQRT_PREFACTOR",
    "heat_kernel",
    "heat_kernel_1d",
    "heat_kernel_grid",
    "heat_kernel_spectral",
    "qt_kernel",
    "delta_heat_kernel",
    "delta_star_heat_kernel",
    "iterated_delta_heat_1d",
    "riesz_kernel",
    "riesz_conjugate_kernel",
    "riesz_smoothed_kernel",
    "riesz_kernel_pairs",
    "riesz_conjugate_kernel_pairs",
    "riesz_smoothed_kernel_pairs",
    "subordinated_inv_sqrt",
    "SPECTRAL_ORACLE_T_FLOOR",
]

# Normalization of L^{-1/2} = (1/Gamma(1/2)) \int t^{-1/2} e^{-tL} dt.
INV_SQRT_PREFACTOR = 1.0 / math.gamma(0.5)

SPECTRAL_ORACLE_T_FLOOR = 0.05

# Subordination tail cutoff: the bottom eigenvalue is >= 1 for every
# admissible nu, so the discarded mass is below e^{-45}.
_T_TAIL = 45.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Panelled quadrature for subordination integrals in v = sqrt(t).

    Panel edges are log-spaced between sqrt(t_min) and sqrt(t_split), one
    tail panel reaches sqrt(45); nodes_small / nodes_large are the node
    budgets below/above the split.  Every integral is computed at 1x and
    2x nodes; a relative change above rel_tol raises AccuracyError.
    """

    t_split: float = 1.0
    nodes_small: int = 200
    nodes_large: int = 200
    t_min: float = 1e-8
    rel_tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.t_min < self.t_split:
            raise DomainError("need 0 < t_min < t_split")
        if self.nodes_small < 16 or self.nodes_large < 16:
            raise DomainError("node counts must be >= 16")

    def panels(self) -> list:
        v_lo, v_hi = math.sqrt(self.t_min), math.sqrt(self.t_split)
        per_decade = 2
        count = max(2, int(math.ceil(per_decade * math.log10(v_hi / v_lo))))
        edges = [0.0] + list(np.geomspace(v_lo, v_hi, count + 1))
        return list(zip(edges[:-1], edges[1:]))


_DEFAULT_CFG = QuadratureConfig()


def _quad_nodes(cfg: QuadratureConfig, refine: int) -> tuple:
    """(nodes, weights) in v covering [0, sqrt(T_TAIL)]."""
    panels = cfg.panels()
    m_small = max(8, (refine * cfg.nodes_small) // len(panels))
    xs, ws = [], []
    base_x, base_w = np.polynomial.legendre.leggauss(m_small)
    for a, b in panels:
        half = 0.5 * (b - a)
        xs.append(a + half * (base_x + 1.0))
        ws.append(half * base_w)
    # Tail in 5 geometric panels: subordination integrands of well-separated
    # points peak at t ~ |x-y|/2, i.e. inside the tail, and one long panel
    # leaves the node-doubling margin too thin there.
    tail_edges = np.geomspace(math.sqrt(cfg.t_split), math.sqrt(_T_TAIL), 6)
    tx, tw = np.polynomial.legendre.leggauss(max(8, (refine * cfg.nodes_large) // 5))
    for a, b in zip(tail_edges[:-1], tail_edges[1:]):
        half = 0.5 * (b - a)
        xs.append(a + half * (tx + 1.0))
        ws.append(half * tw)
    return np.concatenate(xs), np.concatenate(ws)


def _subordinate_batch(g, cfg: QuadratureConfig, prefactor: float) -> np.ndarray:
    """prefactor * int_0^inf t^{-1/2} g(t) dt with node-doubling check.

    g maps a t-array of shape (m,) to integrand values of shape (m, ...);
    the integral is taken along the first axis.  In v = sqrt(t) the weight
    t^{-1/2} dt becomes 2 dv, so the integrand is regular at 0.
    """
    results = []
    mass = None
    for refine in (1, 2):
        v, w = _quad_nodes(cfg, refine)
        vals = np.asarray(g(v * v))
        results.append(2.0 * np.tensordot(w, vals, axes=(0, 0)))
        if refine == 2:
            mass = 2.0 * np.tensordot(w, np.abs(vals), axes=(0, 0))
    coarse, fine = results
    # Results below the quadrature's own rounding mass are zero to working
    # precision; do not demand relative agreement of pure roundoff.
    scale = np.maximum(np.abs(fine), np.maximum(1e-13 * mass, 1e-300))
    bad = np.abs(fine - coarse) > cfg.rel_tol * scale
    if np.any(bad):
        i = int(np.argmax(np.abs(fine - coarse) / scale))
        c = np.ravel(coarse)[i] if np.ndim(coarse) else coarse
        f = np.ravel(fine)[i] if np.ndim(fine) else fine
        raise AccuracyError(
            f"subordination quadrature did not converge: |{c:.6e} - {f:.6e}| "
            f"exceeds rel_tol {cfg.rel_tol}")
    return prefactor * fine


def _subordinate(g, cfg: QuadratureConfig, prefactor: float) -> float:
    return float(_subordinate_batch(g, cfg, prefactor))


def subordinated_inv_sqrt(lam: float, cfg: QuadratureConfig = None,
                          prefactor: float = INV_SQRT_PREFACTOR) -> float:
    """(1/Gamma(1/2)) int t^{-1/2} e^{-t lam} dt, by the production quadrature.

    Equals lam^{-1/2} analytically; exposed so the normalization of the
    kernel route can be certified against the diagonal calculus.
    """
    if lam <= 0:
        raise DomainError("lam must be positive")
    cfg = cfg or _DEFAULT_CFG
    return _subordinate(lambda t: np.exp(-lam * t), cfg, prefactor)


# ---------------------------------------------------------------------------
# closed-form heat kernel and ladder derivatives (1-D factors, broadcastable)

def heat_kernel_1d(nu_j: float, t, x, y):
    """One-dimensional factor p_t^{nu_j}(x, y); arguments broadcast."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(t <= 0):
        raise DomainError("heat kernel requires t > 0")
    s2t = np.sinh(2.0 * t)
    z = x * y / s2t
    with np.errstate(under="ignore"):
        logp = (0.5 * np.log(x * y) - np.log(s2t)
                - 0.5 * np.cosh(2.0 * t) / s2t * (x - y) ** 2
                - np.tanh(t) * x * y)
        return np.exp(logp) * bessel_i_scaled(nu_j, z)


def _as_points(nu: NuIndex, x, y) -> tuple:
    xp = np.atleast_1d(np.asarray(x, dtype=float))
    yp = np.atleast_1d(np.asarray(y, dtype=float))
    if xp.shape != (nu.n,) or yp.shape != (nu.n,):
        raise DomainError(f"x and y must be points of R^{nu.n}_+")
    if np.any(xp <= 0) or np.any(yp <= 0):
        raise DomainError("points must be strictly positive")
    return xp, yp


def heat_kernel(nu, t: float, x, y) -> float:
    """Product heat kernel p_t^nu(x, y) > 0 on (0,inf)^n."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    xp, yp = _as_points(nu, x, y)
    if t <= 0:
        raise DomainError("heat kernel requires t > 0")
    val = 1.0
    for j in range(nu.n):
        val *= float(heat_kernel_1d(nu[j], t, xp[j], yp[j]))
    return val


def heat_kernel_grid(nu, t: float, xs, ys) -> np.ndarray:
    """p_t^nu evaluated on all pairs of rows of xs (m, n) and ys (m2, n)."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    out = np.ones((xs.shape[0], ys.shape[0]))
    for j in range(nu.n):
        out *= heat_kernel_1d(nu[j], t, xs[:, j][:, None], ys[:, j][None, :])
    return out


def _log_kernel_scale(nu: NuIndex, t: float, xp, yp) -> float:
    """Leading exponent A with p_t ~ prefactor * e^{-A} (for tail sizing)."""
    coth = math.cosh(2 * t) / math.sinh(2 * t)
    tanh = math.tanh(t)
    return float(sum(0.5 * coth * (xj - yj) ** 2 + tanh * xj * yj
                     for xj, yj in zip(xp, yp)))


def _spectral_cap(nu: NuIndex, t: float, K, xp, yp) -> int:
    if K is not None:
        return int(K)
    # The series terms are O(1) while the kernel can be e^{-A}; the
    # truncation must put e^{-4tK} below 1e-10 * e^{-A}.
    need = (_log_kernel_scale(nu, t, xp, yp) + 32.0) / (4.0 * t)
    return max(default_degree_cap(nu.n), int(math.ceil(need)))


def heat_kernel_spectral(nu, t: float, x, y, K: int = None,
                         mp_dps: int = None) -> float:
    """Spectral series sum_{|k|<=K} e^{-t lambda_k} phi_k(x) phi_k(y).

    Only valid as an oracle for t >= 0.05 (below that the truncation needed
    for 1e-10 tails becomes impractical); K defaults to a t-adaptive cap
    that puts the tail below 1e-10.

    With mp_dps set, the same series is summed in mp_dps-digit arithmetic.
    This matters for well-separated points: the kernel there is as small as
    e^{-80} while the series terms are O(1), so float64 cancellation floors
    near 1e-17 absolute and only extended precision yields a valid oracle.
    """
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    xp, yp = _as_points(nu, x, y)
    if t < SPECTRAL_ORACLE_T_FLOOR:
        raise DomainError(
            f"spectral oracle floor is t >= {SPECTRAL_ORACLE_T_FLOOR}, got {t}")
    K = _spectral_cap(nu, t, K, xp, yp)
    if mp_dps is not None:
        return _heat_spectral_mp(nu, t, xp, yp, K, mp_dps)
    lam0 = 2.0 * nu.total + 2.0 * nu.n
    # per-axis factors e^{-4 t k_j} phi_{k_j}(x_j) phi_{k_j}(y_j)
    factors = []
    for j in range(nu.n):
        tab = laguerre_function_table(K, nu[j], np.array([xp[j], yp[j]]))
        decay = np.exp(-4.0 * t * np.arange(K + 1))
        factors.append(decay * tab[:, 0] * tab[:, 1])
    if nu.n == 1:
        total = float(np.sum(factors[0]))
    elif nu.n == 2:
        # sum over k1 + k2 <= K via a reversed cumulative sum on axis 2
        csum = np.cumsum(factors[1])
        total = float(np.sum(factors[0] * csum[::-1]))
    else:
        from .spectral import degree_simplex
        total = 0.0
        for k in degree_simplex(nu.n, K):
            total += float(np.prod([factors[j][k[j]] for j in range(nu.n)]))
    return math.exp(-t * lam0) * total


_MP_AXIS_CACHE: dict = {}


def _mp_axis_terms(nu_j: float, t: float, xj: float, yj: float, K: int, dps: int):
    """[e^{-t(4k + 2 nu_j + 2)} phi_k(x) phi_k(y)]_{k=0..K} as mpf values."""
    from mpmath import mp, mpf

    key = (nu_j, t, xj, yj, K, dps)
    if key in _MP_AXIS_CACHE:
        return _MP_AXIS_CACHE[key]
    with mp.workdps(dps):
        nuj = mpf(nu_j)
        xm, ym = mpf(xj), mpf(yj)
        base = ((xm * ym) ** (nuj + mpf(1) / 2)
                * mp.exp(-(xm * xm + ym * ym) / 2) * 2 / mp.gamma(nuj + 1))
        decay0 = mp.exp(-t * (2 * nuj + 2))
        step = mp.exp(-4 * mpf(t))
        ux, uy = xm * xm, ym * ym
        lx_prev = ly_prev = mpf(1)
        lx_cur, ly_cur = 1 + nuj - ux, 1 + nuj - uy
        norm2 = mpf(1)  # Gamma(k+1)/Gamma(k+nu+1), relative to k=0
        terms = [base * decay0]
        dec = decay0
        for k in range(1, K + 1):
            if k > 1:
                m = k - 1
                lx_prev, lx_cur = lx_cur, ((2 * m + 1 + nuj - ux) * lx_cur
                                           - (m + nuj) * lx_prev) / (m + 1)
                ly_prev, ly_cur = ly_cur, ((2 * m + 1 + nuj - uy) * ly_cur
                                           - (m + nuj) * ly_prev) / (m + 1)
            norm2 = norm2 * k / (k + nuj)
            dec = dec * step
            terms.append(base * norm2 * lx_cur * ly_cur * dec)
        _MP_AXIS_CACHE[key] = terms
    return terms


def _heat_spectral_mp(nu: NuIndex, t: float, xp, yp, K: int, dps: int) -> float:
    from mpmath import mp, mpf

    if nu.n > 2:
        raise DomainError("extended-precision spectral oracle supports n <= 2")
    with mp.workdps(dps):
        if nu.n == 1:
            total = mpf(0)
            for v in _mp_axis_terms(nu[0], t, float(xp[0]), float(yp[0]), K, dps):
                total += v
        else:
            ga = _mp_axis_terms(nu[0], t, float(xp[0]), float(yp[0]), K, dps)
            gb = _mp_axis_terms(nu[1], t, float(xp[1]), float(yp[1]), K, dps)
            prefix = [mpf(0)] * (K + 2)
            for k in range(K + 1):
                prefix[k + 1] = prefix[k] + gb[k]
            total = mpf(0)
            for k1 in range(K + 1):
                total += ga[k1] * prefix[K - k1 + 1]
        return float(total)


def qt_kernel(nu, t: float, x, y) -> float:
    """Kernel of t L e^{-tL}: -t d/dt p_t, via 4th-order differences in log t."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if t <= 0:
        raise DomainError("qt_kernel requires t > 0")
    xp, yp = _as_points(nu, x, y)
    return float(_qt_grid(nu, t, xp[None, :], yp[None, :])[0, 0])


_QT_LOG_STEP = 1e-4


def _qt_grid(nu: NuIndex, t: float, xs, ys) -> np.ndarray:
    h = _QT_LOG_STEP
    stencil = (
        (-2 * h, 1.0), (-h, -8.0), (h, 8.0), (2 * h, -1.0),
    )
    acc = np.zeros((np.atleast_2d(xs).shape[0], np.atleast_2d(ys).shape[0]))
    for dv, cw in stencil:
        acc += cw * heat_kernel_grid(nu, t * math.exp(dv), xs, ys)
    return -acc / (12.0 * h)


def _delta_factor_1d(nu_j: float, t, x, y):
    """delta applied to the x-argument of the 1-D factor (broadcastable)."""
    t = np.asarray(t, dtype=float)
    p0 = heat_kernel_1d(nu_j, t, x, y)
    p1 = heat_kernel_1d(nu_j + 1.0, t, x, y)
    coef_x = 2.0 / np.expm1(4.0 * t)
    return -coef_x * np.asarray(x) * p0 + np.asarray(y) * p1 / np.sinh(2.0 * t)


def _delta_star_factor_1d(mu_j: float, t, x, y):
    """delta^* (order mu_j -> mu_j - 1) applied to the x-argument."""
    t = np.asarray(t, dtype=float)
    p0 = heat_kernel_1d(mu_j, t, x, y)
    p1 = heat_kernel_1d(mu_j + 1.0, t, x, y)
    x = np.asarray(x)
    coef_x = 2.0 / (-np.expm1(-4.0 * t))
    return coef_x * x * p0 - (2.0 * mu_j / x) * p0 - np.asarray(y) * p1 / np.sinh(2.0 * t)


def delta_heat_kernel(nu, j: int, t: float, x, y) -> float:
    """delta_j applied to the x-argument of p_t^nu (order nu -> nu + e_j)."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if t <= 0:
        raise DomainError("requires t > 0")
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    xp, yp = _as_points(nu, x, y)
    val = float(_delta_factor_1d(nu[j], t, xp[j], yp[j]))
    for i in range(nu.n):
        if i != j:
            val *= float(heat_kernel_1d(nu[i], t, xp[i], yp[i]))
    return val


def delta_star_heat_kernel(mu, j: int, t: float, x, y) -> float:
    """delta_j^* applied to the x-argument of p_t^mu; needs mu_j >= 1/2.

    The ladder lowers the order (mu -> mu - e_j), so its zeroth-order
    coefficient is (mu_j - 1/2)/x_j and the target order stays >= -1/2
    exactly when mu_j >= 1/2.
    """
    mu = mu if isinstance(mu, NuIndex) else NuIndex(mu)
    if t <= 0:
        raise DomainError("requires t > 0")
    if not 0 <= j < mu.n:
        raise DomainError(f"axis {j} out of range")
    if mu[j] < 0.5:
        raise DomainError(f"delta_star_heat_kernel needs mu_j >= 1/2, got {mu[j]}")
    xp, yp = _as_points(mu, x, y)
    val = float(_delta_star_factor_1d(mu[j], t, xp[j], yp[j]))
    for i in range(mu.n):
        if i != j:
            val *= float(heat_kernel_1d(mu[i], t, xp[i], yp[i]))
    return val


def iterated_delta_heat_1d(nu_j: float, ell: int, t, x, y):
    """delta^ell p_t^{nu_j} through the order-raising recursion (1-D).

    delta^ell p^nu = -(2/(e^{4t}-1)) x delta^{ell-1} p^nu
                     + y delta^{ell-1} p^{nu+1} / sinh(2t).
    """
    if ell < 0:
        raise DomainError("ell must be >= 0")
    if ell == 0:
        return heat_kernel_1d(nu_j, t, x, y)
    t_arr = np.asarray(t, dtype=float)
    lower0 = iterated_delta_heat_1d(nu_j, ell - 1, t, x, y)
    lower1 = iterated_delta_heat_1d(nu_j + 1.0, ell - 1, t, x, y)
    coef_x = 2.0 / np.expm1(4.0 * t_arr)
    return -coef_x * np.asarray(x) * lower0 + np.asarray(y) * lower1 / np.sinh(2.0 * t_arr)


# ---------------------------------------------------------------------------
# Riesz kernels by subordination

def _check_offdiag(nu: NuIndex, x, y) -> tuple:
    xp, yp = _as_points(nu, x, y)
    if np.all(xp == yp):
        raise SingularityError("Riesz kernel is singular at x = y")
    return xp, yp


def _delta_heat_t_array(nu: NuIndex, j: int, xp, yp, shift: float = 0.0):
    """Vectorized-in-t integrand t -> delta_j p_t(x,y) [* e^{-shift t}]."""
    def g(t_arr):
        val = _delta_factor_1d(nu[j], t_arr, xp[j], yp[j])
        for i in range(nu.n):
            if i != j:
                val = val * heat_kernel_1d(nu[i], t_arr, xp[i], yp[i])
        if shift:
            val = val * np.exp(-shift * t_arr)
        return val
    return g


def _delta_star_heat_t_array(mu: NuIndex, j: int, xp, yp, shift: float = 0.0):
    def g(t_arr):
        val = _delta_star_factor_1d(mu[j], t_arr, xp[j], yp[j])
        for i in range(mu.n):
            if i != j:
                val = val * heat_kernel_1d(mu[i], t_arr, xp[i], yp[i])
        if shift:
            val = val * np.exp(-shift * t_arr)
        return val
    return g


def _as_pair_rows(nu: NuIndex, xs, ys) -> tuple:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if xs.shape[1] != nu.n or ys.shape != xs.shape:
        raise DomainError(f"expected matching (m, {nu.n}) point arrays")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("points must be strictly positive")
    return xs, ys


def _delta_heat_t_batch(nu: NuIndex, j: int, xs, ys, shift: float = 0.0,
                        star: bool = False):
    """t-array -> (len(t), m) integrand for paired point rows."""
    factor = _delta_star_factor_1d if star else _delta_factor_1d

    def g(t_arr):
        t = t_arr[:, None]
        val = factor(nu[j], t, xs[None, :, j], ys[None, :, j])
        for i in range(nu.n):
            if i != j:
                val = val * heat_kernel_1d(nu[i], t, xs[None, :, i], ys[None, :, i])
        if shift:
            val = val * np.exp(-shift * t)
        return val

    return g


def riesz_kernel_pairs(nu, j: int, xs, ys, cfg: QuadratureConfig = None,
                       _prefactor: float = INV_SQRT_PREFACTOR) -> np.ndarray:
    """Riesz kernel on paired rows of xs, ys (one quadrature pass for all)."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    xs, ys = _as_pair_rows(nu, xs, ys)
    if np.any(np.all(xs == ys, axis=1)):
        raise SingularityError("Riesz kernel is singular at x = y")
    cfg = cfg or _DEFAULT_CFG
    return _subordinate_batch(_delta_heat_t_batch(nu, j, xs, ys), cfg, _prefactor)


def riesz_conjugate_kernel_pairs(nu, j: int, xs, ys,
                                 cfg: QuadratureConfig = None,
                                 _prefactor: float = INV_SQRT_PREFACTOR) -> np.ndarray:
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    xs, ys = _as_pair_rows(nu, xs, ys)
    if np.any(np.all(xs == ys, axis=1)):
        raise SingularityError("kernel is singular at x = y")
    mu = nu.shifted(j, +1)
    cfg = cfg or _DEFAULT_CFG
    return _subordinate_batch(
        _delta_heat_t_batch(mu, j, xs, ys, shift=2.0, star=True), cfg, _prefactor)


def riesz_smoothed_kernel_pairs(nu, j: int, t: float, xs, ys,
                                cfg: QuadratureConfig = None,
                                _prefactor: float = INV_SQRT_PREFACTOR) -> np.ndarray:
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0:
        return riesz_kernel_pairs(nu, j, xs, ys, cfg, _prefactor)
    xs, ys = _as_pair_rows(nu, xs, ys)
    cfg = cfg or _DEFAULT_CFG
    base = _delta_heat_t_batch(nu, j, xs, ys)
    return _subordinate_batch(lambda u: base(u + t), cfg, _prefactor)


def riesz_kernel(nu, j: int, x, y, cfg: QuadratureConfig = None,
                 _prefactor: float = INV_SQRT_PREFACTOR) -> float:
    """Off-diagonal kernel of the Riesz transform delta_j L^{-1/2}."""
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    xp, yp = _check_offdiag(nu, x, y)
    cfg = cfg or _DEFAULT_CFG
    return _subordinate(_delta_heat_t_array(nu, j, xp, yp), cfg, _prefactor)


def riesz_conjugate_kernel(nu, j: int, x, y, cfg: QuadratureConfig = None,
                           _prefactor: float = INV_SQRT_PREFACTOR) -> float:
    """Kernel of delta_j^* (L_{nu+e_j} + 2)^{-1/2} (the conjugate transform).

    Base order nu + e_j with spectral shift 2, so the heat factor carries
    e^{-2t} and the ladder lands back at order nu.
    """
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    xp, yp = _check_offdiag(nu, x, y)
    mu = nu.shifted(j, +1)
    cfg = cfg or _DEFAULT_CFG
    return _subordinate(_delta_star_heat_t_array(mu, j, xp, yp, shift=2.0),
                        cfg, _prefactor)


def riesz_smoothed_kernel(nu, j: int, t: float, x, y,
                          cfg: QuadratureConfig = None,
                          _prefactor: float = INV_SQRT_PREFACTOR) -> float:
    """Kernel of delta_j L^{-1/2} e^{-tL}: shifted-time subordination.

    Reduces to riesz_kernel at t = 0 (where x = y is again singular).
    """
    nu = nu if isinstance(nu, NuIndex) else NuIndex(nu)
    if not 0 <= j < nu.n:
        raise DomainError(f"axis {j} out of range")
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0:
        return riesz_kernel(nu, j, x, y, cfg, _prefactor)
    xp, yp = _as_points(nu, x, y)
    cfg = cfg or _DEFAULT_CFG
    base = _delta_heat_t_array(nu, j, xp, yp)
    return _subordinate(lambda u: base(u + t), cfg, _prefactor)
