"""
Foundational numerics: complementary error function, binary entropy, extreme eigenvalues
of small symmetric matrices, oscillator wavefunctions and tail quadrature.

erfc
    Scalar port of FreeBSD's s_erf.c (SunPro, 1993). Rational approximations on
    |x| < 0.84375, [0.84375, 1.25), [1.25, 1/0.35) and [1/0.35, 28); the last two use the
    exp(-z^2 - 0.5625) * exp((z - x)(z + x) + R/S) split with z equal to x truncated to its
    high 32 bits, which keeps the exponent exact. The published error bound is below one
    ulp of the result, so the absolute error is far below 1e-12 everywhere. Results do not
    depend on the platform libm apart from exp.

Wavefunctions use the variance-1/4 convention x = (a + a^dagger)/2:
    psi_0(x) = (2/pi)^(1/4) exp(-x^2)
    psi_{n+1}(x) = 2x/sqrt(n+1) psi_n(x) - sqrt(n/(n+1)) psi_{n-1}(x)
"""

import logging
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from exceptions import AccuracyError, ConvergenceError, DomainError
from optimization_config import EIGEN_CONFIG, QUADRATURE_CONFIG

logger = logging.getLogger(__name__)

N_MAX_SUPPORTED = 200

# s_erf.c coefficient tables, lowest order first
_ERX = 8.45062911510467529297e-01
_PP = (1.28379167095512558561e-01, -3.25042107247001499370e-01, -2.84817495755985104766e-02,
       -5.77027029648944159157e-03, -2.37630166566501626084e-05)
_QQ = (1.0, 3.97917223959155352819e-01, 6.50222499887672944485e-02, 5.08130628187576562776e-03,
       1.32494738004321644526e-04, -3.96022827877536812320e-06)
_PA = (-2.36211856075265944077e-03, 4.14856118683748331666e-01, -3.72207876035701323847e-01,
       3.18346619901161753674e-01, -1.10894694282396677476e-01, 3.54783043256182359371e-02,
       -2.16637559486879084300e-03)
_QA = (1.0, 1.06420880400844228286e-01, 5.40397917702171048937e-01, 7.18286544141962662868e-02,
       1.26171219808761642112e-01, 1.36370839120290507362e-02, 1.19844998467991074170e-02)
_RA = (-9.86494403484714822705e-03, -6.93858572707181764372e-01, -1.05586262253232909814e01,
       -6.23753324503260060396e01, -1.62396669462573470355e02, -1.84605092906711035994e02,
       -8.12874355063065934246e01, -9.81432934416914548592e00)
_SA = (1.0, 1.96512716674392571292e01, 1.37657754143519042600e02, 4.34565877475229228821e02,
       6.45387271733267880336e02, 4.29008140027567833386e02, 1.08635005541779435134e02,
       6.57024977031928170135e00, -6.04244152148580987438e-02)
_RB = (-9.86494292470009928597e-03, -7.99283237680523006574e-01, -1.77579549177547519889e01,
       -1.60636384855821916062e02, -6.37566443368389627722e02, -1.02509513161107724954e03,
       -4.83519191608651397019e02)
_SB = (1.0, 3.03380607434824582924e01, 3.25792512996573918826e02, 1.53672958608443695994e03,
       3.19985821950859553908e03, 2.55305040643316442583e03, 4.74528541206955367215e02,
       -2.24409524465858183362e01)

_HIGH_WORD_MASK = np.uint64(0xFFFFFFFF00000000)


def _clear_low_word(x: float) -> float:
    bits = np.array([x], dtype=np.float64).view(np.uint64)
    return float((bits & _HIGH_WORD_MASK).view(np.float64)[0])


def erfc(x: float) -> float:
    """Complementary error function 2/sqrt(pi) * integral_x^inf exp(-t^2) dt."""
    x = float(x)
    if not np.isfinite(x):
        raise DomainError(f"erfc requires a finite argument, got {x}", value=x)

    ax = abs(x)
    if ax < 0.84375:
        if ax < 2.0 ** -56:
            return 1.0 - x
        z = x * x
        y = P.polyval(z, _PP) / P.polyval(z, _QQ)
        if x < 0.25:
            return 1.0 - (x + x * y)
        return 0.5 - (x * y + (x - 0.5))

    if ax < 1.25:
        s = ax - 1.0
        ratio = P.polyval(s, _PA) / P.polyval(s, _QA)
        if x >= 0.0:
            return (1.0 - _ERX) - ratio
        return 1.0 + (_ERX + ratio)

    if ax < 28.0:
        if x < -6.0:
            return 2.0
        s = 1.0 / (ax * ax)
        if ax < 1.0 / 0.35:
            r_over_s = P.polyval(s, _RA) / P.polyval(s, _SA)
        else:
            r_over_s = P.polyval(s, _RB) / P.polyval(s, _SB)
        z = _clear_low_word(ax)
        r = np.exp(-z * z - 0.5625) * np.exp((z - ax) * (z + ax) + r_over_s)
        if x > 0.0:
            return float(r / ax)
        return float(2.0 - r / ax)

    return 0.0 if x > 0.0 else 2.0


def binary_entropy(e):
    """-e log2 e - (1-e) log2 (1-e) with 0 log 0 = 0; accepts scalars or arrays."""
    arr = np.asarray(e, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("binary entropy needs arguments in [0, 1]", value=e)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = (-np.where(arr > 0.0, arr * np.log2(arr), 0.0)
             - np.where(arr < 1.0, (1.0 - arr) * np.log2(1.0 - arr), 0.0))
    if h.ndim == 0:
        return float(h)
    return h


def _eig_2x2(a: np.ndarray) -> np.ndarray:
    half_trace = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
    radius = np.hypot(0.5 * (a[..., 0, 0] - a[..., 1, 1]), a[..., 0, 1])
    return np.stack([half_trace - radius, half_trace + radius], axis=-1)


def _jacobi_eigenvalues(a: np.ndarray, rel_tol: float, max_sweeps: int) -> np.ndarray:
    """Cyclic Jacobi on a stack (batch, n, n); returns unsorted eigenvalues (batch, n)."""
    a = a.copy()
    n = a.shape[-1]
    upper_i, upper_j = np.triu_indices(n, 1)
    norm = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    threshold = rel_tol * norm

    for sweep in range(max_sweeps + 1):
        off = np.sqrt(2.0 * np.sum(a[:, upper_i, upper_j] ** 2, axis=-1))
        if np.all(off <= threshold):
            logger.debug(f"Jacobi converged after {sweep} sweeps (batch={a.shape[0]}, n={n})")
            return np.diagonal(a, axis1=-2, axis2=-1).copy()
        if sweep == max_sweeps:
            residual = float(np.max(off / np.where(norm > 0.0, norm, 1.0)))
            raise ConvergenceError("Jacobi eigensolver did not converge", residual=residual, sweeps=sweep)

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                active = np.abs(apq) > 1e-300
                if not np.any(active):
                    continue
                safe_apq = np.where(active, apq, 1.0)
                theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe_apq)
                with np.errstate(over="ignore"):
                    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(active, t, 0.0)
                c = (1.0 / np.sqrt(t * t + 1.0))[:, None]
                s = t[:, None] * c

                col_p = a[:, :, p].copy()
                col_q = a[:, :, q].copy()
                a[:, :, p] = c * col_p - s * col_q
                a[:, :, q] = s * col_p + c * col_q
                row_p = a[:, p, :].copy()
                row_q = a[:, q, :].copy()
                a[:, p, :] = c * row_p - s * row_q
                a[:, q, :] = s * row_p + c * row_q
                a[active, p, q] = 0.0
                a[active, q, p] = 0.0

    raise AssertionError("unreachable")


def sym_eig_extreme(m, which: str = "max",
                    rel_tol: float = EIGEN_CONFIG['rel_tol'],
                    max_sweeps: int = EIGEN_CONFIG['max_sweeps']):
    """
    Largest or smallest eigenvalue of a real symmetric matrix, or of each matrix in a
    stack shaped (..., n, n). Only the upper triangle is read.

    n = 2 uses the trace/discriminant closed form; n > 2 runs cyclic Jacobi rotations
    until the off-diagonal Frobenius norm is at most rel_tol times the matrix norm.
    """
    if which not in ("max", "min"):
        raise DomainError(f"which must be 'max' or 'min', got {which!r}", value=which)
    a = np.asarray(m, dtype=np.float64)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise DomainError(f"expected square matrices, got shape {a.shape}", value=a.shape)
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")

    n = a.shape[-1]
    strict_upper = np.triu(a, 1)
    a = np.triu(a) + np.swapaxes(strict_upper, -1, -2)
    batch_shape = a.shape[:-2]

    if n == 1:
        values = a[..., 0, :]
    elif n == 2:
        values = _eig_2x2(a)
    else:
        flat = a.reshape((-1, n, n))
        values = _jacobi_eigenvalues(flat, rel_tol, max_sweeps).reshape(batch_shape + (n,))

    extreme = values.max(axis=-1) if which == "max" else values.min(axis=-1)
    if extreme.ndim == 0:
        return float(extreme)
    return extreme


def hermite_psi_table(n_max: int, x) -> np.ndarray:
    """Rows psi_0..psi_{n_max} evaluated at the points x; shape (n_max + 1,) + x.shape."""
    if n_max < 0 or n_max > N_MAX_SUPPORTED:
        raise DomainError(f"wavefunction order must lie in [0, {N_MAX_SUPPORTED}], got {n_max}", value=n_max)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("wavefunction argument must be finite")

    table = np.empty((n_max + 1,) + x.shape, dtype=np.float64)
    table[0] = (2.0 / np.pi) ** 0.25 * np.exp(-x * x)
    if n_max >= 1:
        table[1] = 2.0 * x * table[0]
    for n in range(1, n_max):
        table[n + 1] = (2.0 * x / np.sqrt(n + 1.0)) * table[n] - np.sqrt(n / (n + 1.0)) * table[n - 1]
    return table


def hermite_psi(n: int, x):
    """Position wavefunction <x|n> in the variance-1/4 convention."""
    if int(n) != n:
        raise DomainError(f"wavefunction order must be an integer, got {n}", value=n)
    values = hermite_psi_table(int(n), x)[int(n)]
    if values.ndim == 0:
        return float(values)
    return values


def _gauss_legendre(f: Callable, left: float, right: float, nodes: np.ndarray, weights: np.ndarray):
    half = 0.5 * (right - left)
    points = half * nodes + 0.5 * (right + left)
    return half * (np.asarray(f(points), dtype=np.float64) @ weights)


def _find_cutoff(f: Callable, a: float, floor: float, max_blocks: int = 64) -> Optional[float]:
    """Right end where |f| has fallen below floor times its running peak; None if f == 0."""
    peak = 0.0
    offsets = np.linspace(0.0, 1.0, 33)
    for block in range(max_blocks):
        values = np.abs(np.asarray(f(a + block + offsets), dtype=np.float64))
        block_max = float(values.max()) if values.size else 0.0
        peak = max(peak, block_max)
        if peak > 0.0 and block_max < floor * peak:
            return a + block + 1.0
    if peak == 0.0:
        return None
    logger.warning(f"integrand still above the envelope floor after {max_blocks} unit blocks from {a}")
    return a + max_blocks


def integrate_tail(f: Callable, a: float,
                   rtol: float = QUADRATURE_CONFIG['rtol'],
                   nodes: int = QUADRATURE_CONFIG['nodes'],
                   panel_width: float = QUADRATURE_CONFIG['panel_width'],
                   max_depth: int = QUADRATURE_CONFIG['max_depth'],
                   envelope_floor: float = QUADRATURE_CONFIG['envelope_floor']):
    """
    Integral of f over [a, inf) for Gaussian-bounded integrands.

    f takes a 1-D array of points and returns values whose last axis runs over the
    points, so matrix-valued integrands are integrated component-wise in one pass.
    The domain is cut where |f| stays below envelope_floor of its peak; each panel of
    the remainder is bisected until a Gauss-Legendre rule and its two halves agree to
    rtol times the L1 mass, apportioned by panel width.
    """
    a = float(a)
    if not np.isfinite(a):
        raise DomainError(f"lower limit must be finite, got {a}", value=a)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(nodes)

    shape = np.asarray(f(np.array([a])), dtype=np.float64).shape[:-1]
    b = _find_cutoff(f, a, envelope_floor)
    if b is None:
        zero = np.zeros(shape)
        return float(zero) if zero.ndim == 0 else zero

    total = b - a
    edges = np.linspace(a, b, max(1, int(np.ceil(total / panel_width))) + 1)
    abs_f = lambda pts: np.abs(np.asarray(f(pts), dtype=np.float64))
    scale = float(np.max(sum(_gauss_legendre(abs_f, l, r, gl_nodes, gl_weights)
                             for l, r in zip(edges[:-1], edges[1:]))))
    if scale == 0.0:
        zero = np.zeros(shape)
        return float(zero) if zero.ndim == 0 else zero

    result = np.zeros(shape)
    worst = 0.0
    stack = [(l, r, 0, _gauss_legendre(f, l, r, gl_nodes, gl_weights)) for l, r in zip(edges[:-1], edges[1:])]
    while stack:
        left, right, depth, whole = stack.pop()
        mid = 0.5 * (left + right)
        first = _gauss_legendre(f, left, mid, gl_nodes, gl_weights)
        second = _gauss_legendre(f, mid, right, gl_nodes, gl_weights)
        halves = first + second
        error = float(np.max(np.abs(halves - whole)))
        tolerance = rtol * scale * (right - left) / total
        if error <= tolerance:
            result = result + halves
            continue
        if depth >= max_depth:
            worst = max(worst, error)
            result = result + halves
            continue
        stack.append((left, mid, depth + 1, first))
        stack.append((mid, right, depth + 1, second))

    if worst > 0.0:
        estimate = float(result) if result.ndim == 0 else result
        raise AccuracyError("tail quadrature hit its bisection depth limit", estimate=estimate, error_estimate=worst)
    return float(result) if result.ndim == 0 else result
