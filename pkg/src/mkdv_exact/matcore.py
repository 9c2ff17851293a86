"""Dense real linear algebra for small matrices.

Matrices are plain float64 ``numpy.ndarray`` objects. Most routines accept a
stack of matrices with shape ``(..., n, n)`` so that a whole grid of
evaluation points can be pushed through one call; the per-matrix work is
what you would expect for orders up to a few dozen.

No eigenvalue solver lives here. Spectral questions are answered elsewhere
through Lyapunov positive definiteness and Kronecker-system nonsingularity.
"""

from math import factorial

import numpy as np

from .errors import NumericRangeError, SingularMatrixError

__all__ = [
    "as_mat",
    "expm",
    "lu_factor",
    "lu_solve",
    "cholesky_pd",
    "rank",
    "log_abs_det",
    "norm1",
]

# Diagonal (6,6) Pade coefficients for exp.
_PADE_ORDER = 6
_PADE = tuple(
    factorial(2 * _PADE_ORDER - k) * factorial(_PADE_ORDER)
    / (factorial(2 * _PADE_ORDER) * factorial(k) * factorial(_PADE_ORDER - k))
    for k in range(_PADE_ORDER + 1)
)
_SCALED_NORM = 0.5
# Tighter radius when working in extended precision; the (6,6) error
# constant times 0.25**13 is below 1e-20.
_SCALED_NORM_EXT = 0.25


def _real_array(a):
    """Float array preserving float64/longdouble; anything else becomes float64."""
    a = np.asarray(a)
    if a.dtype == np.longdouble or a.dtype == np.float64:
        return a
    return a.astype(float)


def _eps(dtype):
    return float(np.finfo(dtype).eps)


def as_mat(a, name="matrix"):
    """Return `a` as a finite 2-D float64 array, raising ValueError otherwise."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {m.ndim}-D")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _check_square(m, name="matrix"):
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def norm1(m):
    """Induced 1-norm (max column sum), stacked over leading axes."""
    return np.abs(m).sum(axis=-2).max(axis=-1)


def expm(m):
    """Matrix exponential by scaling and squaring with a (6,6) Pade approximant.

    The squaring count ``s`` is the smallest integer with
    ``||M||_1 / 2**s <= 0.5``; at that radius the Pade truncation error is
    far below double-precision rounding. Stacks of matrices are handled with
    per-matrix ``s``.

    Parameters
    ----------
    m : array_like, shape (..., n, n)

    Returns
    -------
    ndarray, shape (..., n, n)

    Raises
    ------
    ValueError
        If `m` is not square.
    NumericRangeError
        If any entry of the result is not finite.

    Notes
    -----
    ``np.longdouble`` input is kept in extended precision, with the scaled
    norm bound tightened to 0.25 so the approximant matches the finer
    rounding unit.
    """
    m = _real_array(m)
    _check_square(m)
    n = m.shape[-1]
    if n == 0:
        return m.copy()

    theta = _SCALED_NORM if _eps(m.dtype) > 1e-17 else _SCALED_NORM_EXT
    nrm = norm1(m).astype(float)
    s = np.where(nrm > theta, np.ceil(np.log2(np.maximum(nrm, theta) / theta)), 0.0)
    s = s.astype(int)
    x = m / np.ldexp(1.0, s)[..., None, None].astype(m.dtype)

    eye = np.broadcast_to(np.eye(n), x.shape)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    b = _PADE
    u = x @ (b[1] * eye + b[3] * x2 + b[5] * x4)
    v = b[0] * eye + b[2] * x2 + b[4] * x4 + b[6] * x6
    r = lu_solve(v - u, v + u)

    smax = int(s.max()) if s.size else 0
    # overflow is reported below as NumericRangeError, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        if s.ndim == 0:
            for _ in range(smax):
                r = r @ r
        else:
            for i in range(smax):
                active = s > i
                if active.all():
                    r = r @ r
                else:
                    r = np.where(active[..., None, None], r @ r, r)
                if not np.all(np.isfinite(r)):
                    break
    if not np.all(np.isfinite(r)):
        raise NumericRangeError(
            f"matrix exponential overflowed (input 1-norm up to {float(np.max(nrm)):.6g})"
        )
    return r


def _equilibrate(a):
    # Power-of-two row then column scaling; exact in floating point.
    rmax = np.abs(a).max(axis=-1)
    if np.any(rmax == 0):
        raise SingularMatrixError("matrix has a zero row")
    rs = np.ldexp(1.0, -np.frexp(rmax)[1])
    a = a * rs[..., :, None]
    cmax = np.abs(a).max(axis=-2)
    if np.any(cmax == 0):
        raise SingularMatrixError("matrix has a zero column")
    cs = np.ldexp(1.0, -np.frexp(cmax)[1])
    return a * cs[..., None, :], rs, cs


def lu_factor(m, tol=None):
    """LU factorization with partial pivoting on an equilibrated copy of `m`.

    Rows and columns are first scaled by powers of two so that the largest
    magnitude in each is in ``[0.5, 1)``. A pivot whose magnitude is at or
    below ``tol`` (default ``n * eps`` of the working dtype) marks the
    matrix singular.

    Returns
    -------
    lu : ndarray (..., n, n)
        Unit-lower and upper factors packed together.
    perm : ndarray of int (..., n)
        Row permutation; row ``i`` of the factored matrix is row ``perm[i]``
        of the scaled input.
    rs, cs : ndarray (..., n)
        Row and column scale factors.
    """
    m = _real_array(m)
    _check_square(m)
    n = m.shape[-1]
    if tol is None:
        tol = n * _eps(m.dtype)
    batch = m.shape[:-2]
    a, rs, cs = _equilibrate(m)
    if not batch and a.dtype == np.float64:
        lu, perm = _lu_2d(a, tol)
        return lu, perm, rs, cs
    a = a.reshape(-1, n, n).copy()
    k_count = a.shape[0]
    idx = np.arange(k_count)
    perm = np.tile(np.arange(n), (k_count, 1))
    for k in range(n):
        r = np.argmax(np.abs(a[:, k:, k]), axis=1) + k
        swap = r != k
        if swap.any():
            rows = idx[swap]
            rk = r[swap]
            tmp = a[rows, k].copy()
            a[rows, k] = a[rows, rk]
            a[rows, rk] = tmp
            ptmp = perm[rows, k].copy()
            perm[rows, k] = perm[rows, rk]
            perm[rows, rk] = ptmp
        piv = a[:, k, k]
        bad = ~(np.abs(piv) > tol)
        if bad.any():
            raise SingularMatrixError(
                f"pivot {k} below tolerance {tol:.3g} in {int(bad.sum())} of {k_count} matrices"
            )
        if k + 1 < n:
            l = a[:, k + 1:, k] / piv[:, None]
            a[:, k + 1:, k] = l
            a[:, k + 1:, k + 1:] -= l[:, :, None] * a[:, k, None, k + 1:]
    return a.reshape(batch + (n, n)), perm.reshape(batch + (n,)), rs, cs


_SMALL = 16


def _lu_small(a, tol):
    # Plain floats beat numpy call overhead at these orders.
    n = a.shape[0]
    rows = a.tolist()
    perm = list(range(n))
    for k in range(n):
        r = max(range(k, n), key=lambda i: abs(rows[i][k]))
        if r != k:
            rows[k], rows[r] = rows[r], rows[k]
            perm[k], perm[r] = perm[r], perm[k]
        pk = rows[k]
        piv = pk[k]
        if not abs(piv) > tol:
            raise SingularMatrixError(f"pivot {k} below tolerance {tol:.3g}")
        for i in range(k + 1, n):
            ri = rows[i]
            f = ri[k] / piv
            if f != 0.0:
                for j in range(k + 1, n):
                    ri[j] -= f * pk[j]
            ri[k] = f
    return np.array(rows), np.array(perm)


def _lu_2d(a, tol):
    n = a.shape[0]
    if n <= _SMALL:
        return _lu_small(a, tol)
    perm = np.arange(n)
    for k in range(n):
        r = k + int(np.argmax(np.abs(a[k:, k])))
        if r != k:
            a[[k, r]] = a[[r, k]]
            perm[[k, r]] = perm[[r, k]]
        piv = a[k, k]
        if not abs(piv) > tol:
            raise SingularMatrixError(f"pivot {k} below tolerance {tol:.3g}")
        if k + 1 < n:
            a[k + 1:, k] /= piv
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return a, perm


def _lu_solve_2d(lu, perm, rs, cs, rhs):
    n = lu.shape[0]
    if n <= _SMALL:
        return _lu_solve_small(lu, perm, rs, cs, rhs)
    y = (rhs * rs[:, None])[perm]
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] -= lu[i, i + 1:] @ y[i + 1:]
        y[i] /= lu[i, i]
    return y * cs[:, None]


def _lu_solve_small(lu, perm, rs, cs, rhs):
    n = lu.shape[0]
    L = lu.tolist()
    y = (rhs * rs[:, None])[perm].T.tolist()
    for col in y:
        for i in range(1, n):
            Li = L[i]
            col[i] -= sum(Li[j] * col[j] for j in range(i))
        for i in range(n - 1, -1, -1):
            Li = L[i]
            col[i] = (col[i] - sum(Li[j] * col[j] for j in range(i + 1, n))) / Li[i]
    return np.array(y).T * cs[:, None]


def lu_solve(m, rhs, tol=None):
    """Solve ``m @ X = rhs`` by LU with partial pivoting.

    `m` may be a stack ``(..., n, n)``; `rhs` is ``(..., n, k)`` and is
    broadcast against the stack.

    Raises
    ------
    SingularMatrixError
        If a pivot is below working precision.
    """
    m = _real_array(m)
    rhs = _real_array(rhs)
    if rhs.dtype != m.dtype:
        dt = np.result_type(m, rhs)
        m, rhs = m.astype(dt), rhs.astype(dt)
    _check_square(m)
    n = m.shape[-1]
    if rhs.ndim < 2 or rhs.shape[-2] != n:
        raise ValueError(f"right-hand side shape {rhs.shape} incompatible with order {n}")
    lu, perm, rs, cs = lu_factor(m, tol)
    if lu.ndim == 2 and rhs.ndim == 2 and lu.dtype == np.float64:
        return _lu_solve_2d(lu, perm, rs, cs, rhs)
    batch = np.broadcast_shapes(lu.shape[:-2], rhs.shape[:-2])
    lu = np.broadcast_to(lu, batch + (n, n))
    perm = np.broadcast_to(perm, batch + (n,))
    rs = np.broadcast_to(rs, batch + (n,))
    cs = np.broadcast_to(cs, batch + (n,))
    y = np.broadcast_to(rhs, batch + rhs.shape[-2:]) * rs[..., :, None]
    y = np.take_along_axis(y, perm[..., :, None], axis=-2).copy()
    for i in range(1, n):
        y[..., i, :] -= np.einsum("...j,...jk->...k", lu[..., i, :i], y[..., :i, :])
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            y[..., i, :] -= np.einsum("...j,...jk->...k", lu[..., i, i + 1:], y[..., i + 1:, :])
        y[..., i, :] /= lu[..., i, i][..., None]
    return y * cs[..., :, None]


def log_abs_det(m, tol=None):
    """``log|det m|`` from the LU diagonal; never forms the determinant."""
    lu, _, rs, cs = lu_factor(m, tol)
    diag = np.abs(np.diagonal(lu, axis1=-2, axis2=-1))
    # scales are float64 powers of two; take their logs in the LU dtype
    rs = rs.astype(lu.dtype)
    cs = cs.astype(lu.dtype)
    return (np.log(diag).sum(axis=-1)
            - np.log(rs).sum(axis=-1) - np.log(cs).sum(axis=-1))


def cholesky_pd(m, sym_tol=1e-12):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Returns ``None`` when a non-positive pivot shows up, i.e. when `m` is not
    positive definite. Raises ValueError when `m` is not symmetric to within
    ``sym_tol * max|m|``.
    """
    m = as_mat(m)
    _check_square(m)
    scale = np.abs(m).max() if m.size else 0.0
    if np.abs(m - m.T).max(initial=0.0) > sym_tol * scale:
        raise ValueError("cholesky_pd needs a symmetric matrix")
    n = m.shape[0]
    low = np.zeros_like(m)
    for j in range(n):
        d = m[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0.0:
            return None
        low[j, j] = np.sqrt(d)
        low[j + 1:, j] = (m[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def rank(m, tol=1e-10):
    """Numerical rank by Gaussian elimination with complete pivoting.

    Entries below ``tol`` times the largest initial pivot (the max-abs entry
    of `m`) count as zero.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    a = as_mat(m).copy()
    if a.size == 0:
        return 0
    cutoff = tol * np.abs(a).max()
    if cutoff == 0.0:
        return 0
    r = 0
    rows, cols = a.shape
    while r < min(rows, cols):
        sub = np.abs(a[r:, r:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= cutoff:
            break
        i += r
        j += r
        a[[r, i]] = a[[i, r]]
        a[:, [r, j]] = a[:, [j, r]]
        a[r + 1:, r:] -= np.outer(a[r + 1:, r] / a[r, r], a[r, r:])
        r += 1
    return r

