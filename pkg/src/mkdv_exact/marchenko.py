"""Sylvester and Lyapunov solves behind the separable Marchenko equation.

For a triplet (A, B, C) the three matrices

    P  with  A P + P A   = B C
    Q  with  A^T Q + Q A = C^T C
    N  with  A N + N A^T = B B^T

carry everything the solution formulas need. They are computed by a dense
Kronecker solve; an independent route integrates their defining
semi-infinite integrals with composite Gauss-Legendre quadrature.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NotUniquelySolvableError, QuadratureError, SingularMatrixError
from .matcore import expm, lu_solve, norm1

__all__ = [
    "MarchenkoSolutions",
    "solve_matrix_equation",
    "solve_all",
    "quadrature_oracle",
    "decay_panels",
    "refine_solution",
]

DECAY_REL = 1e-16
GL_ORDER = 16
MAX_PANELS = 4096


def solve_matrix_equation(L, R, rhs):
    """Solve ``L X + X R = rhs`` for X by Kronecker vectorization.

    With column-stacking ``vec``, the equation is the ordinary system
    ``(I kron L + R^T kron I) vec(X) = vec(rhs)`` of order p**2, solved by
    LU. The cost is O(p**6), which is nothing at the orders used here.

    Raises
    ------
    NotUniquelySolvableError
        When the Kronecker operator is singular, i.e. the spectra of L and
        -R intersect.
    """
    L = np.asarray(L, dtype=float)
    R = np.asarray(R, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    p = L.shape[0]
    if L.shape != (p, p) or R.shape != (p, p) or rhs.shape != (p, p):
        raise ValueError(f"shape mismatch: L {L.shape}, R {R.shape}, rhs {rhs.shape}")
    eye = np.eye(p)
    # entry [(j, i), (l, k)] = eye[j, l] L[i, k] + R[l, j] eye[i, k]
    op = (eye[:, None, :, None] * L[None, :, None, :]
          + R.T[:, None, :, None] * eye[None, :, None, :]).reshape(p * p, p * p)
    try:
        x = lu_solve(op, rhs.reshape(-1, 1, order="F"))
    except SingularMatrixError as exc:
        raise NotUniquelySolvableError(
            f"equation L X + X R = RHS is not uniquely solvable ({exc})"
        ) from None
    return x.reshape(p, p, order="F")


@dataclass(frozen=True)
class MarchenkoSolutions:
    """P, Q, N for one triplet.

    Q and N are stored symmetrized; ``q_asymmetry`` and ``n_asymmetry`` keep
    the relative size of the antisymmetric part that was discarded.
    """

    P: np.ndarray
    Q: np.ndarray
    N: np.ndarray
    q_asymmetry: float = 0.0
    n_asymmetry: float = 0.0

    def residuals(self, triplet):
        """Relative residuals of the three defining equations and of N Q = P^2."""
        A, B, C = triplet.A, triplet.B, triplet.C
        P, Q, N = self.P, self.Q, self.N

        def rel(res, ref):
            scale = np.abs(ref).max()
            return float(np.abs(res).max() / scale) if scale else float(np.abs(res).max())

        bc = B @ C
        ctc = C.T @ C
        bbt = B @ B.T
        p2 = P @ P
        return {
            "sylvester": rel(A @ P + P @ A - bc, bc),
            "lyapunov_q": rel(A.T @ Q + Q @ A - ctc, ctc),
            "lyapunov_n": rel(A @ N + N @ A.T - bbt, bbt),
            "nq_p2": rel(N @ Q - p2, p2),
        }


def _rel_asym(x):
    scale = np.abs(x).max()
    return float(np.abs(x - x.T).max() / scale) if scale else 0.0


def solve_all(triplet):
    """Solve for P, Q and N.

    The triplet is expected to have passed admissibility checking; a
    singular Kronecker system still surfaces as NotUniquelySolvableError.
    """
    A, B, C = triplet.A, triplet.B, triplet.C
    P = solve_matrix_equation(A, A, B @ C)
    Q = solve_matrix_equation(A.T, A, C.T @ C)
    N = solve_matrix_equation(A, A.T, B @ B.T)
    return MarchenkoSolutions(
        P=P,
        Q=(Q + Q.T) / 2,
        N=(N + N.T) / 2,
        q_asymmetry=_rel_asym(Q),
        n_asymmetry=_rel_asym(N),
    )


def refine_solution(L, R, rhs, X, dtype=np.longdouble, steps=2, accept=1e-10):
    """Mixed-precision iterative refinement of a solution of ``L X + X R = rhs``.

    Residuals are formed in `dtype` and corrected with the float64
    Kronecker solve. Refinement is only a precision upgrade: if the starting
    residual is larger than ``accept`` relative to `rhs`, X is returned
    unchanged (cast to `dtype`) so that a deliberately perturbed input stays
    perturbed.
    """
    Lw = np.asarray(L).astype(dtype)
    Rw = np.asarray(R).astype(dtype)
    rhs_w = np.asarray(rhs).astype(dtype)
    Xw = np.asarray(X).astype(dtype)
    scale = float(np.abs(rhs_w).max()) or 1.0
    for _ in range(steps):
        res = rhs_w - (Lw @ Xw + Xw @ Rw)
        err = float(np.abs(res).max()) / scale
        if err > accept or err == 0.0:
            break
        Xw = Xw + solve_matrix_equation(L, R, res.astype(float)).astype(dtype)
    return Xw


@lru_cache(maxsize=8)
def _gauss_legendre(order):
    nodes, weights = leggauss(order)
    return (nodes + 1.0) / 2.0, weights / 2.0


def panel_width(A):
    """Default panel width: one unit of the fastest exponential scale of A."""
    nrm = float(norm1(np.asarray(A, dtype=float)))
    return 1.0 / nrm if nrm > 0 else 1.0


def decay_panels(size_at, start, width, order=GL_ORDER, max_panels=MAX_PANELS,
                 rel=DECAY_REL):
    """Composite Gauss-Legendre nodes on ``[start, inf)`` truncated by decay.

    Panels of length `width` are laid down one after another. `size_at` maps
    an array of abscissae to the integrand's max-norm at each; panels stop
    after the first one whose largest value is below ``rel`` times the value
    at `start`.

    Returns
    -------
    nodes, weights : ndarray

    Raises
    ------
    QuadratureError
        If `max_panels` panels do not reach the decay bound.
    """
    unit_nodes, unit_weights = _gauss_legendre(order)
    ref = float(np.max(size_at(np.array([start]))))
    if ref == 0.0:
        raise QuadratureError("integrand vanishes at the lower limit")
    nodes, weights = [], []
    for k in range(max_panels):
        a = start + k * width
        xs = a + width * unit_nodes
        nodes.append(xs)
        weights.append(width * unit_weights)
        if np.max(size_at(xs)) < rel * ref:
            return np.concatenate(nodes), np.concatenate(weights)
    raise QuadratureError(
        f"integrand did not decay below {rel:g} of its initial size within "
        f"{max_panels} panels of width {width:.4g}"
    )


def _integrand(triplet, which):
    A, B, C = triplet.A, triplet.B, triplet.C
    if which == "P":
        left, mid, right = (lambda e: e), B @ C, (lambda e: e)
    elif which == "Q":
        left, mid, right = (lambda e: np.swapaxes(e, -1, -2)), C.T @ C, (lambda e: e)
    elif which == "N":
        left, mid, right = (lambda e: e), B @ B.T, (lambda e: np.swapaxes(e, -1, -2))
    else:
        raise ValueError(f"which must be 'P', 'Q' or 'N', got {which!r}")

    def f(s):
        e = expm(-np.asarray(s)[:, None, None] * A)
        return left(e) @ mid @ right(e)

    return f


def quadrature_oracle(triplet, which, max_panels=MAX_PANELS, order=GL_ORDER):
    """Integrate the defining integral of P, Q or N over ``[0, inf)``.

    ``P = int e^{-As} B C e^{-As} ds``, ``Q = int e^{-A^T s} C^T C e^{-As} ds``
    and ``N = int e^{-As} B B^T e^{-A^T s} ds``. Only meaningful when A is
    positive stable. The result is independent of the Kronecker solve in
    :func:`solve_all` and is used to cross-check it.
    """
    f = _integrand(triplet, which)
    nodes, weights = decay_panels(
        lambda s: np.abs(f(s)).max(axis=(-2, -1)),
        0.0, panel_width(triplet.A), order=order, max_panels=max_panels,
    )
    vals = f(nodes)
    return np.tensordot(weights, vals, axes=(0, 0))
