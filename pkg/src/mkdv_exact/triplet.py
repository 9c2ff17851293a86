"""Matrix triplets (A, B, C): construction, validation, canonical blocks.

A triplet realizes the Marchenko kernel ``Omega(y) = C e^{-Ay} B``. It is
usable when it is minimal (full-rank observability and controllability
matrices), when A is positive stable, and when the Sylvester operator
``X -> A X + X A`` is nonsingular. All three are tested without computing
eigenvalues.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NotUniquelySolvableError
from .marchenko import solve_matrix_equation
from .matcore import as_mat, cholesky_pd, rank

__all__ = [
    "Triplet",
    "RealBlock",
    "ComplexBlock",
    "ValidationReport",
    "check_minimality",
    "check_positive_stable",
    "check_admissible",
    "canonical_real_block",
    "canonical_complex_block",
    "assemble_canonical",
]

RANK_TOL = 1e-10


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Triplet:
    """Real matrices A (p x p), B (p x 1), C (1 x p)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_mat(self.A, "A")
        B = as_mat(self.B, "B")
        C = as_mat(self.C, "C")
        p = A.shape[0]
        if A.shape != (p, p) or p == 0:
            raise ValueError(f"A must be square and nonempty, got {A.shape}")
        if B.shape != (p, 1):
            raise ValueError(f"B must be {p}x1, got {B.shape[0]}x{B.shape[1]}")
        if C.shape != (1, p):
            raise ValueError(f"C must be 1x{p}, got {C.shape[0]}x{C.shape[1]}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))

    @property
    def p(self):
        return self.A.shape[0]

    def to_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}

    def similar(self, S):
        """The equivalent triplet (S A S^-1, S B, C S^-1)."""
        S = as_mat(S, "S")
        Sinv = np.linalg.inv(S)
        return Triplet(S @ self.A @ Sinv, S @ self.B, self.C @ Sinv)


@dataclass
class ValidationReport:
    observability_rank: int
    controllability_rank: int
    minimal: bool
    positive_stable: bool
    sylvester_solvable: bool
    messages: list = field(default_factory=list)

    @property
    def ok(self):
        return self.minimal and self.positive_stable and self.sylvester_solvable

    def to_dict(self):
        return {
            "observability_rank": self.observability_rank,
            "controllability_rank": self.controllability_rank,
            "minimal": self.minimal,
            "positive_stable": self.positive_stable,
            "sylvester_solvable": self.sylvester_solvable,
            "ok": self.ok,
            "messages": list(self.messages),
        }


def check_minimality(t, tol=RANK_TOL):
    """Ranks of ``[C; CA; ...; CA^{p-1}]`` and ``[B, AB, ..., A^{p-1}B]``.

    The triplet is minimal iff both equal p.
    """
    A = t.A
    obs = [t.C]
    ctr = [t.B]
    for _ in range(t.p - 1):
        obs.append(obs[-1] @ A)
        ctr.append(A @ ctr[-1])
    return rank(np.vstack(obs), tol), rank(np.hstack(ctr), tol)


def _positive_stable(A):
    p = A.shape[0]
    try:
        X = solve_matrix_equation(A.T, A, np.eye(p))
    except NotUniquelySolvableError:
        return False, "Lyapunov equation A^T X + X A = I is not uniquely solvable"
    X = (X + X.T) / 2
    if cholesky_pd(X) is None:
        return False, "A is not positive stable (Lyapunov solution of A^T X + X A = I is not positive definite)"
    return True, None


def check_positive_stable(t):
    """True iff every eigenvalue of A has positive real part.

    Decided by solving ``A^T X + X A = I`` and testing X for positive
    definiteness.
    """
    return _positive_stable(t.A)[0]


def check_admissible(t, tol=RANK_TOL):
    """Validate minimality, positive stability and Sylvester solvability.

    Sylvester solvability is nonsingularity of the Kronecker sum
    ``I kron A + A^T kron I``, which fails exactly when A has a purely
    imaginary eigenvalue or two eigenvalues symmetric about the imaginary
    axis.
    """
    obs_rank, ctr_rank = check_minimality(t, tol)
    messages = []
    minimal = obs_rank == t.p and ctr_rank == t.p
    if obs_rank < t.p:
        messages.append(f"not observable: rank [C; CA; ...] = {obs_rank} < {t.p}")
    if ctr_rank < t.p:
        messages.append(f"not controllable: rank [B, AB, ...] = {ctr_rank} < {t.p}")
    stable, msg = _positive_stable(t.A)
    if msg:
        messages.append(msg)
    try:
        solve_matrix_equation(t.A, t.A, t.B @ t.C)
        solvable = True
    except NotUniquelySolvableError:
        solvable = False
        messages.append(
            "Sylvester equation A P + P A = B C is singular: eigenvalues symmetric "
            "about imaginary axis (or purely imaginary)"
        )
    return ValidationReport(obs_rank, ctr_rank, minimal, stable, solvable, messages)


@dataclass(frozen=True)
class RealBlock:
    """Jordan block for a real eigenvalue ``omega > 0``; ``c = (c_1, ..., c_n)``."""

    omega: float
    c: Sequence[float]

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if not self.omega > 0:
            raise ValueError(f"real block needs omega > 0, got {self.omega}")
        if not self.c:
            raise ValueError("real block needs at least one norming constant")
        if self.c[-1] == 0:
            raise ValueError("real block needs a nonzero last norming constant c_n")

    @property
    def size(self):
        return len(self.c)


@dataclass(frozen=True)
class ComplexBlock:
    """Block for the eigenvalue pair ``alpha +- i beta`` with ``alpha > 0``."""

    alpha: float
    beta: float
    gamma: Sequence[float]
    epsilon: Sequence[float]

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(v) for v in self.gamma))
        object.__setattr__(self, "epsilon", tuple(float(v) for v in self.epsilon))
        if not self.alpha > 0:
            raise ValueError(f"complex block needs alpha > 0, got {self.alpha}")
        if len(self.gamma) != len(self.epsilon) or not self.gamma:
            raise ValueError("gamma and epsilon must be nonempty and of equal length")
        if self.gamma[-1] ** 2 + self.epsilon[-1] ** 2 == 0:
            raise ValueError("complex block needs gamma_n**2 + epsilon_n**2 > 0")

    @property
    def size(self):
        return 2 * len(self.gamma)


def canonical_real_block(omega, c):
    """Bidiagonal ``A_j`` (omega on the diagonal, -1 above), ``B_j = e_n``,
    ``C_j = (c_n, ..., c_1)``."""
    blk = RealBlock(omega, c)
    n = blk.size
    A = omega * np.eye(n) - np.eye(n, k=1)
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    C = np.array([blk.c[::-1]], dtype=float)
    return A, B, C


def canonical_complex_block(alpha, beta, gamma, epsilon):
    """Block-bidiagonal ``A_j`` with ``[[alpha, beta], [-beta, alpha]]`` on the
    diagonal and ``-I_2`` above it. C interleaves gamma and epsilon from the
    highest index down."""
    blk = ComplexBlock(alpha, beta, gamma, epsilon)
    n = len(blk.gamma)
    lam = np.array([[alpha, beta], [-beta, alpha]], dtype=float)
    A = np.kron(np.eye(n), lam) - np.eye(2 * n, k=2)
    B = np.zeros((2 * n, 1))
    B[-1, 0] = 1.0
    C = np.array([[v for pair in zip(blk.gamma[::-1], blk.epsilon[::-1]) for v in pair]])
    return A, B, C


def _eigen_keys(blk):
    if isinstance(blk, RealBlock):
        return {(float(blk.omega), 0.0)}
    return {(float(blk.alpha), abs(float(blk.beta)))}


def assemble_canonical(blocks):
    """Block-diagonal A, stacked B and concatenated C from block specs.

    Eigenvalues are compared exactly on the block parameters; any repeat
    raises ValueError.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    seen = set()
    parts = []
    for blk in blocks:
        keys = _eigen_keys(blk)
        if keys & seen:
            raise ValueError(f"duplicate eigenvalue across blocks: {blk}")
        seen |= keys
        if isinstance(blk, RealBlock):
            parts.append(canonical_real_block(blk.omega, blk.c))
        elif isinstance(blk, ComplexBlock):
            parts.append(canonical_complex_block(blk.alpha, blk.beta, blk.gamma, blk.epsilon))
        else:
            raise TypeError(f"not a block spec: {blk!r}")
    p = sum(a.shape[0] for a, _, _ in parts)
    A = np.zeros((p, p))
    i = 0
    for a, _, _ in parts:
        n = a.shape[0]
        A[i:i + n, i:i + n] = a
        i += n
    B = np.vstack([b for _, b, _ in parts])
    C = np.hstack([c for _, _, c in parts])
    return Triplet(A, B, C)
