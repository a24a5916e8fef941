"""Procrustes relaxation and fractional powers of orthogonal matrices.

The homotopy path is built from the orthogonal matrix ``Q* = U V^T`` that
best rotates the target cloud onto the source in sample space, and from its
principal ``h``-th root, which splits that rotation into ``h`` equal steps.

Roots are computed from the real Schur form. For an orthogonal (hence
normal) matrix that form is block diagonal: 2x2 plane rotations and 1x1
blocks equal to +1 or -1. Each plane rotation by ``theta`` becomes a
rotation by ``theta / h``. Pairs of -1 blocks are joined into a half-turn in
their common plane, which keeps the root real. A single leftover -1 (the
matrix is a reflection, ``det Q = -1``) has no real even root, so it is
mapped to ``exp(i*pi/h)`` and the root is returned as a complex unitary
matrix. Callers take the real part after applying it to data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg

from ._checks import DimensionError, as_cloud, as_square

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-10
ROOT_TOL = 1e-8
OVERSAMPLING = 10
POWER_ITERATIONS = 2


class ConvergenceError(RuntimeError):
    """An SVD or Schur factorization failed to converge."""


@dataclass(frozen=True, eq=False)
class OrthogonalMatrix:
    """A square matrix ``Q`` with ``Q^H Q = I``.

    ``entries`` is real except for roots of reflections (see module notes),
    where it is complex unitary. ``warnings`` carries any branch-point note
    produced while building the matrix.
    """

    entries: np.ndarray
    warnings: tuple[str, ...] = ()
    tol: float = field(default=ORTHOGONALITY_TOL, repr=False)

    def __post_init__(self):
        q = as_square(self.entries, "orthogonal matrix")
        if np.iscomplexobj(q):
            q = q.astype(complex, copy=True)
        else:
            q = q.astype(float, copy=True)
        err = orthogonality_error(q)
        if err > self.tol:
            raise ValueError(f"matrix is not orthogonal: max |Q^H Q - I| = {err:.3e} > {self.tol:.1e}")
        q.setflags(write=False)
        object.__setattr__(self, "entries", q)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.entries)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)


@dataclass(frozen=True)
class SvdFactors:
    """Factors with ``u @ diag(sigma) @ vt`` approximating the input."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt


@dataclass(frozen=True)
class UnitSpectrum:
    """Eigenvalues on the unit circle with a unitary eigenvector matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reassemble(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True)
class RandomizedSVD:
    """Selects the sketched SVD in :func:`procrustes`."""

    k: int
    seed: int = 0


SvdMode = Union[str, RandomizedSVD]


def orthogonality_error(q: np.ndarray) -> float:
    """Max-norm of ``Q^H Q - I``."""
    q = np.asarray(q)
    gram = q.conj().T @ q
    return float(np.max(np.abs(gram - np.eye(q.shape[0]))))


def gram(x, y) -> np.ndarray:
    """Cross-Gram matrix ``y^T x`` (n x n) of two (d, n) clouds."""
    x = as_cloud(x, "x")
    y = as_cloud(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"point clouds differ in shape: {x.shape} vs {y.shape}")
    return y.T @ x


def svd_full(m) -> SvdFactors:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    return SvdFactors(u, s, vt)


def svd_randomized(m, k: int, seed: int, oversampling: int = OVERSAMPLING,
                   power_iterations: int = POWER_ITERATIONS) -> SvdFactors:
    """Rank-``k`` SVD from a seeded Gaussian sketch with power iterations.

    Returns thin factors (``u``: n x k, ``sigma``: k, ``vt``: k x n). The
    sketch width is ``k + oversampling`` capped at the matrix size, so
    ``k = n`` recovers the full decomposition.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    rows, cols = m.shape
    if not 1 <= k <= min(rows, cols):
        raise ValueError(f"rank k={k} outside [1, {min(rows, cols)}]")

    rng = np.random.default_rng(seed)
    width = min(k + oversampling, rows, cols)
    omega = rng.standard_normal((cols, width))
    try:
        basis, _ = np.linalg.qr(m @ omega)
        for _ in range(power_iterations):
            # re-orthonormalize between products to keep small directions
            basis, _ = np.linalg.qr(m.T @ basis)
            basis, _ = np.linalg.qr(m @ basis)
        u_small, s, vt = np.linalg.svd(basis.T @ m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"randomized SVD did not converge: {exc}") from exc
    u = basis @ u_small
    return SvdFactors(u[:, :k], s[:k], vt[:k])


def procrustes(m, svd_mode: SvdMode = "full") -> OrthogonalMatrix:
    """Orthogonal ``Q`` maximizing ``tr(Q^T m)``, namely ``U V^T``.

    With ``RandomizedSVD`` the rank must equal the matrix order: thinner
    factors do not give a square orthogonal matrix.
    """
    m = as_square(m, "Procrustes input").astype(float, copy=False)
    if isinstance(svd_mode, RandomizedSVD):
        if svd_mode.k != m.shape[0]:
            raise ValueError(
                f"randomized Procrustes needs k = n = {m.shape[0]}, got k={svd_mode.k}"
            )
        factors = svd_randomized(m, svd_mode.k, svd_mode.seed)
    elif svd_mode == "full":
        factors = svd_full(m)
    else:
        raise ValueError(f"unknown svd mode {svd_mode!r}")
    return OrthogonalMatrix(factors.u @ factors.vt)


def _schur_blocks(q: np.ndarray):
    """Real Schur basis plus the diagonal blocks of an orthogonal matrix.

    Yields ``(start, size, value)`` where ``value`` is the rotation angle
    for a 2x2 block and the (+1 or -1) entry for a 1x1 block.
    """
    try:
        form, basis = scipy.linalg.schur(q, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"Schur decomposition failed: {exc}") from exc
    blocks = []
    n = q.shape[0]
    k = 0
    while k < n:
        # LAPACK zeroes the subdiagonal exactly between blocks
        if k + 1 < n and form[k + 1, k] != 0.0:
            sin = 0.5 * (form[k + 1, k] - form[k, k + 1])
            cos = 0.5 * (form[k, k] + form[k + 1, k + 1])
            blocks.append((k, 2, float(np.arctan2(sin, cos))))
            k += 2
        else:
            blocks.append((k, 1, 1.0 if form[k, k] > 0 else -1.0))
            k += 1
    return basis, blocks


def unit_spectrum(q) -> UnitSpectrum:
    """Eigenvalues and unitary eigenvectors of a real orthogonal matrix."""
    q = _real_orthogonal(q)
    basis, blocks = _schur_blocks(q)
    n = q.shape[0]
    values = np.empty(n, dtype=complex)
    vectors = np.empty((n, n), dtype=complex)
    for start, size, value in blocks:
        if size == 2:
            z1, z2 = basis[:, start], basis[:, start + 1]
            values[start] = np.exp(1j * value)
            values[start + 1] = np.exp(-1j * value)
            vectors[:, start] = (z1 - 1j * z2) / np.sqrt(2.0)
            vectors[:, start + 1] = (z1 + 1j * z2) / np.sqrt(2.0)
        else:
            values[start] = value
            vectors[:, start] = basis[:, start]
    return UnitSpectrum(values, vectors)


def _real_orthogonal(q) -> np.ndarray:
    if isinstance(q, OrthogonalMatrix):
        if not q.is_real:
            raise ValueError("expected a real orthogonal matrix")
        return q.entries
    return OrthogonalMatrix(np.asarray(q, dtype=float)).entries


def _plane_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def orthogonal_root(q, h: int) -> OrthogonalMatrix:
    """Principal ``h``-th root of a real orthogonal matrix.

    The result ``r`` satisfies ``r^h = q``. It is real orthogonal unless
    ``q`` is a reflection and ``h >= 2``, in which case it is complex unitary
    and carries a warning.
    """
    if int(h) != h or h < 1:
        raise ValueError(f"root order must be a positive integer, got {h!r}")
    h = int(h)
    q = _real_orthogonal(q)
    if h == 1:
        return OrthogonalMatrix(q, tol=ROOT_TOL)

    basis, blocks = _schur_blocks(q)
    n = q.shape[0]
    core = np.zeros((n, n))
    reflections = []
    for start, size, value in blocks:
        if size == 2:
            core[start:start + 2, start:start + 2] = _plane_rotation(value / h)
        elif value > 0:
            core[start, start] = 1.0
        else:
            reflections.append(start)

    # two -1 eigenvalues form a half-turn in their plane; rotate it by pi/h
    for a, b in zip(reflections[0::2], reflections[1::2]):
        c, s = np.cos(np.pi / h), np.sin(np.pi / h)
        core[a, a], core[a, b], core[b, a], core[b, b] = c, -s, s, c

    warnings = ()
    if len(reflections) % 2:
        last = reflections[-1]
        core = core.astype(complex)
        core[last, last] = np.exp(1j * np.pi / h)
        warnings = (
            f"orthogonal matrix has det -1 (eigenvalue -1); no real {h}-th root exists, "
            f"using the principal complex branch exp(i*pi/{h}) with real-part projection",
        )
        logger.info(warnings[0])

    root = basis @ core @ basis.T
    return OrthogonalMatrix(root, warnings=warnings, tol=ROOT_TOL)


def partial_rotation(y_g, t_delta, i: int) -> np.ndarray:
    """Real part of ``y_g @ t_delta^i``; ``i = 0`` returns a copy of ``y_g``."""
    y_g = as_cloud(y_g, "y_g")
    t = t_delta.entries if isinstance(t_delta, OrthogonalMatrix) else np.asarray(t_delta)
    if t.ndim != 2 or t.shape != (y_g.shape[1], y_g.shape[1]):
        raise DimensionError(
            f"rotation of shape {t.shape} does not act on {y_g.shape[1]} samples"
        )
    if int(i) != i or i < 0:
        raise ValueError(f"power must be a nonnegative integer, got {i!r}")
    if i == 0:
        return y_g.copy()
    rotated = y_g @ np.linalg.matrix_power(t, int(i))
    return np.ascontiguousarray(rotated.real)
