"""Dense complex matrix kernel.

Matrices are square `numpy` arrays of dtype `complex128`. Hermitian matrices
are diagonalised with a cyclic complex Jacobi method (round-robin ordering,
so that each step rotates `n/2` disjoint pairs at once); unitary matrices are
diagonalised through the commuting Hermitian pair `(w + w*)/2`,
`(w - w*)/(2i)`.
"""
import dataclasses
import functools
import json
import logging
import math
import typing as t
import warnings
from pathlib import Path

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.stats

from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.errors import (
    BranchCut,
    DimensionMismatch,
    InvalidMatrix,
    NoSpectralGap,
    NotHermitian,
    NotUnitary,
    ReportFormatError,
)

logger = logging.getLogger(__name__)

CMatrix = npt.NDArray[np.complex128]
RVector = npt.NDArray[np.float64]
CVector = npt.NDArray[np.complex128]

# Coordinates below this modulus are skipped when fixing eigenvector phases
PHASE_FLOOR = 1e-10


def as_cmatrix(m: t.Any) -> CMatrix:
    """Validate and convert input into a square complex matrix."""
    try:
        array = np.array(m, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise InvalidMatrix(f"cannot convert input to a complex matrix: {exc}")
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {array.shape}")
    if array.shape[0] < 1:
        raise InvalidMatrix("matrix dimension must be at least 1")
    if not np.all(np.isfinite(array)):
        raise InvalidMatrix("matrix entries must be finite")
    return array


def identity(n: int) -> CMatrix:
    return np.eye(n, dtype=np.complex128)


def adjoint(m: CMatrix) -> CMatrix:
    return t.cast(CMatrix, m.conj().T)


def group_commutator(a: CMatrix, b: CMatrix) -> CMatrix:
    """Return `a b a* b*`, the group commutator of two unitaries."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot multiply {a.shape} and {b.shape} matrices")
    return t.cast(CMatrix, a @ b @ adjoint(a) @ adjoint(b))


def commutator_product(pairs: t.Iterable[t.Tuple[CMatrix, CMatrix]]) -> CMatrix:
    """Return the product of the group commutators of `pairs`, left to right."""
    result: t.Optional[CMatrix] = None
    for a, b in pairs:
        factor = group_commutator(a, b)
        result = factor if result is None else result @ factor
    if result is None:
        raise ValueError("at least one pair is required")
    return result


def expm(m: CMatrix) -> CMatrix:
    """Matrix exponential (Pade approximant with scaling and squaring)."""
    return t.cast(CMatrix, scipy.linalg.expm(m))


def lu_det(m: CMatrix) -> complex:
    """Determinant through an LU factorisation with partial pivoting."""
    m = as_cmatrix(m)
    with warnings.catch_warnings():
        # Exactly singular input is reported as a zero pivot
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(piv.shape[0])))
    det = complex(np.prod(np.diag(lu)))
    return -det if swaps % 2 else det


@dataclasses.dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues and an orthonormal eigenbasis stored as columns."""

    values: npt.NDArray[t.Any]
    vectors: CMatrix

    def __iter__(self) -> t.Iterator[npt.NDArray[t.Any]]:
        yield self.values
        yield self.vectors

    def reconstruct(self) -> CMatrix:
        return t.cast(
            CMatrix, (self.vectors * self.values) @ adjoint(self.vectors)
        )


@functools.lru_cache(maxsize=64)
def _round_robin(n: int) -> t.Tuple[t.Tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]], ...]:
    """Pairings of `range(n)` such that every pair appears once per cycle."""
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [
            (min(players[i], players[size - 1 - i]), max(players[i], players[size - 1 - i]))
            for i in range(size // 2)
        ]
        pairs = [pair for pair in pairs if pair[1] < n]
        rounds.append(
            (
                np.array([p for p, _ in pairs], dtype=np.intp),
                np.array([q for _, q in pairs], dtype=np.intp),
            )
        )
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _jacobi_eigh(h: CMatrix, tol: Tolerances) -> t.Tuple[RVector, CMatrix]:
    a = 0.5 * (h + adjoint(h))
    n = a.shape[0]
    vectors = identity(n)
    scale = float(np.linalg.norm(a))
    if n == 1 or scale == 0.0:
        return np.real(np.diag(a)).copy(), vectors
    rounds = _round_robin(n)
    previous = math.inf
    for sweep in range(tol.jacobi_max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol.jacobi_tol * scale:
            break
        # Rounding noise floor: no further progress is possible
        if off >= 0.5 * previous and off <= 1e3 * tol.jacobi_tol * scale:
            break
        previous = off
        for p, q in rounds:
            apq = a[p, q]
            magnitude = np.abs(apq)
            active = magnitude > np.finfo(np.float64).tiny
            if not active.any():
                continue
            phase = np.where(active, apq / np.where(active, magnitude, 1.0), 1.0)
            diff = np.real(a[p, p]) - np.real(a[q, q])
            sign = np.where(diff >= 0, 1.0, -1.0)
            theta = 0.5 * np.arctan2(2.0 * magnitude * sign, np.abs(diff))
            c = np.cos(theta)
            s = np.sin(theta)
            # Column update a <- a G, then row update a <- G* a with
            # G = [[c, -s], [s e^{-i phi}, c e^{-i phi}]] on each (p, q) block
            col_p = a[:, p].copy()
            col_q = a[:, q].copy()
            a[:, p] = col_p * c + col_q * (s * phase.conj())
            a[:, q] = -col_p * s + col_q * (c * phase.conj())
            row_p = a[p, :].copy()
            row_q = a[q, :].copy()
            a[p, :] = c[:, None] * row_p + (s * phase)[:, None] * row_q
            a[q, :] = -s[:, None] * row_p + (c * phase)[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0
            vec_p = vectors[:, p].copy()
            vec_q = vectors[:, q].copy()
            vectors[:, p] = vec_p * c + vec_q * (s * phase.conj())
            vectors[:, q] = -vec_p * s + vec_q * (c * phase.conj())
        a = 0.5 * (a + adjoint(a))
    else:
        logger.warning(
            "Jacobi iteration did not converge after %d sweeps (dim=%d)",
            tol.jacobi_max_sweeps,
            n,
        )
    return np.real(np.diag(a)).copy(), vectors


def _fix_phases(vectors: CMatrix) -> CMatrix:
    """Make the first non-negligible coordinate of every column real positive."""
    fixed = vectors.copy()
    for j in range(fixed.shape[1]):
        column = fixed[:, j]
        nonzero = np.flatnonzero(np.abs(column) > PHASE_FLOOR)
        if nonzero.size:
            pivot = column[nonzero[0]]
            fixed[:, j] = column * (abs(pivot) / pivot)
    return fixed


def _herm_eig(h: CMatrix, tol: Tolerances) -> EigenSystem:
    """Diagonalise a matrix assumed self-adjoint, without checking it."""
    if tol.eigensolver == "lapack":
        values, vectors = np.linalg.eigh(0.5 * (h + adjoint(h)))
    else:
        values, vectors = _jacobi_eigh(h, tol)
    order = np.argsort(values, kind="stable")
    return EigenSystem(
        values=np.asarray(values[order], dtype=np.float64),
        vectors=_fix_phases(np.asarray(vectors[:, order], dtype=np.complex128)),
    )


def op_norm(m: CMatrix, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Operator norm: square root of the largest eigenvalue of `m* m`."""
    m = np.asarray(m, dtype=np.complex128)
    gram = adjoint(m) @ m
    values = _herm_eig(gram, tol).values
    return math.sqrt(max(float(values[-1]), 0.0))


def hermitian_residual(h: CMatrix, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return op_norm(h - adjoint(h), tol)


def unitarity_residual(m: CMatrix, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return op_norm(adjoint(m) @ m - identity(m.shape[0]), tol)


def herm_eig(h: CMatrix, tol: Tolerances = DEFAULT_TOLERANCES) -> EigenSystem:
    """Eigendecomposition of a self-adjoint matrix, eigenvalues ascending.

    Raises:
        NotHermitian: when `||h - h*||` exceeds the hermiticity tolerance.
    """
    h = as_cmatrix(h)
    residual = hermitian_residual(h, tol)
    if residual > tol.hermiticity:
        raise NotHermitian(residual, tol.hermiticity)
    return _herm_eig(h, tol)


@dataclasses.dataclass(frozen=True, eq=False)
class Unitary:
    """A unitary matrix together with the unitarity residual witnessed at construction."""

    m: CMatrix
    utol: float

    @classmethod
    def from_matrix(
        cls, m: t.Any, tol: Tolerances = DEFAULT_TOLERANCES
    ) -> "Unitary":
        matrix = as_cmatrix(m)
        residual = unitarity_residual(matrix, tol)
        if residual > tol.unitarity:
            raise NotUnitary(residual, tol.unitarity)
        matrix.setflags(write=False)
        return cls(m=matrix, utol=residual)

    @classmethod
    def identity(cls, n: int) -> "Unitary":
        matrix = identity(n)
        matrix.setflags(write=False)
        return cls(m=matrix, utol=0.0)

    @property
    def dim(self) -> int:
        return int(self.m.shape[0])

    def adjoint(self) -> "Unitary":
        matrix = adjoint(self.m).copy()
        matrix.setflags(write=False)
        return Unitary(m=matrix, utol=self.utol)


def unitary_eig(w: Unitary, tol: Tolerances = DEFAULT_TOLERANCES) -> EigenSystem:
    """Eigendecomposition of a unitary matrix.

    The Hermitian part `H = (w + w*)/2` is diagonalised first. Within every
    cluster of `H`-eigenvalues closer than `tol.cluster` the compression of
    `K = (w - w*)/(2i)` is diagonalised to separate conjugate eigenvalues.
    Eigenvalues are the Rayleigh quotients of `w` on the resulting basis.
    """
    if not isinstance(w, Unitary):
        w = Unitary.from_matrix(w, tol)
    m = w.m
    hermitian_part = 0.5 * (m + adjoint(m))
    skew_part = (m - adjoint(m)) / 2j
    base = _herm_eig(hermitian_part, tol)
    vectors = base.vectors.copy()
    values = base.values
    boundaries = np.flatnonzero(np.diff(values) > tol.cluster) + 1
    for cluster in np.split(np.arange(values.shape[0]), boundaries):
        if cluster.shape[0] < 2:
            continue
        basis = vectors[:, cluster]
        compressed = adjoint(basis) @ skew_part @ basis
        inner = _herm_eig(compressed, tol)
        vectors[:, cluster] = basis @ inner.vectors
    vectors = _fix_phases(vectors)
    eigenvalues = np.einsum("ij,ij->j", vectors.conj(), m @ vectors)
    return EigenSystem(values=np.asarray(eigenvalues, dtype=np.complex128), vectors=vectors)


def principal_log_unitary(
    w: Unitary,
    margin: t.Optional[float] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> CMatrix:
    """Principal logarithm of a unitary, a skew-Hermitian matrix.

    Raises:
        BranchCut: when an eigenvalue lies within `margin` of -1.
    """
    margin = tol.branch_margin if margin is None else margin
    system = unitary_eig(w, tol)
    distance = float(np.min(np.abs(system.values + 1.0)))
    if distance <= margin:
        raise BranchCut(distance, margin)
    angles = np.angle(system.values)
    log = (system.vectors * (1j * angles)) @ adjoint(system.vectors)
    return t.cast(CMatrix, 0.5 * (log - adjoint(log)))


def branch_distance(w: Unitary, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Smallest distance between the spectrum of `w` and -1."""
    return float(np.min(np.abs(unitary_eig(w, tol).values + 1.0)))


def _spectral_split(
    e: CMatrix, threshold: float, gap: float, tol: Tolerances
) -> t.Tuple[CMatrix, int, float]:
    system = herm_eig(e, tol)
    distances = np.abs(system.values - threshold)
    closest = int(np.argmin(distances))
    if distances[closest] < gap:
        raise NoSpectralGap(float(system.values[closest]), threshold, gap)
    selected = system.vectors[:, system.values > threshold]
    projection = selected @ adjoint(selected)
    return projection, int(selected.shape[1]), float(distances[closest])


def spectral_projection(
    e: CMatrix,
    threshold: t.Optional[float] = None,
    gap: t.Optional[float] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> t.Tuple[CMatrix, int]:
    """Spectral projection of `e` on `(threshold, inf)` and its rank.

    Raises:
        NoSpectralGap: when an eigenvalue lies within `gap` of `threshold`.
    """
    threshold = tol.spectral_threshold if threshold is None else threshold
    gap = tol.spectral_gap if gap is None else gap
    projection, rank, _ = _spectral_split(e, threshold, gap, tol)
    return projection, rank


def spectral_gap_split(
    e: CMatrix,
    threshold: t.Optional[float] = None,
    gap: t.Optional[float] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> t.Tuple[CMatrix, int, float]:
    """Same as `spectral_projection` but also returns the distance from the spectrum to `threshold`."""
    threshold = tol.spectral_threshold if threshold is None else threshold
    gap = tol.spectral_gap if gap is None else gap
    return _spectral_split(e, threshold, gap, tol)


def functional_calculus(
    w: Unitary,
    functions: t.Sequence[t.Callable[[CVector], npt.NDArray[t.Any]]],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> t.List[CMatrix]:
    """Apply scalar functions of the spectrum to a unitary, sharing one eigenbasis."""
    system = unitary_eig(w, tol)
    basis = system.vectors
    return [
        t.cast(CMatrix, (basis * function(system.values)) @ adjoint(basis))
        for function in functions
    ]


def random_unitary(n: int, rng: np.random.Generator) -> CMatrix:
    """Haar distributed unitary matrix."""
    if n == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]], dtype=np.complex128)
    return np.asarray(
        scipy.stats.unitary_group.rvs(n, random_state=rng), dtype=np.complex128
    )


def random_hermitian(n: int, rng: np.random.Generator) -> CMatrix:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    return t.cast(CMatrix, 0.5 * (z + adjoint(z)))


def random_skew_hermitian(n: int, rng: np.random.Generator) -> CMatrix:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    return t.cast(CMatrix, 0.5 * (z - adjoint(z)))


def matrix_to_json(m: CMatrix) -> t.Dict[str, t.Any]:
    m = as_cmatrix(m)
    return {
        "dim": int(m.shape[0]),
        "re": [float(x) for x in m.real.ravel()],
        "im": [float(x) for x in m.imag.ravel()],
    }


def matrix_from_json(data: t.Mapping[str, t.Any]) -> CMatrix:
    try:
        dim = int(data["dim"])
        re = np.asarray(data["re"], dtype=np.float64)
        im = np.asarray(data["im"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"invalid matrix document: {exc}") from exc
    if dim < 1 or re.shape != (dim * dim,) or im.shape != (dim * dim,):
        raise ReportFormatError(
            f"matrix document expects {dim * dim} real and imaginary parts"
        )
    matrix = (re + 1j * im).reshape(dim, dim)
    return as_cmatrix(matrix)


def load_document(path: t.Union[str, Path]) -> t.Dict[str, t.Any]:
    """Decode the JSON object stored at `path`."""
    try:
        content = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ReportFormatError(f"{path}: {exc}") from exc
    if not isinstance(content, dict):
        raise ReportFormatError(f"{path}: expected a JSON object")
    return content


def read_matrix(path: t.Union[str, Path]) -> CMatrix:
    return matrix_from_json(load_document(path))


def write_matrix(path: t.Union[str, Path], m: CMatrix) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(m)))
