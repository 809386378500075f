import math

import numpy as np
import pytest

from qrep.config import DEFAULT_TOLERANCES
from qrep.errors import (
    BranchCut,
    DimensionMismatch,
    InvalidMatrix,
    NoSpectralGap,
    NotHermitian,
    NotUnitary,
    ReportFormatError,
)
from qrep.examples import voiculescu_pair
from qrep.matcore import (
    Unitary,
    adjoint,
    as_cmatrix,
    branch_distance,
    expm,
    functional_calculus,
    group_commutator,
    herm_eig,
    identity,
    load_document,
    lu_det,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    principal_log_unitary,
    random_hermitian,
    random_unitary,
    read_matrix,
    spectral_gap_split,
    spectral_projection,
    unitary_eig,
    write_matrix,
)


def test_as_cmatrix_rejects_invalid_input():
    with pytest.raises(InvalidMatrix):
        as_cmatrix([[1, 2, 3]])
    with pytest.raises(InvalidMatrix):
        as_cmatrix([[1, float("nan")], [0, 1]])
    with pytest.raises(InvalidMatrix):
        as_cmatrix(np.zeros((0, 0)))


def test_group_commutator_requires_matching_shapes():
    with pytest.raises(DimensionMismatch):
        group_commutator(identity(2), identity(3))


@pytest.mark.parametrize(
    "m, expected",
    [
        (np.eye(4), 1.0),
        (np.diag([1j, 1j]), -1.0),
        (np.array([[0, 1], [1, 0]]), -1.0),
    ],
)
def test_lu_det_of_simple_matrices(m, expected):
    assert lu_det(m) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_lu_det_of_cyclic_shift_is_sign_of_cycle(n):
    u, _ = voiculescu_pair(n)
    assert lu_det(u.m) == pytest.approx((-1) ** (n - 1), abs=1e-12)


def test_lu_det_is_multiplicative(rng):
    for _ in range(20):
        n = int(rng.integers(2, 17))
        m1 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        m2 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        product = lu_det(m1 @ m2)
        assert abs(product - lu_det(m1) * lu_det(m2)) <= 1e-9 * abs(product)
        assert lu_det(m1) == pytest.approx(complex(np.linalg.det(m1)), rel=1e-9)


def test_lu_det_of_singular_matrix_is_zero():
    assert abs(lu_det(np.zeros((3, 3)))) == 0.0


def test_op_norm():
    assert op_norm(identity(5)) == pytest.approx(1.0)
    assert op_norm(np.diag([3, 4j])) == pytest.approx(4.0)


@pytest.mark.parametrize("n", [3, 8, 32])
def test_op_norm_of_voiculescu_commutator_defect(n):
    u, v = voiculescu_pair(n)
    value = op_norm(u.m @ v.m - v.m @ u.m)
    assert value == pytest.approx(2 * math.sin(math.pi / n), rel=1e-8)


def test_op_norm_matches_singular_values(rng):
    m = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    assert op_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-8)


def test_herm_eig_of_pauli_x():
    system = herm_eig(np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(system.values, [-1.0, 1.0], atol=1e-12)


def test_herm_eig_of_diagonal_matrix_keeps_identity_columns():
    values, vectors = herm_eig(np.diag([0.1, 0.9]))
    np.testing.assert_allclose(values, [0.1, 0.9], atol=1e-15)
    np.testing.assert_allclose(vectors, np.eye(2), atol=1e-15)


@pytest.mark.parametrize("eigensolver", ["jacobi", "lapack"])
def test_herm_eig_reconstructs_random_hermitian(rng, eigensolver):
    tol = DEFAULT_TOLERANCES.replace(eigensolver=eigensolver)
    for n in (1, 2, 8, 31):
        h = random_hermitian(n, rng)
        system = herm_eig(h, tol)
        assert np.all(np.diff(system.values) >= 0)
        np.testing.assert_allclose(system.values, np.linalg.eigvalsh(h), atol=1e-10)
        assert op_norm(system.reconstruct() - h) <= 1e-8 * max(op_norm(h), 1.0)
        assert op_norm(adjoint(system.vectors) @ system.vectors - identity(n)) <= 1e-8


def test_herm_eig_fixes_eigenvector_phases(rng):
    system = herm_eig(random_hermitian(6, rng))
    for column in system.vectors.T:
        pivot = column[np.flatnonzero(np.abs(column) > 1e-10)[0]]
        assert pivot.real > 0
        assert abs(pivot.imag) <= 1e-14


def test_herm_eig_is_invariant_under_conjugation(rng):
    h = random_hermitian(10, rng)
    q = random_unitary(10, rng)
    conjugated = herm_eig(q @ h @ adjoint(q)).values
    np.testing.assert_allclose(conjugated, herm_eig(h).values, atol=1e-7)


def test_herm_eig_rejects_non_hermitian_input():
    with pytest.raises(NotHermitian) as excinfo:
        herm_eig(np.array([[0, 1], [0, 0]]))
    assert excinfo.value.residual == pytest.approx(1.0)


def test_unitary_rejects_non_unitary_input():
    with pytest.raises(NotUnitary):
        Unitary.from_matrix(2 * np.eye(3))


def test_unitary_is_read_only():
    u = Unitary.from_matrix(np.eye(2))
    assert u.dim == 2
    assert u.utol <= 1e-15
    with pytest.raises(ValueError):
        u.m[0, 0] = 2.0


def test_unitary_eig_of_diagonal_unitary():
    angles = [0.3, -1.2, 2.5]
    w = Unitary.from_matrix(np.diag(np.exp(1j * np.array(angles))))
    values = unitary_eig(w).values
    assert sorted(np.angle(values)) == pytest.approx(sorted(angles), abs=1e-12)


@pytest.mark.parametrize("n", [2, 5, 16])
def test_unitary_eig_of_cyclic_shift_gives_roots_of_unity(n):
    u, _ = voiculescu_pair(n)
    system = unitary_eig(u)
    expected = np.sort(np.mod(2 * math.pi * np.arange(n) / n, 2 * math.pi))
    measured = np.sort(np.mod(np.angle(system.values), 2 * math.pi))
    # 0 and 2 pi are the same root
    measured = np.where(measured > 2 * math.pi - 1e-9, 0.0, measured)
    np.testing.assert_allclose(np.sort(measured), expected, atol=1e-9)
    assert op_norm(system.reconstruct() - u.m) <= 1e-8


def test_unitary_eig_reconstructs_random_unitaries(rng):
    for n in (1, 3, 12, 24):
        w = Unitary.from_matrix(random_unitary(n, rng))
        system = unitary_eig(w)
        np.testing.assert_allclose(np.abs(system.values), 1.0, atol=1e-8)
        assert op_norm(system.reconstruct() - w.m) <= 1e-8
        assert op_norm(adjoint(system.vectors) @ system.vectors - identity(n)) <= 1e-8


def test_unitary_eig_is_invariant_under_conjugation(rng):
    w = random_unitary(10, rng)
    q = random_unitary(10, rng)
    values = list(unitary_eig(Unitary.from_matrix(w)).values)
    conjugated = unitary_eig(Unitary.from_matrix(q @ w @ adjoint(q))).values
    # multiset comparison
    for value in conjugated:
        nearest = min(range(len(values)), key=lambda i: abs(values[i] - value))
        assert abs(values.pop(nearest) - value) <= 1e-7
    assert not values


def test_principal_log_of_identity_is_zero():
    log = principal_log_unitary(Unitary.identity(4))
    assert op_norm(log) <= 1e-15


@pytest.mark.parametrize("n", [3, 7, 64])
def test_principal_log_of_scalar_unitary(n):
    w = Unitary.from_matrix(np.exp(-2j * math.pi / n) * np.eye(n))
    log = principal_log_unitary(w)
    np.testing.assert_allclose(log, (-2j * math.pi / n) * np.eye(n), atol=1e-12)


def test_principal_log_inverts_exponential(rng):
    for _ in range(100):
        n = int(rng.integers(1, 13))
        w = Unitary.from_matrix(random_unitary(n, rng))
        if branch_distance(w) <= 1e-3:
            continue
        log = principal_log_unitary(w)
        assert op_norm(log + adjoint(log)) <= 1e-8
        assert op_norm(expm(log) - w.m) <= 1e-8


def test_principal_log_raises_on_branch_cut():
    w = Unitary.from_matrix(np.diag([-1.0, 1.0]))
    with pytest.raises(BranchCut) as excinfo:
        principal_log_unitary(w)
    assert excinfo.value.distance <= 1e-12
    assert excinfo.value.margin == DEFAULT_TOLERANCES.branch_margin


def test_principal_log_margin_can_be_widened():
    w = Unitary.from_matrix(np.diag(np.exp(1j * np.array([3.1, 0.0]))))
    principal_log_unitary(w)
    with pytest.raises(BranchCut):
        principal_log_unitary(w, margin=0.1)


def test_spectral_projection_of_diagonal():
    p, rank = spectral_projection(np.diag([0.9, 0.1]))
    np.testing.assert_allclose(p, np.diag([1.0, 0.0]), atol=1e-12)
    assert rank == 1


def test_spectral_projection_requires_gap():
    with pytest.raises(NoSpectralGap) as excinfo:
        spectral_projection(np.diag([0.55, 0.45]), gap=0.1)
    assert excinfo.value.threshold == 0.5


def test_spectral_projection_is_idempotent(rng):
    for _ in range(100):
        n = int(rng.integers(1, 11))
        low = rng.uniform(-1.0, 0.35, n)
        high = rng.uniform(0.65, 2.0, n)
        values = np.where(rng.random(n) < 0.5, low, high)
        q = random_unitary(n, rng)
        e = (q * values) @ adjoint(q)
        e = 0.5 * (e + adjoint(e))
        p, rank, gap = spectral_gap_split(e)
        assert rank == int(np.count_nonzero(values > 0.5))
        assert gap >= 0.1
        assert op_norm(p @ p - p) <= 1e-8
        assert op_norm(p - adjoint(p)) <= 1e-8
        assert abs(np.trace(p).real - rank) <= 1e-6


def test_functional_calculus_identity_function_reconstructs(rng):
    w = Unitary.from_matrix(random_unitary(6, rng))
    (same, squared) = functional_calculus(w, [lambda z: z, lambda z: z**2])
    assert op_norm(same - w.m) <= 1e-8
    assert op_norm(squared - w.m @ w.m) <= 1e-8


def test_matrix_json_is_exact(tmp_path, rng):
    m = random_unitary(5, rng)
    document = matrix_to_json(m)
    assert document["dim"] == 5
    assert len(document["re"]) == 25
    path = tmp_path / "m.json"
    write_matrix(path, m)
    assert np.array_equal(read_matrix(path), m)
    assert np.array_equal(matrix_from_json(document), m)


@pytest.mark.parametrize(
    "document",
    [
        {"dim": 2, "re": [1, 0, 0, 1]},
        {"dim": 2, "re": [1, 0, 0], "im": [0, 0, 0]},
        {"dim": "two", "re": [], "im": []},
    ],
)
def test_invalid_matrix_documents_are_rejected(document):
    with pytest.raises(ReportFormatError):
        matrix_from_json(document)


def test_unreadable_matrix_file_is_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ReportFormatError):
        read_matrix(path)
    path.write_text("[1, 2]")
    with pytest.raises(ReportFormatError, match="JSON object"):
        load_document(path)
