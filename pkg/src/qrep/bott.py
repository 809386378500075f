"""Bott almost-projections, the integer invariant `k(u, v)` and the index formula harness.

For a pair of almost commuting unitaries `u`, `v` of size `n` the
almost-projection

```
e(u, v) = [[f(v),            g(v) + h(v) u*],
           [g(v) + u h(v),   1 - f(v)      ]]
```

is built with the circle functions `f`, `g`, `h` below. Its spectrum stays away
from 1/2 when `[u, v]` is close to 1 and `k(u, v)` is the rank of its spectral
projection minus `n`.
"""
import dataclasses
import functools
import logging
import math
import typing as t

import numpy as np

from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.errors import DefectTooLarge, DimensionMismatch, NumericalError, PresentationMismatch
from qrep.examples import pullback, voiculescu_pair
from qrep.invariants import (
    InvariantReport,
    TraceMode,
    kappa,
    winding_number_det_segment,
)
from qrep.matcore import (
    CMatrix,
    Unitary,
    adjoint,
    as_cmatrix,
    functional_calculus,
    group_commutator,
    identity,
    op_norm,
    spectral_gap_split,
)
from qrep.words import (
    CommutatorDatum,
    FreeWord,
    Presentation,
    PresentationKind,
    QuasiRep,
    mult_defect,
    parse_word,
    relator_defect,
)

logger = logging.getLogger(__name__)

CALIBRATION_DIM = 64

# Trace version of the index formula: `k / n` against kappa with the normalised trace
TRACE_TOLERANCE = 1e-9

SCOPE_NOTE = (
    "the K-theoretic side is only constructed for Z2 and pullbacks of Z2 "
    "quasi-representations to surface groups"
)


def _circle_parameter(z: np.ndarray) -> np.ndarray:
    return np.mod(np.angle(z) / (2.0 * math.pi), 1.0)


def bott_f(z: np.ndarray) -> np.ndarray:
    s = _circle_parameter(z)
    return np.where(s <= 0.5, 1.0 - 2.0 * s, 2.0 * s - 1.0)


def _f_minus_f2(z: np.ndarray) -> np.ndarray:
    f = bott_f(z)
    return np.sqrt(np.clip(f - f * f, 0.0, None))


def bott_g(z: np.ndarray) -> np.ndarray:
    return np.where(_circle_parameter(z) <= 0.5, _f_minus_f2(z), 0.0)


def bott_h(z: np.ndarray) -> np.ndarray:
    return np.where(_circle_parameter(z) <= 0.5, 0.0, _f_minus_f2(z))


@dataclasses.dataclass(frozen=True, eq=False)
class AlmostProjection:
    """A self-adjoint `2n x 2n` matrix close to a projection.

    Arguments:
        e: the matrix.
        defect: `||e^2 - e||`.
        base_dim: `n`, the rank of the reference projection `diag(1_n, 0)`.
    """

    e: CMatrix
    defect: float
    base_dim: int

    @classmethod
    def from_matrix(
        cls, e: t.Any, base_dim: int, tol: Tolerances = DEFAULT_TOLERANCES
    ) -> "AlmostProjection":
        matrix = as_cmatrix(e)
        matrix = 0.5 * (matrix + adjoint(matrix))
        return cls(e=matrix, defect=op_norm(matrix @ matrix - matrix, tol), base_dim=base_dim)


def _check_pair(u: Unitary, v: Unitary) -> None:
    if u.dim != v.dim:
        raise DimensionMismatch(f"pair has mixed dimensions {u.dim} and {v.dim}")


def _raw_almost_projection(u: Unitary, v: Unitary, tol: Tolerances) -> AlmostProjection:
    f, g, h = functional_calculus(v, [bott_f, bott_g, bott_h], tol)
    one = identity(u.dim)
    upper = g + h @ adjoint(u.m)
    e = np.block([[f, upper], [adjoint(upper), one - f]])
    return AlmostProjection.from_matrix(e, u.dim, tol)


def bott_almost_projection(
    u: Unitary,
    v: Unitary,
    orientation: t.Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> AlmostProjection:
    """The Bott almost-projection `e(u, v)`.

    With orientation -1 the roles of `u` and `v` are exchanged. The calibrated
    orientation is used when none is given.

    Raises:
        DimensionMismatch: when `u` and `v` differ in size.
    """
    _check_pair(u, v)
    if orientation is None:
        orientation = calibrate_orientation(tol)
    if orientation not in (1, -1):
        raise ValueError(f"orientation must be +1 or -1, got {orientation}")
    if orientation == -1:
        u, v = v, u
    return _raw_almost_projection(u, v, tol)


def _push(e: AlmostProjection, tol: Tolerances) -> t.Tuple[int, float]:
    if e.defect >= tol.bott_defect:
        raise DefectTooLarge(e.defect, tol.bott_defect)
    _, rank, gap = spectral_gap_split(e.e, tol=tol)
    return rank - e.base_dim, gap


def push_k_class(e: AlmostProjection, tol: Tolerances = DEFAULT_TOLERANCES) -> int:
    """Rank of the spectral projection of `e` on `(1/2, inf)` minus `e.base_dim`.

    Raises:
        DefectTooLarge: when `e.defect` is not below `tol.bott_defect`.
        NoSpectralGap: when an eigenvalue of `e` lies within `tol.spectral_gap` of 1/2.
    """
    return _push(e, tol)[0]


@functools.lru_cache(maxsize=None)
def calibrate_orientation(tol: Tolerances = DEFAULT_TOLERANCES) -> int:
    """Orientation making `k(u, v)` agree with the winding number of `[v, u]`.

    Measured once per tolerance set on the Voiculescu pair of size 64.
    """
    u, v = voiculescu_pair(CALIBRATION_DIM)
    raw = push_k_class(_raw_almost_projection(u, v, tol), tol)
    reference = winding_number_det_segment(
        Unitary.from_matrix(group_commutator(v.m, u.m), tol), tol
    ).rounded
    if raw == reference:
        orientation = 1
    elif raw == -t.cast(int, reference):
        orientation = -1
    else:
        raise NumericalError(
            f"orientation calibration failed: k = {raw}, winding number = {reference}"
        )
    logger.debug("calibrated Bott orientation %+d (k = %d, wn = %s)", orientation, raw, reference)
    return orientation


def k_invariant(
    u: Unitary,
    v: Unitary,
    orientation: t.Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> InvariantReport:
    """The integer `k(u, v)` with the data deciding its validity.

    Raises:
        DefectTooLarge, NoSpectralGap: see `push_k_class`.
    """
    orientation = calibrate_orientation(tol) if orientation is None else orientation
    e = bott_almost_projection(u, v, orientation, tol)
    commutator_defect = op_norm(group_commutator(u.m, v.m) - identity(u.dim), tol)
    value, gap = _push(e, tol)
    return InvariantReport(
        name="k",
        value=float(value),
        rounded=value,
        is_integer=True,
        defect_data={
            "commutator_defect": commutator_defect,
            "e_defect": e.defect,
            "gap": gap,
            "orientation": orientation,
            "dim": u.dim,
        },
        tolerances={
            "bott_defect": tol.bott_defect,
            "spectral_threshold": tol.spectral_threshold,
            "spectral_gap": tol.spectral_gap,
        },
    )


@dataclasses.dataclass(frozen=True)
class Z2Bott:
    """Index formula for a quasi-representation of `Z2` itself."""


@dataclasses.dataclass(frozen=True)
class SurfacePullback:
    """Index formula for the pullback of a `Z2` quasi-representation to a surface group.

    Arguments:
        genus: genus of the surface group.
        generator_images: words over `a`, `b` the generators `s_i`, `t_i` are sent to.
    """

    genus: int
    generator_images: t.Mapping[str, FreeWord]

    def __post_init__(self) -> None:
        if 2 * self.genus != len(self.generator_images):
            raise ValueError(
                f"genus {self.genus} needs {2 * self.genus} generator images, "
                f"got {len(self.generator_images)}"
            )


IndexCase = t.Union[Z2Bott, SurfacePullback]


@dataclasses.dataclass(frozen=True)
class IndexFormulaReport:
    case: str
    dim: int
    class_degree: int
    lhs_k: int
    k: InvariantReport
    rhs_wn: InvariantReport
    rhs_kappa: InvariantReport
    rhs_kappa_tau: InvariantReport
    rhs_kappa_uv: InvariantReport
    orientation: int
    defects: t.Dict[str, t.Any]

    @property
    def normalized_lhs(self) -> float:
        return self.lhs_k / self.dim

    @property
    def rhs_surface(self) -> float:
        return -self.rhs_kappa_uv.value

    @property
    def wn_equal(self) -> bool:
        return self.rhs_wn.is_integer and self.rhs_wn.rounded == self.lhs_k

    @property
    def kappa_equal(self) -> bool:
        return self.rhs_kappa.is_integer and self.rhs_kappa.rounded == self.lhs_k

    @property
    def equal(self) -> bool:
        return self.wn_equal and self.kappa_equal

    @property
    def trace_equal(self) -> bool:
        return abs(self.normalized_lhs - self.rhs_kappa_tau.value) <= TRACE_TOLERANCE

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "case": self.case,
            "dim": self.dim,
            "class_degree": self.class_degree,
            "lhs_k": self.lhs_k,
            "rhs_wn": self.rhs_wn.rounded,
            "rhs_kappa": self.rhs_kappa.rounded,
            "normalized_lhs": self.normalized_lhs,
            "rhs_kappa_tau": self.rhs_kappa_tau.value,
            "rhs_kappa_uv": self.rhs_kappa_uv.value,
            "rhs_surface": self.rhs_surface,
            "equal": self.equal,
            "wn_equal": self.wn_equal,
            "kappa_equal": self.kappa_equal,
            "trace_equal": self.trace_equal,
            "orientation": f"{self.orientation:+d}",
            "defects": dict(self.defects),
            "reports": {
                "k": self.k.to_json(),
                "wn": self.rhs_wn.to_json(),
                "kappa": self.rhs_kappa.to_json(),
                "kappa_tau": self.rhs_kappa_tau.to_json(),
                "kappa_uv": self.rhs_kappa_uv.to_json(),
            },
            "scope": SCOPE_NOTE,
        }


def commutator_image(
    qr: QuasiRep, datum: CommutatorDatum, reverse: bool = True
) -> CMatrix:
    """`prod [pi(b_i), pi(a_i)]` (or `prod [pi(a_i), pi(b_i)]` without `reverse`)."""
    result = identity(qr.dim)
    for a, b in datum.pairs:
        first, second = qr.element(a), qr.element(b)
        if reverse:
            first, second = second, first
        result = result @ group_commutator(first, second)
    return result


def _require_presentation(qr: QuasiRep, datum: CommutatorDatum) -> None:
    if datum.ambient != qr.presentation:
        raise PresentationMismatch(
            "the commutator datum is not over the presentation of the quasi-representation"
        )


def verify_index_formula(
    case: IndexCase,
    qr: QuasiRep,
    datum: CommutatorDatum,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> IndexFormulaReport:
    """Compare the K-theoretic and the winding number sides of the index formula.

    `qr` is a quasi-representation of `Z2`. With `SurfacePullback` it is first
    pulled back along the given homomorphism and `datum` is a datum over the
    surface presentation; its class in the second homology of `Z2` is read
    through the homomorphism. The left side is that class times `k(pi(a), pi(b))`,
    the right side the winding number and kappa of `prod [pi(b_i), pi(a_i)]`.

    Raises:
        PresentationMismatch: when `qr` or `datum` do not fit the case.
    """
    if qr.presentation.kind is not PresentationKind.Z2:
        raise PresentationMismatch("the index formula is evaluated on quasi-representations of Z2")
    u, v = qr.images["a"], qr.images["b"]
    orientation = calibrate_orientation(tol)
    k = k_invariant(u, v, orientation, tol)
    if isinstance(case, SurfacePullback):
        effective = pullback(qr, case.generator_images, tol)
        _require_presentation(effective, datum)
        degree = datum.z2_degree(dict(case.generator_images))
        label = f"surface_pullback(g={case.genus})"
    else:
        effective = qr
        _require_presentation(effective, datum)
        degree = datum.z2_degree()
        label = "z2_bott"
    w = Unitary.from_matrix(commutator_image(effective, datum), tol)
    w_uv = Unitary.from_matrix(commutator_image(effective, datum, reverse=False), tol)
    entries = [word for pair in datum.pairs for word in pair]
    defects = {
        "commutator_defect": op_norm(w.m - identity(w.dim), tol),
        "e_defect": k.defect_data["e_defect"],
        "gap": k.defect_data["gap"],
        "relator_defect": relator_defect(effective, tol),
        "mult_defect": mult_defect(effective, entries, tol).epsilon,
    }
    report = IndexFormulaReport(
        case=label,
        dim=qr.dim,
        class_degree=degree,
        lhs_k=degree * t.cast(int, k.rounded),
        k=k,
        rhs_wn=winding_number_det_segment(w, tol),
        rhs_kappa=kappa(w, TraceMode.STANDARD, tol),
        rhs_kappa_tau=kappa(w, TraceMode.NORMALIZED, tol),
        rhs_kappa_uv=kappa(w_uv, TraceMode.STANDARD, tol),
        orientation=orientation,
        defects=defects,
    )
    logger.debug(
        "index formula %s n=%d: k=%d wn=%s kappa=%s",
        label,
        qr.dim,
        report.lhs_k,
        report.rhs_wn.rounded,
        report.rhs_kappa.rounded,
    )
    return report


def z2_representatives(
    qr: t.Optional[QuasiRep] = None,
) -> t.Dict[str, CommutatorDatum]:
    """Three commutator data representing the fundamental class of `Z2`.

    - `plain`: `[a, b]`,
    - `conjugated`: `[g a g^-1, g b g^-1]` with `g = a b`,
    - `padded`: `[a, b] [1, 1]`.
    """
    presentation = Presentation.z2()
    if qr is not None and qr.presentation != presentation:
        raise PresentationMismatch("representatives are data over the Z2 presentation")
    a, b = FreeWord.generator("a"), FreeWord.generator("b")
    g = parse_word("a b")
    return {
        "plain": CommutatorDatum(((a, b),), presentation),
        "conjugated": CommutatorDatum(
            ((g * a * g.inverse(), g * b * g.inverse()),), presentation
        ),
        "padded": CommutatorDatum(((a, b), (FreeWord(), FreeWord())), presentation),
    }


def compare_representatives(
    qr: QuasiRep,
    data: t.Optional[t.Mapping[str, CommutatorDatum]] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> t.Dict[str, InvariantReport]:
    """Kappa of `prod [pi(b_i), pi(a_i)]` for each datum; equal values for data of one class."""
    data = z2_representatives(qr) if data is None else data
    reports = {}
    for name, datum in data.items():
        _require_presentation(qr, datum)
        w = Unitary.from_matrix(commutator_image(qr, datum), tol)
        reports[name] = kappa(w, tol=tol)
    return reports


def representatives_agree(reports: t.Mapping[str, InvariantReport]) -> bool:
    values = {report.rounded for report in reports.values()}
    return len(values) == 1 and all(report.is_integer for report in reports.values())
