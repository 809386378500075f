"""Scalar invariants of almost-trivial unitaries.

- `kappa`: `(1/2 pi i) Tr(log w)`, with the standard or the normalised trace.
- `winding_number_det_segment`: winding number of `t -> det((1 - t) 1 + t w)`,
  computed from determinants only.
- `exel_homotopy_gap`: the estimate behind the equality of the two above.
- `kazhdan_stability`: invariance of kappa of a product of commutators under
  small perturbations of its entries.
"""
import cmath
import dataclasses
import enum
import logging
import math
import typing as t

import numpy as np
import scipy.optimize

from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.errors import DimensionMismatch, HypothesisViolated, NotALoop, PathSingular
from qrep.matcore import (
    CMatrix,
    Unitary,
    adjoint,
    branch_distance,
    commutator_product,
    expm,
    identity,
    lu_det,
    op_norm,
    principal_log_unitary,
)

logger = logging.getLogger(__name__)


class TraceMode(str, enum.Enum):
    # Tr(1_n) = n
    STANDARD = "standard"
    # Tr(1_n) / n
    NORMALIZED = "normalized"


@dataclasses.dataclass(frozen=True)
class InvariantReport:
    name: str
    value: float
    rounded: t.Optional[int]
    is_integer: bool
    defect_data: t.Dict[str, t.Any] = dataclasses.field(default_factory=dict)
    tolerances: t.Dict[str, t.Any] = dataclasses.field(default_factory=dict)

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "name": self.name,
            "value": self.value,
            "rounded": self.rounded,
            "is_integer": self.is_integer,
            "defect_data": dict(self.defect_data),
            "tolerances": dict(self.tolerances),
        }


def _nearest_integer(value: float) -> t.Tuple[int, float]:
    rounded = int(round(value))
    return rounded, abs(value - rounded)


def kappa(
    w: Unitary,
    trace_mode: TraceMode = TraceMode.STANDARD,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> InvariantReport:
    """Compute `(1/2 pi i) trace(log w)` with the principal logarithm.

    The value is reported as an integer when the standard trace is used,
    `det(w) = 1` within `tol.det_one` and the rounding residual is below
    `tol.integer`.

    Raises:
        BranchCut: when the spectrum of `w` reaches -1.
    """
    trace_mode = TraceMode(trace_mode)
    log = principal_log_unitary(w, tol=tol)
    value = float((np.trace(log) / (2j * math.pi)).real)
    if trace_mode is TraceMode.NORMALIZED:
        value /= w.dim
    det_residual = abs(lu_det(w.m) - 1.0)
    distance_to_one = op_norm(w.m - identity(w.dim), tol)
    rounded: t.Optional[int] = None
    is_integer = False
    if trace_mode is TraceMode.STANDARD:
        rounded, residual = _nearest_integer(value)
        is_integer = det_residual <= tol.det_one and residual <= tol.integer
    return InvariantReport(
        name="kappa" if trace_mode is TraceMode.STANDARD else "kappa_tau",
        value=value,
        rounded=rounded,
        is_integer=is_integer,
        defect_data={
            "norm_w_minus_1": distance_to_one,
            "min_distance_to_minus_1": branch_distance(w, tol),
            "det_residual": det_residual,
            "within_unit_ball": distance_to_one < 1.0,
            "within_log_domain": distance_to_one < 2.0,
            "trace_mode": trace_mode.value,
            "dim": w.dim,
        },
        tolerances={
            "branch_margin": tol.branch_margin,
            "det_one": tol.det_one,
            "integer": tol.integer,
        },
    )


def _det_path(w: CMatrix) -> t.Callable[[float], complex]:
    one = identity(w.shape[0])

    def det_at(s: float) -> complex:
        return lu_det((1.0 - s) * one + s * w)

    return det_at


def winding_number_det_segment(
    w: Unitary, tol: Tolerances = DEFAULT_TOLERANCES
) -> InvariantReport:
    """Winding number of the loop `t -> det((1 - t) 1 + t w)` around 0.

    The argument is tracked along an adaptively refined partition of
    `[0, 1]`: intervals whose argument increment exceeds `tol.winding_max_step`
    are bisected up to `tol.winding_max_depth` times, intervals where the
    modulus dips below `tol.winding_dip_ratio` times the running maximum are
    bisected up to `tol.winding_dip_depth` times. No eigenvalue of `w` is used.

    Raises:
        NotALoop: when `|det(w) - 1|` exceeds `tol.loop_closure`.
        PathSingular: when the path comes within `tol.path_singular` of 0
            or the argument cannot be resolved.
    """
    det_at = _det_path(w.m)
    closure = abs(det_at(1.0) - 1.0)
    if closure > tol.loop_closure:
        raise NotALoop(closure, tol.loop_closure)

    state = {"running_max": 0.0, "evaluations": 0}

    def sample(s: float) -> complex:
        value = det_at(s)
        state["evaluations"] += 1
        modulus = abs(value)
        if modulus < tol.path_singular:
            raise PathSingular(s, modulus)
        state["running_max"] = max(state["running_max"], modulus)
        return value

    grid = np.linspace(0.0, 1.0, tol.winding_samples + 1)
    values = [sample(float(s)) for s in grid]
    min_modulus = min(abs(v) for v in values)

    def increment(t0: float, d0: complex, t1: float, d1: complex, depth: int) -> float:
        nonlocal min_modulus
        step = cmath.phase(d1 / d0)
        too_large = abs(step) > tol.winding_max_step
        dips = min(abs(d0), abs(d1)) < tol.winding_dip_ratio * state["running_max"]
        refine = (too_large and depth < tol.winding_max_depth) or (
            dips and depth < tol.winding_dip_depth
        )
        if not refine:
            if too_large:
                raise PathSingular(
                    t0, min(abs(d0), abs(d1)), "argument increment could not be resolved"
                )
            return step
        middle = 0.5 * (t0 + t1)
        dm = sample(middle)
        min_modulus = min(min_modulus, abs(dm))
        return increment(t0, d0, middle, dm, depth + 1) + increment(
            middle, dm, t1, d1, depth + 1
        )

    total = 0.0
    for k in range(tol.winding_samples):
        total += increment(float(grid[k]), values[k], float(grid[k + 1]), values[k + 1], 0)
    value = total / (2.0 * math.pi)
    rounded, residual = _nearest_integer(value)
    logger.debug(
        "winding number %.12f after %d determinant evaluations",
        value,
        state["evaluations"],
    )
    return InvariantReport(
        name="wn",
        value=value,
        rounded=rounded,
        is_integer=residual <= tol.integer,
        defect_data={
            "det_residual": closure,
            "min_modulus": min_modulus,
            "max_modulus": state["running_max"],
            "evaluations": state["evaluations"],
            "residual": residual,
            "dim": w.dim,
        },
        tolerances={
            "loop_closure": tol.loop_closure,
            "path_singular": tol.path_singular,
            "winding_samples": tol.winding_samples,
            "winding_max_depth": tol.winding_max_depth,
            "winding_max_step": tol.winding_max_step,
            "integer": tol.integer,
        },
    )


@dataclasses.dataclass(frozen=True)
class HomotopyGap:
    value: float
    argmax: float
    samples: int

    def to_json(self) -> t.Dict[str, t.Any]:
        return dataclasses.asdict(self)


def exel_homotopy_gap(w: Unitary, tol: Tolerances = DEFAULT_TOLERANCES) -> HomotopyGap:
    """Largest `||(1 - t) 1 + t w - exp(2 pi i t h)||` over `t` in `[0, 1]`.

    Here `h = (1/2 pi i) log(w)`. The maximum of a uniform grid of
    `tol.homotopy_gap_samples` points is refined by a bounded scalar search
    around the best grid point.

    Raises:
        BranchCut: when the spectrum of `w` reaches -1.
    """
    log = principal_log_unitary(w, tol=tol)
    one = identity(w.dim)

    def gap(s: float) -> float:
        return op_norm((1.0 - s) * one + s * w.m - expm(s * log), tol)

    grid = np.linspace(0.0, 1.0, tol.homotopy_gap_samples)
    values = np.array([gap(float(s)) for s in grid])
    best = int(np.argmax(values))
    value, argmax = float(values[best]), float(grid[best])
    if value > 0.0:
        lower = float(grid[max(best - 1, 0)])
        upper = float(grid[min(best + 1, grid.shape[0] - 1)])
        refined = scipy.optimize.minimize_scalar(
            lambda s: -gap(s),
            bounds=(lower, upper),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if -refined.fun > value:
            value, argmax = float(-refined.fun), float(refined.x)
    return HomotopyGap(value=value, argmax=argmax, samples=int(grid.shape[0]))


@dataclasses.dataclass(frozen=True)
class StabilityReport:
    genus: int
    dim: int
    kappa_before: InvariantReport
    kappa_after: InvariantReport
    bound: float
    hypotheses: t.Dict[str, float]
    hypothesis_holds: bool
    homotopy_samples: int
    homotopy_max_defect: float
    homotopy_max_deviation: float
    homotopy_ok: bool

    @property
    def kappa_equal(self) -> bool:
        before, after = self.kappa_before, self.kappa_after
        return (
            before.is_integer
            and after.is_integer
            and before.rounded == after.rounded
        )

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "genus": self.genus,
            "dim": self.dim,
            "kappa_before": self.kappa_before.to_json(),
            "kappa_after": self.kappa_after.to_json(),
            "kappa_equal": self.kappa_equal,
            "bound": self.bound,
            "hypotheses": dict(self.hypotheses),
            "hypothesis_holds": self.hypothesis_holds,
            "homotopy_samples": self.homotopy_samples,
            "homotopy_max_defect": self.homotopy_max_defect,
            "homotopy_max_deviation": self.homotopy_max_deviation,
            "homotopy_ok": self.homotopy_ok,
        }


def _check_tuples(*tuples: t.Sequence[Unitary]) -> t.Tuple[int, int]:
    lengths = {len(items) for items in tuples}
    if len(lengths) != 1 or 0 in lengths:
        raise DimensionMismatch("all unitary tuples must have the same positive length")
    dims = {item.dim for items in tuples for item in items}
    if len(dims) != 1:
        raise DimensionMismatch(f"unitaries have mixed dimensions {sorted(dims)}")
    return lengths.pop(), dims.pop()


def kazhdan_stability(
    us: t.Sequence[Unitary],
    vs: t.Sequence[Unitary],
    us_prime: t.Sequence[Unitary],
    vs_prime: t.Sequence[Unitary],
    strict: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> StabilityReport:
    """Compare kappa of `prod [u_i, v_i]` and `prod [u'_i, v'_i]`.

    The hypotheses `||prod [u_i, v_i] - 1|| < 1/5g`, `||u_i - u'_i|| < 1/5g` and
    `||v_i - v'_i|| < 1/5g` are measured. The homotopy
    `u_i(t) = u_i exp(t log(u_i* u'_i))` (and likewise for `v_i`) is sampled
    `tol.kazhdan_samples` times and `||w(t) - 1||` recorded along
    `w(t) = prod [u_i(t), v_i(t)]`.

    Raises:
        HypothesisViolated: when a bound fails and `strict` is True.
        BranchCut: when a logarithm along the way is undefined.
    """
    genus, dim = _check_tuples(us, vs, us_prime, vs_prime)
    bound = 1.0 / (5 * genus)
    one = identity(dim)
    before = commutator_product((u.m, v.m) for u, v in zip(us, vs))
    after = commutator_product((u.m, v.m) for u, v in zip(us_prime, vs_prime))
    hypotheses = {"commutator_defect": op_norm(before - one, tol)}
    for i, (u, u2, v, v2) in enumerate(zip(us, us_prime, vs, vs_prime), start=1):
        hypotheses[f"u{i}_distance"] = op_norm(u.m - u2.m, tol)
        hypotheses[f"v{i}_distance"] = op_norm(v.m - v2.m, tol)
    violated = [(name, value) for name, value in hypotheses.items() if value >= bound]
    if violated:
        name, value = max(violated, key=lambda item: item[1] - bound)
        if strict:
            raise HypothesisViolated(name, value, bound)
        logger.warning(
            "kazhdan hypothesis '%s' violated (%.6g >= %.6g); reporting as observation",
            name,
            value,
            bound,
        )

    generators = []
    for start, end in list(zip(us, us_prime)) + list(zip(vs, vs_prime)):
        step = Unitary.from_matrix(adjoint(start.m) @ end.m, tol)
        generators.append((start.m, principal_log_unitary(step, tol=tol)))
    max_defect = 0.0
    max_deviation = 0.0
    for s in np.linspace(0.0, 1.0, tol.kazhdan_samples):
        path = [start @ expm(float(s) * log) for start, log in generators]
        max_deviation = max(
            max_deviation,
            max(op_norm(point - start, tol) for point, (start, _) in zip(path, generators)),
        )
        w_t = commutator_product(zip(path[:genus], path[genus:]))
        max_defect = max(max_defect, op_norm(w_t - one, tol))

    report = StabilityReport(
        genus=genus,
        dim=dim,
        kappa_before=kappa(Unitary.from_matrix(before, tol), tol=tol),
        kappa_after=kappa(Unitary.from_matrix(after, tol), tol=tol),
        bound=bound,
        hypotheses=hypotheses,
        hypothesis_holds=not violated,
        homotopy_samples=tol.kazhdan_samples,
        homotopy_max_defect=max_defect,
        homotopy_max_deviation=max_deviation,
        homotopy_ok=max_defect < 1.0,
    )
    logger.debug(
        "kazhdan stability g=%d n=%d: kappa %s -> %s, max ||w(t) - 1|| = %.6g",
        genus,
        dim,
        report.kappa_before.rounded,
        report.kappa_after.rounded,
        max_defect,
    )
    return report


@dataclasses.dataclass(frozen=True)
class ObstructionReport:
    genus: int
    kappa: InvariantReport
    commutator_defect: float
    certified_radius: t.Optional[float]

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "genus": self.genus,
            "kappa": self.kappa.to_json(),
            "commutator_defect": self.commutator_defect,
            "certified_radius": self.certified_radius,
        }


def approximant_obstruction(
    us: t.Sequence[Unitary],
    vs: t.Sequence[Unitary],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ObstructionReport:
    """Certify that no exactly commuting tuple lies close to `(u_i, v_i)`.

    When `||prod [u_i, v_i] - 1|| < 1/5g` and kappa of the product is a non-zero
    integer, any tuple `(u'_i, v'_i)` with `prod [u'_i, v'_i] = 1` has some entry
    at distance at least `1/5g`; that radius is returned, otherwise None.
    """
    genus, dim = _check_tuples(us, vs)
    product = commutator_product((u.m, v.m) for u, v in zip(us, vs))
    defect = op_norm(product - identity(dim), tol)
    report = kappa(Unitary.from_matrix(product, tol), tol=tol)
    radius = 1.0 / (5 * genus)
    certified = defect < radius and report.is_integer and report.rounded != 0
    return ObstructionReport(
        genus=genus,
        kappa=report,
        commutator_defect=defect,
        certified_radius=radius if certified else None,
    )
