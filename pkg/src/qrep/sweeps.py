"""Parameter sweeps producing one CSV row per case.

Failed cases are never skipped: they appear as rows whose `status` is the
name of the exception and whose `error` column holds its message.
"""
import concurrent.futures
import csv
import dataclasses
import logging
import typing as t
from pathlib import Path

from qrep.bott import Z2Bott, calibrate_orientation, verify_index_formula
from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.errors import QrepError
from qrep.examples import (
    PerturbationSpec,
    perturb,
    pullback,
    surface_pullback_images,
    voiculescu_quasi_rep,
)
from qrep.invariants import kappa, kazhdan_stability, winding_number_det_segment
from qrep.matcore import Unitary
from qrep.words import CommutatorDatum, QuasiRep, evaluate, mult_defect, relator_defect

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "n",
    "g",
    "seed",
    "radius",
    "kappa",
    "wn",
    "k",
    "relator_defect",
    "mult_defect",
    "e_defect",
    "gap",
    "status",
    "error",
    "kappa_before",
)

STATUS_OK = "ok"
STATUS_MISMATCH = "mismatch"
# Stability run with a hypothesis bound violated (observation mode)
STATUS_UNVERIFIED = "unverified"


@dataclasses.dataclass
class SweepRow:
    n: int
    g: int = 1
    seed: t.Optional[int] = None
    radius: t.Optional[float] = None
    kappa: t.Optional[int] = None
    wn: t.Optional[int] = None
    k: t.Optional[int] = None
    relator_defect: t.Optional[float] = None
    mult_defect: t.Optional[float] = None
    e_defect: t.Optional[float] = None
    gap: t.Optional[float] = None
    status: str = STATUS_OK
    error: str = ""
    kappa_before: t.Optional[int] = None

    @property
    def failed(self) -> bool:
        return self.status not in (STATUS_OK, STATUS_UNVERIFIED)

    def to_json(self) -> t.Dict[str, t.Any]:
        return dataclasses.asdict(self)

    def to_csv(self) -> t.List[str]:
        values = self.to_json()
        return ["" if values[column] is None else str(values[column]) for column in CSV_COLUMNS]


Case = t.TypeVar("Case")


def _run_cases(
    cases: t.Sequence[Case],
    run: t.Callable[[Case], SweepRow],
    on_error: t.Callable[[Case, Exception], SweepRow],
    jobs: int = 1,
) -> t.List[SweepRow]:
    def guarded(case: Case) -> SweepRow:
        try:
            return run(case)
        except Exception as exc:
            if isinstance(exc, QrepError):
                logger.debug("case %r failed: %s", case, exc)
            else:
                logger.warning("case %r failed: %s: %s", case, type(exc).__name__, exc)
            row = on_error(case, exc)
            row.status = type(exc).__name__
            row.error = str(exc)
            return row

    if jobs <= 1 or len(cases) <= 1:
        return [guarded(case) for case in cases]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
        # map yields results in submission order
        return list(executor.map(guarded, cases))


def exel_loring_sweep(
    ns: t.Sequence[int],
    tol: Tolerances = DEFAULT_TOLERANCES,
    jobs: int = 1,
) -> t.List[SweepRow]:
    """`k(u_n, v_n)`, the winding number and kappa of `[v_n, u_n]` for every `n`."""
    calibrate_orientation(tol)

    def run(n: int) -> SweepRow:
        qr = voiculescu_quasi_rep(n)
        report = verify_index_formula(
            Z2Bott(), qr, CommutatorDatum.fundamental(qr.presentation), tol
        )
        logger.debug("exel-loring n=%d: equal=%s", n, report.equal)
        return SweepRow(
            n=n,
            kappa=report.rhs_kappa.rounded,
            wn=report.rhs_wn.rounded,
            k=report.lhs_k,
            relator_defect=report.defects["relator_defect"],
            mult_defect=report.defects["mult_defect"],
            e_defect=report.defects["e_defect"],
            gap=report.defects["gap"],
            status=STATUS_OK if report.equal else STATUS_MISMATCH,
        )

    return _run_cases(list(ns), run, lambda n, exc: SweepRow(n=n), jobs)


def _stability_pairs(
    qr: QuasiRep, genus: int
) -> t.Tuple[t.List[Unitary], t.List[Unitary]]:
    if genus == 1 and qr.presentation.generators == ("a", "b"):
        return [qr.images["a"]], [qr.images["b"]]
    return (
        [qr.images[f"s{i}"] for i in range(1, genus + 1)],
        [qr.images[f"t{i}"] for i in range(1, genus + 1)],
    )


def stability_case(
    genus: int,
    n: int,
    radius: float,
    seed: int,
    strict: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SweepRow:
    """Perturb the Voiculescu datum of genus `genus` and compare kappa before and after.

    For `genus > 1` the Voiculescu quasi-representation is pulled back to the
    surface group of that genus (`s1 -> a`, `t1 -> b`, other generators to 1).
    """
    qr = voiculescu_quasi_rep(n)
    if genus > 1:
        qr = pullback(qr, surface_pullback_images(genus), tol)
    perturbed = perturb(qr, PerturbationSpec(radius=radius, seed=seed), tol)
    us, vs = _stability_pairs(qr, genus)
    us2, vs2 = _stability_pairs(perturbed, genus)
    report = kazhdan_stability(us, vs, us2, vs2, strict=strict, tol=tol)
    relator = perturbed.presentation.relators[0]
    product = evaluate(relator, perturbed.images, perturbed.dim, tol)
    wn = winding_number_det_segment(product, tol)
    equal = report.kappa_equal and report.homotopy_ok and wn.rounded == report.kappa_after.rounded
    if not report.hypothesis_holds:
        status = STATUS_UNVERIFIED
    else:
        status = STATUS_OK if equal else STATUS_MISMATCH
    return SweepRow(
        n=n,
        g=genus,
        seed=seed,
        radius=radius,
        kappa=report.kappa_after.rounded,
        wn=wn.rounded,
        relator_defect=relator_defect(perturbed, tol),
        mult_defect=mult_defect(perturbed, perturbed.presentation.generators, tol).epsilon,
        status=status,
        kappa_before=report.kappa_before.rounded,
    )


def stability_sweep(
    genus: int,
    n: int,
    radius: float,
    seeds: t.Sequence[int],
    strict: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
    jobs: int = 1,
) -> t.List[SweepRow]:
    """One `stability_case` per seed, in seed order."""

    def run(seed: int) -> SweepRow:
        return stability_case(genus, n, radius, seed, strict, tol)

    def failed(seed: int, exc: Exception) -> SweepRow:
        return SweepRow(n=n, g=genus, seed=seed, radius=radius)

    return _run_cases(list(seeds), run, failed, jobs)


def voiculescu_family_sweep(
    ns: t.Sequence[int],
    tol: Tolerances = DEFAULT_TOLERANCES,
    jobs: int = 1,
) -> t.List[SweepRow]:
    """Kappa and the winding number of `[u_n, v_n]` along the Voiculescu family."""

    def run(n: int) -> SweepRow:
        qr = voiculescu_quasi_rep(n)
        w = evaluate(qr.presentation.relators[0], qr.images, n, tol)
        kappa_report = kappa(w, tol=tol)
        wn = winding_number_det_segment(w, tol)
        equal = kappa_report.is_integer and wn.is_integer and kappa_report.rounded == wn.rounded
        return SweepRow(
            n=n,
            kappa=kappa_report.rounded,
            wn=wn.rounded,
            relator_defect=relator_defect(qr, tol),
            status=STATUS_OK if equal else STATUS_MISMATCH,
        )

    return _run_cases(list(ns), run, lambda n, exc: SweepRow(n=n), jobs)


def write_csv(rows: t.Iterable[SweepRow], path: t.Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv())
