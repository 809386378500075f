"""Numerical tolerances and sampling densities.

All defaults can be overridden from the environment using variables named
`QREP_TOL_<FIELD>` (for example `QREP_TOL_BRANCH_MARGIN=1e-5`), or from the
command line using `--tol-<field>` flags.
"""
import dataclasses
import math
import os
import typing as t

ENV_PREFIX = "QREP_TOL_"

EIGENSOLVERS = ("jacobi", "lapack")


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Tolerances used by every numeric operation.

    Arguments:
        unitarity: accepted value of `||m*m - 1||` for unitary input.
        hermiticity: accepted value of `||h - h*||` for self-adjoint input.
        cluster: gap below which eigenvalues of `(w + w*)/2` are grouped.
        branch_margin: minimal distance between the spectrum of a unitary and -1 before taking its logarithm.
        integer: residual below which a real invariant is reported as an integer.
        det_one: accepted value of `|det(w) - 1|` for integrality of kappa.
        loop_closure: accepted value of `|det(w) - 1|` for the determinant loop.
        path_singular: modulus below which the determinant path is declared singular.
        spectral_threshold: cut point of the spectral projection.
        spectral_gap: half-width of the band which must be free of eigenvalues.
        bott_defect: largest accepted defect `||e^2 - e||` of the Bott almost-projection.
        jacobi_tol: relative off-diagonal norm at which Jacobi sweeps stop.
        jacobi_max_sweeps: maximal number of Jacobi sweeps.
        eigensolver: "jacobi" (deterministic, default) or "lapack".
        winding_samples: number of uniform intervals of the determinant path.
        winding_max_depth: maximal bisection depth of an interval.
        winding_max_step: largest accepted argument increment on an interval.
        winding_dip_ratio: relative modulus below which intervals are refined.
        winding_dip_depth: maximal bisection depth triggered by a modulus dip.
        homotopy_gap_samples: number of grid points of the homotopy gap scan.
        kazhdan_samples: number of samples of the Kazhdan homotopy.
    """

    unitarity: float = 1e-8
    hermiticity: float = 1e-8
    cluster: float = 1e-7
    branch_margin: float = 1e-6
    integer: float = 1e-6
    det_one: float = 1e-8
    loop_closure: float = 1e-6
    path_singular: float = 1e-12
    spectral_threshold: float = 0.5
    spectral_gap: float = 0.1
    bott_defect: float = 0.125
    jacobi_tol: float = 1e-14
    jacobi_max_sweeps: int = 60
    eigensolver: str = "jacobi"
    winding_samples: int = 64
    winding_max_depth: int = 40
    winding_max_step: float = math.pi / 2
    winding_dip_ratio: float = 0.1
    winding_dip_depth: int = 8
    homotopy_gap_samples: int = 257
    kazhdan_samples: int = 65

    def __post_init__(self) -> None:
        if self.eigensolver not in EIGENSOLVERS:
            raise ValueError(
                f"eigensolver must be one of {EIGENSOLVERS}, got {self.eigensolver!r}"
            )
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, (int, float)) and value < 0:
                raise ValueError(f"tolerance '{field.name}' must be non-negative")
        if self.winding_samples < 1:
            raise ValueError("winding_samples must be at least 1")
        if self.homotopy_gap_samples < 2 or self.kazhdan_samples < 2:
            raise ValueError("homotopy sampling densities must be at least 2")

    def replace(self, **overrides: t.Any) -> "Tolerances":
        """Return a copy with some fields replaced. `None` values are ignored."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> t.Dict[str, t.Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_env(
        cls, environ: t.Optional[t.Mapping[str, str]] = None
    ) -> "Tolerances":
        """Read `QREP_TOL_*` overrides from the environment."""
        environ = os.environ if environ is None else environ
        overrides: t.Dict[str, t.Any] = {}
        for field in dataclasses.fields(cls):
            raw = environ.get(ENV_PREFIX + field.name.upper())
            if raw is None or raw == "":
                continue
            overrides[field.name] = _coerce(field, raw)
        return cls(**overrides)


def _coerce(field: "dataclasses.Field[t.Any]", raw: str) -> t.Any:
    kind = field.type
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise ValueError(
            f"invalid value for {ENV_PREFIX}{field.name.upper()}: {raw!r}"
        ) from None
    return raw


def tolerance_fields() -> t.List["dataclasses.Field[t.Any]"]:
    return list(dataclasses.fields(Tolerances))


DEFAULT_TOLERANCES = Tolerances()
