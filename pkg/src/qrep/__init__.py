from .__about__ import __version__
from .bott import k_invariant, verify_index_formula
from .config import DEFAULT_TOLERANCES, Tolerances
from .invariants import kappa, winding_number_det_segment
from .matcore import Unitary
from .words import QuasiRep, parse_word

__all__ = [
    "__version__",
    "DEFAULT_TOLERANCES",
    "QuasiRep",
    "Tolerances",
    "Unitary",
    "k_invariant",
    "kappa",
    "parse_word",
    "verify_index_formula",
    "winding_number_det_segment",
]
