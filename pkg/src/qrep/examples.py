"""Generators of quasi-representations.

- the Voiculescu pair `(u_n, v_n)` and the `Z2` quasi-representation it spans,
- commuting pairs (genuine representations) for null tests,
- seeded perturbations of generator images,
- pullbacks along homomorphisms from surface groups onto `Z2`,
- direct sums.
"""
import dataclasses
import logging
import math
import typing as t

import numpy as np
import scipy.linalg

from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.errors import (
    InvalidParameter,
    PresentationMismatch,
    RadiusTooLarge,
    UnboundGenerator,
)
from qrep.matcore import (
    Unitary,
    adjoint,
    expm,
    op_norm,
    random_skew_hermitian,
    random_unitary,
)
from qrep.words import (
    FreeWord,
    Presentation,
    PresentationKind,
    PullbackThrough,
    QuasiRep,
    Strategy,
    WordProduct,
    Z2NormalForm,
    evaluate,
    parse_word,
)

logger = logging.getLogger(__name__)

Z2_GENERATORS = ("a", "b")


def voiculescu_pair(n: int) -> t.Tuple[Unitary, Unitary]:
    """The cyclic shift `u_n` and the clock matrix `v_n = diag(l, l^2, ..., l^n)`, `l = exp(2 pi i/n)`.

    Their commutator `u v u* v*` equals `exp(-2 pi i/n) 1_n`.
    """
    if n < 2:
        raise InvalidParameter(f"n must be at least 2, got {n}")
    u = np.zeros((n, n), dtype=np.complex128)
    u[np.arange(1, n), np.arange(n - 1)] = 1.0
    u[0, n - 1] = 1.0
    v = np.diag(np.exp(2j * math.pi * np.arange(1, n + 1) / n))
    return Unitary.from_matrix(u), Unitary.from_matrix(v)


def z2_quasi_rep(u: Unitary, v: Unitary) -> QuasiRep:
    """Quasi-representation of `Z2` sending `(j, k)` to `u^j v^k`."""
    return QuasiRep(
        presentation=Presentation.z2(),
        images={"a": u, "b": v},
        strategy=Z2NormalForm(),
    )


def voiculescu_quasi_rep(n: int) -> QuasiRep:
    u, v = voiculescu_pair(n)
    return z2_quasi_rep(u, v)


def diagonal_pair(n: int, j: int, k: int) -> t.Tuple[Unitary, Unitary]:
    """The commuting pair `diag(z^(j m))`, `diag(z^(k m))`, `z = exp(2 pi i/n)`, `m = 0..n-1`."""
    if n < 1:
        raise InvalidParameter(f"n must be at least 1, got {n}")
    phases = 2j * math.pi * np.arange(n) / n
    u = np.diag(np.exp(j * phases))
    v = np.diag(np.exp(k * phases))
    return Unitary.from_matrix(u), Unitary.from_matrix(v)


def genuine_representation(n: int, seed: int = 0) -> QuasiRep:
    """A representation of `Z2`: two random unitaries diagonal in a common Haar basis."""
    rng = np.random.default_rng(seed)
    basis = random_unitary(n, rng)
    alpha = np.exp(2j * math.pi * rng.random(n))
    beta = np.exp(2j * math.pi * rng.random(n))
    u = (basis * alpha) @ adjoint(basis)
    v = (basis * beta) @ adjoint(basis)
    return z2_quasi_rep(Unitary.from_matrix(u), Unitary.from_matrix(v))


@dataclasses.dataclass(frozen=True)
class PerturbationSpec:
    """Multiply generator images by `exp(K)` with `||exp(K) - 1|| = radius`.

    Arguments:
        radius: operator norm distance between original and perturbed images.
        seed: seed of the PCG64 stream the skew-Hermitian directions are drawn from.
        targets: generators to perturb. All generators when None.
    """

    radius: float
    seed: int = 0
    targets: t.Optional[t.Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise InvalidParameter(f"radius must be non-negative, got {self.radius}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def _scaled_direction(
    n: int, radius: float, rng: np.random.Generator, tol: Tolerances
) -> np.ndarray:
    direction = random_skew_hermitian(n, rng)
    norm = op_norm(direction, tol)
    if norm == 0.0:
        return direction
    # ||exp(s K) - 1|| = 2 sin(s ||K|| / 2) for skew-Hermitian K with s ||K|| <= pi
    return direction * (2.0 * math.asin(radius / 2.0) / norm)


def perturb(
    qr: QuasiRep, spec: PerturbationSpec, tol: Tolerances = DEFAULT_TOLERANCES
) -> QuasiRep:
    """Perturb the targeted generator images of `qr`.

    Generators are visited in presentation order, each drawing one direction
    from the seeded stream. A pulled-back quasi-representation becomes a
    `WordProduct` quasi-representation on the perturbed images.

    Raises:
        RadiusTooLarge: when `spec.radius >= 2`.
        UnboundGenerator: when a target is not a generator of the presentation.
    """
    if spec.radius >= 2.0:
        raise RadiusTooLarge(spec.radius)
    generators = qr.presentation.generators
    targets = generators if spec.targets is None else spec.targets
    for target in targets:
        if target not in generators:
            raise UnboundGenerator(target, "presentation")
    if spec.radius == 0.0:
        return qr
    rng = np.random.default_rng(spec.seed)
    images = dict(qr.images)
    for generator in generators:
        if generator not in targets:
            continue
        step = expm(_scaled_direction(qr.dim, spec.radius, rng, tol))
        images[generator] = Unitary.from_matrix(images[generator].m @ step, tol)
    strategy: Strategy = qr.strategy
    if isinstance(strategy, PullbackThrough):
        strategy = WordProduct()
    logger.debug(
        "perturbed %s of a dimension %d quasi-representation (radius %.6g, seed %d)",
        ",".join(targets),
        qr.dim,
        spec.radius,
        spec.seed,
    )
    return QuasiRep(presentation=qr.presentation, images=images, strategy=strategy)


def surface_pullback_images(genus: int, swap: bool = False) -> t.Dict[str, FreeWord]:
    """Images `s1 -> a`, `t1 -> b` and every other generator to the empty word.

    With `swap` the first pair is sent to `(b, a)` instead.
    """
    if genus < 1:
        raise InvalidParameter("genus must be at least 1")
    a, b = FreeWord.generator("a"), FreeWord.generator("b")
    images = {"s1": b if swap else a, "t1": a if swap else b}
    for i in range(2, genus + 1):
        images[f"s{i}"] = FreeWord()
        images[f"t{i}"] = FreeWord()
    return images


def pullback(
    base: QuasiRep,
    images: t.Mapping[str, t.Union[str, FreeWord]],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> QuasiRep:
    """Compose a quasi-representation of `Z2` with a homomorphism from a surface group.

    `images` maps the generators `s1, t1, ..., sg, tg` to words over `a`, `b`;
    the genus is read off the mapping.

    Raises:
        PresentationMismatch: when `base` is not a quasi-representation of `Z2`.
        UnboundGenerator: when an image uses other generators than `a`, `b`
            or the mapping does not cover a surface presentation.
    """
    if base.presentation.kind is not PresentationKind.Z2:
        raise PresentationMismatch("pullbacks are taken from quasi-representations of Z2")
    words = {
        name: parse_word(word) if isinstance(word, str) else word
        for name, word in images.items()
    }
    for name, word in words.items():
        unknown = sorted(word.generators() - set(Z2_GENERATORS))
        if unknown:
            raise UnboundGenerator(unknown[0], f"Z2 (image of '{name}')")
    if not words or len(words) % 2:
        raise UnboundGenerator(
            next(iter(words), "s1"), "surface presentation (images come in pairs)"
        )
    presentation = Presentation.surface(len(words) // 2)
    missing = sorted(set(presentation.generators) - set(words))
    if missing:
        raise UnboundGenerator(missing[0], "pullback images")
    surface_images = {
        name: evaluate(words[name], base.images, base.dim, tol)
        for name in presentation.generators
    }
    return QuasiRep(
        presentation=presentation,
        images=surface_images,
        strategy=PullbackThrough(substitution=words, base=base),
    )


def direct_sum(qr1: QuasiRep, qr2: QuasiRep) -> QuasiRep:
    """Generator-wise block-diagonal sum.

    Raises:
        PresentationMismatch: when the presentations differ.
    """
    if qr1.presentation != qr2.presentation:
        raise PresentationMismatch("direct sums need quasi-representations of one presentation")
    images = {
        name: Unitary.from_matrix(scipy.linalg.block_diag(qr1.images[name].m, qr2.images[name].m))
        for name in qr1.presentation.generators
    }
    strategy: Strategy = WordProduct()
    s1, s2 = qr1.strategy, qr2.strategy
    if isinstance(s1, Z2NormalForm) and isinstance(s2, Z2NormalForm):
        strategy = Z2NormalForm()
    elif (
        isinstance(s1, PullbackThrough)
        and isinstance(s2, PullbackThrough)
        and dict(s1.substitution) == dict(s2.substitution)
    ):
        strategy = PullbackThrough(
            substitution=s1.substitution, base=direct_sum(s1.base, s2.base)
        )
    return QuasiRep(presentation=qr1.presentation, images=images, strategy=strategy)
