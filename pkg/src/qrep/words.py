"""Free-group words, presentations and quasi-representations.

Words are written in a small grammar:

```
word        := factor*
factor      := atom ("^" integer)?
atom        := identifier | "1" | "(" word ")" | "[" word "," word "]"
```

`[x, y]` expands to `x y x^-1 y^-1` and `1` denotes the empty word.
"""
import abc
import dataclasses
import enum
import logging
import typing as t
from pathlib import Path

import numpy as np
import pyparsing as pp

from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.errors import (
    DimensionMismatch,
    ReportFormatError,
    StrategyUndefined,
    UnboundGenerator,
    WordSyntaxError,
)
from qrep.matcore import (
    CMatrix,
    Unitary,
    adjoint,
    identity,
    load_document,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    read_matrix,
)

logger = logging.getLogger(__name__)

MAX_EXPONENT = 10**6
# letters in a parsed word, after expanding powers and commutators
MAX_WORD_LENGTH = 10**6

Letter = t.Tuple[str, int]


@dataclasses.dataclass(frozen=True)
class FreeWord:
    """A word in a free group: a sequence of generators with exponents +1 or -1."""

    letters: t.Tuple[Letter, ...] = ()

    def __post_init__(self) -> None:
        for generator, exponent in self.letters:
            if exponent not in (1, -1):
                raise ValueError(f"letter exponents must be +1 or -1, got {exponent}")
            if not generator:
                raise ValueError("generator names cannot be empty")

    @classmethod
    def generator(cls, name: str) -> "FreeWord":
        return cls(((name, 1),))

    @classmethod
    def concat(cls, words: t.Iterable["FreeWord"]) -> "FreeWord":
        letters: t.List[Letter] = []
        for word in words:
            letters.extend(word.letters)
        return cls(tuple(letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "FreeWord") -> "FreeWord":
        return FreeWord(self.letters + other.letters)

    def __str__(self) -> str:
        return self.render()

    def inverse(self) -> "FreeWord":
        return FreeWord(tuple((g, -e) for g, e in reversed(self.letters)))

    def power(self, k: int) -> "FreeWord":
        if abs(k) > MAX_EXPONENT:
            raise ValueError(f"exponent {k} exceeds {MAX_EXPONENT}")
        if len(self) * abs(k) > MAX_WORD_LENGTH:
            raise ValueError(f"power has more than {MAX_WORD_LENGTH} letters")
        base = self if k >= 0 else self.inverse()
        return FreeWord(base.letters * abs(k))

    def is_empty(self) -> bool:
        return not self.letters

    def generators(self) -> t.FrozenSet[str]:
        return frozenset(g for g, _ in self.letters)

    def exponent_sums(self) -> t.Dict[str, int]:
        sums: t.Dict[str, int] = {}
        for generator, exponent in self.letters:
            sums[generator] = sums.get(generator, 0) + exponent
        return sums

    def substitute(self, mapping: t.Mapping[str, "FreeWord"]) -> "FreeWord":
        """Replace every generator by its image word."""
        parts = []
        for generator, exponent in self.letters:
            if generator not in mapping:
                raise UnboundGenerator(generator, "substitution")
            image = mapping[generator]
            parts.append(image if exponent > 0 else image.inverse())
        return FreeWord.concat(parts)

    def render(self) -> str:
        """Render the word in the parser grammar, collapsing runs into powers."""
        if not self.letters:
            return "1"
        chunks = []
        index = 0
        while index < len(self.letters):
            generator, exponent = self.letters[index]
            run = 1
            while (
                index + run < len(self.letters)
                and self.letters[index + run] == (generator, exponent)
            ):
                run += 1
            power = run * exponent
            chunks.append(generator if power == 1 else f"{generator}^{power}")
            index += run
        return " ".join(chunks)


def commutator(a: FreeWord, b: FreeWord) -> FreeWord:
    """Return `a b a^-1 b^-1`."""
    return FreeWord.concat((a, b, a.inverse(), b.inverse()))


def reduce(w: FreeWord) -> FreeWord:
    """Freely reduce a word."""
    stack: t.List[Letter] = []
    for generator, exponent in w.letters:
        if stack and stack[-1] == (generator, -exponent):
            stack.pop()
        else:
            stack.append((generator, exponent))
    return FreeWord(tuple(stack))


def _check_length(s: str, loc: int, length: int) -> None:
    if length > MAX_WORD_LENGTH:
        raise pp.ParseFatalException(s, loc, f"word expands to more than {MAX_WORD_LENGTH} letters")


def _power_action(s: str, loc: int, tokens: pp.ParseResults) -> FreeWord:
    word = t.cast(FreeWord, tokens[0])
    if len(tokens) == 1:
        return word
    exponent = int(tokens[1])
    if exponent == 0:
        raise pp.ParseFatalException(s, loc, "exponent must be non-zero")
    if abs(exponent) > MAX_EXPONENT:
        raise pp.ParseFatalException(s, loc, f"exponent exceeds {MAX_EXPONENT}")
    _check_length(s, loc, len(word) * abs(exponent))
    return word.power(exponent)


def _commutator_action(s: str, loc: int, tokens: pp.ParseResults) -> FreeWord:
    _check_length(s, loc, 2 * (len(tokens[0]) + len(tokens[1])))
    return commutator(tokens[0], tokens[1])


def _concat_action(s: str, loc: int, tokens: pp.ParseResults) -> FreeWord:
    _check_length(s, loc, sum(len(word) for word in tokens))
    return FreeWord.concat(tokens)


def _build_grammar() -> pp.ParserElement:
    word = pp.Forward()
    identifier = pp.Regex(r"[A-Za-z][A-Za-z0-9_]*").set_parse_action(
        lambda tokens: FreeWord.generator(tokens[0])
    )
    unit = pp.Literal("1").set_parse_action(lambda: FreeWord())
    integer = pp.Regex(r"[+-]?\d+")
    bracket = (
        pp.Suppress("[") + word + pp.Suppress(",") + word + pp.Suppress("]")
    ).set_parse_action(_commutator_action)
    group = pp.Suppress("(") + word + pp.Suppress(")")
    atom = identifier | unit | bracket | group
    factor = (atom + pp.Optional(pp.Suppress("^") + integer)).set_parse_action(
        _power_action
    )
    word <<= pp.ZeroOrMore(factor).set_parse_action(_concat_action)
    return word + pp.StringEnd()


_GRAMMAR = _build_grammar()


def parse_word(text: str) -> FreeWord:
    """Parse a word. The result is not reduced.

    Raises:
        WordSyntaxError: with the byte offset of the error.
    """
    try:
        result = _GRAMMAR.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        offset = len(text[: exc.loc].encode("utf-8"))
        raise WordSyntaxError(exc.msg, text, offset) from None
    return t.cast(FreeWord, result[0])


class PresentationKind(str, enum.Enum):
    Z2 = "Z2"
    SURFACE = "surface"
    CUSTOM = "custom"


@dataclasses.dataclass(frozen=True)
class Presentation:
    generators: t.Tuple[str, ...]
    relators: t.Tuple[FreeWord, ...]
    kind: PresentationKind = PresentationKind.CUSTOM
    genus: t.Optional[int] = None

    def __post_init__(self) -> None:
        if len(set(self.generators)) != len(self.generators):
            raise ValueError("generators must be distinct")
        for relator in self.relators:
            unknown = relator.generators() - set(self.generators)
            if unknown:
                raise UnboundGenerator(sorted(unknown)[0], "presentation")

    @classmethod
    def z2(cls) -> "Presentation":
        a, b = FreeWord.generator("a"), FreeWord.generator("b")
        return cls(("a", "b"), (commutator(a, b),), PresentationKind.Z2, 1)

    @classmethod
    def surface(cls, genus: int) -> "Presentation":
        if genus < 1:
            raise ValueError("genus must be at least 1")
        generators = []
        factors = []
        for i in range(1, genus + 1):
            generators += [f"s{i}", f"t{i}"]
            factors.append(
                commutator(FreeWord.generator(f"s{i}"), FreeWord.generator(f"t{i}"))
            )
        return cls(
            tuple(generators),
            (FreeWord.concat(factors),),
            PresentationKind.SURFACE,
            genus,
        )

    @classmethod
    def custom(
        cls, generators: t.Sequence[str], relators: t.Sequence[t.Union[str, FreeWord]]
    ) -> "Presentation":
        words = tuple(
            parse_word(relator) if isinstance(relator, str) else relator
            for relator in relators
        )
        return cls(tuple(generators), words, PresentationKind.CUSTOM, None)

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "kind": self.kind.value,
            "genus": self.genus,
            "generators": list(self.generators),
            "relators": [relator.render() for relator in self.relators],
        }

    @classmethod
    def from_json(cls, data: t.Mapping[str, t.Any]) -> "Presentation":
        kind = PresentationKind(data.get("kind", "custom"))
        if kind is PresentationKind.Z2:
            return cls.z2()
        if kind is PresentationKind.SURFACE:
            return cls.surface(int(data["genus"]))
        return cls.custom(data["generators"], data.get("relators", []))


@dataclasses.dataclass(frozen=True)
class CommutatorDatum:
    """A product of commutators representing a two-homology class (Hopf's formula)."""

    pairs: t.Tuple[t.Tuple[FreeWord, FreeWord], ...]
    ambient: Presentation

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ValueError("a commutator datum needs at least one pair")
        used = frozenset().union(*(a.generators() | b.generators() for a, b in self.pairs))
        unknown = sorted(used - set(self.ambient.generators))
        if unknown:
            raise UnboundGenerator(unknown[0], "ambient presentation")

    @property
    def genus(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_text(
        cls, pairs: t.Sequence[t.Tuple[str, str]], ambient: Presentation
    ) -> "CommutatorDatum":
        return cls(tuple((parse_word(a), parse_word(b)) for a, b in pairs), ambient)

    @classmethod
    def fundamental(cls, presentation: Presentation) -> "CommutatorDatum":
        """The datum `prod [s_i, t_i]` of a surface presentation (or `[a, b]` for Z2)."""
        if presentation.kind is PresentationKind.CUSTOM:
            raise StrategyUndefined("custom presentations have no fundamental datum")
        gens = presentation.generators
        pairs = tuple(
            (FreeWord.generator(gens[i]), FreeWord.generator(gens[i + 1]))
            for i in range(0, len(gens), 2)
        )
        return cls(pairs, presentation)

    def word(self) -> FreeWord:
        return FreeWord.concat(commutator(a, b) for a, b in self.pairs)

    def reversed_word(self) -> FreeWord:
        """The product `prod [b_i, a_i]` with every commutator reversed."""
        return FreeWord.concat(commutator(b, a) for a, b in self.pairs)

    def z2_degree(
        self, substitution: t.Optional[t.Mapping[str, FreeWord]] = None
    ) -> int:
        """Class of the datum in the second homology of Z2, an integer.

        Each pair contributes the determinant of the abelianised exponent
        vectors of its entries; `substitution` first maps the ambient generators
        to words over the Z2 generators `a`, `b`.
        """
        total = 0
        for a, b in self.pairs:
            if substitution is not None:
                a, b = a.substitute(substitution), b.substitute(substitution)
            ja, ka = _z2_coordinates(a, ("a", "b"))
            jb, kb = _z2_coordinates(b, ("a", "b"))
            total += ja * kb - ka * jb
        return total

    def render(self) -> str:
        return " ".join(f"[{a.render()}, {b.render()}]" for a, b in self.pairs)


def _z2_coordinates(word: FreeWord, generators: t.Sequence[str]) -> t.Tuple[int, int]:
    unknown = word.generators() - set(generators)
    if unknown:
        raise StrategyUndefined(
            f"word '{word.render()}' is not over the Z2 generators {tuple(generators)}"
        )
    sums = word.exponent_sums()
    return sums.get(generators[0], 0), sums.get(generators[1], 0)


def _evaluate_matrix(
    w: FreeWord, assignment: t.Mapping[str, Unitary], dim: t.Optional[int] = None
) -> CMatrix:
    dims = {image.dim for image in assignment.values()}
    if len(dims) > 1:
        raise DimensionMismatch(f"assignment mixes dimensions {sorted(dims)}")
    if dim is None:
        if not dims:
            raise DimensionMismatch("cannot infer the dimension of an empty assignment")
        dim = dims.pop()
    elif dims and dims != {dim}:
        raise DimensionMismatch(f"assignment has dimension {dims.pop()}, expected {dim}")
    result = identity(dim)
    for generator, exponent in w.letters:
        if generator not in assignment:
            raise UnboundGenerator(generator)
        image = assignment[generator].m
        result = result @ (image if exponent > 0 else adjoint(image))
    return result


def evaluate(
    w: FreeWord,
    assignment: t.Mapping[str, Unitary],
    dim: t.Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Unitary:
    """Evaluate a word left to right, inverses through adjoints."""
    return Unitary.from_matrix(_evaluate_matrix(w, assignment, dim), tol)


class StrategyKind(str, enum.Enum):
    Z2_NORMAL_FORM = "z2_normal_form"
    PULLBACK = "pullback"
    WORD_PRODUCT = "word_product"


class Strategy(abc.ABC):
    """How a quasi-representation assigns a matrix to a group element."""

    kind: StrategyKind

    @abc.abstractmethod
    def element(self, qr: "QuasiRep", word: FreeWord) -> CMatrix:
        """Return the image of the group element represented by `word`."""

    def to_json(self) -> t.Dict[str, t.Any]:
        return {"kind": self.kind.value}


class Z2NormalForm(Strategy):
    """Evaluate `(j, k)` in Z2 as `u^j v^k`."""

    kind = StrategyKind.Z2_NORMAL_FORM

    def element(self, qr: "QuasiRep", word: FreeWord) -> CMatrix:
        generators = qr.presentation.generators
        j, k = _z2_coordinates(word, generators)
        u, v = qr.images[generators[0]].m, qr.images[generators[1]].m
        return t.cast(CMatrix, _matrix_power(u, j) @ _matrix_power(v, k))


class WordProduct(Strategy):
    """Evaluate the representative word itself."""

    kind = StrategyKind.WORD_PRODUCT

    def element(self, qr: "QuasiRep", word: FreeWord) -> CMatrix:
        unknown = word.generators() - set(qr.presentation.generators)
        if unknown:
            raise StrategyUndefined(
                f"word '{word.render()}' uses generators outside the presentation"
            )
        return _evaluate_matrix(word, qr.images, qr.dim)


@dataclasses.dataclass(frozen=True, eq=False)
class PullbackThrough(Strategy):
    """Compose a quasi-representation of Z2 with a homomorphism into Z2."""

    substitution: t.Mapping[str, FreeWord]
    base: "QuasiRep"

    kind = StrategyKind.PULLBACK

    def element(self, qr: "QuasiRep", word: FreeWord) -> CMatrix:
        unknown = word.generators() - set(self.substitution)
        if unknown:
            raise StrategyUndefined(
                f"word '{word.render()}' uses generators outside the pullback domain"
            )
        return self.base.element(word.substitute(self.substitution))

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "kind": self.kind.value,
            "substitution": {
                name: image.render() for name, image in self.substitution.items()
            },
            "base": quasi_rep_to_json(self.base),
        }


def _matrix_power(m: CMatrix, k: int) -> CMatrix:
    base = m if k >= 0 else adjoint(m)
    return t.cast(CMatrix, np.linalg.matrix_power(base, abs(k)))


@dataclasses.dataclass(frozen=True, eq=False)
class QuasiRep:
    """A unital map from a finitely presented group into U(n)."""

    presentation: Presentation
    images: t.Mapping[str, Unitary]
    strategy: Strategy

    def __post_init__(self) -> None:
        for generator in self.presentation.generators:
            if generator not in self.images:
                raise UnboundGenerator(generator, "quasi-representation images")
        dims = {image.dim for image in self.images.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"images have mixed dimensions {sorted(dims)}")
        if isinstance(self.strategy, Z2NormalForm) and len(self.presentation.generators) != 2:
            raise StrategyUndefined("the Z2 normal form needs exactly two generators")

    @property
    def dim(self) -> int:
        return next(iter(self.images.values())).dim

    def element(self, word: t.Union[str, FreeWord]) -> CMatrix:
        if isinstance(word, str):
            word = parse_word(word)
        return self.strategy.element(self, word)

    def generator_images(self) -> t.List[Unitary]:
        return [self.images[name] for name in self.presentation.generators]


def relator_defect(qr: QuasiRep, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Largest `||pi(r) - 1||` over the relators, evaluated on generator images."""
    if not qr.presentation.relators:
        raise StrategyUndefined("presentation has no relator")
    one = identity(qr.dim)
    return max(
        op_norm(_evaluate_matrix(relator, qr.images, qr.dim) - one, tol)
        for relator in qr.presentation.relators
    )


@dataclasses.dataclass(frozen=True)
class MultiplicativityDefect:
    epsilon: float
    inverse_defect: float
    worst_pair: t.Tuple[str, str]

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "epsilon": self.epsilon,
            "inverse_defect": self.inverse_defect,
            "worst_pair": list(self.worst_pair),
        }


def mult_defect(
    qr: QuasiRep,
    elements: t.Sequence[t.Union[str, FreeWord]],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MultiplicativityDefect:
    """Multiplicativity defect `max ||pi(st) - pi(s) pi(t)||` over `elements`."""
    words = [parse_word(e) if isinstance(e, str) else e for e in elements]
    if not words:
        raise ValueError("at least one group element is required")
    images = [qr.element(word) for word in words]
    epsilon = 0.0
    worst = (words[0].render(), words[0].render())
    for s, image_s in zip(words, images):
        for r, image_r in zip(words, images):
            defect = op_norm(qr.element(s * r) - image_s @ image_r, tol)
            if defect > epsilon:
                epsilon = defect
                worst = (s.render(), r.render())
    inverse_defect = max(
        op_norm(qr.element(s.inverse()) - adjoint(image_s), tol)
        for s, image_s in zip(words, images)
    )
    return MultiplicativityDefect(epsilon, inverse_defect, worst)


def quasi_rep_to_json(qr: QuasiRep) -> t.Dict[str, t.Any]:
    return {
        "presentation": qr.presentation.to_json(),
        "strategy": qr.strategy.to_json(),
        "images": {name: matrix_to_json(image.m) for name, image in qr.images.items()},
    }


def quasi_rep_from_json(
    data: t.Mapping[str, t.Any],
    base_dir: t.Union[str, Path, None] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> QuasiRep:
    """Decode a quasi-representation document.

    Images are either inline matrix documents or paths to matrix files,
    relative to `base_dir`.
    """
    try:
        presentation = Presentation.from_json(data["presentation"])
        raw_images = data["images"]
        strategy_data = data.get("strategy", {"kind": "word_product"})
        if isinstance(strategy_data, str):
            strategy_data = {"kind": strategy_data}
        kind = StrategyKind(strategy_data["kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"invalid quasi-representation document: {exc}") from exc
    root = Path(base_dir) if base_dir is not None else Path.cwd()
    images: t.Dict[str, Unitary] = {}
    for name, value in raw_images.items():
        if isinstance(value, str):
            matrix = read_matrix(root / value)
        elif isinstance(value, t.Mapping) and "file" in value:
            matrix = read_matrix(root / value["file"])
        else:
            matrix = matrix_from_json(value)
        images[name] = Unitary.from_matrix(matrix, tol)
    strategy: Strategy
    if kind is StrategyKind.Z2_NORMAL_FORM:
        strategy = Z2NormalForm()
    elif kind is StrategyKind.WORD_PRODUCT:
        strategy = WordProduct()
    else:
        base = quasi_rep_from_json(strategy_data["base"], root, tol)
        substitution = {
            name: parse_word(text) for name, text in strategy_data["substitution"].items()
        }
        strategy = PullbackThrough(substitution=substitution, base=base)
    return QuasiRep(presentation=presentation, images=images, strategy=strategy)


def read_quasi_rep(
    path: t.Union[str, Path], tol: Tolerances = DEFAULT_TOLERANCES
) -> QuasiRep:
    path = Path(path)
    return quasi_rep_from_json(load_document(path), path.parent, tol)
