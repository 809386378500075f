"""Command line interface.

```
qrep gen voiculescu --n 32 -o pair.json
qrep invariant kappa --word "[a,b]" -i pair.json
qrep verify exel-loring --n-range 64:128:32 --csv exel.csv
qrep stability --g 1 --n 32 --radius 0.19 --seeds 20 --csv stability.csv
```

Exit status: 0 on success, 1 when a hypothesis fails (or a verification does
not reproduce), 2 when the numerics fail, 3 on usage and input errors.
"""
import argparse
import dataclasses
import datetime
import json
import logging
import sys
import typing as t
from pathlib import Path

import numpy as np

from qrep import errors
from qrep.__about__ import __version__
from qrep.bott import (
    SurfacePullback,
    Z2Bott,
    compare_representatives,
    k_invariant,
    representatives_agree,
    verify_index_formula,
)
from qrep.config import Tolerances, tolerance_fields
from qrep.errors import QrepError, UsageError
from qrep.examples import (
    PerturbationSpec,
    direct_sum,
    genuine_representation,
    perturb,
    pullback,
    surface_pullback_images,
    voiculescu_quasi_rep,
)
from qrep.invariants import TraceMode, exel_homotopy_gap, kappa, winding_number_det_segment
from qrep.matcore import Unitary, load_document, matrix_from_json
from qrep.sweeps import (
    CSV_COLUMNS,
    STATUS_OK,
    STATUS_UNVERIFIED,
    SweepRow,
    exel_loring_sweep,
    stability_sweep,
    voiculescu_family_sweep,
    write_csv,
)
from qrep.templates import ReportRenderer
from qrep.words import (
    CommutatorDatum,
    Presentation,
    QuasiRep,
    evaluate,
    mult_defect,
    parse_word,
    quasi_rep_from_json,
    quasi_rep_to_json,
    read_quasi_rep,
    relator_defect,
)

logger = logging.getLogger("qrep")

Handler = t.Callable[[argparse.Namespace, Tolerances], t.Dict[str, t.Any]]


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser raising `UsageError` instead of exiting with status 2."""

    def error(self, message: str) -> t.NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _n_range(text: str) -> t.List[int]:
    """Parse `a:b:step` into `a, a + step, ...` up to `b` included."""
    parts = text.split(":")
    try:
        values = [int(part) for part in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}") from None
    if len(values) == 2:
        values.append(1)
    if len(values) != 3 or values[2] <= 0 or values[0] > values[1]:
        raise argparse.ArgumentTypeError(f"expected a:b[:step] with a <= b and step > 0, got {text!r}")
    start, stop, step = values
    return list(range(start, stop + 1, step))


def _word_list(text: str) -> t.List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _load_input(path: Path, tol: Tolerances) -> t.Union[Unitary, QuasiRep]:
    """A matrix document (with a `dim` key) or a quasi-representation document."""
    document = load_document(path)
    if "dim" in document:
        return Unitary.from_matrix(matrix_from_json(document), tol)
    return quasi_rep_from_json(document, path.parent, tol)


def _unitary_input(args: argparse.Namespace, tol: Tolerances) -> Unitary:
    """The input matrix, or a word evaluated letter by letter on the generator images."""
    loaded = _load_input(args.input, tol)
    if isinstance(loaded, Unitary):
        if args.word is not None:
            raise UsageError("--word applies to quasi-representation inputs only")
        return loaded
    word = parse_word(args.word) if args.word is not None else loaded.presentation.relators[0]
    return evaluate(word, loaded.images, loaded.dim, tol)


def gen_voiculescu(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    return quasi_rep_to_json(voiculescu_quasi_rep(args.n))


def gen_genuine(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    return quasi_rep_to_json(genuine_representation(args.n, args.seed))


def gen_perturbed(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    qr = read_quasi_rep(args.input, tol)
    targets = tuple(_word_list(args.targets)) if args.targets else None
    spec = PerturbationSpec(radius=args.radius, seed=args.seed, targets=targets)
    return quasi_rep_to_json(perturb(qr, spec, tol))


def gen_pullback(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    base = read_quasi_rep(args.input, tol)
    if args.images:
        images: t.Dict[str, t.Any] = {}
        for item in _word_list(args.images):
            name, sep, word = item.partition("=")
            if not sep:
                raise UsageError(f"expected generator=word, got {item!r}")
            images[name.strip()] = parse_word(word)
    else:
        images = dict(surface_pullback_images(args.genus, swap=args.swap))
    return quasi_rep_to_json(pullback(base, images, tol))


def gen_direct_sum(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    if len(args.inputs) != 2:
        raise UsageError("direct-sum expects exactly two -i inputs")
    first, second = (read_quasi_rep(path, tol) for path in args.inputs)
    return quasi_rep_to_json(direct_sum(first, second))


def invariant_kappa(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    return kappa(_unitary_input(args, tol), TraceMode(args.trace), tol).to_json()


def invariant_winding(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    return winding_number_det_segment(_unitary_input(args, tol), tol).to_json()


def invariant_k(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    qr = read_quasi_rep(args.input, tol)
    names = _word_list(args.pair)
    if len(names) != 2:
        raise UsageError(f"--pair expects two comma separated words, got {args.pair!r}")
    u, v = (Unitary.from_matrix(qr.element(name), tol) for name in names)
    return k_invariant(u, v, tol=tol).to_json()


def defect(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    qr = read_quasi_rep(args.input, tol)
    elements = _word_list(args.set) if args.set else list(qr.presentation.generators)
    return {
        "relator_defect": relator_defect(qr, tol),
        "mult_defect": mult_defect(qr, elements, tol).to_json(),
        "elements": elements,
        "dim": qr.dim,
    }


def _rows_result(rows: t.Sequence[SweepRow]) -> t.Dict[str, t.Any]:
    return {
        "rows": [row.to_json() for row in rows],
        "cases": len(rows),
        "failed": sum(row.failed for row in rows),
        "all_ok": not any(row.failed for row in rows),
    }


def verify_exel_loring(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    if args.n is not None:
        qr = voiculescu_quasi_rep(args.n)
        datum = CommutatorDatum.fundamental(qr.presentation)
        return verify_index_formula(Z2Bott(), qr, datum, tol).to_json()
    return _rows_result(exel_loring_sweep(args.n_range, tol, args.jobs))


def verify_family(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    return _rows_result(voiculescu_family_sweep(args.n_range, tol, args.jobs))


def verify_representatives(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    qr = voiculescu_quasi_rep(args.n)
    representatives = compare_representatives(qr, tol=tol)
    genus1 = verify_index_formula(
        Z2Bott(), qr, CommutatorDatum.fundamental(qr.presentation), tol
    )
    genus2 = verify_index_formula(
        SurfacePullback(2, surface_pullback_images(2)),
        qr,
        CommutatorDatum.fundamental(Presentation.surface(2)),
        tol,
    )
    triple = (genus1.lhs_k, genus1.rhs_wn.rounded, genus1.rhs_kappa.rounded)
    agree = representatives_agree(representatives)
    pullback_agrees = triple == (genus2.lhs_k, genus2.rhs_wn.rounded, genus2.rhs_kappa.rounded)
    return {
        "representatives": {name: report.to_json() for name, report in representatives.items()},
        "representatives_agree": agree,
        "genus1": genus1.to_json(),
        "genus2": genus2.to_json(),
        "pullback_agrees": pullback_agrees,
        "equal": genus1.equal and genus2.equal and agree and pullback_agrees,
    }


def stability(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    seeds = list(range(args.seed, args.seed + args.seeds))
    rows = stability_sweep(
        args.g, args.n, args.radius, seeds, strict=not args.observe, tol=tol, jobs=args.jobs
    )
    result = _rows_result(rows)
    result["bound"] = 1.0 / (5 * args.g)
    return result


def homotopy_gap(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    return exel_homotopy_gap(_unitary_input(args, tol), tol).to_json()


def _add_global_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--trace",
        choices=[mode.value for mode in TraceMode],
        default=TraceMode.STANDARD.value,
        help="Trace used by kappa (default: standard)",
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed of random draws (default: 0)")
    parser.add_argument("-o", "--out", type=Path, default=None, help="Write the report to a file")
    parser.add_argument("--csv", type=Path, default=None, help="Write sweep rows to a CSV file")
    parser.add_argument("--summary", type=Path, default=None, help="Write a Markdown summary")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=False,
        help="Omit the timestamp so identical runs give identical reports",
    )
    parser.add_argument("--jobs", type=int, default=1, help="Parallel sweep workers (default: 1)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More diagnostics")
    parser.add_argument("-q", "--quiet", action="count", default=0, help="Fewer diagnostics")
    group = parser.add_argument_group("tolerances")
    for field in tolerance_fields():
        kind = field.type if field.type in (int, float, str) else str
        group.add_argument(
            f"--tol-{field.name.replace('_', '-')}",
            dest=f"tol_{field.name}",
            type=kind,
            default=None,
            metavar=kind.__name__.upper(),
            help=f"Override tolerance {field.name} (default: {field.default})",
        )


def _add_word_input(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-i", "--input", type=Path, required=True, help="Matrix or quasi-representation file")
    parser.add_argument("--word", default=None, help="Group element evaluated on a quasi-representation")


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    _add_global_options(common)
    parser = ArgumentParser(
        prog="qrep",
        description="Invariants of quasi-representations of discrete groups.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    def command(
        subparsers: t.Any,
        name: str,
        handler: Handler,
        summary: str,
        envelope: bool = True,
        aliases: t.Sequence[str] = (),
    ) -> ArgumentParser:
        sub = t.cast(
            ArgumentParser,
            subparsers.add_parser(name, parents=[common], help=summary, aliases=list(aliases)),
        )
        sub.set_defaults(handler=handler, envelope=envelope)
        return sub

    gen = commands.add_parser("gen", help="Generate quasi-representations").add_subparsers(
        dest="variant", metavar="VARIANT"
    )
    gen.required = True
    sub = command(gen, "voiculescu", gen_voiculescu, "Voiculescu pair", envelope=False)
    sub.add_argument("--n", type=int, required=True)
    sub = command(gen, "genuine", gen_genuine, "Random commuting pair", envelope=False)
    sub.add_argument("--n", type=int, required=True)
    sub = command(gen, "perturbed", gen_perturbed, "Seeded perturbation", envelope=False)
    sub.add_argument("-i", "--input", type=Path, required=True)
    sub.add_argument("--radius", type=float, required=True)
    sub.add_argument("--targets", default=None, help="Comma separated generators")
    sub = command(gen, "pullback", gen_pullback, "Pullback to a surface group", envelope=False)
    sub.add_argument("-i", "--input", type=Path, required=True)
    sub.add_argument("--genus", type=int, default=1)
    sub.add_argument("--swap", action="store_true", default=False, help="Send s1, t1 to b, a")
    sub.add_argument("--images", default=None, help="Comma separated generator=word images")
    sub = command(gen, "direct-sum", gen_direct_sum, "Block diagonal sum", envelope=False)
    sub.add_argument("-i", "--input", dest="inputs", type=Path, action="append", required=True)

    invariant = commands.add_parser("invariant", help="Compute one invariant").add_subparsers(
        dest="variant", metavar="VARIANT"
    )
    invariant.required = True
    _add_word_input(command(invariant, "kappa", invariant_kappa, "(1/2 pi i) Tr log w"))
    _add_word_input(command(invariant, "winding", invariant_winding, "Determinant loop winding number"))
    sub = command(invariant, "k", invariant_k, "Bott invariant k(u, v)")
    sub.add_argument("-i", "--input", type=Path, required=True)
    sub.add_argument("--pair", default="a,b", help="Two comma separated words (default: a,b)")

    sub = command(commands, "defect", defect, "Relator and multiplicativity defects")
    sub.add_argument("-i", "--input", type=Path, required=True)
    sub.add_argument("--set", default=None, help="Comma separated group elements")

    verify = commands.add_parser("verify", help="Verification sweeps").add_subparsers(
        dest="variant", metavar="VARIANT"
    )
    verify.required = True
    sub = command(verify, "exel-loring", verify_exel_loring, "k = wn = kappa on the Voiculescu pair")
    sizes = sub.add_mutually_exclusive_group(required=True)
    sizes.add_argument("--n", type=int)
    sizes.add_argument("--n-range", type=_n_range, metavar="A:B:STEP")
    sub = command(
        verify,
        "representatives",
        verify_representatives,
        "Independence of commutator representatives",
        aliases=["remark25"],
    )
    sub.add_argument("--n", type=int, required=True)
    sub = command(verify, "voiculescu", verify_family, "kappa and wn along the Voiculescu family")
    sub.add_argument("--n-range", type=_n_range, required=True, metavar="A:B:STEP")

    sub = command(commands, "stability", stability, "Kazhdan perturbation stability")
    sub.add_argument("--g", type=int, default=1)
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--radius", type=float, required=True)
    sub.add_argument("--seeds", type=int, default=20, help="Number of seeds, starting at --seed")
    sub.add_argument(
        "--observe",
        action="store_true",
        default=False,
        help="Report hypothesis violations instead of failing",
    )

    sub = command(commands, "homotopy-gap", homotopy_gap, "Largest gap between the two homotopies")
    _add_word_input(sub)
    return parser


def resolve_tolerances(args: argparse.Namespace) -> Tolerances:
    overrides = {
        field.name: getattr(args, f"tol_{field.name}", None) for field in tolerance_fields()
    }
    try:
        return Tolerances.from_env().replace(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def configure_logging(verbose: int, quiet: int) -> None:
    level = logging.WARNING - 10 * verbose + 10 * quiet
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(max(logging.DEBUG, min(level, logging.CRITICAL)))
    logger.propagate = False


def _config(args: argparse.Namespace, tol: Tolerances) -> t.Dict[str, t.Any]:
    config: t.Dict[str, t.Any] = {}
    for key, value in sorted(vars(args).items()):
        if key in ("handler", "envelope") or key.startswith("tol_"):
            continue
        if isinstance(value, Path):
            value = value.as_posix()
        elif isinstance(value, list):
            value = [item.as_posix() if isinstance(item, Path) else item for item in value]
        config[key] = value
    config["tolerances"] = tol.as_dict()
    return config


def _json_default(value: t.Any) -> t.Any:
    if isinstance(value, np.generic):
        return value.item()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return dataclasses.asdict(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(document: t.Mapping[str, t.Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2, default=_json_default) + "\n"


def _emit(text: str, path: t.Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _exit_code(result: t.Mapping[str, t.Any]) -> int:
    code = 0
    for row in result.get("rows", []):
        status = row["status"]
        if status in (STATUS_OK, STATUS_UNVERIFIED):
            continue
        exc_type = getattr(errors, status, None)
        if isinstance(exc_type, type) and issubclass(exc_type, QrepError):
            code = max(code, exc_type.exit_code)
        else:
            # mismatches and errors raised outside qrep
            code = max(code, 1)
    if result.get("equal") is False:
        code = max(code, 1)
    return code


def execute(args: argparse.Namespace) -> int:
    tol = resolve_tolerances(args)
    name = " ".join(part for part in (args.command, getattr(args, "variant", None)) if part)
    result = args.handler(args, tol)
    if not args.envelope:
        _emit(dumps(result), args.out)
        return 0
    report: t.Dict[str, t.Any] = {
        "command": name,
        "config": _config(args, tol),
        "result": result,
    }
    if not args.deterministic:
        report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _emit(dumps(report), args.out)
    if args.csv is not None:
        rows = result.get("rows")
        if rows is None:
            raise UsageError(f"'{name}' produces no sweep rows for --csv")
        write_csv([SweepRow(**row) for row in rows], args.csv)
        logger.info("wrote %d rows (%s) to %s", len(rows), ",".join(CSV_COLUMNS), args.csv)
    if args.summary is not None:
        ReportRenderer().write(report, args.summary)
    return _exit_code(result)


def run(argv: t.Optional[t.Sequence[str]] = None) -> int:
    """Run the command line and return the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.verbose, args.quiet)
        return execute(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except QrepError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except ValueError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except OSError as exc:
        logger.error("%s", exc)
        return 3


def main() -> None:
    sys.exit(run())
