import typing as t
from pathlib import Path

import jinja2

from qrep.errors import ReportFormatError

DATA_DIR = Path(__file__).parent.joinpath("data")


def format_number(value: t.Any, digits: int = 6) -> str:
    """Render floats with `digits` significant digits, other values unchanged."""
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


def _environment(loader: jinja2.BaseLoader) -> jinja2.Environment:
    environment = jinja2.Environment(
        loader=loader,
        undefined=jinja2.StrictUndefined,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    environment.filters["num"] = format_number
    return environment


def load_template_from_path(template: t.Union[str, Path]) -> jinja2.Template:
    """Load a report template from path."""
    filepath = Path(template).absolute()
    if not filepath.exists():
        raise ReportFormatError(f"template not found: {filepath.as_posix()}")
    return _environment(jinja2.FileSystemLoader(filepath.parent)).get_template(
        filepath.name
    )


def load_template_from_name(template: str) -> jinja2.Template:
    """Load a report template shipped with the package."""
    try:
        return _environment(jinja2.FileSystemLoader(DATA_DIR)).get_template(template)
    except jinja2.TemplateNotFound:
        raise ReportFormatError(f"unknown template: {template}") from None
