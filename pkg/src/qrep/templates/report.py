import typing as t
from pathlib import Path

from .utils import load_template_from_name, load_template_from_path


class ReportRenderer:
    def __init__(self, template: t.Union[str, Path] = "summary.md.j2") -> None:
        """Create a new report renderer.

        Arguments:
            template: name of a packaged template or path to a template file.
        """
        if isinstance(template, Path):
            self.template = load_template_from_path(template)
        elif Path(template).is_file():
            self.template = load_template_from_path(template)
        else:
            self.template = load_template_from_name(template)

    def render(self, report: t.Mapping[str, t.Any]) -> str:
        """Render a report envelope (`command`, `config`, `result`)."""
        result = report.get("result")
        return self.template.render(
            command=report.get("command", ""),
            config=report.get("config", {}),
            generated_at=report.get("generated_at"),
            result=result,
            rows=result.get("rows", []) if isinstance(result, t.Mapping) else [],
        )

    def write(self, report: t.Mapping[str, t.Any], path: t.Union[str, Path]) -> None:
        Path(path).write_text(self.render(report))
