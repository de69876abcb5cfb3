# renderer.py
# ReportRenderer loads the Jinja2 templates under "templates" and renders the
# benchmark, noisy-benchmark and ablation tables printed by the CLI.

import os
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader

from src.jiif import settings
from utils.ml_logging import get_logger

logger = get_logger()


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


class ReportRenderer:
    """
    Manages loading and rendering Jinja2 templates for result tables.
    Measured rows are printed next to the published reference rows.
    """

    BENCHMARK_TABLE = "benchmark_table.j2"
    NOISY_TABLE = "noisy_table.j2"
    ABLATION_TABLE = "ablation_table.j2"

    def __init__(self, template_dir: str = "templates"):
        """
        Initialize the ReportRenderer with the given template directory.
        Args:
            template_dir (str): Directory containing Jinja2 templates.
        """
        current_dir = os.path.dirname(os.path.abspath(__file__))
        template_path = os.path.join(current_dir, template_dir)
        self.env = Environment(
            loader=FileSystemLoader(searchpath=template_path),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.env.filters["fmt"] = _fmt
        self.template_path = template_path
        logger.debug(f"templates={self.env.list_templates()}")

    def list_templates(self) -> List[str]:
        return self.env.list_templates()

    def render(self, template_name: str, **context: Any) -> str:
        try:
            template = self.env.get_template(template_name)
            return template.render(**context)
        except Exception as e:
            logger.error(f"Error rendering '{template_name}': {e}")
            raise ValueError(f"Error rendering template '{template_name}': {e}")

    def benchmark_table(self, reports: Sequence, with_references: bool = True) -> str:
        """
        One row per method, one column per (dataset, scale).

        :param reports: ``BenchmarkReport`` objects sharing datasets and scales.
        """
        columns = []
        for entry in reports[0].entries:
            if (entry.dataset, entry.scale) not in columns:
                columns.append((entry.dataset, entry.scale))
        rows = []
        for report in reports:
            values = {(e.dataset, e.scale): e.average_rmse for e in report.entries}
            label = report.method if report.noise_sigma == 0 else f"{report.method} (noisy)"
            rows.append({"label": label, "values": [values.get(col) for col in columns]})
        references: List[Dict[str, Any]] = []
        if with_references:
            published = (
                ("Bicubic [published]", settings.REFERENCE_BICUBIC),
                ("JIIF [published]", settings.REFERENCE_JIIF),
            )
            for label, table in published:
                values = [table.get(dataset, {}).get(scale) for dataset, scale in columns]
                if any(v is not None for v in values):
                    references.append({"label": label, "values": values})
        return self.render(
            self.BENCHMARK_TABLE,
            columns=columns,
            rows=rows,
            references=references,
            units=sorted({e.unit for r in reports for e in r.entries}),
        )

    def noisy_table(self, reports: Sequence, scenes: Sequence[str] = settings.NOISY_MIDDLEBURY_SCENES) -> str:
        """Per-scene breakdown of noisy benchmarks: column groups are scenes x scales."""
        scales = sorted({e.scale for r in reports for e in r.entries})
        columns = [(scene, scale) for scene in scenes for scale in scales]
        rows = []
        for report in reports:
            values = {}
            for entry in report.entries:
                for image in entry.images:
                    values[(image.name, entry.scale)] = image.rmse
            rows.append({"label": report.method, "values": [values.get(col) for col in columns]})
        references = [
            {
                "label": f"{label} [published]",
                "values": [table.get(scene, {}).get(scale) for scene, scale in columns],
            }
            for label, table in (
                ("Bicubic", settings.REFERENCE_NOISY_BICUBIC),
                ("JIIF", settings.REFERENCE_NOISY_JIIF),
            )
        ]
        return self.render(
            self.NOISY_TABLE, scenes=scenes, scales=scales, columns=columns, rows=rows, references=references
        )

    def ablation_table(self, report) -> str:
        return self.render(
            self.ABLATION_TABLE,
            scale=report.scale,
            dataset=report.dataset,
            modules=report.table("modules"),
            weights=report.table("weights"),
        )
