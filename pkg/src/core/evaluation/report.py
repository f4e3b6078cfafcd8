"""
Metric Report Module

Per-source-class LPIPS / Inception Score tables with their averages,
written as JSON plus an aligned text table (optionally Excel).
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import pandas as pd

logger = logging.getLogger(__name__)

REPORT_VERSION = 1

PathLike = Union[str, Path]


@dataclass(frozen=True)
class MetricRow:
    source_class: str
    lpips: float
    inception_score: float
    n_pairs: int
    n_images: int


@dataclass(frozen=True)
class MetricReport:
    """Evaluation result of one model for one target class and style-set size."""

    rows: Tuple[MetricRow, ...]
    k_style: int
    seed: int
    model_id: str
    target_class: str
    runs: int = 1
    version: int = REPORT_VERSION

    @property
    def average_lpips(self) -> float:
        return sum(r.lpips for r in self.rows) / len(self.rows)

    @property
    def average_inception_score(self) -> float:
        return sum(r.inception_score for r in self.rows) / len(self.rows)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['rows'] = [asdict(r) for r in self.rows]
        data['average'] = {'lpips': self.average_lpips, 'inception_score': self.average_inception_score}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MetricReport':
        if data.get('version') != REPORT_VERSION:
            raise ValueError(f"Unsupported report version {data.get('version')!r}")
        return cls(
            rows=tuple(MetricRow(**row) for row in data['rows']),
            k_style=int(data['k_style']),
            seed=int(data['seed']),
            model_id=str(data['model_id']),
            target_class=str(data['target_class']),
            runs=int(data.get('runs', 1)),
            version=int(data['version']),
        )

    def to_frame(self) -> pd.DataFrame:
        """Table with one row per source class followed by an Average row."""
        frame = pd.DataFrame(
            {'LPIPS': [r.lpips for r in self.rows], 'IS': [r.inception_score for r in self.rows]},
            index=[r.source_class for r in self.rows],
        )
        frame.loc['Average'] = [self.average_lpips, self.average_inception_score]
        frame.index.name = 'Source class'
        return frame


def format_report(report: MetricReport) -> str:
    title = (f"LPIPS and IS of {report.model_id} "
             f"(target {report.target_class}, {report.k_style} style images)")
    text = f"{title}\n" + "=" * len(title) + "\n\n"
    text += report.to_frame().to_string(float_format=lambda v: f"{v:.3f}")
    text += f"\n\nseed: {report.seed}\nruns: {report.runs}\n"
    return text


def write_report(report: MetricReport, path: PathLike, excel: bool = False) -> List[Path]:
    """
    Write ``<stem>.json`` and ``<stem>.txt`` (and ``<stem>.xlsx`` with ``excel``).

    Returns:
        Written paths
    """
    path = Path(path)
    stem = path.with_suffix('') if path.suffix in ('.json', '.txt', '.xlsx') else path
    stem.parent.mkdir(parents=True, exist_ok=True)

    json_path = stem.with_name(stem.name + '.json')
    text_path = stem.with_name(stem.name + '.txt')
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    text_path.write_text(format_report(report), encoding='utf-8')
    written = [json_path, text_path]

    if excel:
        excel_path = stem.with_name(stem.name + '.xlsx')
        report.to_frame().to_excel(excel_path, sheet_name=f"k={report.k_style}", engine='openpyxl')
        written.append(excel_path)

    logger.info("Report written to %s", ", ".join(str(p) for p in written))
    return written


def read_report(path: PathLike) -> MetricReport:
    path = Path(path)
    if path.suffix in ('.txt', '.xlsx'):
        path = path.with_suffix('.json')
    elif path.suffix != '.json':
        path = path.with_name(path.name + '.json')
    if not path.exists():
        raise FileNotFoundError(f"Report not found: {path}")
    return MetricReport.from_dict(json.loads(path.read_text(encoding='utf-8')))


def merge_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """
    Average repeated runs of the same protocol class by class.

    Raises:
        ValueError: no reports, or reports over different classes / settings
    """
    if not reports:
        raise ValueError("No reports to merge")
    first = reports[0]
    classes = [r.source_class for r in first.rows]
    for other in reports[1:]:
        if [r.source_class for r in other.rows] != classes:
            raise ValueError("Reports cover different source classes")
        if (other.k_style, other.target_class) != (first.k_style, first.target_class):
            raise ValueError("Reports use different style-set sizes or target classes")

    frame = pd.concat([r.to_frame().drop(index='Average') for r in reports])
    means = frame.groupby(level=0, sort=False).mean()
    rows = tuple(
        MetricRow(
            source_class=name,
            lpips=float(means.loc[name, 'LPIPS']),
            inception_score=float(means.loc[name, 'IS']),
            n_pairs=sum(r.rows[i].n_pairs for r in reports),
            n_images=sum(r.rows[i].n_images for r in reports),
        )
        for i, name in enumerate(classes)
    )
    return MetricReport(
        rows=rows,
        k_style=first.k_style,
        seed=first.seed,
        model_id=first.model_id,
        target_class=first.target_class,
        runs=sum(r.runs for r in reports),
    )
