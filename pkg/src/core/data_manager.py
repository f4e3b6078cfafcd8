"""
Data Manager for manifest files

This module reads and writes the tab-separated image manifests and keep-lists,
and produces tabular views and summaries of a manifest.
"""

import io
import logging
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Union

import pandas as pd

from .dataset.records import DatasetManifest, ImageRecord, normalize_class_name
from .errors import ManifestError

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ['path', 'class_name', 'width', 'height']
SEED_HEADER = "# seed="

PathLike = Union[str, Path]


def _data_lines(lines: List[str]) -> List[int]:
    """1-based numbers of the lines that hold a record."""
    return [n for n, line in enumerate(lines, start=1) if line.split('#', 1)[0].strip()]


def _field_count(line: str) -> int:
    return len(line.split('#', 1)[0].rstrip('\r\n').split('\t'))


def load_manifest(path: PathLike, seed: Optional[int] = None) -> DatasetManifest:
    """
    Load a manifest file.

    Each non-comment line holds ``path<TAB>class_name<TAB>width<TAB>height``.

    Args:
        path: Manifest file path
        seed: Seed for later sampling; defaults to the file's "# seed=N"
            header, or 0 when there is none

    Returns:
        DatasetManifest with records in file order

    Raises:
        FileNotFoundError: if the file does not exist
        ManifestError: on malformed lines (with line number), duplicate paths
            or a file without records
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Manifest not found: {path}")

    lines = path.read_text(encoding='utf-8').splitlines(keepends=True)
    for line_number, line in enumerate(lines, start=1):
        if line.startswith(SEED_HEADER) and seed is None:
            try:
                seed = int(line[len(SEED_HEADER):])
            except ValueError as e:
                raise ManifestError(f"{path}:{line_number}: bad seed header") from e

    data_lines = _data_lines(lines)
    for line_number in data_lines:
        fields = _field_count(lines[line_number - 1])
        if fields > len(MANIFEST_COLUMNS):
            raise ManifestError(
                f"{path}:{line_number}: expected 4 tab-separated fields, got {fields}"
            )
    if not data_lines:
        raise ManifestError(f"{path}: no records")

    try:
        frame = pd.read_csv(io.StringIO(''.join(lines[n - 1] for n in data_lines)),
                            sep='\t', header=None, names=MANIFEST_COLUMNS, comment='#',
                            dtype=str, keep_default_na=False, na_values=[''],
                            skip_blank_lines=False, index_col=False)
    except pd.errors.ParserError as e:
        raise ManifestError(f"{path}: {e}") from e

    incomplete = frame.isna().any(axis=1).to_numpy()
    records: List[ImageRecord] = []
    seen: Dict[str, int] = {}
    for row, line_number in enumerate(data_lines):
        if incomplete[row]:
            raise ManifestError(
                f"{path}:{line_number}: expected 4 tab-separated fields, "
                f"got {_field_count(lines[line_number - 1])}"
            )
        record_path, class_name, width, height = frame.iloc[row]
        try:
            record = ImageRecord(record_path, class_name, int(width), int(height))
        except (ValueError, ManifestError) as e:
            raise ManifestError(f"{path}:{line_number}: {e}") from e
        if record.path in seen:
            raise ManifestError(
                f"{path}:{line_number}: duplicate path {record.path!r} "
                f"(first seen on line {seen[record.path]})"
            )
        seen[record.path] = line_number
        records.append(record)

    manifest = DatasetManifest(records=tuple(records), seed=0 if seed is None else seed)
    logger.info("Loaded %d records in %d classes from %s",
                len(manifest), len(manifest.class_names), path)
    return manifest


def save_manifest(manifest: DatasetManifest, path: PathLike) -> Path:
    """
    Write a manifest in the format read by ``load_manifest``.

    Output is byte-identical for identical manifests.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = manifest_frame(manifest)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(f"{SEED_HEADER}{manifest.seed}\n")
        frame.to_csv(handle, sep='\t', header=False, index=False, lineterminator='\n')
    return path


def manifest_frame(manifest: DatasetManifest) -> pd.DataFrame:
    """Manifest records as a DataFrame with the manifest columns."""
    return pd.DataFrame(
        [(r.path, r.class_name, r.width, r.height) for r in manifest.records],
        columns=MANIFEST_COLUMNS,
    )


def class_counts(manifest: DatasetManifest) -> Dict[str, int]:
    """Number of records per class, in class order."""
    return {name: len(ids) for name, ids in manifest.class_index.items()}


def load_keep_list(path: PathLike) -> FrozenSet[str]:
    """Read a keep-list file: one class name per line, '#' comments ignored."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Keep-list not found: {path}")
    names = set()
    with open(path, 'r', encoding='utf-8') as handle:
        for line in handle:
            name = normalize_class_name(line.split('#', 1)[0])
            if name:
                names.add(name)
    return frozenset(names)


def summarize_manifest(manifest: DatasetManifest, title: str = "Manifest Summary") -> str:
    """Generate a formatted report of class counts."""
    counts = class_counts(manifest)

    report = f"{title}\n"
    report += "=" * max(len(title), 30) + "\n\n"
    report += f"Records: {len(manifest)}\n"
    report += f"Classes: {len(counts)}\n\n"

    if counts:
        width = max(len(name) for name in counts)
        for name, count in counts.items():
            report += f"{name.ljust(width)}  {count}\n"

    return report
