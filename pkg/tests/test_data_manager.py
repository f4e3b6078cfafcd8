"""Tests for manifest files and summaries."""

import pytest

from src.core.data_manager import (
    class_counts, load_keep_list, load_manifest, manifest_frame, save_manifest, summarize_manifest,
)
from src.core.dataset.synthetic import synthetic_manifest
from src.core.errors import ManifestError


def test_save_is_byte_stable(tmp_path):
    m = synthetic_manifest({'sunny': 3, 'night': 2}, seed=5)
    first = save_manifest(m, tmp_path / 'a.tsv').read_bytes()
    second = save_manifest(load_manifest(tmp_path / 'a.tsv'), tmp_path / 'b.tsv').read_bytes()
    assert first == second
    assert first.startswith(b"# seed=5\n")


def test_seed_header_and_override(tmp_path):
    save_manifest(synthetic_manifest({'a': 1, 'b': 1}, seed=9), tmp_path / 'm.tsv')
    assert load_manifest(tmp_path / 'm.tsv').seed == 9
    assert load_manifest(tmp_path / 'm.tsv', seed=2).seed == 2


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / 'bad.tsv'
    path.write_text("# seed=0\na.png\tsunny\t10\t10\nb.png\tsunny\t10\n", encoding='utf-8')
    with pytest.raises(ManifestError, match=":3:"):
        load_manifest(path)


def test_extra_field_reports_line_number(tmp_path):
    path = tmp_path / 'wide.tsv'
    path.write_text("# seed=0\n\na.png\tsunny\t10\t10\tx\n", encoding='utf-8')
    with pytest.raises(ManifestError, match=r":3: expected 4 tab-separated fields, got 5"):
        load_manifest(path)


def test_bad_size_and_empty_class_report_line_number(tmp_path):
    path = tmp_path / 'size.tsv'
    path.write_text("a.png\tsunny\t10\t10\nb.png\tsunny\tten\t10\n", encoding='utf-8')
    with pytest.raises(ManifestError, match=":2:"):
        load_manifest(path)
    path.write_text("# header\na.png\t \t10\t10\n", encoding='utf-8')
    with pytest.raises(ManifestError, match=":2:"):
        load_manifest(path)


def test_comments_blank_lines_and_crlf(tmp_path):
    path = tmp_path / 'mixed.tsv'
    path.write_bytes(b"# seed=4\r\n# a comment\r\n\r\n"
                     b"a.png\tSunny\t10\t12  # trailing note\r\nb.png\tnight\t8\t8\r\n")
    m = load_manifest(path)
    assert m.seed == 4
    assert [(r.path, r.class_name, r.width, r.height) for r in m.records] == [
        ('a.png', 'sunny', 10, 12), ('b.png', 'night', 8, 8)]


def test_class_names_are_not_missing_values(tmp_path):
    path = tmp_path / 'na.tsv'
    path.write_text("a.png\tNA\t10\t10\nb.png\tnull\t10\t10\n", encoding='utf-8')
    assert load_manifest(path).class_names == ['na', 'null']


def test_duplicate_path(tmp_path):
    path = tmp_path / 'dup.tsv'
    path.write_text("a.png\tsunny\t10\t10\na.png\tnight\t10\t10\n", encoding='utf-8')
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(path)


def test_missing_and_empty(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / 'missing.tsv')
    (tmp_path / 'empty.tsv').write_text("# seed=0\n", encoding='utf-8')
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / 'empty.tsv')


def test_frame_and_summary():
    m = synthetic_manifest({'cloudy': 4, 'rainy': 1})
    frame = manifest_frame(m)
    assert list(frame.columns) == ['path', 'class_name', 'width', 'height']
    assert class_counts(m) == {'cloudy': 4, 'rainy': 1}
    summary = summarize_manifest(m, "Street")
    assert "Records: 5" in summary
    assert "Classes: 2" in summary


def test_keep_list_comments(tmp_path):
    path = tmp_path / 'keep.txt'
    path.write_text("# header\nNight - Car\n\nsunny - bus  # inline\n", encoding='utf-8')
    assert load_keep_list(path) == frozenset({'night - car', 'sunny - bus'})
