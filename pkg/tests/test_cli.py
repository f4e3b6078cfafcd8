"""End-to-end tests of the command-line pipeline on the toy dataset."""

import json
import logging

import pytest

from src.cli import build_parser, main
from src.cli.commands import _metric_models, flag_overrides
from src.core.data_manager import load_manifest
from src.core.dataset import balance_classes
from src.core.evaluation import BACKBONES, CLASSIFIERS, read_report
from src.core.model import GeneratorConfig, load_checkpoint

MICRO_CONFIG = """\
# micro models for tests
generator.image_size = 8
generator.base_channels = 4
generator.n_content_res_blocks = 1
generator.style_dim = 8
generator.n_adain_res_blocks = 1
generator.n_mlp_layers = 2
generator.mlp_dim = 16
discriminator.base_channels = 4
discriminator.n_layers = 2
discriminator.max_channels = 16
train.log_interval = 1
"""


@pytest.fixture(autouse=True)
def close_log_files():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, logging.FileHandler):
            root.removeHandler(handler)
            handler.close()


@pytest.fixture
def micro_config(tmp_path):
    path = tmp_path / 'micro.txt'
    path.write_text(MICRO_CONFIG, encoding='utf-8')
    return str(path)


@pytest.fixture
def toy(tmp_path):
    out = tmp_path / 'toy'
    assert main(['toy', '--out-dir', str(out), '--n-per-class', '6', '--size', '8']) == 0
    return out


@pytest.fixture
def trained(tmp_path, toy, micro_config):
    out = tmp_path / 'train'
    code = main(['train', '--config', micro_config, '--manifest', str(toy / 'manifest.tsv'),
                 '--data-root', str(toy), '--out-dir', str(out), '--iterations', '2',
                 '--batch-size', '2', '--k', '2', '--dtype', 'float64'])
    assert code == 0
    return out


def test_parser_requires_command():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args([])
    assert excinfo.value.code == 2


def test_toy_writes_run_files(toy):
    assert load_manifest(toy / 'manifest.tsv').class_names == ['red', 'blue']
    assert (toy / 'run.log').exists()
    assert 'run.out_dir' in (toy / 'run_config.txt').read_text(encoding='utf-8')


def test_curate(tmp_path, toy, capsys):
    out = tmp_path / 'curated'
    code = main(['curate', '--manifest', str(toy / 'manifest.tsv'), '--test-classes', 'blue',
                 '--balance', '4', '--out-dir', str(out)])
    assert code == 0
    assert load_manifest(out / 'train.tsv').class_names == ['red']
    assert len(load_manifest(out / 'test.tsv')) == 4
    assert "test: 4 records in 1 classes" in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path, toy):
    assert main(['curate', '--manifest', str(tmp_path / 'missing.tsv'), '--out-dir', str(tmp_path / 'x')]) == 2
    assert main(['curate', '--manifest', str(toy / 'manifest.tsv'), '--test-classes', 'green',
                 '--out-dir', str(tmp_path / 'x')]) == 2
    assert main(['curate', '--manifest', str(toy / 'manifest.tsv'), '--set', 'train.nope=1',
                 '--out-dir', str(tmp_path / 'x')]) == 2


def test_expand_with_keep_list(tmp_path, toy, capsys):
    fixtures = tmp_path / 'boxes.json'
    fixtures.write_text(json.dumps({'*': [
        {'bbox': [0, 0, 6, 6], 'label': 'car', 'confidence': 0.9},
        {'bbox': [2, 2, 8, 8], 'label': 'giraffe', 'confidence': 0.8},
    ]}), encoding='utf-8')
    keep = tmp_path / 'keep.txt'
    keep.write_text("red - car\nblue - car\n", encoding='utf-8')
    out = tmp_path / 'expanded'
    code = main(['expand', '--manifest', str(toy / 'manifest.tsv'), '--fixtures', str(fixtures),
                 '--keep-list', str(keep), '--min-box-side', '4', '--data-root', str(toy),
                 '--out-dir', str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "classes before filter: 4" in printed
    assert "classes after filter: 2" in printed
    expanded = load_manifest(out / 'expanded.tsv')
    assert expanded.class_names == ['red - car', 'blue - car']


def test_detector_failure_exits_1(tmp_path, toy):
    fixtures = tmp_path / 'boxes.json'
    fixtures.write_text(json.dumps({'*': [{'bbox': [0, 0, 60, 60], 'label': 'car', 'confidence': 0.9}]}),
                        encoding='utf-8')
    code = main(['expand', '--manifest', str(toy / 'manifest.tsv'), '--fixtures', str(fixtures),
                 '--data-root', str(toy), '--out-dir', str(tmp_path / 'expanded')])
    assert code == 1


def test_train_writes_checkpoints(trained, capsys):
    ckpt = load_checkpoint(trained / 'latest.pt')
    assert ckpt.iteration == 2
    assert ckpt.class_names == ('red', 'blue')
    assert ckpt.train_config['dtype'] == 'float64'
    assert (trained / 'train_log.jsonl').exists()
    assert 'train.batch_size = 2' in (trained / 'run_config.txt').read_text(encoding='utf-8')


def test_finetune(tmp_path, toy, trained, capsys):
    out = tmp_path / 'ft'
    code = main(['finetune', '--checkpoint', str(trained / 'latest.pt'),
                 '--manifest', str(toy / 'manifest.tsv'), '--data-root', str(toy),
                 '--out-dir', str(out), '--iterations', '1'])
    assert code == 0
    assert "lr=1e-05" in capsys.readouterr().out
    ckpt = load_checkpoint(out / 'latest.pt')
    assert ckpt.iteration == 1
    assert ckpt.metadata['fine_tune_iterations'] == 1


@pytest.mark.parametrize("variant", ['none', 'paste', 'latent'])
def test_translate(tmp_path, toy, trained, variant):
    fixtures = tmp_path / 'boxes.json'
    fixtures.write_text(json.dumps({'*': [{'bbox': [0, 0, 4, 4], 'label': 'car', 'confidence': 0.9}]}),
                        encoding='utf-8')
    manifest = load_manifest(toy / 'manifest.tsv')
    content = str(toy / manifest.records[0].path)
    styles = [str(toy / r.path) for r in manifest.records_of('blue')[:3]]
    out = tmp_path / 'translated'
    argv = ['translate', '--checkpoint', str(trained / 'latest.pt'), '--content', content,
            '--variant', variant, '--fixtures', str(fixtures), '--k', '2', '--out-dir', str(out)]
    for style in styles:
        argv += ['--style', style]
    assert main(argv) == 0
    assert (out / f"red_0000_{variant}.png").exists()


def test_evaluate(tmp_path, toy, trained):
    out = tmp_path / 'eval'
    manifest = str(toy / 'manifest.tsv')
    code = main(['evaluate', '--checkpoint', str(trained / 'latest.pt'), '--train-manifest', manifest,
                 '--style-manifest', manifest, '--target', 'blue', '--k', '1', '--k', '2',
                 '--n-content', '2', '--n-pairs', '1', '--runs', '2', '--data-root', str(toy),
                 '--out-dir', str(out), '--model-id', 'toy'])
    assert code == 0
    for k in (1, 2):
        report = read_report(out / f"report_k{k}.json")
        assert report.k_style == k
        assert report.runs == 2
        assert [r.source_class for r in report.rows] == ['red']
        assert report.rows[0].n_images == 2 * 2 * 1 * 2
        assert (out / f"report_k{k}.txt").exists()


def test_zero_iterations_saves_initialization(tmp_path, toy, micro_config):
    out = tmp_path / 'init'
    code = main(['train', '--config', micro_config, '--manifest', str(toy / 'manifest.tsv'),
                 '--data-root', str(toy), '--out-dir', str(out), '--iterations', '0', '--seed', '5'])
    assert code == 0
    assert load_checkpoint(out / 'latest.pt').iteration == 0


def test_threshold_one_keeps_no_objects(tmp_path, toy, capsys):
    fixtures = tmp_path / 'boxes.json'
    fixtures.write_text(json.dumps({'*': [{'bbox': [0, 0, 6, 6], 'label': 'car', 'confidence': 1.0}]}),
                        encoding='utf-8')
    code = main(['expand', '--manifest', str(toy / 'manifest.tsv'), '--fixtures', str(fixtures),
                 '--threshold', '1.0', '--data-root', str(toy), '--out-dir', str(tmp_path / 'expanded')])
    assert code == 0
    assert "classes after filter: 0" in capsys.readouterr().out


def test_paste_without_boxes_matches_plain_translation(tmp_path, toy, trained):
    fixtures = tmp_path / 'none.json'
    fixtures.write_text(json.dumps({}), encoding='utf-8')
    content = str(toy / 'red' / 'red_0001.png')
    style = str(toy / 'blue' / 'blue_0001.png')
    outputs = {}
    for variant in ('none', 'paste'):
        out = tmp_path / variant
        assert main(['translate', '--checkpoint', str(trained / 'latest.pt'), '--content', content,
                     '--style', style, '--variant', variant, '--fixtures', str(fixtures),
                     '--out-dir', str(out)]) == 0
        outputs[variant] = (out / f"red_0001_{variant}.png").read_bytes()
    assert outputs['none'] == outputs['paste']


def test_resume_with_other_model_config_fails(tmp_path, toy, trained, micro_config, capsys):
    argv = ['train', '--config', micro_config, '--manifest', str(toy / 'manifest.tsv'),
            '--data-root', str(toy), '--out-dir', str(tmp_path / 'resumed'), '--iterations', '3',
            '--batch-size', '2', '--k', '2', '--dtype', 'float64', '--resume', str(trained / 'latest.pt')]
    assert main(argv + ['--set', 'generator.style_dim=4']) == 1
    assert "mismatch" in capsys.readouterr().err
    assert not (tmp_path / 'resumed' / 'latest.pt').exists()
    assert main(argv) == 0
    assert load_checkpoint(tmp_path / 'resumed' / 'latest.pt').iteration == 3


def test_image_size_flag_uses_generator_layout():
    args = build_parser().parse_args(['train', '--manifest', 'm.tsv', '--image-size', '128'])
    overrides = flag_overrides(args)
    assert overrides['generator.image_size'] == 128
    assert overrides['generator.n_downsample'] == GeneratorConfig.for_image_size(128).n_downsample


def test_metric_model_flags_select_registered_models():
    args = build_parser().parse_args(['evaluate', '--checkpoint', 'c.pt', '--train-manifest', 'a.tsv',
                                      '--style-manifest', 'b.tsv'])
    backbone, classifier = _metric_models(args)
    assert isinstance(backbone, BACKBONES['random'])
    assert isinstance(classifier, CLASSIFIERS['random'])
    with pytest.raises(SystemExit):
        build_parser().parse_args(['evaluate', '--checkpoint', 'c.pt', '--train-manifest', 'a.tsv',
                                   '--style-manifest', 'b.tsv', '--backbone', 'resnet'])


def test_curate_seed_from_config_and_set(tmp_path, toy):
    manifest = str(toy / 'manifest.tsv')
    config = tmp_path / 'seed.txt'
    config.write_text("run.seed = 7\n", encoding='utf-8')

    def curate(out, *extra):
        assert main(['curate', '--manifest', manifest, '--balance', '4', '--out-dir', str(out), *extra]) == 0
        return load_manifest(out / 'train.tsv')

    from_file = curate(tmp_path / 'file', '--config', str(config))
    from_set = curate(tmp_path / 'set', '--set', 'run.seed=8')
    header = curate(tmp_path / 'header')
    assert from_file.seed == 7
    assert from_set.seed == 8
    assert header.seed == load_manifest(manifest).seed
    assert from_file.records == balance_classes(load_manifest(manifest, seed=7), 4).records
