import json

import numpy as np
import pytest

from latent_translation.cli import dispatch
from latent_translation.config import RunConfig, config_hash, resolve_config
from latent_translation.errors import ConfigError

MICRO = {
    "n_domain1": 8,
    "n_domain2": 8,
    "n_paired": 8,
    "image_size": 16,
    "num_classes": 3,
    "batch_size": 4,
    "steps_vaegan": 2,
    "steps_translator": 2,
    "latent_channels": 4,
    "base_channels": 4,
    "translator_blocks": 1,
    "n_test": 2,
}


def _write_cfg(tmp_path, extra=None):
    cfg = dict(MICRO)
    if extra:
        cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


# --- resolve_config -----------------------------------------------------------


def test_defaults_match_documented_values():
    cfg = resolve_config(None, {})
    assert cfg.learning_rate == 1e-4
    assert cfg.beta1 == 0.5
    assert cfg.beta2 == 0.999
    assert cfg.lambda_f == 60.0
    assert cfg.lambda_fm == 10.0


def test_empty_config_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert resolve_config(path, {}) == RunConfig()


def test_flag_overrides_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"lambda_f": 45.0}')
    cfg = resolve_config(path, {"lambda_f": 30.0})
    assert cfg.lambda_f == 30.0


def test_file_overrides_default(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"lambda_f": 45.0}')
    assert resolve_config(path, {}).lambda_f == 45.0


def test_unknown_key_is_fatal(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"lamda_f": 30.0}')
    with pytest.raises(ConfigError, match="unknown key: 'lamda_f'"):
        resolve_config(path, {})


def test_type_mismatch_is_fatal(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"batch_size": "large"}')
    with pytest.raises(ConfigError, match="batch_size"):
        resolve_config(path, {})


def test_config_hash_stable_and_sensitive():
    a, b = RunConfig(), RunConfig()
    assert config_hash(a) == config_hash(b)
    b.seed = 99
    assert config_hash(a) != config_hash(b)


# --- dispatch -----------------------------------------------------------------


def test_gen_data_writes_layout(tmp_path, capsys):
    out = tmp_path / "data"
    code = dispatch(["gen-data", "--config", _write_cfg(tmp_path), "--out", str(out)])
    assert code == 0
    assert (out / "manifest.json").exists()
    assert (out / "domain1").is_dir() and (out / "domain2").is_dir() and (out / "labels").is_dir()
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["config"]["n_domain1"] == 8
    assert "config_hash" in resolved


def test_unknown_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"lamda_f": 1}')
    code = dispatch(["gen-data", "--config", str(bad), "--out", str(tmp_path / "d")])
    assert code == 2
    assert "unknown key" in capsys.readouterr().err


def test_missing_checkpoint_exits_2(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    data = tmp_path / "data"
    assert dispatch(["gen-data", "--config", cfg, "--out", str(data)]) == 0
    code = dispatch(
        [
            "train-translator",
            "--config",
            cfg,
            "--out",
            str(tmp_path / "run"),
            "--data",
            str(data),
            "--ckpt1",
            str(tmp_path / "missing1.ckpt"),
            "--ckpt2",
            str(tmp_path / "missing2.ckpt"),
        ]
    )
    assert code == 2
    assert "checkpoint not found" in capsys.readouterr().err


def test_usage_error_exits_2():
    assert dispatch(["not-a-command"]) == 2
    assert dispatch(["train-vaegan"]) == 2  # missing required flags


def test_micro_pipeline_end_to_end(tmp_path):
    cfg = _write_cfg(tmp_path)
    data, run = tmp_path / "data", tmp_path / "run"
    assert dispatch(["gen-data", "--config", cfg, "--out", str(data)]) == 0
    for domain in ("1", "2"):
        assert (
            dispatch(
                [
                    "train-vaegan",
                    "--config",
                    cfg,
                    "--out",
                    str(run),
                    "--data",
                    str(data),
                    "--domain",
                    domain,
                ]
            )
            == 0
        )
    assert (
        dispatch(
            [
                "train-translator",
                "--config",
                cfg,
                "--out",
                str(run),
                "--data",
                str(data),
                "--ckpt1",
                str(run / "vaegan_domain1.ckpt"),
                "--ckpt2",
                str(run / "vaegan_domain2.ckpt"),
            ]
        )
        == 0
    )
    out_tr = tmp_path / "translated"
    assert (
        dispatch(
            [
                "translate",
                "--config",
                cfg,
                "--out",
                str(out_tr),
                "--ckpt1",
                str(run / "vaegan_domain1.ckpt"),
                "--ckpt2",
                str(run / "vaegan_domain2.ckpt"),
                "--ckpt-t",
                str(run / "translator.ckpt"),
                "--input",
                str(data / "domain1"),
                "--num-samples",
                "2",
                "--sigma",
                "1.0",
            ]
        )
        == 0
    )
    assert len(list(out_tr.glob("*.png"))) == 16  # 8 inputs x 2 samples
    report = tmp_path / "metrics.json"
    assert (
        dispatch(
            [
                "evaluate",
                "--config",
                cfg,
                "--out",
                str(run),
                "--data",
                str(data),
                "--ckpt1",
                str(run / "vaegan_domain1.ckpt"),
                "--ckpt2",
                str(run / "vaegan_domain2.ckpt"),
                "--ckpt-t",
                str(run / "translator.ckpt"),
                "--report",
                str(report),
            ]
        )
        == 0
    )
    metrics = json.loads(report.read_text())
    assert {"per_pixel_acc", "per_class_acc", "class_iou", "confusion", "n_images"} <= metrics.keys()


def test_translate_deterministic_single_sample(tmp_path):
    # num_samples=1 uses the deterministic path regardless of sigma
    cfg = _write_cfg(tmp_path)
    data, run = tmp_path / "data", tmp_path / "run"
    dispatch(["gen-data", "--config", cfg, "--out", str(data)])
    for domain in ("1", "2"):
        dispatch(
            ["train-vaegan", "--config", cfg, "--out", str(run), "--data", str(data), "--domain", domain]
        )
    dispatch(
        [
            "train-translator",
            "--config",
            cfg,
            "--out",
            str(run),
            "--data",
            str(data),
            "--ckpt1",
            str(run / "vaegan_domain1.ckpt"),
            "--ckpt2",
            str(run / "vaegan_domain2.ckpt"),
        ]
    )
    outs = []
    for sub in ("t1", "t2"):
        out = tmp_path / sub
        assert (
            dispatch(
                [
                    "translate",
                    "--config",
                    cfg,
                    "--out",
                    str(out),
                    "--ckpt1",
                    str(run / "vaegan_domain1.ckpt"),
                    "--ckpt2",
                    str(run / "vaegan_domain2.ckpt"),
                    "--ckpt-t",
                    str(run / "translator.ckpt"),
                    "--input",
                    str(data / "domain1" / "000000.png"),
                ]
            )
            == 0
        )
        outs.append((out / "000000.png").read_bytes())
    assert outs[0] == outs[1]


def test_ablate_structural(tmp_path):
    # tiny grid: rows = methods x fractions x modes-applicable x seeds
    cfg = _write_cfg(
        tmp_path,
        {
            "ablation_methods": ["FT+U&P", "IT+P"],
            "ablation_fractions": [0.5],
            "ablation_modes": ["l1_only"],
            "ablation_seeds": [0],
            "n_test": 2,
        },
    )
    out = tmp_path / "ablation"
    assert dispatch(["ablate", "--config", cfg, "--out", str(out)]) == 0
    csv_lines = (out / "ablation.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "method,paired_fraction,mode,seed,per_pixel_acc,per_class_acc,class_iou"
    assert len(csv_lines) == 1 + 2  # one FT cell + one IT cell
    summary = json.loads((out / "ablation_summary.json").read_text())
    assert "header" in summary and summary["medians"]
