import numpy as np
import pytest

from lrbms.cli import main
from lrbms.config import ConfigError, ExperimentConfig, validate_config
from lrbms.experiments import run_convergence_study, run_enrichment_study, run_greedy

MINIMAL = """
[problem]
type = academic

[grid]
coarse_dims = 1 1
fine_per_coarse = 4 4
ladder_levels = 0

[estimator]
mu = 1.0
mu_bar = 1.0
mu_hat = 1.0
"""

TINY_ONLINE = """
[problem]
type = academic

[grid]
coarse_dims = 2 2
fine_per_coarse = 4 4

[estimator]
mu_bar = 0.1
mu_hat = 0.1

[reduction]
n_greedy = 0

[online]
n_online = 3
n_online_parameters = 2
seed = 5
strategy = uniform
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_validate_minimal_config_resolves_defaults(tmp_path):
    cfg = validate_config(write(tmp_path, MINIMAL))
    assert cfg.problem_type == "academic"
    assert cfg.sigma is None  # auto
    assert cfg.strategy == "uniform"
    text = cfg.resolved_text()
    assert "sigma = None" in text and "k = 1" in text
    assert len(cfg.digest()) == 16


def test_validate_collects_all_errors(tmp_path):
    path = write(tmp_path, """
[problem]
type = acadmic

[discretization]
sigma_penalty = 8

[online]
delta_online = -3
""")
    with pytest.raises(ConfigError) as exc:
        validate_config(path)
    errors = exc.value.errors
    assert len(errors) == 3
    assert any("sigma_penalty" in e and "'sigma'" in e for e in errors)
    assert any("delta_online" in e for e in errors)
    assert any("acadmic" in e for e in errors)


def test_validate_missing_permeability_file(tmp_path):
    path = write(tmp_path, "[problem]\ntype = permeability_file\npermeability_file = nope.txt\n")
    with pytest.raises(ConfigError, match="no such file"):
        validate_config(path)


def test_validate_ladder_must_increase(tmp_path):
    path = write(tmp_path, "[grid]\nladder_levels = 0 2 1\n")
    with pytest.raises(ConfigError, match="strictly increasing"):
        validate_config(path)


def test_cli_validate_exit_codes(tmp_path, capsys):
    good = write(tmp_path, MINIMAL, "good.ini")
    assert main(["validate", "--config", str(good)]) == 0
    out = capsys.readouterr().out
    assert "config_digest" in out
    bad = write(tmp_path, "[problem]\ntype = what\n", "bad.ini")
    assert main(["validate", "--config", str(bad)]) == 2


def test_convergence_single_ladder_step_has_no_eoc_row(tmp_path):
    cfg = validate_config(write(tmp_path, MINIMAL))
    run_convergence_study(cfg, tmp_path / "out")
    lines = (tmp_path / "out" / "convergence.csv").read_text().strip().splitlines()
    assert len(lines) == 2  # header + one row
    assert not lines[-1].startswith("EOC")
    manifest = (tmp_path / "out" / "manifest.txt").read_text()
    assert "config_digest" in manifest and "sigma: 12.0" in manifest


def test_convergence_reproducibility(tmp_path):
    cfg = validate_config(write(tmp_path, MINIMAL.replace("ladder_levels = 0", "ladder_levels = 0 1")))
    run_convergence_study(cfg, tmp_path / "a")
    run_convergence_study(cfg, tmp_path / "b")
    body_a = (tmp_path / "a" / "convergence.csv").read_bytes()
    body_b = (tmp_path / "b" / "convergence.csv").read_bytes()
    assert body_a == body_b
    lines = body_a.decode().strip().splitlines()
    assert lines[-1].startswith("EOC")
    # manifests may differ only in the timestamp line
    ma = [l for l in (tmp_path / "a" / "manifest.txt").read_text().splitlines() if not l.startswith("timestamp")]
    mb = [l for l in (tmp_path / "b" / "manifest.txt").read_text().splitlines() if not l.startswith("timestamp")]
    assert ma == mb


def test_enrichment_study_outputs(tmp_path):
    cfg = validate_config(write(tmp_path, TINY_ONLINE))
    model, bases, logs, delta = run_enrichment_study(cfg, tmp_path / "out")
    assert delta > 0
    assert (tmp_path / "out" / "enrichment_00.csv").exists()
    assert (tmp_path / "out" / "enrichment_01.csv").exists()
    sizes = np.loadtxt(tmp_path / "out" / "basis_sizes.csv", delimiter=",")
    assert sizes.shape == (2, 2)
    assert sizes.sum() == sum(b.size for b in bases)
    manifest = (tmp_path / "out" / "manifest.txt").read_text()
    assert "delta_online" in manifest and "seed: 5" in manifest
    first = (tmp_path / "out" / "enrichment_00.csv").read_text().splitlines()
    assert first[0] == "param_index,step,eta,n_marked,total_basis_size"


def test_enrichment_reproducibility(tmp_path):
    cfg = validate_config(write(tmp_path, TINY_ONLINE))
    run_enrichment_study(cfg, tmp_path / "a")
    run_enrichment_study(cfg, tmp_path / "b")
    for name in ("enrichment_00.csv", "enrichment_01.csv", "basis_sizes.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_greedy_export_then_online_import(tmp_path):
    greedy_cfg = validate_config(write(tmp_path, TINY_ONLINE.replace(
        "n_greedy = 0", "n_greedy = 1\ntraining_set = 0.5\ndelta_greedy = 0"), "g.ini"))
    model, bases, _, log = run_greedy(greedy_cfg, tmp_path / "off")
    assert (tmp_path / "off" / "bases" / "manifest.txt").exists()
    assert (tmp_path / "off" / "greedy.csv").read_text().startswith("iteration,max_eta,mu_star")
    online_cfg = validate_config(write(tmp_path, TINY_ONLINE.replace(
        "n_greedy = 0", "n_greedy = 0\nbases_dir = off/bases"), "o.ini"))
    _, bases2, _, _ = run_enrichment_study(online_cfg, tmp_path / "on", base_dir=tmp_path)
    assert all(b2.size >= b.size for b, b2 in zip(bases, bases2))


def test_cli_convergence_command(tmp_path, capsys):
    path = write(tmp_path, MINIMAL + "\n[output]\ndirectory = %s\n" % (tmp_path / "out"))
    assert main(["convergence", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "efficiency" in out
    assert (tmp_path / "out" / "convergence.csv").exists()


def test_cli_online_and_seed_override(tmp_path, capsys):
    path = write(tmp_path, TINY_ONLINE + "\n[output]\ndirectory = %s\n" % (tmp_path / "o1"))
    assert main(["online", "--config", str(path), "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert "total basis size" in out
    manifest = (tmp_path / "o1" / "manifest.txt").read_text()
    assert "seed: 9" in manifest


def test_permeability_file_problem_end_to_end(tmp_path):
    perm = tmp_path / "perm.txt"
    rows = ["1.0 5.0 1.0 2.0", "2.0 1.0 4.0 1.0"]
    perm.write_text("\n".join(rows) + "\n")
    cfg_text = """
[problem]
type = permeability_file
permeability_file = perm.txt
permeability_layout = 4 2
domain = 0 0 2 1

[grid]
coarse_dims = 2 1
fine_per_coarse = 4 4
ladder_levels = 0

[estimator]
mu = 1.0
mu_bar = 1.0
mu_hat = 1.0
"""
    cfg = validate_config(write(tmp_path, cfg_text, "perm.ini"))
    rows = run_convergence_study(cfg, tmp_path / "out", base_dir=tmp_path)
    assert rows[0]["eta"] >= rows[0]["error"] > 0


def test_config_defaults_dataclass_roundtrip():
    cfg = ExperimentConfig()
    text = cfg.resolved_text()
    for f in ("problem_type", "coarse_dims", "strategy", "theta_doerfler"):
        assert f in text
