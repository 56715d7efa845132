"""In-process exercises of the command-line pipeline driver."""

import dataclasses
import math

import numpy as np
import pytest

import icdx
from icdx.cli import RunConfig, main
from icdx.fileio import parse_matrix, read_kv


def _floats(kv, key):
    return [icdx.parse_metric_value(tok) for tok in kv.values[key].split(",")]


def _gen(out, *extra):
    return main(["gen", "--out-dir", str(out), "--samples", "65536", *extra])


def test_gen_writes_expected_files(tmp_path):
    assert _gen(tmp_path) == 0
    for name in ("clean.bin", "mixed.bin", "tracks.csv",
                 "density_truth.csv", "manifest.cfg"):
        assert (tmp_path / name).exists(), name
    mixed = icdx.read_signal(tmp_path / "mixed.bin")
    assert mixed.channels == 2 and mixed.length == 65536
    tracks = icdx.read_signal(tmp_path / "tracks.csv")
    assert tracks.channels == 2
    density = icdx.read_signal(tmp_path / "density_truth.csv")
    assert density.channels == 1


def test_manifest_echoes_every_field(tmp_path):
    assert _gen(tmp_path) == 0
    kv = read_kv(tmp_path / "manifest.cfg")
    expected = {"format_version"} | {
        spec.name for spec in dataclasses.fields(RunConfig)}
    assert set(kv.values) == expected
    assert kv.values["format_version"] == "1"
    assert kv.values["samples"] == "65536"
    assert kv.values["snr_db"] == "pos-inf"
    assert np.array_equal(
        parse_matrix(kv.values["coupling"]), [[1.0, 0.4], [0.3, 1.0]])


def test_gen_csv_format(tmp_path):
    assert main(["gen", "--out-dir", str(tmp_path), "--samples", "16384",
                 "--file-format", "csv"]) == 0
    assert (tmp_path / "clean.csv").exists()
    assert (tmp_path / "mixed.csv").exists()
    assert not (tmp_path / "clean.bin").exists()


def test_config_file_then_flags_precedence(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("samples = 32768\nseed = 9\n")
    out = tmp_path / "out"
    assert main(["gen", "--config", str(config), "--out-dir", str(out),
                 "--samples", "16384"]) == 0
    kv = read_kv(out / "manifest.cfg")
    assert kv.values["samples"] == "16384"  # flag beats file
    assert kv.values["seed"] == "9"         # file beats default


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _gen(first) == 0
    assert main(["gen", "--config", str(first / "manifest.cfg"),
                 "--out-dir", str(second)]) == 0
    for name in ("clean.bin", "mixed.bin", "tracks.csv",
                 "density_truth.csv", "manifest.cfg"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_unknown_config_key_reports_line(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("samples = 32768\n# fine\nbogus_knob = 3\n")
    assert main(["gen", "--config", str(config), "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "bad.cfg:3:" in err
    assert "bogus_knob" in err


def test_bad_field_values_exit_2(tmp_path, capsys):
    assert main(["gen", "--out-dir", str(tmp_path), "--samples", "8"]) == 2
    assert "samples" in capsys.readouterr().err
    assert main(["gen", "--out-dir", str(tmp_path), "--samples", "many"]) == 2
    assert main(["gen", "--out-dir", str(tmp_path), "--coupling", "1,2;3"]) == 2
    with pytest.raises(SystemExit):  # argparse rejects unknown choices itself
        main(["gen", "--out-dir", str(tmp_path), "--scenario", "nova"])


def test_unsupported_format_version_exit_2(tmp_path, capsys):
    config = tmp_path / "old.cfg"
    config.write_text("format_version = 99\n")
    assert main(["gen", "--config", str(config), "--out-dir", str(tmp_path)]) == 2
    assert "format_version" in capsys.readouterr().err


def test_missing_input_exit_4(tmp_path, capsys):
    assert main(["unmix", "--in", str(tmp_path / "absent.bin"),
                 "--out-dir", str(tmp_path)]) == 4
    assert "error" in capsys.readouterr().err


def test_out_dir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("ICDX_OUT_DIR", str(tmp_path / "envout"))
    assert main(["gen", "--samples", "16384"]) == 0
    assert (tmp_path / "envout" / "manifest.cfg").exists()


def test_mix_applies_coupling_exactly(tmp_path):
    assert _gen(tmp_path, "--coupling", "1,0;0,1") == 0
    out = tmp_path / "mixed_strong"
    assert main(["mix", "--in", str(tmp_path / "clean.bin"),
                 "--out-dir", str(out), "--coupling", "1,0.9;0.9,1"]) == 0
    clean = icdx.read_signal(tmp_path / "clean.bin")
    mixed = icdx.read_signal(out / "mixed.bin")
    expected = np.array([[1.0, 0.9], [0.9, 1.0]]) @ clean.data
    assert np.array_equal(mixed.data, expected)
    kv = read_kv(out / "mix_manifest.cfg")
    assert kv.values["coupling"] == "1.0,0.9;0.9,1.0"


def test_full_pipeline_noiseless(tmp_path):
    run = tmp_path / "run"
    assert _gen(run) == 0
    assert main(["unmix", "--in", str(run / "mixed.bin"),
                 "--truth", str(run / "clean.bin"), "--out-dir", str(run)]) == 0
    for name in ("corrected.bin", "separation.cfg", "whitening.cfg",
                 "quality.cfg", "unmix_manifest.cfg"):
        assert (run / name).exists(), name

    quality = read_kv(run / "quality.cfg")
    assert quality.values["converged"] == "1,1"
    isr_db = _floats(quality, "isr_db")
    assert all(v <= -40.0 for v in isr_db)
    assert quality.get_float("gain_error") < 1e-3
    raw = _floats(quality, "envelope_depth_raw")
    fixed = _floats(quality, "envelope_depth_corrected")
    assert all(r > 10.0 * f for r, f in zip(raw, fixed))

    separation = read_kv(run / "separation.cfg")
    w = parse_matrix(separation.values["w"])
    assert w.shape == (2, 2)
    assert np.max(np.abs(w @ w.T - np.eye(2))) < 1e-8

    assert main(["density", "--in", str(run / "corrected.bin"),
                 "--truth", str(run / "density_truth.csv"),
                 "--out-dir", str(run)]) == 0
    report = read_kv(run / "density_report.cfg")
    assert report.values["status"] == "ok"
    assert report.values["ch1_lost_ranges"] == "none"
    rel = report.get_float("rms_error") / report.get_float("truth_rms")
    assert rel < 1e-3
    density = icdx.read_signal(run / "density.csv")
    assert density.length == 65536 // 8


def test_unmix_reruns_byte_identical(tmp_path):
    run = tmp_path / "run"
    assert _gen(run) == 0
    first, second = tmp_path / "u1", tmp_path / "u2"
    for out in (first, second):
        assert main(["unmix", "--in", str(run / "mixed.bin"),
                     "--out-dir", str(out)]) == 0
    for name in ("corrected.bin", "separation.cfg", "whitening.cfg",
                 "quality.cfg", "unmix_manifest.cfg"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_unmix_nonconvergence_exit_3(tmp_path):
    run = tmp_path / "run"
    assert _gen(run) == 0
    rc = main(["unmix", "--in", str(run / "mixed.bin"),
               "--out-dir", str(tmp_path / "u"),
               "--max-iter", "1", "--tol", "1e-15"])
    assert rc == 3


def test_density_on_strong_coupling_partial_exit_3(tmp_path, capsys):
    run = tmp_path / "run"
    assert _gen(run, "--coupling", "1,0.9;0.9,1") == 0
    rc = main(["density", "--in", str(run / "mixed.bin"), "--out-dir", str(run)])
    assert rc == 3
    assert "phase tracking lost" in capsys.readouterr().err
    report = read_kv(run / "density_report.cfg")
    assert report.values["status"] == "partial"
    lost = report.get_float("lost_fraction")
    assert 0.0 < lost < 0.5
    assert report.values["ch1_lost_ranges"] != "none"
    # The density series itself is still written for inspection.
    assert (run / "density.csv").exists()


def test_diplex_subcommand(tmp_path):
    out = tmp_path / "dx"
    assert main(["diplex", "--out-dir", str(out),
                 "--diplex-samples", "16384"]) == 0
    for name in ("diplex_fir_only.bin", "diplex_separated.bin",
                 "diplex_report.cfg", "diplex_manifest.cfg"):
        assert (out / name).exists(), name
    report = read_kv(out / "diplex_report.cfg")
    for tone in ("tone_a", "tone_b"):
        fir_db = report.get_float(f"{tone}_fir_residual_db")
        ica_db = report.get_float(f"{tone}_ica_residual_db")
        assert fir_db > -20.0
        assert ica_db <= -40.0
        assert abs(report.get_float(f"{tone}_mean")) <= 1e-6
        assert abs(report.get_float(f"{tone}_peak") - 1.0) <= 1e-3


def test_report_subcommand(tmp_path, capsys):
    assert main(["gen", "--out-dir", str(tmp_path), "--samples", "16384"]) == 0
    capsys.readouterr()
    assert main(["report", "--in-dir", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "[manifest.cfg]" in text
    assert "clean.bin: 2 channel(s) x 16384 samples" in text

    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", "--in-dir", str(empty)]) == 0
    assert "nothing to report" in capsys.readouterr().out


def test_run_config_validate_catches_cross_field_violations():
    with pytest.raises(ValueError, match="lowpass_cutoff"):
        RunConfig(lowpass_cutoff=2.0e6).validate()
    with pytest.raises(ValueError, match="tone"):
        RunConfig(tone_a=30.0e6, tone_b=30.0e6).validate()
    with pytest.raises(ValueError, match="coupling"):
        RunConfig(coupling=np.eye(3)).validate()
    RunConfig().validate()  # defaults are self-consistent
