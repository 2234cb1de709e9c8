"""Command-line surface: flags, exit codes, outputs."""

import json

import numpy as np
import pytest

from rfscat import gridio
from rfscat.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, build_parser, main
from rfscat.datagen import DatasetConfig, read_dataset, scene_from_meta
from rfscat.emcore import PhysicsConstants, TransmitterConfig, incident_field
from rfscat.geometry import rasterize

from test_datagen import dir_digest


def run(argv):
    return main(argv)


class TestParserDefaults:
    def test_generate_defaults_match_reference_configuration(self):
        args = build_parser().parse_args(
            ["generate", "--recipe", "shapes", "--out", "x"]
        )
        assert args.count == 10_000
        assert args.nr == 64
        assert args.wavelength == 0.125
        assert args.test_fraction == 0.2

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["generate", "--recipe", "shapes", "--bogus"])
        assert exc.value.code == 2


class TestGenerate:
    def test_identical_runs_identical_bytes(self, tmp_path, capsys):
        args = lambda out: [
            "generate", "--recipe", "shapes", "--count", "3", "--seed", "1",
            "--out", str(out), "--threads", "1", "--json",
        ]
        assert run(args(tmp_path / "d1")) == EXIT_OK
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["records"] == 3
        assert run(args(tmp_path / "d2")) == EXIT_OK
        assert dir_digest(tmp_path / "d1") == dir_digest(tmp_path / "d2")

    def test_mnist_without_path_is_config_error(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("RFSCAT_MNIST_PATH", raising=False)
        code = run(
            ["generate", "--recipe", "mnist", "--count", "1", "--out", str(tmp_path / "m")]
        )
        assert code == EXIT_CONFIG

    def test_mnist_env_var_used(self, tmp_path, monkeypatch, capsys):
        from test_geometry import write_idx

        digits = np.zeros((2, 28, 28), dtype=np.uint8)
        digits[0, 12:16, 12:16] = 255
        digits[1, 5:9, 5:20] = 255
        idx = tmp_path / "digits.idx"
        write_idx(idx, digits)
        monkeypatch.setenv("RFSCAT_MNIST_PATH", str(idx))
        code = run(
            ["generate", "--recipe", "mnist", "--count", "2",
             "--out", str(tmp_path / "m"), "--threads", "1", "--json"]
        )
        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out.strip())["records"] == 2


class TestRenderField:
    def test_empty_scene_is_pure_incident(self, tmp_path, capsys):
        spec = tmp_path / "empty.json"
        spec.write_text('{"shapes": []}')
        out = tmp_path / "field"
        code = run(
            ["render-field", "--scene-spec", str(spec), "--grid-res", "16",
             "--out", str(out), "--json"]
        )
        assert code == EXIT_OK
        raster = gridio.read_field_grid(f"{out}.f64")
        wl = 0.125
        constants = PhysicsConstants(wavelength=wl)
        tx = TransmitterConfig.default(wl)
        step = raster.extent / 16
        xs = -raster.extent / 2 + (np.arange(16) + 0.5) * step
        ys = raster.extent / 2 - (np.arange(16) + 0.5) * step
        X, Y = np.meshgrid(xs, ys)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        expected = np.abs(incident_field(pts, tx, constants)).reshape(16, 16)
        assert np.allclose(raster.values, expected, rtol=1e-13)

    def test_zero_grid_res_is_config_error(self, tmp_path):
        spec = tmp_path / "empty.json"
        spec.write_text('{"shapes": []}')
        code = run(
            ["render-field", "--scene-spec", str(spec), "--grid-res", "0",
             "--out", str(tmp_path / "f")]
        )
        assert code == EXIT_CONFIG

    def test_builtin_scene_renders(self, tmp_path, capsys):
        out = tmp_path / "fig"
        code = run(
            ["render-field", "--builtin", "fig2", "--grid-res", "32",
             "--out", str(out), "--json"]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["scene_points"] > 1000
        raster = gridio.read_field_grid(f"{out}.f64")
        assert np.all(np.isfinite(raster.values))
        assert raster.values.max() > 0
        pgm = (tmp_path / "fig.pgm").read_bytes()
        assert pgm.startswith(b"P5\n32 32\n255\n")

    def test_bad_scene_spec(self, tmp_path):
        spec = tmp_path / "bad.json"
        spec.write_text('{"shapes": [{"kind": "disc"}]}')
        code = run(
            ["render-field", "--scene-spec", str(spec), "--grid-res", "8",
             "--out", str(tmp_path / "f")]
        )
        assert code == EXIT_CONFIG

    def test_missing_scene_spec_file(self, tmp_path):
        code = run(
            ["render-field", "--scene-spec", str(tmp_path / "nope.json"),
             "--grid-res", "8", "--out", str(tmp_path / "f")]
        )
        assert code == EXIT_IO


class TestValidate:
    def test_noise_suite_passes(self, capsys):
        assert run(["validate", "--suite", "noise", "--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["passed"] is True
        for snr in (0, 10, 20, 30):
            assert abs(payload[f"snr_{snr}db"] - snr) <= 0.1

    def test_residual_suite_passes(self, capsys):
        assert run(["validate", "--suite", "residual", "--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["passed"] is True
        assert float(payload["max_boundary_residual"]) <= 1e-8


@pytest.fixture(scope="module")
def cli_container(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "box"
    code = main(
        ["generate", "--recipe", "shapes", "--count", "3", "--seed", "2",
         "--out", str(out), "--threads", "1"]
    )
    assert code == EXIT_OK
    return out


class TestInspect:
    def test_summary(self, cli_container, capsys):
        assert run(["inspect", "--in", str(cli_container), "--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["records"] == 3
        assert payload["n_receivers"] == 64
        assert payload["wavelength"] == 0.125

    def test_index_out_of_range(self, cli_container):
        assert (
            run(["inspect", "--in", str(cli_container), "--index", "99"])
            == EXIT_CONFIG
        )

    def test_dump_matches_rasterizer_bit_for_bit(self, cli_container, tmp_path, capsys):
        prefix = tmp_path / "rec"
        code = run(
            ["inspect", "--in", str(cli_container), "--index", "1",
             "--dump-prefix", str(prefix), "--json"]
        )
        assert code == EXIT_OK
        _, records = read_dataset(cli_container)
        rec = list(records)[1]
        config = DatasetConfig(recipe="shapes", count=3, master_seed=2)
        scene = scene_from_meta(rec.scene_meta, config.doi())
        fresh = rasterize(scene, 128, 128)
        dumped = (tmp_path / "rec-target.pgm").read_bytes()
        assert dumped == gridio.pgm_bytes(fresh.values)

    def test_missing_container_is_io_error(self, tmp_path):
        assert run(["inspect", "--in", str(tmp_path / "ghost")]) == EXIT_IO
