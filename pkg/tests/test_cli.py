import numpy as np
import pytest

from thirdsound import cli
from thirdsound.errors import (ConfigError, NumericalError,
                               UnphysicalCovarianceError, UnstableRobinError)

BASELINE = """
# thin-film cell
film.h0 = 80e-9
film.alpha_vdw = 2.6e-24
film.temperature = 0.3
grid.lx = 5e-3
grid.ly = 5e-3
grid.nx = 8
grid.ny = 8
boundary.kind = dirichlet
sweep.buffer = 1
sweep.include_cell_boundary = true
sweep.fixed_volume = 4
reconstruct.n_times = 40
reconstruct.seed = 11
"""


def write_config(tmp_path, text=BASELINE, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_round_trip_hash_stable(self):
        cfg = cli.parse_config(BASELINE)
        emitted = cli.emit_config(cfg)
        assert cli.config_hash(cli.parse_config(emitted)) == cli.config_hash(cfg)

    def test_missing_key_named(self):
        with pytest.raises(ConfigError) as err:
            cli.parse_config("film.h0 = 80e-9\n")
        assert "film.alpha_vdw" in str(err.value)

    def test_bad_line_number_reported(self):
        text = "film.h0 = 80e-9\nfilm.alpha_vdw = not_a_number\n"
        with pytest.raises(ConfigError) as err:
            cli.parse_config(text)
        assert "line 2" in str(err.value)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            cli.parse_config(BASELINE + "film.unknown = 2\n")

    def test_robin_requires_alpha(self):
        text = BASELINE.replace("boundary.kind = dirichlet", "boundary.kind = robin")
        with pytest.raises(ConfigError) as err:
            cli.parse_config(text)
        assert "boundary.alpha" in str(err.value)

    def test_exit_code_mapping(self):
        assert cli.exit_code_for(ConfigError("x")) == 2
        assert cli.exit_code_for(ValueError("x")) == 2
        assert cli.exit_code_for(NumericalError("x")) == 3
        assert cli.exit_code_for(UnstableRobinError("x")) == 3
        assert cli.exit_code_for(UnphysicalCovarianceError("x")) == 4


class TestCommands:
    def test_params_prints_third_sound_speed(self, tmp_path, capsys):
        code = cli.main(["params", "--config", write_config(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "c3=0.1234" in out

    def test_missing_config_key_exit_2(self, tmp_path, capsys):
        path = write_config(tmp_path, "film.h0 = 80e-9\n")
        assert cli.main(["params", "--config", path]) == 2
        assert "film.temperature" in capsys.readouterr().err

    def test_sweep_volume_csv(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = cli.main(["sweep-volume", "--config", write_config(tmp_path),
                         "--out", str(out)])
        assert code == 0
        lines = (out / "sweep_volume.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")]
        assert header[0] == "divider_index,volume_m2,mi_nats"
        assert len(header) == 1 + 6   # 8 columns, buffer 1
        assert any(l.startswith("# config_hash=") for l in lines)
        assert any("mask_a=" in l for l in lines)
        assert any("sine_argument_convention=pixel_fraction" in l for l in lines)

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["sweep-volume", "--config", cfg, "--out", str(out1)]) == 0
        assert cli.main(["sweep-volume", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "sweep_volume.csv").read_bytes() == (out2 / "sweep_volume.csv").read_bytes()

    def test_sweep_area_csv(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["sweep-area", "--config", write_config(tmp_path),
                         "--out", str(out), "--svg"])
        assert code == 0
        lines = (out / "sweep_area.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")]
        assert header[0] == "perimeter_m,mi_nats,corner_count"
        assert (out / "sweep_area.svg").exists()

    def test_mi_map_csv(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["mi-map", "--config", write_config(tmp_path),
                         "--out", str(out), "--svg"])
        assert code == 0
        rows = [l for l in (out / "mi_map.csv").read_text().splitlines()
                if not l.startswith("#")]
        assert rows[0] == "ix,iy,mi_nats"
        assert len(rows) == 1 + 36   # 6x6 interior of the 8x8 grid
        assert (out / "mi_map.svg").exists()

    def test_reconstruct_csv(self, tmp_path):
        out = tmp_path / "out"
        small = BASELINE.replace("grid.nx = 8", "grid.nx = 3").replace("grid.ny = 8",
                                                                       "grid.ny = 3")
        code = cli.main(["reconstruct", "--config", write_config(tmp_path, small),
                         "--out", str(out)])
        assert code == 0
        lines = [l for l in (out / "reconstruct.csv").read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "relative_frobenius_error,residual_rms,n_unidentifiable"
        err = float(lines[1].split(",")[0])
        assert err < 1e-6

    def test_fit_calabrese_csv(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["fit-calabrese", "--config", write_config(tmp_path),
                         "--out", str(out)])
        assert code == 0
        text = (out / "fit_calabrese.csv").read_text()
        assert "kappa1,kappa2,kappa3,rms" in text
        sweep_text = (out / "sweep_volume.csv").read_text()
        assert "# fit kappa1=" in sweep_text

    def test_fit_area_needs_enough_points(self, tmp_path, capsys):
        # 4-pixel rectangles on an 8x8 grid give only 3 shapes: 1x4, 2x2, 4x1
        out = tmp_path / "out"
        code = cli.main(["fit-area", "--config", write_config(tmp_path),
                         "--out", str(out)])
        assert code == 2
        assert "4 sweep points" in capsys.readouterr().err

    def test_fit_area_csv(self, tmp_path):
        out = tmp_path / "out"
        cfg = BASELINE.replace("sweep.fixed_volume = 4", "sweep.fixed_volume = 8")
        code = cli.main(["fit-area", "--config", write_config(tmp_path, cfg),
                         "--out", str(out)])
        assert code == 0
        lines = [l for l in (out / "fit_area.csv").read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "slope,intercept,r2"

    def test_unstable_robin_exit_3(self, tmp_path, capsys):
        cfg = BASELINE.replace("boundary.kind = dirichlet",
                               "boundary.kind = robin\nboundary.alpha = -100")
        assert cli.main(["params", "--config", write_config(tmp_path, cfg)]) == 3
        assert "bound mode" in capsys.readouterr().err
