"""Tests for the CLI module."""

import json

import pytest

from ptwell import __version__
from ptwell.cli import create_parser, main, read_spec_file
from ptwell.fv import DegenerateRoot
from ptwell.model import BadPosition, SpecError, WellSpec
from ptwell.verify import VerificationReport

HALF = "domain -1 1\ndelta 0.5 3.0\n"
TRIPLE = "delta 0.2 1\ndelta 0.5 2\ndelta 0.8 1\n"
WEAK_HALF = "delta 0.5 1.0\n"


def csv_rows(text):
    """Split CSV output into provenance, header and rows."""
    lines = text.strip().split("\n")
    return lines[0], lines[1].split(","), [line.split(",") for line in lines[2:]]


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """Run every CLI test away from user config files and env settings."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PTWELL_THREADS", raising=False)


class TestArgumentParser:
    """Tests for argument parsing."""

    def test_parser_creation(self):
        """Test that parser is created successfully."""
        parser = create_parser()

        assert parser.prog == "ptwell"

    def test_default_values(self):
        """Test default argument values."""
        args = create_parser().parse_args(["spectrum", "well.txt"])

        assert args.command == "spectrum"
        assert args.kmax == 10.0
        assert args.backend == "matrix"
        assert args.out == "-"
        assert args.step is None
        assert args.verbose is False

    def test_common_options_on_every_command(self):
        """Test that shared options follow any subcommand."""
        args = create_parser().parse_args(
            ["metric", "well.txt", "--trunc", "4", "--omega", "unit", "-q", "--threads", "2"]
        )

        assert args.truncation == 4
        assert args.omega == "unit"
        assert args.quiet is True
        assert args.threads == 2

    def test_command_required(self):
        """Test that a subcommand must be given."""
        with pytest.raises(SystemExit) as exc_info:
            create_parser().parse_args([])

        assert exc_info.value.code == 2

    def test_unknown_backend(self):
        """Test that only known backends parse."""
        with pytest.raises(SystemExit):
            create_parser().parse_args(["spectrum", "well.txt", "--backend", "spline"])


class TestReadSpecFile:
    """Tests for read_spec_file."""

    def test_reads_spec(self, spec_file):
        """Test reading a valid file."""
        assert read_spec_file(spec_file(HALF)) == WellSpec((0.5,), (3.0,))

    def test_missing_file(self, tmp_path):
        """Test that a missing file is an input error."""
        with pytest.raises(SpecError):
            read_spec_file(str(tmp_path / "missing.txt"))

    def test_parse_error(self, spec_file):
        """Test that parse errors surface unchanged."""
        with pytest.raises(BadPosition):
            read_spec_file(spec_file("delta 1.5 1\n"))


class TestSpectrumCommand:
    """Tests for the spectrum subcommand."""

    def test_square_well(self, spec_file, capsys):
        """Test the bare-well spectrum on stdout."""
        path = spec_file("domain -1 1\n")

        code = main(["spectrum", path, "--kmax", "5", "--no-config", "-q"])

        provenance, header, rows = csv_rows(capsys.readouterr().out)
        assert code == 0
        assert provenance == f"# ptwell {__version__} spectrum {path} --kmax 5 --no-config -q"
        assert header == ["n", "kappa", "epsilon", "residual"]
        assert [row[0] for row in rows] == ["1", "2", "3"]
        assert rows[0][1] == "1.5707963267948966e0"

    def test_output_file(self, spec_file, tmp_path):
        """Test writing the table to a file."""
        target = tmp_path / "results" / "spectrum.csv"

        code = main(["spectrum", spec_file(HALF), "--out", str(target), "--no-config", "-q"])

        assert code == 0
        assert target.read_text(encoding="utf-8").startswith("# ptwell")

    def test_bad_spec_exits_2(self, spec_file, capsys):
        """Test the input-error exit code."""
        code = main(["spectrum", spec_file("delta 0.5\n"), "--no-config"])

        assert code == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_spec_exits_2(self):
        """Test that a missing spec file exits with 2."""
        assert main(["spectrum", "nowhere.txt", "--no-config"]) == 2

    def test_closed_backend_exits_3(self, spec_file):
        """Test the capability exit code for L = 3 with the closed backend."""
        code = main(["spectrum", spec_file(TRIPLE), "--backend", "closed", "--no-config"])

        assert code == 3

    def test_bad_step_exits_2(self, spec_file):
        """Test that an invalid scan setting is an input error."""
        assert main(["spectrum", spec_file(HALF), "--step", "2", "--no-config"]) == 2


class TestSweepCommand:
    """Tests for the sweep subcommand."""

    def test_short_sweep(self, spec_file, capsys):
        """Test a sweep below the first coalescence."""
        code = main(
            ["sweep", spec_file(HALF), "--xi-to", "1", "--steps", "3", "--levels", "2", "-q"]
        )

        _, header, rows = csv_rows(capsys.readouterr().out)
        assert code == 0
        assert header == ["level", "xi", "kappa_re", "kappa_im", "status"]
        assert len(rows) == 6
        assert {row[4] for row in rows} == {"Real"}
        assert rows[3][:2] == ["2", "0.0000000000000000e0"]
        assert rows[3][2] == "3.1415926535897931e0"

    def test_steps_from_config(self, spec_file, tmp_path, capsys):
        """Test that the sweep resolution comes from the config file."""
        (tmp_path / ".ptwell.toml").write_text("[sweep]\nsteps = 4\n", encoding="utf-8")

        main(["sweep", spec_file(HALF), "--xi-to", "1", "--levels", "1", "-q"])

        _, _, rows = csv_rows(capsys.readouterr().out)
        assert len(rows) == 4

    def test_repeated_runs_are_identical(self, spec_file, tmp_path):
        """Test that the same flags write byte-identical files."""
        path = spec_file(WEAK_HALF)
        outputs = [tmp_path / "first.csv", tmp_path / "second.csv"]

        for target in outputs:
            args = ["sweep", path, "--xi-to", "2", "--steps", "21", "--levels", "3"]
            assert main(args + ["--threads", "2", "--out", str(target), "-q"]) == 0

        assert outputs[0].read_bytes() == outputs[1].read_bytes()


class TestClassifyCommand:
    """Tests for the classify subcommand."""

    def test_robust_levels(self, spec_file, capsys):
        """Test that short ranges tag every level robust."""
        code = main(["classify", spec_file(HALF), "--levels", "2", "--xi-max", "1"])

        captured = capsys.readouterr()
        _, header, rows = csv_rows(captured.out)
        assert code == 0
        assert header == ["n", "tag", "xi_c"]
        assert rows == [["1", "Robust", ""], ["2", "Robust", ""]]
        assert "Pattern: RR" in captured.err


class TestMetricCommand:
    """Tests for the metric subcommand."""

    def test_report(self, spec_file, capsys):
        """Test the JSON diagnostics of a small truncation."""
        code = main(["metric", spec_file(HALF), "--trunc", "3", "--grid", "256", "-q"])

        data = json.loads(capsys.readouterr().out)
        assert code == 0
        assert list(data)[0] == "provenance"
        assert data["levels"] == [1, 2, 3]
        assert data["scheme"] == "inv-mu2"
        assert data["min_eigenvalue_of_product_gram"] > 0

    def test_weak_half_position_with_eight_levels(self, spec_file, capsys):
        """Test the diagnostics at a = 1/2, xi = 1, where levels 2, 4, 6, 8 sit at m pi."""
        code = main(["metric", spec_file(WEAK_HALF), "--trunc", "8", "-q"])

        data = json.loads(capsys.readouterr().out)
        assert code == 0
        assert data["levels"] == list(range(1, 9))
        assert data["quasi_hermiticity_residual_max"] < 1e-8

    def test_degenerate_exits_4(self, spec_file, mocker):
        """Test the degeneracy exit code."""
        mocker.patch("ptwell.cli.diagnose", side_effect=DegenerateRoot("rho vanishes"))

        assert main(["metric", spec_file(HALF), "--trunc", "2", "-q"]) == 4


class TestVerifyCommand:
    """Tests for the verify subcommand."""

    def test_passes(self, spec_file, capsys):
        """Test that a healthy well verifies with exit 0."""
        code = main(["verify", spec_file(HALF), "--seed", "3", "-q"])

        data = json.loads(capsys.readouterr().out)
        assert code == 0
        assert data["passed"] is True
        assert data["seed"] == 3

    def test_repeated_runs_are_identical(self, spec_file, tmp_path):
        """Test that a report regenerated with the same seed has the same bytes."""
        path = spec_file(HALF)
        outputs = [tmp_path / "first.json", tmp_path / "second.json"]

        for target in outputs:
            main(["verify", path, "--seed", "5", "--out", str(target), "-q"])

        assert outputs[0].read_bytes() == outputs[1].read_bytes()

    def test_failure_exit_code(self, spec_file, mocker):
        """Test that a failed check gives exit 1."""
        report = VerificationReport()
        report.add_check("reality", 1.0, 1e-12)
        mocker.patch("ptwell.cli.verify_determinants", return_value=report)

        assert main(["verify", spec_file(HALF), "-q"]) == 1


class TestWavefunctionCommand:
    """Tests for the wavefunction subcommand."""

    def test_samples(self, spec_file, capsys):
        """Test PT-symmetric samples with exact zeros at the walls."""
        code = main(["wavefunction", spec_file(HALF), "--level", "2", "--samples", "21", "-q"])

        _, header, rows = csv_rows(capsys.readouterr().out)
        assert code == 0
        assert header == ["x", "psi_re", "psi_im"]
        assert len(rows) == 21
        assert rows[0] == ["-1.0000000000000000e0", "0.0000000000000000e0", "0.0000000000000000e0"]
        assert rows[-1][1:] == ["0.0000000000000000e0", "0.0000000000000000e0"]
        for row, mirror in zip(rows, reversed(rows)):
            assert float(row[0]) == -float(mirror[0])
            assert float(row[1]) == float(mirror[1])
            assert float(row[2]) == -float(mirror[2])

    def test_level_at_exact_root(self, spec_file, capsys):
        """Test the kappa = pi state at a = 1/2, xi = 1."""
        code = main(["wavefunction", spec_file(WEAK_HALF), "--level", "2", "--samples", "5", "-q"])

        _, _, rows = csv_rows(capsys.readouterr().out)
        assert code == 0
        assert len(rows) == 5

    def test_invalid_level(self, spec_file):
        """Test that level 0 is an input error."""
        assert main(["wavefunction", spec_file(HALF), "--level", "0", "-q"]) == 2


class TestSaveConfigOption:
    """Tests for --save-config."""

    def test_save(self, spec_file, tmp_path):
        """Test that current settings are saved and nothing is computed."""
        target = tmp_path / "saved.toml"

        code = main(["spectrum", spec_file(HALF), "--step", "0.05", "--save-config", str(target)])

        assert code == 0
        assert "step = 0.05" in target.read_text(encoding="utf-8")
