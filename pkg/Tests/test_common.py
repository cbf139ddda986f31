import numpy as np
import pytest

from Common import (
    Averaging,
    BoolColumn,
    ConfigMismatchError,
    ConfigurationError,
    DataError,
    EnumColumn,
    FloatColumn,
    FormatError,
    IntColumn,
    ModelFamily,
    NumericalError,
    Row,
    UsageError,
    append_row,
    atomic_write,
    deep_merge,
    derive_rng,
    load_config,
    read_rows,
    write_rows,
)


class _Base(Row):
    columns = {
        "name": EnumColumn(ModelFamily),
        "value": FloatColumn(),
    }


class _Sample(_Base):
    columns = {
        "count": IntColumn(),
        "flag": BoolColumn(),
    }


def _sample(**overrides):
    fields = {"name": ModelFamily.VAE, "value": 0.5, "count": 3, "flag": False}
    return _Sample.new(**{**fields, **overrides})


class TestRows:
    def test_subclass_columns_follow_base_columns(self):
        assert _Sample.header() == ("name", "value", "count", "flag")

    def test_record_formats_every_cell(self):
        assert _sample().record() == {
            "name": "vae",
            "value": "5.000000000e-01",
            "count": "3",
            "flag": "false",
        }

    def test_values_are_checked(self):
        assert _sample(value=1).value == 1.0
        assert _sample(name="svdkl").name is ModelFamily.SVDKL

        with pytest.raises(TypeError):
            _sample(count=True)
        with pytest.raises(TypeError):
            _sample(flag=1)
        with pytest.raises(ValueError):
            _sample(name="gp")

    def test_fields_must_match_columns(self):
        with pytest.raises(TypeError):
            _Base.new(name="vae")
        with pytest.raises(TypeError):
            _Base.new(name="vae", value=1.0, extra=2)

    def test_rows_are_slotted(self):
        with pytest.raises(AttributeError):
            _sample().extra = 1

    def test_parse(self):
        record = {"name": "svdkl", "value": "-2.25", "count": "7", "flag": "true"}
        assert _Sample.parse(record) == _sample(name="svdkl", value=-2.25, count=7, flag=True)

    @pytest.mark.parametrize(
        "cell", [("value", "x"), ("count", "1.5"), ("flag", "yes"), ("name", "gp")]
    )
    def test_parse_rejects_bad_cells(self, cell):
        record = {"name": "svdkl", "value": "1.0", "count": "1", "flag": "true"}
        key, text = cell
        with pytest.raises(DataError):
            _Sample.parse({**record, key: text})

    def test_non_finite_floats(self):
        assert FloatColumn().format(float("inf")) == "inf"
        assert FloatColumn().parse("-inf") == float("-inf")


class TestTables:
    def test_write_then_read(self, tmp_path):
        rows = [_sample(value=i / 4, count=i, flag=i % 2 == 0) for i in range(3)]
        path = tmp_path / "nested" / "rows.csv"
        write_rows(path, _Sample, rows)

        assert path.read_text().splitlines()[0] == "name,value,count,flag"
        assert read_rows(path, _Sample) == rows
        assert [p.name for p in path.parent.iterdir()] == ["rows.csv"]

    def test_append_writes_the_header_once(self, tmp_path):
        path = tmp_path / "rows.csv"
        for count in range(2):
            append_row(path, _sample(count=count))

        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert lines[0] == "name,value,count,flag"

    def test_read_rejects_another_header(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_rows(path, _Base, [_Base.new(name="vae", value=1.0)])
        with pytest.raises(DataError):
            read_rows(path, _Sample)

    def test_failed_write_keeps_the_previous_file(self, tmp_path):
        path = tmp_path / "out.bin"
        path.write_bytes(b"old")

        def writer(target):
            target.write_bytes(b"partial")
            raise OSError("disk full")

        with pytest.raises(DataError, match="disk full") as caught:
            atomic_write(path, writer)
        assert isinstance(caught.value.__cause__, OSError)
        assert path.read_bytes() == b"old"
        assert list(tmp_path.iterdir()) == [path]

    def test_parent_that_is_a_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_bytes(b"")

        with pytest.raises(DataError, match="Cannot write"):
            atomic_write(blocker / "out.bin", lambda target: target.write_bytes(b"x"))
        with pytest.raises(DataError):
            write_rows(blocker / "rows.csv", _Sample, [_sample()])
        with pytest.raises(DataError):
            append_row(blocker / "rows.csv", _sample())
        with pytest.raises(DataError):
            read_rows(blocker / "rows.csv", _Sample)
        assert list(tmp_path.iterdir()) == [blocker]


class TestConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg.model.family is ModelFamily.SVDKL
        assert cfg.model.measurement_shape == (2, 32, 32)
        assert cfg.eval.samples == 10

    def test_override_file(self, tmp_path):
        path = tmp_path / "overrides.txt"
        path.write_text("model.latent_dim = 8\ntrain.epochs = 3  # short run\n")

        cfg = load_config(path)
        assert (cfg.model.latent_dim, cfg.train.epochs) == (8, 3)
        assert cfg.model.filters == 32

    def test_string_values_are_quoted(self, tmp_path):
        quoted, bare = tmp_path / "quoted.txt", tmp_path / "bare.txt"
        quoted.write_text('eval.average = "image"\n')
        bare.write_text("eval.average = image\n")

        assert load_config(quoted).eval.average is Averaging.Image
        with pytest.raises(ConfigurationError, match="must be quoted"):
            load_config(bare)

    def test_integers_fill_float_fields(self):
        cfg = load_config(overrides={"noise": {"measurement_variance": 1}})
        assert isinstance(cfg.noise.measurement_variance, float)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"model": {"latent_dim": 0}},
            {"model": {"family": "gp"}},
            {"train": {"alpha": 1.5}},
            {"train": {"unknown": 1}},
            {"logging": {"level": "LOUD"}},
            {"simulator": {"height": 8}},
            {"noise": {"control_variance": -0.1}},
        ],
    )
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigurationError):
            load_config(overrides=overrides)

    def test_unreadable_files(self, tmp_path):
        malformed = tmp_path / "bad.txt"
        malformed.write_text("model.latent_dim = = 2\n")

        with pytest.raises(ConfigurationError):
            load_config(malformed)
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.txt")


class TestUtils:
    def test_deep_merge_keeps_siblings(self):
        merged = deep_merge({"a": {"x": 1, "y": 2}, "b": 3}, {"a": {"y": 5}})
        assert merged == {"a": {"x": 1, "y": 5}, "b": 3}

    def test_derived_streams(self):
        first = derive_rng(3, 0, 1).random(4)
        assert np.array_equal(first, derive_rng(3, 0, 1).random(4))
        assert not np.array_equal(first, derive_rng(3, 1, 0).random(4))


class TestErrors:
    def test_exit_codes(self):
        assert UsageError.exit_code == ConfigurationError.exit_code == 2
        assert DataError.exit_code == FormatError.exit_code == 3
        assert ConfigMismatchError.exit_code == 3
        assert NumericalError.exit_code == 4

    def test_messages(self):
        assert "byte offset 12" in str(FormatError("a.ldkl", 12, "bad magic"))
        error = NumericalError("Not positive definite.", jitters=(1e-6, 1e-5))
        assert "1e-06, 1e-05" in str(error)
        assert error.jitters == (1e-6, 1e-5)
