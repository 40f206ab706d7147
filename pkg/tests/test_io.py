import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qubitnoise import io
from qubitnoise.dephasing import CPMGTrace
from qubitnoise.errors import SchemaError
from qubitnoise.loss import ParticipationTable
from qubitnoise.noise import PSDEstimate


def _write(path, text):
    path.write_text(text)
    return path


def _trace(**kw):
    tau = np.logspace(-6, -4, 8)
    args = dict(n_pulses=2, tau=tau, signal=0.2 + 0.6 * np.exp(-tau / 3e-5), t1=5e-5,
                qubit_id="q1", flux=0.25)
    args.update(kw)
    return CPMGTrace(**args)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_exactly(x):
    assert float(io.fmt(x)) == x


class TestReadCsv:
    def test_missing_column_names_line_one(self, tmp_path):
        p = _write(tmp_path / "a.csv", "tau_s,sig\n1e-6,0.5\n")
        with pytest.raises(SchemaError, match=r"a\.csv:1.*missing column"):
            io.read_csv(p, ("tau_s", "signal"))

    def test_non_numeric_names_line(self, tmp_path):
        p = _write(tmp_path / "a.csv", "tau_s,signal\n1e-6,0.5\n2e-6,abc\n")
        with pytest.raises(SchemaError, match=r"a\.csv:3.*not a number"):
            io.read_csv(p, ("tau_s", "signal"))

    @pytest.mark.parametrize("bad", ["nan", "inf", "-inf", "NaN"])
    def test_non_finite_rejected(self, tmp_path, bad):
        p = _write(tmp_path / "a.csv", f"tau_s,signal\n1e-6,{bad}\n")
        with pytest.raises(SchemaError, match=r"a\.csv:2.*non-finite"):
            io.read_csv(p, ("tau_s", "signal"))

    def test_ragged_row(self, tmp_path):
        p = _write(tmp_path / "a.csv", "tau_s,signal\n1e-6,0.5,9\n")
        with pytest.raises(SchemaError, match=r"a\.csv:2.*fields"):
            io.read_csv(p, ("tau_s", "signal"))

    def test_empty_and_header_only(self, tmp_path):
        with pytest.raises(SchemaError, match="empty"):
            io.read_csv(_write(tmp_path / "e.csv", ""), ("a",))
        with pytest.raises(SchemaError, match="no data"):
            io.read_csv(_write(tmp_path / "h.csv", "a\n"), ("a",))
        with pytest.raises(SchemaError, match="not found"):
            io.read_csv(tmp_path / "none.csv", ("a",))

    def test_blank_lines_and_extra_columns(self, tmp_path):
        p = _write(tmp_path / "a.csv", "note,a\nx,1\n\ny,2\n")
        cols, lines = io.read_csv(p, ("a",))
        assert cols == {"a": [1.0, 2.0]} and lines == [2, 4]


class TestTraces:
    def test_round_trip(self, tmp_path):
        tr = _trace(sigma=np.full(8, 0.01), tau0=1e-8)
        io.write_trace(tr, tmp_path / "t.csv")
        back = io.read_trace(tmp_path / "t.csv")
        np.testing.assert_array_equal(back.tau, tr.tau)
        np.testing.assert_array_equal(back.signal, tr.signal)
        np.testing.assert_array_equal(back.sigma, tr.sigma)
        assert (back.n_pulses, back.t1, back.qubit_id, back.flux, back.tau0) == (2, 5e-5, "q1", 0.25, 1e-8)

    def test_non_monotone_tau(self, tmp_path):
        io.write_trace(_trace(), tmp_path / "t.csv")
        _write(tmp_path / "t.csv", "tau_s,signal\n1e-6,0.8\n3e-6,0.7\n2e-6,0.6\n")
        with pytest.raises(SchemaError, match=r"t\.csv:4.*increasing"):
            io.read_trace(tmp_path / "t.csv")

    def test_non_positive_tau(self, tmp_path):
        io.write_trace(_trace(), tmp_path / "t.csv")
        _write(tmp_path / "t.csv", "tau_s,signal\n0,0.8\n3e-6,0.7\n")
        with pytest.raises(SchemaError, match="positive"):
            io.read_trace(tmp_path / "t.csv")

    def test_sidecar_problems(self, tmp_path):
        io.write_trace(_trace(), tmp_path / "t.csv")
        side = tmp_path / "t.json"
        side.write_text(json.dumps({"n_pulses": 2}))
        with pytest.raises(SchemaError, match="t1_s"):
            io.read_trace(tmp_path / "t.csv")
        side.write_text(json.dumps({"n_pulses": 2, "t1_s": 5e-5, "colour": "red"}))
        with pytest.raises(SchemaError, match="unknown sidecar"):
            io.read_trace(tmp_path / "t.csv")
        side.write_text("{not json")
        with pytest.raises(SchemaError, match="invalid JSON"):
            io.read_trace(tmp_path / "t.csv")
        side.unlink()
        with pytest.raises(SchemaError, match="not found"):
            io.read_trace(tmp_path / "t.csv")

    def test_directory(self, tmp_path):
        with pytest.raises(SchemaError, match="no trace"):
            io.read_trace_dir(tmp_path)
        with pytest.raises(SchemaError, match="not a directory"):
            io.read_trace_dir(tmp_path / "missing")
        io.write_trace(_trace(n_pulses=5), tmp_path / "b.csv")
        io.write_trace(_trace(n_pulses=1), tmp_path / "a.csv")
        assert [t.n_pulses for t in io.read_trace_dir(tmp_path)] == [1, 5]


class TestOtherFormats:
    def test_psd_round_trip(self, tmp_path):
        est = PSDEstimate(freq=[1e3, 1e4], s_phi=[1e-13, 2e-14], sigma=[1e-14, 3e-15],
                          n_pulses=[1, 2], tau=[1e-5, 2e-6])
        io.write_psd(est, tmp_path / "p.csv")
        back = io.read_psd(tmp_path / "p.csv")
        for name in ("freq", "s_phi", "sigma", "n_pulses", "tau"):
            np.testing.assert_array_equal(getattr(back, name), getattr(est, name))

    def test_psd_non_positive(self, tmp_path):
        p = _write(tmp_path / "p.csv", "freq_hz,s_phi0sq_per_hz,sigma\n1e3,1e-13,0\n2e3,-1e-13,0\n")
        with pytest.raises(SchemaError, match=r"p\.csv:3"):
            io.read_psd(p)

    def test_participations_round_trip(self, tmp_path):
        table = ParticipationTable.from_surface_table()
        io.write_participations(table, tmp_path / "p.csv")
        back = io.read_participations(tmp_path / "p.csv")
        assert back.design_ids == table.design_ids
        np.testing.assert_array_equal(back.matrix(), table.matrix())

    def test_participation_schema(self, tmp_path):
        p = _write(tmp_path / "p.csv", "design_id,p_ms,p_sa,p_bulk\nA,1e-4,1e-4,0.9\n")
        with pytest.raises(SchemaError, match=r"p\.csv:1.*p_ma"):
            io.read_participations(p)
        p = _write(tmp_path / "p.csv", "design_id,p_ms,p_sa,p_ma,p_bulk\nA,1e-4,1e-4,1e-5,0.9\nB,2,1e-4,1e-5,0.9\n")
        with pytest.raises(SchemaError, match=r"p\.csv:3"):
            io.read_participations(p)

    def test_t1_dataset(self, tmp_path):
        data = {"A": (2e-5, 5e9), "B": (1e-5, 4.5e9)}
        io.write_t1_dataset(data, tmp_path / "t.csv")
        assert io.read_t1_dataset(tmp_path / "t.csv") == data
        p = _write(tmp_path / "d.csv", "design_id,t1_s,f_q_hz\nA,1e-5,5e9\nA,2e-5,5e9\n")
        with pytest.raises(SchemaError, match=r"d\.csv:3.*duplicate"):
            io.read_t1_dataset(p)
        p = _write(tmp_path / "n.csv", "design_id,t1_s,f_q_hz\nA,-1e-5,5e9\n")
        with pytest.raises(SchemaError, match=r"n\.csv:2"):
            io.read_t1_dataset(p)

    def test_json_non_finite_becomes_null(self, tmp_path):
        io.dump_json({"b": math.inf, "a": np.float64(1.5), "c": np.arange(2)}, tmp_path / "x.json")
        text = (tmp_path / "x.json").read_text()
        assert json.loads(text) == {"a": 1.5, "b": None, "c": [0, 1]}
        assert text.index('"a"') < text.index('"b"')
