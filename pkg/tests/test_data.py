import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssanova_deriv import tables
from ssanova_deriv.data import Channel, DerivativeDataset, as_dataset
from ssanova_deriv.errors import InputError


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_float_columns_round_trip_bit_exact(values):
    text = tables.render({"k": [1, 2]}, ["x"], [[v] for v in values])
    path_rows = list(text.splitlines())[2:]
    assert [float(r) for r in path_rows] == values


def test_read_reports_missing_file(tmp_path):
    with pytest.raises(InputError, match="not found"):
        tables.read(tmp_path / "nope.txt")


def test_dataset_validation():
    with pytest.raises(InputError):
        Channel(np.zeros((3, 1)), np.zeros(2), 1.0)
    with pytest.raises(InputError):
        Channel(np.zeros((2, 1)), np.zeros(2), -1.0)
    with pytest.raises(InputError):
        DerivativeDataset([Channel([[1.5]], [0.0], 1.0)])
    with pytest.raises(InputError):
        as_dataset([[[0.5]]] * 3, [[0.0]] * 3, [1.0] * 3)
    data = as_dataset([[[0.2, 0.4]], [[0.3, 0.1]]], [[1.0], [2.0]], [0.5, 0.25])
    assert (data.d, data.p, data.sigmas) == (2, 1, [0.5, 0.25])


def test_row_scales_survive_save_load(tmp_path):
    ch = Channel([[0.1], [0.9]], [1.0, 2.0], 1.0, scales=[0.5, 3.0])
    data = DerivativeDataset([Channel([[0.2]], [0.0], 1.0), ch])
    data.save(tmp_path / "d.txt")
    back = DerivativeDataset.load(tmp_path / "d.txt")
    assert np.array_equal(back.channels[1].row_scales(), [0.5, 3.0])
    assert back.channels[0].scales is None
