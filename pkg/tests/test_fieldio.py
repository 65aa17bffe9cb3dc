import numpy as np

from cgoslab.fieldio import read_field, read_pair, write_field, write_pair


def test_scalar_and_vector_round_trip(tmp_path, smooth_pair):
    head = write_field(tmp_path / "q", smooth_pair.q)
    back = read_field(head)
    assert back.grid == smooth_pair.q.grid and np.array_equal(back.data, smooth_pair.q.data)
    back = read_field(write_field(tmp_path / "A", smooth_pair.A))
    assert np.array_equal(back.data, smooth_pair.A.data)


def test_pair_round_trip(tmp_path, smooth_pair):
    p = read_pair(write_pair(tmp_path / "pair", smooth_pair))
    assert p.support == smooth_pair.support and p.L == smooth_pair.L
    assert np.array_equal(p.A.data, smooth_pair.A.data) and np.array_equal(p.q.data, smooth_pair.q.data)
