import numpy as np
import pytest

from bias_lab.data import Dataset, concat
from conftest import discrete, gaussian


def test_save_load_round_trip_bytes(tmp_path):
    d = gaussian(mechanism="presentation", presentation_shift=1.0).sample(200, 4)
    d.save(tmp_path / "a")
    back = Dataset.load(tmp_path / "a")
    assert np.array_equal(back.x_z, d.x_z) and np.array_equal(back.x_a, d.x_a)
    assert np.array_equal(back.y, d.y) and np.array_equal(back.z, d.z)
    back.save(tmp_path / "b")
    for name in ("data.csv", "meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_header_layout(tmp_path):
    d = gaussian(d_z=3, d_a=2).sample(5, 0)
    d.save(tmp_path)
    header = (tmp_path / "data.csv").read_text().splitlines()[0]
    assert header == "x_z_0,x_z_1,x_z_2,x_a_0,x_a_1,a,z,y"


def test_same_seed_same_file(tmp_path):
    s = gaussian()
    s.sample(10_000, 7).save(tmp_path / "1")
    s.sample(10_000, 7).save(tmp_path / "2")
    assert (tmp_path / "1" / "data.csv").read_bytes() == (tmp_path / "2" / "data.csv").read_bytes()


def test_discrete_design_matrix_one_hot():
    d = discrete(d_z=4, d_a=3).sample(50, 0)
    x = d.design_matrix()
    assert x.shape == (50, 7)
    assert np.all(x.sum(axis=1) == 2)


def test_subset_and_concat():
    d = gaussian().sample(20, 0)
    parts = [d.subset(np.arange(10)), d.subset(np.arange(10, 20))]
    back = concat(parts)
    assert np.array_equal(back.x_z, d.x_z) and np.array_equal(back.a, d.a)


def test_shape_validation():
    with pytest.raises(ValueError):
        Dataset(x_z=np.zeros((3, 2)), x_a=np.zeros((2, 1)), a=[0, 1, 0], y=[0, 0, 1])
