import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yukawa_ewald.errors import InputError, ParameterError
from yukawa_ewald.geometry import (
    PointCloud,
    build_cell_list,
    neighbor_pairs,
    neighbors,
    read_points_csv,
    write_points_csv,
)

L = 2 * math.pi


def brute_pairs(src, tgt, r_c, periodic):
    d = tgt[:, None, :] - src[None, :, :]
    if periodic:
        d -= L * np.round(d / L)
    r = np.hypot(d[..., 0], d[..., 1])
    t, s = np.nonzero(r < r_c)
    return set(zip(t.tolist(), s.tolist()))


def collect(cl, tgt):
    out = set()
    for blk in neighbor_pairs(cl, tgt):
        out |= set(zip(blk.target.tolist(), blk.source.tolist()))
    return out


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 80), r_c=st.floats(0.05, 3.1), periodic=st.booleans(), seed=st.integers(0, 10**6))
def test_pairs_match_brute_force(n, r_c, periodic, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    src = rng.uniform(0, L, (n, 2))
    tgt = rng.uniform(0, L, (17, 2))
    cl = build_cell_list(src, r_c, (0.0, L), periodic)
    assert collect(cl, tgt) == brute_pairs(src, tgt, r_c, periodic)


def test_pair_separations_are_minimum_image():
    src = np.array([[0.05, 0.05]])
    tgt = np.array([[L - 0.05, 0.05]])
    cl = build_cell_list(src, 0.5, (0.0, L), True)
    blk = next(iter(neighbor_pairs(cl, tgt)))
    assert np.allclose(blk.sep[0], [-0.1, 0.0])
    (s, shift, sep), = list(neighbors(cl, tgt[0]))
    assert s == 0 and np.allclose(sep, [-0.1, 0.0])


def test_cell_list_links_every_point_once():
    rng = np.random.Generator(np.random.Philox(3))
    src = rng.uniform(0, L, (200, 2))
    cl = build_cell_list(src, 0.7, (0.0, L), True)
    seen = sorted(i for c in range(cl.ncell**2) for i in cl.members(c))
    assert seen == list(range(200))
    assert cl.cell_size >= 0.7


def test_enumeration_is_deterministic():
    rng = np.random.Generator(np.random.Philox(5))
    src = rng.uniform(0, L, (300, 2))
    a = [b.source.copy() for b in neighbor_pairs(build_cell_list(src, 0.6), src)]
    b = [b.source.copy() for b in neighbor_pairs(build_cell_list(src, 0.6), src)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_cutoff_limits():
    with pytest.raises(ParameterError):
        build_cell_list(np.zeros((1, 2)), 4.0, (0.0, L), True)
    with pytest.raises(ParameterError):
        build_cell_list(np.zeros((1, 2)), 0.0)
    cl = build_cell_list(np.zeros((3, 2)) + 1.0, 50.0, (0.0, L), False)
    assert cl.ncell == 1


def test_point_cloud_validation():
    with pytest.raises(InputError):
        PointCloud(np.zeros((3, 2)), strengths_scalar=np.ones(2))
    with pytest.raises(InputError):
        PointCloud(np.array([[np.nan, 0.0]]))
    with pytest.raises(InputError):
        PointCloud(np.zeros((2, 2))).strengths("G")


def test_csv_roundtrip(tmp_path):
    rng = np.random.Generator(np.random.Philox(1))
    cloud = PointCloud(rng.uniform(0, L, (5, 2)), strengths_vector=rng.uniform(0, 1, (5, 2)))
    path = tmp_path / "pts.csv"
    write_points_csv(path, cloud)
    back = read_points_csv(path, domain=(0.0, L))
    assert np.array_equal(back.positions, cloud.positions)
    assert np.array_equal(back.strengths_vector, cloud.strengths_vector)


@pytest.mark.parametrize("text,line", [
    ("x,y,f\n1,2,3\n1,2\n", 3),
    ("# note\nx,y\n0.5,abc\n", 3),
    ("x,y,q\n", 1),
    ("x,y\n1,inf\n", 2),
])
def test_csv_errors_carry_line_numbers(text, line):
    with pytest.raises(InputError, match=f"line {line}"):
        read_points_csv(io.StringIO(text))


def test_csv_domain_check():
    with pytest.raises(InputError):
        read_points_csv(io.StringIO("x,y\n7.0,1.0\n"), domain=(0.0, L))
    # closed interval admits the right edge
    read_points_csv(io.StringIO(f"x,y\n{L!r},1.0\n"), domain=(0.0, L), closed=True)
