import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedts.domain import Domain, assign_agents, build_grid, partition, region_of


def test_unit_grid_1000_points():
    dom = build_grid(1, [(0, 1)], 1000)
    assert dom.size == 1000
    np.testing.assert_allclose(np.diff(dom.points[:, 0]), 1 / 999)
    assert dom.points[0, 0] == 0.0 and dom.points[-1, 0] == 1.0


def test_two_point_grid_is_the_endpoints():
    assert build_grid(1, [(0, 1)], 2).points[:, 0].tolist() == [0.0, 1.0]


def test_tensor_grid_ids_start_at_lower_corner():
    dom = build_grid(2, None, 9)
    assert dom.size == 81
    assert dom.points[0].tolist() == [0.0, 0.0]
    assert dom.points[-1].tolist() == [1.0, 1.0]


def test_explicit_points_are_kept():
    pts = np.array([[0.1, 0.2], [0.9, 0.3]])
    dom = build_grid(2, None, pts)
    np.testing.assert_array_equal(dom.points, pts)


@pytest.mark.parametrize("kwargs", [dict(points=0), dict(bounds=[(1, 0)])])
def test_bad_grids_rejected(kwargs):
    with pytest.raises(ValueError):
        build_grid(1, **{"bounds": None, "points": 10, **kwargs})


def test_point_outside_bounds_rejected():
    with pytest.raises(ValueError):
        Domain(np.array([[1.5]]), np.array([[0.0, 1.0]]))


def test_four_boxes_in_2d_match_printed_layout():
    part = partition(build_grid(2, None, 11), 4)
    got = [(b.lo, b.hi, b.closed) for b in part.regions]
    assert got == [
        ((0, 0), (0.5, 0.5), (False, False)),
        ((0, 0.5), (0.5, 1), (False, True)),
        ((0.5, 0), (1, 0.5), (True, False)),
        ((0.5, 0.5), (1, 1), (True, True)),
    ]


def test_single_region_is_whole_box():
    for dims in (1, 2, 3):
        part = partition(build_grid(dims, None, 5), 1)
        assert len(part.regions) == 1
        assert part.regions[0].volume == 1.0
        assert np.all(part.region_of_point == 0)


def test_3d_four_regions_leave_last_dim_whole():
    part = partition(build_grid(3, None, 5), 4)
    for box in part.regions:
        assert (box.lo[2], box.hi[2]) == (0.0, 1.0)
        assert box.hi[0] - box.lo[0] == 0.5 and box.hi[1] - box.lo[1] == 0.5


def test_non_power_of_two_in_1d_is_equal_intervals():
    part = partition(build_grid(1, None, 1000), 3)
    assert [b.volume for b in part.regions] == pytest.approx([1 / 3] * 3)
    assert sorted(np.bincount(part.region_of_point).tolist()) == [333, 333, 334]


def test_non_power_of_two_in_2d_rejected():
    with pytest.raises(ValueError, match="power of two"):
        partition(build_grid(2, None, 5), 3)


def test_boundary_points_go_to_upper_box():
    part = partition(build_grid(1, None, 11), 2)
    assert region_of(part, 0.5) == 1
    assert region_of(part, 0.0) == 0
    assert region_of(part, 1.0) == 1
    part2 = partition(build_grid(2, None, 11), 4)
    assert region_of(part2, (0.49, 0.51)) == 1


def test_region_of_outside_point_rejected():
    part = partition(build_grid(1, None, 11), 2)
    with pytest.raises(ValueError):
        region_of(part, 1.01)


def test_partition_json_layout():
    part = partition(build_grid(2, None, 5), 2)
    assert json.loads(part.to_json()) == {"0": [[0.0, 0.5], [0.0, 1.0]],
                                          "1": [[0.5, 1.0], [0.0, 1.0]]}


@settings(max_examples=40, deadline=None)
@given(dims=st.integers(1, 3), log_p=st.integers(0, 4), per_dim=st.integers(2, 9))
def test_every_grid_point_in_exactly_one_region(dims, log_p, per_dim):
    dom = build_grid(dims, None, per_dim)
    part = partition(dom, 2 ** log_p)
    member = np.array([box.contains(dom.points) for box in part.regions])
    assert np.all(member.sum(axis=0) == 1)
    np.testing.assert_array_equal(member.argmax(axis=0), part.region_of_point)
    vols = [b.volume for b in part.regions]
    assert math.fsum(vols) == 1.0
    assert len(set(vols)) == 1


@settings(max_examples=40, deadline=None)
@given(dims=st.integers(1, 3), log_p=st.integers(0, 3),
       x=st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_region_of_agrees_with_exactly_one_box(dims, log_p, x):
    part = partition(build_grid(dims, None, 3), 2 ** log_p)
    point = x[:dims]
    hits = [i for i, b in enumerate(part.regions) if b.contains(point)[0]]
    assert hits == [region_of(part, point)]


@pytest.mark.parametrize("n,p,expected", [(200, 2, [100, 100]), (5, 2, [2, 3]),
                                          (50, 4, [12, 12, 13, 13])])
def test_assignment_counts(n, p, expected):
    asg = assign_agents(n, p, np.random.default_rng(0))
    assert sorted(asg.counts.tolist()) == expected


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 16), n=st.integers(1, 256), seed=st.integers(0, 2**32 - 1))
def test_assignment_balanced_and_deterministic(p, n, seed):
    a = assign_agents(n, p, np.random.default_rng(seed))
    b = assign_agents(n, p, np.random.default_rng(seed))
    np.testing.assert_array_equal(a.region_of_agent, b.region_of_agent)
    assert a.counts.sum() == n
    assert a.counts.max() - a.counts.min() <= 1
    ind = a.indicator()
    assert ind.shape == (p, n)
    np.testing.assert_array_equal(ind.sum(axis=0), 1)
