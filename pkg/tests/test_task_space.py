import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from curriculum_lab.task_space import (
    BoxTaskSpace,
    DiscreteTaskSpace,
    NotEnumerable,
    OutOfRange,
    TaskSpace,
    TaskSpaceError,
    TupleTaskSpace,
    UnknownTask,
)


def test_discrete_sampling_is_uniform():
    space = DiscreteTaskSpace(200, seed=1)
    n = 200_000
    draws = np.array([space.sample() for _ in range(n)])
    assert draws.min() >= 0 and draws.max() < 200
    counts = np.bincount(draws, minlength=200)
    sigma = np.sqrt(n * (1 / 200) * (1 - 1 / 200))
    assert np.all(np.abs(counts - n / 200) <= 4 * sigma)


def test_degenerate_box_samples_the_point():
    space = BoxTaskSpace([0.0], [0.0], seed=3)
    assert space.sample() == (0.0,)


def test_tuple_sampling_is_uniform_over_the_product():
    space = TupleTaskSpace([DiscreteTaskSpace(2), DiscreteTaskSpace(3)], seed=5)
    counts = {}
    for _ in range(100_000):
        t = space.sample()
        counts[t] = counts.get(t, 0) + 1
    # enumerate the product independently of the space
    expected = [(a, b) for a in range(2) for b in range(3)]
    assert sorted(counts) == expected
    _, p = stats.chisquare([counts[t] for t in expected])
    assert p > 0.01


def test_labelled_encoding():
    space = DiscreteTaskSpace(2, ["collect_wood", "collect_stone"])
    assert space.encode("collect_stone") == 1
    assert space.decode(1) == "collect_stone"
    with pytest.raises(UnknownTask):
        space.encode("collect_diamond")
    with pytest.raises(OutOfRange):
        space.decode(2)


def test_unlabelled_discrete_uses_integers():
    space = DiscreteTaskSpace(3)
    assert space.tasks == [0, 1, 2]
    assert space.encode(2) == 2
    with pytest.raises(UnknownTask):
        space.encode(3)


def test_task_lists():
    assert DiscreteTaskSpace(3, ["a", "b", "c"]).tasks == ["a", "b", "c"]
    with pytest.raises(NotEnumerable):
        BoxTaskSpace([0], [1]).tasks
    with pytest.raises(NotEnumerable):
        TupleTaskSpace([DiscreteTaskSpace(2), BoxTaskSpace([0], [1])]).tasks


def test_invalid_spaces_are_rejected():
    with pytest.raises(TaskSpaceError):
        DiscreteTaskSpace(2, ["a"])
    with pytest.raises(TaskSpaceError):
        DiscreteTaskSpace(2, ["a", "a"])
    with pytest.raises(TaskSpaceError):
        BoxTaskSpace([0, 0], [1])
    with pytest.raises(TaskSpaceError):
        BoxTaskSpace([1], [0])
    with pytest.raises(TaskSpaceError):
        TupleTaskSpace([])


def test_box_containment():
    space = BoxTaskSpace([0, -1], [1, 1])
    assert space.contains((0.5, 0.0))
    assert not space.contains((1.5, 0.0))
    with pytest.raises(OutOfRange):
        space.decode((2.0, 0.0))


def test_seeding_reproduces_streams():
    a, b = DiscreteTaskSpace(1000), DiscreteTaskSpace(1000)
    a.seed(7)
    b.seed(7)
    assert [a.sample() for _ in range(5)] == [b.sample() for _ in range(5)]
    a.seed(7)
    b.seed(8)
    # 20 draws from 1000 values colliding everywhere has probability 1e-60
    assert [a.sample() for _ in range(20)] != [b.sample() for _ in range(20)]


def test_seed_must_be_u64():
    space = DiscreteTaskSpace(3)
    with pytest.raises(ValueError):
        space.seed(-1)
    with pytest.raises(ValueError):
        space.seed(2**64)
    space.seed(2**64 - 1)


def test_seeding_leaves_encoding_alone():
    space = DiscreteTaskSpace(2, ["x", "y"])
    before = [space.encode("x"), space.decode(1)]
    space.seed(123)
    assert [space.encode("x"), space.decode(1)] == before


def test_tuple_flat_index_roundtrip():
    space = TupleTaskSpace([DiscreteTaskSpace(2), DiscreteTaskSpace(3, ["a", "b", "c"])])
    encs = space.encodings()
    assert len(encs) == space.num_tasks == 6
    for i, e in enumerate(encs):
        assert space.flat_index(e) == i
        assert space.from_flat(i) == e
    assert space.decode((1, 2)) == (1, "c")


@pytest.mark.parametrize(
    "space",
    [
        DiscreteTaskSpace(4, ["a", "b", "c", "d"]),
        BoxTaskSpace([0, 1], [2, 3]),
        TupleTaskSpace([DiscreteTaskSpace(2), BoxTaskSpace([0], [1])]),
    ],
)
def test_json_roundtrip(space):
    doc = json.loads(json.dumps(space.to_dict()))
    assert TaskSpace.from_dict(doc) == space


# property tests -----------------------------------------------------------

labels = st.lists(st.text(min_size=1, max_size=5), min_size=1, max_size=8, unique=True)


@st.composite
def spaces(draw, depth=0):
    kind = draw(st.sampled_from(["discrete", "labelled", "box", "tuple"] if depth < 2 else ["discrete", "box"]))
    if kind == "discrete":
        return DiscreteTaskSpace(draw(st.integers(1, 20)))
    if kind == "labelled":
        names = draw(labels)
        return DiscreteTaskSpace(len(names), names)
    if kind == "box":
        dim = draw(st.integers(1, 3))
        lows = draw(st.lists(st.floats(-10, 10), min_size=dim, max_size=dim))
        widths = draw(st.lists(st.floats(0, 5), min_size=dim, max_size=dim))
        return BoxTaskSpace(lows, [lo + w for lo, w in zip(lows, widths)])
    children = draw(st.lists(spaces(depth=depth + 1), min_size=1, max_size=3))
    return TupleTaskSpace(children)


@settings(max_examples=150, deadline=None)
@given(spaces(), st.integers(0, 2**64 - 1))
def test_samples_are_contained_and_roundtrip(space, seed):
    space.seed(seed)
    for _ in range(10):
        enc = space.sample()
        assert space.contains(enc)
        assert space.encode(space.decode(enc)) == enc


@settings(max_examples=100, deadline=None)
@given(spaces(), st.integers(0, 2**32))
def test_seeded_sampling_is_reproducible(space, seed):
    space.seed(seed)
    first = [space.sample() for _ in range(5)]
    space.seed(seed)
    assert [space.sample() for _ in range(5)] == first
