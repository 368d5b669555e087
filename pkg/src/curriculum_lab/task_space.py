"""Task spaces: the set of legal tasks and their compact encodings.

Curricula never see environment-facing task labels. They work with encodings:

* ``DiscreteTaskSpace`` encodes a label as its position (a plain ``int``).
* ``BoxTaskSpace`` encodes a real vector as a tuple of floats.
* ``TupleTaskSpace`` encodes a tuple of child labels as a tuple of child encodings.

Every space owns one ``numpy.random.Generator`` backed by PCG64. Seeding a
space resets that generator, so two spaces seeded identically produce the same
sample stream. Seeding has no effect on ``encode``/``decode``.
"""

from __future__ import annotations

import itertools
import math
from typing import Any, Hashable, Sequence

import numpy as np


class TaskSpaceError(ValueError):
    pass


class UnknownTask(TaskSpaceError, KeyError):
    """A label that is not part of the space."""


class OutOfRange(TaskSpaceError):
    """An encoding that violates the space's containment rules."""


class NotEnumerable(TaskSpaceError, TypeError):
    """Raised when a finite task list is requested from a continuous space."""


class TaskSpace:
    """Base class. Subclasses implement the per-variant logic."""

    def __init__(self, seed: int | None = None):
        self._seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))

    # sampling -------------------------------------------------------------
    def seed(self, seed: int) -> None:
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def sample(self) -> Any:
        """Draw one encoded task from the space's own generator."""
        return self._sample(self._rng)

    def _sample(self, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    # encoding -------------------------------------------------------------
    def encode(self, task: Any) -> Any:
        raise NotImplementedError

    def decode(self, encoding: Any) -> Any:
        raise NotImplementedError

    def contains(self, encoding: Any) -> bool:
        raise NotImplementedError

    # enumeration ----------------------------------------------------------
    @property
    def enumerable(self) -> bool:
        return False

    @property
    def tasks(self) -> list:
        raise NotEnumerable(f"{type(self).__name__} has no finite task list")

    def encodings(self) -> list:
        """All encodings in canonical (flat index) order."""
        raise NotEnumerable(f"{type(self).__name__} has no finite task list")

    @property
    def num_tasks(self) -> int:
        raise NotEnumerable(f"{type(self).__name__} has no finite task list")

    def flat_index(self, encoding: Any) -> int:
        raise NotEnumerable(f"{type(self).__name__} has no finite task list")

    def from_flat(self, index: int) -> Any:
        return self.encodings()[index]

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(doc: dict, seed: int | None = None) -> "TaskSpace":
        kind = doc.get("type")
        if kind == "discrete":
            return DiscreteTaskSpace(doc["count"], doc.get("tasks"), seed=seed)
        if kind == "box":
            return BoxTaskSpace(doc["low"], doc["high"], seed=seed)
        if kind == "tuple":
            return TupleTaskSpace([TaskSpace.from_dict(c) for c in doc["children"]], seed=seed)
        raise TaskSpaceError(f"unknown task space type {kind!r}")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TaskSpace) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self.to_dict()))


class DiscreteTaskSpace(TaskSpace):
    """``count`` tasks, optionally with explicit labels.

    Without labels the tasks are the integers ``0..count-1`` (the level-seed
    convention), so encode/decode are the identity on valid integers.
    """

    def __init__(self, count: int, tasks: Sequence[Hashable] | None = None, seed: int | None = None):
        super().__init__(seed)
        if count < 1:
            raise TaskSpaceError(f"count must be positive, got {count}")
        if tasks is not None:
            tasks = list(tasks)
            if len(tasks) != count:
                raise TaskSpaceError(f"{len(tasks)} labels supplied for count={count}")
            if len(set(tasks)) != count:
                raise TaskSpaceError("task labels must be unique")
            self._index = {t: i for i, t in enumerate(tasks)}
        self.count = count
        self._labels = tasks

    def _sample(self, rng):
        return int(rng.integers(self.count))

    def encode(self, task):
        if self._labels is None:
            if isinstance(task, (int, np.integer)) and not isinstance(task, bool) and 0 <= task < self.count:
                return int(task)
            raise UnknownTask(task)
        try:
            return self._index[task]
        except (KeyError, TypeError):
            raise UnknownTask(task) from None

    def decode(self, encoding):
        if not self.contains(encoding):
            raise OutOfRange(f"{encoding!r} is not in [0, {self.count})")
        return int(encoding) if self._labels is None else self._labels[encoding]

    def contains(self, encoding):
        return (
            isinstance(encoding, (int, np.integer))
            and not isinstance(encoding, bool)
            and 0 <= encoding < self.count
        )

    @property
    def enumerable(self):
        return True

    @property
    def tasks(self):
        return list(range(self.count)) if self._labels is None else list(self._labels)

    def encodings(self):
        return list(range(self.count))

    @property
    def num_tasks(self):
        return self.count

    def flat_index(self, encoding):
        if not self.contains(encoding):
            raise OutOfRange(f"{encoding!r} is not in [0, {self.count})")
        return int(encoding)

    def from_flat(self, index):
        return int(index)

    def to_dict(self):
        doc: dict = {"type": "discrete", "count": self.count}
        if self._labels is not None:
            doc["tasks"] = list(self._labels)
        return doc

    def __repr__(self):
        return f"DiscreteTaskSpace({self.count})"


class BoxTaskSpace(TaskSpace):
    """Axis-aligned box of real vectors, sampled uniformly per dimension."""

    def __init__(self, low: Sequence[float], high: Sequence[float], seed: int | None = None):
        super().__init__(seed)
        low = tuple(float(x) for x in low)
        high = tuple(float(x) for x in high)
        if len(low) != len(high):
            raise TaskSpaceError("low and high must have equal length")
        if not all(math.isfinite(x) for x in low + high):
            raise TaskSpaceError("box bounds must be finite")
        if any(lo > hi for lo, hi in zip(low, high)):
            raise TaskSpaceError("low must not exceed high")
        self.low = low
        self.high = high

    def _sample(self, rng):
        return uniform_in_box(rng, self.low, self.high)

    def encode(self, task):
        vec = tuple(float(x) for x in task)
        if not self.contains(vec):
            raise OutOfRange(f"{vec!r} lies outside the box")
        return vec

    def decode(self, encoding):
        if not self.contains(encoding):
            raise OutOfRange(f"{encoding!r} lies outside the box")
        return tuple(float(x) for x in encoding)

    def contains(self, encoding):
        try:
            vec = tuple(float(x) for x in encoding)
        except TypeError:
            return False
        return len(vec) == len(self.low) and all(
            lo <= x <= hi for lo, x, hi in zip(self.low, vec, self.high)
        )

    def to_dict(self):
        return {"type": "box", "low": list(self.low), "high": list(self.high)}

    def __repr__(self):
        return f"BoxTaskSpace({list(self.low)}, {list(self.high)})"


class TupleTaskSpace(TaskSpace):
    """Product of child spaces. Encodings are tuples of child encodings."""

    def __init__(self, children: Sequence[TaskSpace], seed: int | None = None):
        super().__init__(seed)
        if not children:
            raise TaskSpaceError("a tuple space needs at least one child")
        self.children = tuple(children)

    def _sample(self, rng):
        return tuple(child._sample(rng) for child in self.children)

    def encode(self, task):
        task = tuple(task)
        if len(task) != len(self.children):
            raise UnknownTask(task)
        return tuple(c.encode(t) for c, t in zip(self.children, task))

    def decode(self, encoding):
        if not self.contains(encoding):
            raise OutOfRange(f"{encoding!r} is not a valid composite encoding")
        return tuple(c.decode(e) for c, e in zip(self.children, encoding))

    def contains(self, encoding):
        try:
            parts = tuple(encoding)
        except TypeError:
            return False
        return len(parts) == len(self.children) and all(
            c.contains(e) for c, e in zip(self.children, parts)
        )

    @property
    def enumerable(self):
        return all(c.enumerable for c in self.children)

    @property
    def tasks(self):
        self._require_enumerable()
        return [tuple(t) for t in itertools.product(*(c.tasks for c in self.children))]

    def encodings(self):
        self._require_enumerable()
        return [tuple(e) for e in itertools.product(*(c.encodings() for c in self.children))]

    @property
    def num_tasks(self):
        self._require_enumerable()
        return math.prod(c.num_tasks for c in self.children)

    def flat_index(self, encoding):
        self._require_enumerable()
        if not self.contains(encoding):
            raise OutOfRange(f"{encoding!r} is not a valid composite encoding")
        index = 0
        for child, part in zip(self.children, encoding):
            index = index * child.num_tasks + child.flat_index(part)
        return index

    def from_flat(self, index):
        self._require_enumerable()
        parts = []
        for child in reversed(self.children):
            index, rem = divmod(index, child.num_tasks)
            parts.append(child.from_flat(rem))
        return tuple(reversed(parts))

    def _require_enumerable(self):
        if not self.enumerable:
            raise NotEnumerable("tuple space contains a continuous child")

    def to_dict(self):
        return {"type": "tuple", "children": [c.to_dict() for c in self.children]}

    def __repr__(self):
        return f"TupleTaskSpace({list(self.children)!r})"


def uniform_in_box(rng: np.random.Generator, low: Sequence[float], high: Sequence[float]) -> tuple:
    # rng.uniform(lo, lo) returns lo, which keeps degenerate intervals exact
    return tuple(float(rng.uniform(lo, hi)) if hi > lo else float(lo) for lo, hi in zip(low, high))
