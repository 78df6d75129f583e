"""Index sets of the cumulant and generated-evolution expansions."""

from dataclasses import dataclass
from typing import Tuple

from ..errors import DimensionError

# Stands for the single clustered element {Y} inside a partition.
CLUSTER = 0


@dataclass(frozen=True)
class ClusteredSet:
    """Ground set ({Y}, X∖Y): the cluster Y counts as one element."""

    cluster: Tuple[int, ...]
    extras: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.cluster:
            raise DimensionError("cluster must be nonempty")
        labels = self.cluster + self.extras
        if len(set(labels)) != len(labels) or min(labels) < 1:
            raise DimensionError(f"labels must be distinct positive integers, got {labels}")

    @classmethod
    def standard(cls, s: int, n: int) -> "ClusteredSet":
        """Y = (1..s), X∖Y = (s+1..s+n)."""
        return cls(cluster=tuple(range(1, s + 1)), extras=tuple(range(s + 1, s + n + 1)))

    @property
    def elements(self) -> Tuple[int, ...]:
        return (CLUSTER,) + self.extras

    def theta(self) -> Tuple[int, ...]:
        """Declusterization: the plain label set Y ∪ (X∖Y)."""
        return tuple(sorted(self.cluster + self.extras))

    def declusterized(self) -> "ClusteredSet":
        """Every label of Y becomes its own element; the first one carries the cluster slot."""
        return ClusteredSet(cluster=self.cluster[:1], extras=self.cluster[1:] + self.extras)


@dataclass(frozen=True)
class Partition:

    blocks: Tuple[Tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.blocks)

    @staticmethod
    def contains_cluster(block: Tuple[int, ...]) -> bool:
        return CLUSTER in block

    def labels(self, ground: ClusteredSet) -> Tuple[Tuple[int, ...], ...]:
        """θ(X_i) for every block, as sorted particle labels."""
        out = []
        for block in self.blocks:
            labels = []
            for element in block:
                labels.extend(ground.cluster if element == CLUSTER else (element,))
            out.append(tuple(sorted(labels)))
        return tuple(out)


@dataclass(frozen=True)
class Composition:

    parts: Tuple[int, ...]
    sign: int
    factor: int

    @property
    def k(self) -> int:
        return len(self.parts)


@dataclass(frozen=True)
class Dissection:

    blocks: Tuple[Tuple[int, ...], ...]
    attachments: Tuple[int, ...]
    weight: float
