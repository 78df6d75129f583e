"""
Enumeration of partitions, compositions and dissections.

All enumerations are deterministic: the same input yields the same list in
the same order, which fixes the floating-point reduction order downstream.
"""

import itertools
import logging
import math
from functools import lru_cache
from typing import Iterator, List, Optional, Sequence, Tuple, TypeVar

from ..config import settings
from ..errors import CapacityError, DimensionError
from ..models.clusters import ClusteredSet, Composition, Dissection, Partition
from ..models.kinetic_models import DissectionReading

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _check_cap(n: int, what: str, cap: Optional[int] = None) -> None:
    limit = settings.MAX_ENUMERATION if cap is None else cap
    if n > limit:
        raise CapacityError(f"{what} enumeration with n={n} exceeds the cap {limit}")


def set_partitions(elements: Sequence[T]) -> Iterator[Tuple[Tuple[T, ...], ...]]:
    """All set partitions; blocks keep the input order of their elements."""
    if not elements:
        yield ()
        return
    first, rest = elements[0], elements[1:]
    for partial in set_partitions(rest):
        yield ((first,),) + partial
        for idx in range(len(partial)):
            yield partial[:idx] + ((first,) + partial[idx],) + partial[idx + 1:]


def interval_splits(elements: Sequence[T]) -> Iterator[Tuple[Tuple[T, ...], ...]]:
    """Splits of a linearly ordered sequence into consecutive nonempty intervals."""
    m = len(elements)
    for cuts in itertools.product((False, True), repeat=max(m - 1, 0)):
        blocks, start = [], 0
        for pos, cut in enumerate(cuts, start=1):
            if cut:
                blocks.append(tuple(elements[start:pos]))
                start = pos
        blocks.append(tuple(elements[start:]))
        yield tuple(blocks)


def enumerate_partitions(ground: ClusteredSet, cap: Optional[int] = None) -> List[Partition]:
    n = len(ground.extras)
    _check_cap(n, "partition", cap)
    return _partitions_of(ground.elements)


@lru_cache(maxsize=256)
def _partitions_of(elements: Tuple[int, ...]) -> List[Partition]:
    return [Partition(blocks=blocks) for blocks in set_partitions(elements)]


def cumulant_coefficient(partition: Partition) -> int:
    """(-1)^{|P|-1} (|P|-1)!"""
    k = partition.size
    return (-1) ** (k - 1) * math.factorial(k - 1)


@lru_cache(maxsize=16)
def enumerate_compositions(n: int) -> Tuple[Composition, ...]:
    """Tuples (n_1..n_k), n_j >= 1, Σ n_j <= n, with sign (-1)^k and factor n!/(n - Σ n_j)!."""
    if n < 0:
        raise DimensionError(f"composition order must be >= 0, got {n}")
    _check_cap(n, "composition")
    out: List[Composition] = []

    def grow(prefix: Tuple[int, ...], remaining: int) -> None:
        used = n - remaining
        out.append(Composition(
            parts=prefix,
            sign=(-1) ** len(prefix),
            factor=math.factorial(n) // math.factorial(n - used),
        ))
        for part in range(1, remaining + 1):
            grow(prefix + (part,), remaining - part)

    grow((), n)
    return tuple(out)


def enumerate_dissections(
    z: Sequence[int],
    max_blocks: int,
    attach_range: int,
    reading: DissectionReading = DissectionReading.INTERVAL,
) -> List[Dissection]:
    """
    Dissections of the ordered set Z into at most `max_blocks` blocks, each
    paired with an injective attachment into 1..attach_range.
    Weight: 1/|D|! · ∏ 1/|X_l|!.
    """
    z = tuple(z)
    if not z:
        raise DimensionError("dissected set must be nonempty")
    if max_blocks < 1:
        raise DimensionError(f"max_blocks must be >= 1, got {max_blocks}")
    _check_cap(len(z), "dissection")
    return list(_dissections(z, max_blocks, attach_range, DissectionReading(reading)))


@lru_cache(maxsize=256)
def _dissections(
    z: Tuple[int, ...], max_blocks: int, attach_range: int, reading: DissectionReading
) -> Tuple[Dissection, ...]:
    structures = interval_splits(z) if reading == DissectionReading.INTERVAL else set_partitions(z)
    out = []
    for blocks in structures:
        if len(blocks) > max_blocks:
            continue
        blocks = tuple(tuple(sorted(block)) for block in blocks)
        weight = 1.0 / math.factorial(len(blocks))
        for block in blocks:
            weight /= math.factorial(len(block))
        for attachments in itertools.permutations(range(1, attach_range + 1), len(blocks)):
            out.append(Dissection(blocks=blocks, attachments=attachments, weight=weight))
    return tuple(out)


def bell_number(n: int) -> int:
    """B(n) via the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[0]
