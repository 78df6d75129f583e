import math

import pytest

from src.errors import CapacityError, DimensionError
from src.models.clusters import CLUSTER, ClusteredSet, Partition
from src.models.kinetic_models import DissectionReading
from src.services import cluster_combinatorics as cc


def test_set_partition_count_matches_bell_numbers():
    for n in range(6):
        assert len(list(cc.set_partitions(tuple(range(n))))) == cc.bell_number(n)


def test_bell_numbers():
    assert [cc.bell_number(n) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]


def test_set_partitions_are_deterministic():
    assert list(cc.set_partitions((1, 2, 3))) == list(cc.set_partitions((1, 2, 3)))


def test_interval_splits_of_three():
    splits = set(cc.interval_splits((1, 2, 3)))

    assert splits == {
        ((1, 2, 3),),
        ((1,), (2, 3)),
        ((1, 2), (3,)),
        ((1,), (2,), (3,)),
    }


def test_clustered_ground_counts_cluster_once():
    ground = ClusteredSet.standard(3, 2)

    partitions = cc.enumerate_partitions(ground)

    assert ground.elements == (CLUSTER, 4, 5)
    assert len(partitions) == cc.bell_number(3)


def test_partition_labels_expand_the_cluster():
    ground = ClusteredSet.standard(2, 1)

    labels = Partition(blocks=((CLUSTER,), (3,))).labels(ground)

    assert labels == ((1, 2), (3,))


def test_cumulant_coefficients_sum_to_zero_for_nontrivial_sets():
    for n in range(1, 5):
        ground = ClusteredSet.standard(1, n)
        total = sum(cc.cumulant_coefficient(p) for p in cc.enumerate_partitions(ground))
        assert total == 0


def test_enumeration_cap_raises():
    with pytest.raises(CapacityError):
        cc.enumerate_partitions(ClusteredSet.standard(1, 3), cap=2)


def test_declusterized_set_splits_cluster():
    ground = ClusteredSet.standard(2, 1).declusterized()

    assert ground.cluster == (1,)
    assert ground.extras == (2, 3)
    assert ground.theta() == (1, 2, 3)


def test_clustered_set_rejects_repeated_labels():
    with pytest.raises(DimensionError):
        ClusteredSet(cluster=(1, 2), extras=(2,))


def test_compositions_of_two():
    compositions = cc.enumerate_compositions(2)

    assert [c.parts for c in compositions] == [(), (1,), (1, 1), (2,)]
    assert [c.sign for c in compositions] == [1, -1, 1, -1]
    assert [c.factor for c in compositions] == [1, 2, 2, 2]


def test_composition_count_is_power_of_two():
    for n in range(5):
        assert len(cc.enumerate_compositions(n)) == 2 ** n


def test_compositions_reject_negative_order():
    with pytest.raises(DimensionError):
        cc.enumerate_compositions(-1)


def test_dissection_weights_of_pair():
    dissections = cc.enumerate_dissections((3, 4), max_blocks=2, attach_range=2)

    whole = [x for x in dissections if len(x.blocks) == 1]
    split = [x for x in dissections if len(x.blocks) == 2]
    assert len(whole) == 2
    assert all(x.weight == pytest.approx(0.5) for x in whole)
    assert len(split) == 2
    assert all(x.weight == pytest.approx(0.5) for x in split)


def test_dissection_attachments_are_injective():
    for x in cc.enumerate_dissections((2, 3, 4), max_blocks=3, attach_range=3):
        assert len(set(x.attachments)) == len(x.attachments)


def test_dissection_readings_coincide_up_to_two_elements():
    for z in ((2,), (2, 3)):
        interval = cc.enumerate_dissections(z, 2, 2, DissectionReading.INTERVAL)
        partition = cc.enumerate_dissections(z, 2, 2, DissectionReading.SET_PARTITION)
        assert sorted((x.blocks, x.attachments, x.weight) for x in interval) == \
            sorted((x.blocks, x.attachments, x.weight) for x in partition)


def test_dissection_readings_differ_on_three_elements():
    interval = cc.enumerate_dissections((2, 3, 4), 3, 3, DissectionReading.INTERVAL)
    partition = cc.enumerate_dissections((2, 3, 4), 3, 3, DissectionReading.SET_PARTITION)

    assert len(partition) > len(interval)


def test_dissection_block_count_respects_maximum():
    dissections = cc.enumerate_dissections((2, 3, 4), max_blocks=1, attach_range=2)

    assert all(len(x.blocks) == 1 for x in dissections)
    assert len(dissections) == 2
    assert dissections[0].weight == pytest.approx(1.0 / math.factorial(3))


def test_dissection_of_empty_set_raises():
    with pytest.raises(DimensionError):
        cc.enumerate_dissections((), 1, 1)
