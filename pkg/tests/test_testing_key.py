import math

import numpy as np
import pytest

from acka.exceptions import DomainError
from acka.protocols.testing_key import (
    compress_schedule,
    expand_schedule,
    sample_schedule,
)

schedule_test_data = [
    ([1, 1, 0, 0, 0], 2, 0),
    ([0, 0, 0, 1, 1], 2, 9),
    ([0, 1, 0, 1, 0, 0], 2, 4),
    ([0, 0, 0, 0], 0, 0),
]


@pytest.mark.parametrize("schedule,w,rank", schedule_test_data)
def test_schedule_rank(schedule, w, rank):
    key = compress_schedule(schedule, 8)
    assert int("".join(map(str, key)), 2) == rank
    assert expand_schedule(key, len(schedule), w).tolist() == schedule


def test_every_schedule_has_its_own_rank():
    L, w = 7, 3
    keys = set()
    for rank in range(math.comb(L, w)):
        key = np.array([int(b) for b in format(rank, "06b")], np.uint8)
        schedule = expand_schedule(key, L, w)
        assert schedule.sum() == w
        assert compress_schedule(schedule, 6).tolist() == key.tolist()
        keys.add(tuple(schedule))
    assert len(keys) == math.comb(L, w)


def test_rank_out_of_range():
    with pytest.raises(DomainError):
        expand_schedule(np.ones(6, dtype=np.uint8), 7, 3)


def test_sample_schedule():
    rng = np.random.default_rng(0)
    schedule, key = sample_schedule(2000, 100, 570, rng)
    assert schedule.size == 2000
    assert schedule.sum() == 100
    assert key.size == 570
    assert np.array_equal(compress_schedule(schedule, 570), key)


def test_short_testing_key_covers_part_of_the_schedules():
    rng = np.random.default_rng(1)
    for _ in range(20):
        schedule, key = sample_schedule(20, 10, 10, rng)
        assert schedule.sum() == 10
        assert np.array_equal(expand_schedule(key, 20, 10), schedule)
