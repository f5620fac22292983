import numpy as np
import pytest

from core.models.streams import RngStream


def test_distinct_keys_give_distinct_output():
    a = RngStream(master_seed=5, stream_id=0).generator().random(8)
    b = RngStream(master_seed=5, stream_id=1).generator().random(8)
    c = RngStream(master_seed=6, stream_id=0).generator().random(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawn_resets_counter_and_keeps_seed():
    stream = RngStream(master_seed=9, stream_id=2, counter=40)
    child = stream.spawn(17)
    assert (child.master_seed, child.stream_id, child.counter) == (9, 17, 0)


def test_advanced_past_never_repeats_output():
    stream = RngStream(master_seed=3)
    generator = stream.generator()
    consumed = generator.random(1000)
    advanced = stream.advanced_past(generator)
    assert advanced.counter > stream.counter
    following = advanced.generator().random(1000)
    assert not np.intersect1d(consumed, following).size


def test_streams_are_values():
    assert RngStream(master_seed=1, stream_id=2) == RngStream(master_seed=1, stream_id=2)
    assert RngStream(master_seed=1, stream_id=2, counter=3).to_string() == '1/2@3'


@pytest.mark.parametrize('kwargs', [{'master_seed': -1}, {'master_seed': 1 << 64}, {'master_seed': 0, 'counter': -2}])
def test_rejects_out_of_range_fields(kwargs):
    with pytest.raises(ValueError):
        RngStream(**kwargs)
