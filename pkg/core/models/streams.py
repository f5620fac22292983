from dataclasses import dataclass, replace
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

_MASK_64 = (1 << 64) - 1
_MASK_128 = (1 << 128) - 1


@dataclass(frozen=True)
class RngStream:
    """
    A position in a counter-based random stream.

    The pair (master_seed, stream_id) is the Philox key, so distinct pairs give independent output and the same
    pair always replays the same sequence. Streams are plain values: hand one to a worker, get an advanced one back.
    """
    master_seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        seed = int(self.master_seed)
        stream_id = int(self.stream_id)
        counter = int(self.counter)

        if not (0 <= seed <= _MASK_64):
            raise ValueError('The master seed must be a 64-bit unsigned integer.')
        if not (0 <= stream_id <= _MASK_64):
            raise ValueError('The stream id must be a 64-bit unsigned integer.')
        if not (0 <= counter <= _MASK_128):
            raise ValueError('The counter must be a 128-bit unsigned integer.')

        object.__setattr__(self, 'master_seed', seed)
        object.__setattr__(self, 'stream_id', stream_id)
        object.__setattr__(self, 'counter', counter)

    def generator(self) -> np.random.Generator:
        """A numpy generator positioned at this stream's counter."""
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=self.counter))

    def spawn(self, stream_id: int) -> Self:
        """The stream with the same master seed and another id, at counter zero."""
        return type(self)(master_seed=self.master_seed, stream_id=stream_id & _MASK_64, counter=0)

    def advanced_past(self, generator: np.random.Generator) -> Self:
        """
        The stream positioned after everything `generator` has produced.

        Philox buffers part of the current block, so the next block is used rather than the current one.
        """
        words = generator.bit_generator.state['state']['counter']
        counter = sum(int(word) << (64 * i) for i, word in enumerate(words))
        return replace(self, counter=(counter + 1) & _MASK_128)

    def to_string(self) -> str:
        return f'{self.master_seed}/{self.stream_id}@{self.counter}'
