# Standard library imports
from dataclasses import dataclass


@dataclass
class OpTally:
    """
    Running arithmetic-operation counts, incremented at each operation site
    of an instrumented kernel.

    Attributes:
        multiplies (int): Multiplications (and divisions) performed.
        adds_subs (int): Additions and subtractions performed.
        comparisons (int): Comparisons performed (ReLU, max-pooling).
    """

    multiplies: int = 0
    adds_subs: int = 0
    comparisons: int = 0

    def add(self, other: "OpTally") -> "OpTally":
        self.multiplies += other.multiplies
        self.adds_subs += other.adds_subs
        self.comparisons += other.comparisons
        return self
