from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 counts of (row flag, column flag).

    For the crash analysis ``n11`` is tested and crashed, ``n10`` tested and
    not crashed, ``n01`` untested and crashed, ``n00`` neither. The coverage
    cross-tabulation reuses the layout with (in tested class, covered).
    """

    n11: int
    n10: int
    n01: int
    n00: int

    def __post_init__(self):
        for name in ("n11", "n10", "n01", "n00"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an int, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")

    @property
    def total(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00

    @property
    def row1(self) -> int:
        return self.n11 + self.n10

    @property
    def row0(self) -> int:
        return self.n01 + self.n00

    @property
    def col1(self) -> int:
        return self.n11 + self.n01

    @property
    def col0(self) -> int:
        return self.n10 + self.n00

    def cells(self) -> tuple[int, int, int, int]:
        return (self.n11, self.n10, self.n01, self.n00)

    def as_matrix(self) -> list[list[int]]:
        return [[self.n11, self.n10], [self.n01, self.n00]]

    def to_dict(self) -> dict[str, int]:
        return {"n11": self.n11, "n10": self.n10, "n01": self.n01, "n00": self.n00}

    @classmethod
    def from_string(cls, text: str) -> "ContingencyTable":
        """Parse ``"n11,n10,n01,n00"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated counts, got {text!r}")
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"counts must be integers: {text!r}") from None
        return cls(*values)
