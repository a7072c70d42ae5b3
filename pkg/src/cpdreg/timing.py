"""Per-phase wall-clock accounting.

Durations are held as integer microseconds so the additive identities
``t_f = t_eig + t_iter`` and ``t_total = t_c + t_f + t_o`` hold exactly,
both in memory and after a round trip through the CSV.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import Decimal

PHASES = ("t_c", "t_eig", "t_iter", "t_f", "t_o", "t_total")


@dataclass(frozen=True)
class TimingBreakdown:
    c_us: int = 0
    eig_us: int = 0
    iter_us: int = 0
    o_us: int = 0

    def __post_init__(self):
        for name in ("c_us", "eig_us", "iter_us", "o_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def f_us(self) -> int:
        return self.eig_us + self.iter_us

    @property
    def total_us(self) -> int:
        return self.c_us + self.f_us + self.o_us

    # seconds, for display and plotting
    t_c = property(lambda self: self.c_us / 1e6)
    t_eig = property(lambda self: self.eig_us / 1e6)
    t_iter = property(lambda self: self.iter_us / 1e6)
    t_f = property(lambda self: self.f_us / 1e6)
    t_o = property(lambda self: self.o_us / 1e6)
    t_total = property(lambda self: self.total_us / 1e6)

    def micros(self) -> dict:
        return {
            "t_c": self.c_us,
            "t_eig": self.eig_us,
            "t_iter": self.iter_us,
            "t_f": self.f_us,
            "t_o": self.o_us,
            "t_total": self.total_us,
        }

    def as_strings(self) -> dict:
        """Seconds with six decimals, formatted exactly from the microsecond counts."""
        return {k: format_us(v) for k, v in self.micros().items()}

    @classmethod
    def from_strings(cls, fields: dict) -> "TimingBreakdown":
        """Inverse of :meth:`as_strings`; rejects records that break the identities."""
        us = {k: parse_us(fields[k]) for k in PHASES}
        tb = cls(c_us=us["t_c"], eig_us=us["t_eig"], iter_us=us["t_iter"], o_us=us["t_o"])
        if tb.f_us != us["t_f"] or tb.total_us != us["t_total"]:
            raise ValueError(f"timing identities violated: {fields}")
        return tb


def format_us(us: int) -> str:
    sign = "-" if us < 0 else ""
    us = abs(us)
    return f"{sign}{us // 1_000_000}.{us % 1_000_000:06d}"


def parse_us(text) -> int:
    return int((Decimal(str(text).strip()) * 1_000_000).to_integral_value())


class PhaseClock:
    """Accumulates nanoseconds per phase and converts to a :class:`TimingBreakdown`.

    Everything between :meth:`start` and :meth:`stop` not attributed to a
    named phase becomes ``t_o``.
    """

    def __init__(self):
        self._ns = {"c": 0, "eig": 0, "iter": 0}
        self._t0 = None
        self._total_ns = 0

    def start(self):
        self._t0 = time.perf_counter_ns()

    def stop(self):
        self._total_ns = time.perf_counter_ns() - self._t0

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter_ns()
        try:
            yield
        finally:
            self._ns[name] += time.perf_counter_ns() - t0

    def breakdown(self) -> TimingBreakdown:
        c = self._ns["c"] // 1000
        eig = self._ns["eig"] // 1000
        it = self._ns["iter"] // 1000
        total = max(self._total_ns, sum(self._ns.values())) // 1000
        # floor of the sum >= sum of the floors, so this stays non-negative
        other = total - c - eig - it
        return TimingBreakdown(c_us=c, eig_us=eig, iter_us=it, o_us=other)
