"""Paged memory image of a stateful network function.

Every page is in one of three states relative to the migration target:
already copied and unchanged since (clean), modified after its last copy
(dirty), or not transferred at all yet.  The dirty-page process models the
workload rewriting memory while the function keeps executing; it is the
quantity that decides how well the iterative strategies converge.

Two dirty models are provided.  The constant-rate model is fully
deterministic and uses exact rational arithmetic for its fractional-page
carry, so the number of dirtied pages over a span of virtual time does not
depend on how that span is sliced into calls.  The Bernoulli model draws
per-page from a seeded stream for stochastic workloads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from random import Random
from typing import Iterable, Sequence

from .errors import InvariantViolation

MICROS_PER_SECOND = 10**6

DEFAULT_WORKING_SET_FRACTION = 0.2


class PageState(Enum):
    CLEAN_AT_TARGET = "clean-at-target"
    DIRTY_SINCE_COPY = "dirty-since-copy"
    NEVER_COPIED = "never-copied"


class BatchFilter(Enum):
    ALL = "all"
    DIRTY_ONLY = "dirty-only"
    WORKING_SET_ONLY = "working-set-only"
    NEVER_COPIED_ONLY = "never-copied-only"


class MemoryImage:
    """Per-page transfer bookkeeping for one function instance.

    The image never stores page contents, only transfer state.  ``frozen``
    marks spans where the owning function is checkpoint-frozen; advancing
    the dirty process during such a span is a programming error and raises.
    """

    def __init__(
        self,
        num_pages: int,
        page_size: int,
        working_set: Iterable[int] | None = None,
        working_set_fraction: float | None = None,
    ):
        if num_pages < 0:
            raise ValueError(f"num_pages must be >= 0, got {num_pages}")
        if page_size <= 0:
            raise ValueError(f"page_size must be > 0, got {page_size}")
        self._num_pages = num_pages
        self._page_size = page_size
        if working_set is not None:
            ws = frozenset(working_set)
            if any(p < 0 or p >= num_pages for p in ws):
                raise ValueError("working_set contains page ids outside the image")
        else:
            fraction = (
                DEFAULT_WORKING_SET_FRACTION
                if working_set_fraction is None
                else working_set_fraction
            )
            if not 0.0 <= fraction <= 1.0:
                raise ValueError(f"working_set_fraction must be in [0, 1], got {fraction}")
            ws = frozenset(range(int(fraction * num_pages)))
        self._working_set = ws
        self._dirty: set[int] = set()
        self._never: set[int] = set(range(num_pages))
        self.frozen = False

    @property
    def num_pages(self) -> int:
        return self._num_pages

    @property
    def page_size(self) -> int:
        return self._page_size

    @property
    def working_set(self) -> frozenset[int]:
        return self._working_set

    @property
    def total_bytes(self) -> int:
        return self._num_pages * self._page_size

    @property
    def dirty_count(self) -> int:
        return len(self._dirty)

    @property
    def never_copied_count(self) -> int:
        return len(self._never)

    @property
    def clean_count(self) -> int:
        return self._num_pages - len(self._dirty) - len(self._never)

    @property
    def all_clean(self) -> bool:
        return not self._dirty and not self._never

    def page_state(self, page_id: int) -> PageState:
        if not 0 <= page_id < self._num_pages:
            raise ValueError(f"page id {page_id} outside image of {self._num_pages} pages")
        if page_id in self._dirty:
            return PageState.DIRTY_SINCE_COPY
        if page_id in self._never:
            return PageState.NEVER_COPIED
        return PageState.CLEAN_AT_TARGET

    def take_transfer_batch(self, batch_filter: BatchFilter) -> list[int]:
        """Matching page ids in ascending order; never mutates state.

        The caller marks pages copied once the simulated transfer finishes.
        """
        if batch_filter is BatchFilter.ALL:
            return list(range(self._num_pages))
        if batch_filter is BatchFilter.DIRTY_ONLY:
            return sorted(self._dirty)
        if batch_filter is BatchFilter.WORKING_SET_ONLY:
            return sorted(self._working_set)
        if batch_filter is BatchFilter.NEVER_COPIED_ONLY:
            return sorted(self._never)
        raise ValueError(f"unknown batch filter {batch_filter!r}")

    def mark_copied(self, pages: Sequence[int]) -> None:
        """Record that ``pages`` landed at the target in their current state.

        Page ids are assumed unique, as produced by :meth:`take_transfer_batch`.
        """
        if len(pages) == self._num_pages:
            # Full-image batches are common (bulk copy, first iterative round).
            self._dirty.clear()
            self._never.clear()
            return
        self._dirty.difference_update(pages)
        self._never.difference_update(pages)

    def reset_for_transfer(self) -> None:
        """Start a new migration: every page needs to reach the new target."""
        if not self._dirty and len(self._never) == self._num_pages:
            return
        self._dirty.clear()
        self._never = set(range(self._num_pages))

    def clone_fresh(self) -> "MemoryImage":
        """A new image with the same shape and working set, all pages pending."""
        return MemoryImage(self._num_pages, self._page_size, working_set=self._working_set)

    def _dirty_ascending(self, limit: int) -> int:
        """Mark up to ``limit`` non-dirty pages dirty, lowest page id first."""
        marked = 0
        if limit <= 0:
            return 0
        for page_id in range(self._num_pages):
            if page_id in self._dirty:
                continue
            self._never.discard(page_id)
            self._dirty.add(page_id)
            marked += 1
            if marked == limit:
                break
        return marked


@dataclass
class ConstantRateDirty:
    """Deterministic dirtying at a fixed page rate with exact carry.

    Over a span of ``t`` microseconds the raw count is
    ``floor(rate * t / 1e6 + carry)`` and the fractional remainder is carried
    to the next call, so slicing a span into sub-calls yields the same total.
    """

    rate_pages_per_s: float
    carry: Fraction = Fraction(0)

    def __post_init__(self):
        if self.rate_pages_per_s < 0:
            raise ValueError(f"dirty rate must be >= 0, got {self.rate_pages_per_s}")
        self._rate = Fraction(self.rate_pages_per_s)

    def draw(self, image: MemoryImage, duration_us: int) -> int:
        accumulated = self._rate * Fraction(duration_us, MICROS_PER_SECOND) + self.carry
        raw = math.floor(accumulated)
        self.carry = accumulated - raw
        available = image.num_pages - image.dirty_count
        return image._dirty_ascending(min(raw, available))


@dataclass
class BernoulliDirty:
    """Each non-dirty page flips independently with a per-millisecond probability."""

    p_per_page_per_ms: float
    rng: Random = field(repr=False, default_factory=Random)

    def __post_init__(self):
        if not 0.0 <= self.p_per_page_per_ms <= 1.0:
            raise ValueError(
                f"per-page probability must be in [0, 1], got {self.p_per_page_per_ms}"
            )

    def draw(self, image: MemoryImage, duration_us: int) -> int:
        q = 1.0 - (1.0 - self.p_per_page_per_ms) ** (duration_us / 1000.0)
        hits = []
        for page_id in range(image.num_pages):
            if image.page_state(page_id) is PageState.DIRTY_SINCE_COPY:
                continue
            if self.rng.random() < q:
                hits.append(page_id)
        for page_id in hits:
            image._never.discard(page_id)
            image._dirty.add(page_id)
        return len(hits)


DirtyProcess = ConstantRateDirty | BernoulliDirty


def advance_dirty(image: MemoryImage, process: DirtyProcess, duration_us: int) -> int:
    """Run the dirty-page process for ``duration_us`` of executing time.

    Returns the number of newly dirtied pages.  Must only be called while
    the owning function executes; frozen images reject it.
    """
    if duration_us < 0:
        raise ValueError(f"duration must be >= 0, got {duration_us}")
    if image.frozen:
        raise InvariantViolation(
            "memory-image", "dirty-page process advanced while the function is frozen"
        )
    if duration_us == 0:
        return 0
    return process.draw(image, duration_us)
