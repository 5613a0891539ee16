"""Dirty-page bookkeeping: batch filters, carry arithmetic, conservation."""

import random

import pytest

from nfmigsim import (
    BatchFilter,
    BernoulliDirty,
    ConstantRateDirty,
    InvariantViolation,
    MemoryImage,
    PageState,
    advance_dirty,
    rng_stream,
)


def clean_image(num_pages, page_size=1, **kwargs):
    image = MemoryImage(num_pages, page_size, **kwargs)
    image.mark_copied(image.take_transfer_batch(BatchFilter.ALL))
    return image


class TestMemoryImage:
    def test_fresh_image_all_never_copied(self):
        image = MemoryImage(10, 4096)
        assert image.never_copied_count == 10
        assert image.take_transfer_batch(BatchFilter.ALL) == list(range(10))
        assert image.take_transfer_batch(BatchFilter.NEVER_COPIED_ONLY) == list(range(10))

    def test_total_bytes(self):
        assert MemoryImage(12, 4096).total_bytes == 12 * 4096

    def test_default_working_set_fraction(self):
        image = MemoryImage(100, 1)
        assert image.working_set == frozenset(range(20))

    def test_explicit_working_set(self):
        image = MemoryImage(10, 1, working_set={2, 7})
        assert image.take_transfer_batch(BatchFilter.WORKING_SET_ONLY) == [2, 7]

    def test_working_set_outside_image_rejected(self):
        with pytest.raises(ValueError):
            MemoryImage(4, 1, working_set={9})

    def test_batches_do_not_mutate(self):
        image = MemoryImage(5, 1)
        image.take_transfer_batch(BatchFilter.ALL)
        assert image.never_copied_count == 5

    def test_dirty_only_batch_after_copy(self):
        image = clean_image(100)
        advance_dirty(image, ConstantRateDirty(3), 1_000_000)
        batch = image.take_transfer_batch(BatchFilter.DIRTY_ONLY)
        assert batch == [0, 1, 2]

    def test_page_conservation_under_random_operations(self):
        rng = random.Random(11)
        image = MemoryImage(64, 1)
        process = ConstantRateDirty(37)
        for _ in range(200):
            action = rng.randrange(3)
            if action == 0:
                pages = image.take_transfer_batch(
                    rng.choice([BatchFilter.DIRTY_ONLY, BatchFilter.NEVER_COPIED_ONLY])
                )
                image.mark_copied(pages[: rng.randrange(len(pages) + 1)])
            elif action == 1:
                advance_dirty(image, process, rng.randrange(200_000))
            else:
                image.reset_for_transfer()
            total = image.clean_count + image.dirty_count + image.never_copied_count
            assert total == 64

    def test_frozen_image_rejects_dirtying(self):
        image = clean_image(10)
        image.frozen = True
        with pytest.raises(InvariantViolation, match="frozen"):
            advance_dirty(image, ConstantRateDirty(5), 1000)


class TestConstantRate:
    def test_zero_duration_dirties_nothing(self):
        image = clean_image(100)
        assert advance_dirty(image, ConstantRateDirty(10), 0) == 0

    def test_rate_times_duration(self):
        image = clean_image(100)
        assert advance_dirty(image, ConstantRateDirty(10), 1_000_000) == 10

    def test_fractional_carry_accumulates(self):
        image = clean_image(100)
        process = ConstantRateDirty(10)
        assert advance_dirty(image, process, 50_000) == 0  # 0.5 pages carried
        assert advance_dirty(image, process, 50_000) == 1  # carry reaches 1.0

    def test_count_independent_of_slicing(self):
        rng = random.Random(3)
        for _ in range(50):
            rate = rng.choice([0.3, 1.0, 7.5, 33, 125.25])
            total_us = rng.randrange(1, 3_000_000)
            whole = clean_image(10_000)
            sliced = clean_image(10_000)
            one_shot = advance_dirty(whole, ConstantRateDirty(rate), total_us)
            process = ConstantRateDirty(rate)
            remaining = total_us
            accumulated = 0
            while remaining:
                step = min(remaining, rng.randrange(1, 200_000))
                accumulated += advance_dirty(sliced, process, step)
                remaining -= step
            assert accumulated == one_shot

    def test_never_dirties_more_than_available(self):
        image = clean_image(5)
        assert advance_dirty(image, ConstantRateDirty(1000), 1_000_000) == 5
        assert image.dirty_count == 5

    def test_pages_picked_in_ascending_order(self):
        image = clean_image(50)
        advance_dirty(image, ConstantRateDirty(4), 1_000_000)
        assert image.take_transfer_batch(BatchFilter.DIRTY_ONLY) == [0, 1, 2, 3]
        advance_dirty(image, ConstantRateDirty(2), 1_000_000)
        assert image.take_transfer_batch(BatchFilter.DIRTY_ONLY) == [0, 1, 2, 3, 4, 5]


class TestBernoulli:
    def test_deterministic_for_same_stream(self):
        first = clean_image(200)
        second = clean_image(200)
        advance_dirty(first, BernoulliDirty(0.01, rng_stream("w", 5)), 500_000)
        advance_dirty(second, BernoulliDirty(0.01, rng_stream("w", 5)), 500_000)
        assert first.take_transfer_batch(BatchFilter.DIRTY_ONLY) == second.take_transfer_batch(
            BatchFilter.DIRTY_ONLY
        )

    def test_zero_probability(self):
        image = clean_image(100)
        assert advance_dirty(image, BernoulliDirty(0.0, rng_stream("w", 5)), 10**6) == 0

    def test_certain_probability_dirties_everything(self):
        image = clean_image(30)
        assert advance_dirty(image, BernoulliDirty(1.0, rng_stream("w", 5)), 1000) == 30

    def test_only_non_dirty_pages_eligible(self):
        image = clean_image(30)
        advance_dirty(image, BernoulliDirty(1.0, rng_stream("w", 5)), 1000)
        assert advance_dirty(image, BernoulliDirty(1.0, rng_stream("w", 6)), 1000) == 0


class TestPageState:
    def test_states_transition(self):
        image = MemoryImage(3, 1)
        assert image.page_state(0) is PageState.NEVER_COPIED
        image.mark_copied([0, 1, 2])
        assert image.page_state(0) is PageState.CLEAN_AT_TARGET
        advance_dirty(image, ConstantRateDirty(1), 1_000_000)
        assert image.page_state(0) is PageState.DIRTY_SINCE_COPY

    def test_reset_restores_fresh_state(self):
        image = clean_image(6)
        advance_dirty(image, ConstantRateDirty(2), 1_000_000)
        image.reset_for_transfer()
        assert image.never_copied_count == 6
        assert image.dirty_count == 0
