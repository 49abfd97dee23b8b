import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratexp.allocation import neyman, neyman_for_population
from stratexp.errors import AllocationError, DuplicateStratumError, InputError


def test_table_allocation(table_population):
    result = neyman_for_population(table_population, 140)
    assert result.allocated() == (9, 17, 38, 67, 7, 2)
    assert result.n == 140
    assert result.strata[0].raw == pytest.approx(140 * 106 * 6425 / 10265991, rel=1e-12)
    assert result.as_design() == {"1": 9, "2": 17, "3": 38, "4": 67, "5": 7, "6": 2}


def test_equal_strata_get_equal_shares():
    result = neyman([("a", 50, 2.0), ("b", 50, 2.0), ("c", 50, 2.0), ("d", 50, 2.0)], 20)
    assert result.allocated() == (5, 5, 5, 5)


def test_exact_raw_shares():
    result = neyman([("1", 10, 1.0), ("2", 10, 3.0)], 8)
    assert [s.raw for s in result.strata] == [2.0, 6.0]
    assert result.allocated() == (2, 6)


def test_floor_of_one_takes_from_largest_share():
    result = neyman([("1", 10, 0.0), ("2", 10, 1.0)], 4)
    assert result.allocated() == (1, 3)


def test_cap_at_stratum_size_redistributes():
    result = neyman([("1", 3, 100.0), ("2", 50, 1.0), ("3", 50, 1.0)], 20)
    assert result.allocated()[0] == 3
    assert sum(result.allocated()) == 20


def test_largest_remainder_repair():
    # raws 3.5, 3.5, 3.0 round to 4, 4, 3; one unit goes back
    result = neyman([("1", 35, 1.0), ("2", 35, 1.0), ("3", 30, 1.0)], 10)
    assert sum(result.allocated()) == 10
    assert result.allocated() == (3, 4, 3)


@pytest.mark.parametrize("entries, n, message", [
    ([("1", 10, 0.0), ("2", 10, 0.0)], 5, "every S_h is zero"),
    ([("1", 10, 1.0), ("2", 10, 1.0), ("3", 10, 1.0)], 2, "cannot give"),
    ([("1", 10, 1.0), ("2", 10, 1.0)], 21, "exceeds"),
    ([("1", 10, -1.0), ("2", 10, 1.0)], 5, "non-negative"),
])
def test_allocation_errors(entries, n, message):
    with pytest.raises(AllocationError, match=message):
        neyman(entries, n)


@pytest.mark.parametrize("n, minimum", [(0, 1), (-3, 1), (2.5, 1), (True, 1), (5, -1), (5, 1.5)])
def test_allocation_rejects_bad_sizes(n, minimum):
    with pytest.raises(InputError):
        neyman([("1", 10, 1.0), ("2", 10, 1.0)], n, min_per_stratum=minimum)


def test_minimum_above_stratum_size():
    with pytest.raises(AllocationError, match=r"exceeds N_h in stratum\(s\) 1"):
        neyman([("1", 2, 1.0), ("2", 10, 1.0)], 8, min_per_stratum=3)


def test_duplicate_strata():
    with pytest.raises(DuplicateStratumError):
        neyman([("1", 10, 1.0), ("1", 10, 1.0)], 4)


@st.composite
def allocation_inputs(draw):
    count = draw(st.integers(min_value=1, max_value=8))
    sizes = [draw(st.integers(min_value=1, max_value=300)) for _ in range(count)]
    spread = st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=1e4))
    spreads = [draw(spread) for _ in range(count)]
    if not any(spreads):
        spreads[0] = 1.0
    n = draw(st.integers(min_value=count, max_value=sum(sizes)))
    entries = [(str(h + 1), N_h, S_h) for h, (N_h, S_h) in enumerate(zip(sizes, spreads))]
    return entries, n


@settings(max_examples=300, deadline=None)
@given(allocation_inputs(), st.randoms(use_true_random=False))
def test_allocation_properties(inputs, random):
    entries, n = inputs
    result = neyman(entries, n)
    sizes = {sid: N_h for sid, N_h, _ in entries}
    assert sum(result.allocated()) == n
    for s in result.strata:
        assert 1 <= s.allocated <= sizes[s.stratum_id]

    shuffled = list(entries)
    random.shuffle(shuffled)
    assert neyman(shuffled, n) == result


@settings(max_examples=300, deadline=None)
@given(allocation_inputs(), st.sampled_from([0.25, 0.5, 2.0, 1024.0]))
def test_allocation_is_scale_free(inputs, factor):
    entries, n = inputs
    scaled = [(sid, N_h, S_h * factor) for sid, N_h, S_h in entries]
    assert neyman(scaled, n).allocated() == neyman(entries, n).allocated()
