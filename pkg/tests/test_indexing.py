import pytest

from flowalloc import InstanceTooLargeError, SystemState, enumerate_states
from flowalloc.model import empty_alloc, is_feasible_alloc


def test_reference_instance_cardinality(cfg_ref):
    idx = enumerate_states(cfg_ref)
    assert idx.radices == (8, 8, 8, 8, 8)
    assert idx.total_allocs == 32768
    assert idx.total_states == 98304


def test_reference_row_vectors(cfg_ref):
    idx = enumerate_states(cfg_ref)
    expected = (
        (0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0),
    )
    # Capacities are identical, so every UPF has the same lex-ordered rows.
    for k in range(cfg_ref.K):
        assert idx.per_upf_vectors[k] == expected


def test_rows_are_exactly_the_feasible_ones(cfg_k2):
    idx = enumerate_states(cfg_k2)
    for k in range(cfg_k2.K):
        rows = idx.per_upf_vectors[k]
        assert len(set(rows)) == len(rows)
        assert list(rows) == sorted(rows)
        # Brute force over a generous grid.
        cap = cfg_k2.capacity[k]
        brute = {
            (n1, n2)
            for n1 in range(cap + 1)
            for n2 in range(cap + 1)
            if n1 * cfg_k2.mean_rate[0] + n2 * cfg_k2.mean_rate[1] < cap
        }
        assert set(rows) == brute


def test_round_trip_bijection_exhaustive(cfg_k2):
    idx = enumerate_states(cfg_k2)
    seen = set()
    for s_id in range(idx.total_states):
        s = idx.state_from_index(s_id)
        assert is_feasible_alloc(s.alloc, cfg_k2)
        assert 0 <= s.arrival <= cfg_k2.M
        assert idx.index_of(s) == s_id
        seen.add(s)
    assert len(seen) == idx.total_states


def test_round_trip_sampled_on_reference(cfg_ref, rng):
    idx = enumerate_states(cfg_ref)
    for s_id in rng.integers(0, idx.total_states, size=2000):
        assert idx.index_of(idx.state_from_index(int(s_id))) == int(s_id)


def test_ordering_conventions(cfg_ref):
    idx = enumerate_states(cfg_ref)
    # Index 0 is the empty system with no arrival.
    assert idx.state_from_index(0) == SystemState(empty_alloc(cfg_ref), 0)
    # Arrival is the most significant digit of the state index.
    assert idx.state_from_index(idx.total_allocs).arrival == 1
    # UPF 1 is the most significant allocation digit: bumping its row vector
    # index by one moves the allocation index by the product of later radices.
    step = idx._place_values[0]
    a = idx.alloc_from_index(step)
    assert a[0] == idx.per_upf_vectors[0][1]
    assert all(row == (0, 0) for row in a[1:])


def test_out_of_range_indices(cfg_k2):
    idx = enumerate_states(cfg_k2)
    with pytest.raises(IndexError):
        idx.state_from_index(idx.total_states)
    with pytest.raises(IndexError):
        idx.alloc_from_index(-1)


def test_instance_cap_enforced(cfg_ref):
    with pytest.raises(InstanceTooLargeError):
        enumerate_states(cfg_ref, cap=10_000)
