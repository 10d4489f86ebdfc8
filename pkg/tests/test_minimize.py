import itertools

from hypothesis import given, settings, strategies as st

from pneumos.minimize import covers, eval_cubes, literal_count, minimize, prime_implicants


def brute_force_min_cover(n_vars, on_set):
    """Smallest cover size by exhaustive search over prime implicant subsets."""
    primes = prime_implicants(n_vars, on_set)
    bits = {m: tuple((m >> (n_vars - 1 - i)) & 1 for i in range(n_vars))
            for m in on_set}
    for size in range(len(primes) + 1):
        for combo in itertools.combinations(primes, size):
            if all(any(covers(c, bits[m]) for c in combo) for m in on_set):
                return size
    return len(primes)


class TestKnownCases:
    def test_empty_on_set(self):
        assert minimize(3, []) == []

    def test_full_on_set_single_dont_care_cube(self):
        assert minimize(2, [0, 1, 2, 3]) == [(2, 2)]

    def test_single_minterm(self):
        assert minimize(3, [5]) == [(1, 0, 1)]

    def test_classic_merge(self):
        # f = a'b + ab = b
        assert minimize(2, [1, 3]) == [(2, 1)]

    def test_parity_does_not_merge(self):
        cubes = minimize(3, [1, 2, 4, 7])
        assert len(cubes) == 4
        assert all(literal_count(c) == 3 for c in cubes)

    def test_deterministic_output(self):
        on = [0, 2, 5, 7]
        assert minimize(3, on) == minimize(3, list(reversed(on)))


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 4), st.data())
def test_minimize_matches_brute_force(n_vars, data):
    universe = list(range(2 ** n_vars))
    on_set = data.draw(st.lists(st.sampled_from(universe), unique=True))
    cubes = minimize(n_vars, on_set)
    # functional equivalence
    for m in universe:
        bits = tuple((m >> (n_vars - 1 - i)) & 1 for i in range(n_vars))
        assert eval_cubes(cubes, bits) == (1 if m in on_set else 0)
    # minimal product count
    assert len(cubes) == brute_force_min_cover(n_vars, on_set)
