"""CDCL core against exhaustive bitset enumeration."""

import itertools
import random

from lazybv.sat import CdclSolver, luby, to_dimacs


# ---------------------------------------------------------------------------
# Brute-force oracle: the truth table of each variable over all 2^n
# assignments is packed into one big int; clause evaluation is bitwise.
# ---------------------------------------------------------------------------

_COLUMN_CACHE: dict[tuple[int, int], int] = {}


def _var_column(nvars: int, i: int) -> int:
    key = (nvars, i)
    col = _COLUMN_CACHE.get(key)
    if col is None:
        period = 1 << (i + 1)
        half = 1 << i
        block = ((1 << half) - 1) << half
        reps = (1 << nvars) // period
        repunit = ((1 << (period * reps)) - 1) // ((1 << period) - 1)
        col = block * repunit
        _COLUMN_CACHE[key] = col
    return col


def brute_force_sat(nvars: int, clauses) -> bool:
    mask = (1 << (1 << nvars)) - 1
    acc = mask
    for cl in clauses:
        col = 0
        for lit in cl:
            v = abs(lit) - 1
            c = _var_column(nvars, v)
            col |= c if lit > 0 else ~c & mask
        acc &= col
        if acc == 0:
            return False
    return acc != 0


def run_solver(nvars, clauses):
    s = CdclSolver()
    while s.num_vars < nvars:
        s.new_var()
    for cl in clauses:
        s.add_clause(list(cl))
    res = s.solve()
    if res is True:
        assert s.model_satisfies(clauses)
    return res


def test_trivial():
    assert run_solver(1, [[1], [-1]]) is False
    assert run_solver(1, [[1]]) is True
    assert run_solver(0, []) is True
    s = CdclSolver()
    s.add_clause([])
    assert s.solve() is False


def test_luby_prefix():
    assert [luby(i) for i in range(1, 16)] == \
        [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


def test_pigeonhole_unsat():
    # 4 pigeons, 3 holes
    P, H = 4, 3
    def var(p, h):
        return p * H + h + 1
    clauses = [[var(p, h) for h in range(H)] for p in range(P)]
    for h in range(H):
        for p1 in range(P):
            for p2 in range(p1 + 1, P):
                clauses.append([-var(p1, h), -var(p2, h)])
    assert run_solver(P * H, clauses) is False


def test_exhaustive_small_cnfs():
    """All CNFs with <= 3 clauses drawn from a structured clause family over
    3 variables, plus seeded random sets over 4 variables."""
    lits3 = [1, -1, 2, -2, 3, -3]
    universe = [c for c in itertools.combinations(lits3, 2)
                if abs(c[0]) != abs(c[1])]
    for cls in itertools.combinations(universe, 3):
        assert run_solver(3, list(map(list, cls))) == brute_force_sat(3, cls)
    rng = random.Random(7)
    lits4 = [i for v in range(1, 5) for i in (v, -v)]
    for _ in range(500):
        ncl = rng.randrange(1, 9)
        cls = [rng.sample(lits4, rng.randrange(1, 4)) for _ in range(ncl)]
        assert run_solver(4, cls) == brute_force_sat(4, cls)


def test_random_3cnf_agreement():
    rng = random.Random(99)
    for _ in range(300):
        n = rng.randrange(8, 21)
        ratio = rng.choice([2.0, 3.5, 4.3, 5.0])
        m = int(n * ratio)
        cls = []
        for _ in range(m):
            vs = rng.sample(range(1, n + 1), 3)
            cls.append([v if rng.random() < 0.5 else -v for v in vs])
        assert run_solver(n, cls) == brute_force_sat(n, cls)


def test_incremental_monotonic():
    s = CdclSolver()
    v1, v2, v3 = s.new_var(), s.new_var(), s.new_var()
    s.add_clause([v1, v2])
    assert s.solve() is True
    s.add_clause([-v1])
    assert s.solve() is True
    assert s.model()[v2] is True
    s.add_clause([-v2, v3])
    s.add_clause([-v3])
    assert s.solve() is False
    # once unsat, stays unsat
    s.add_clause([v1])
    assert s.solve() is False


def test_learning_does_not_change_verdicts():
    """Re-solving from scratch with all learnt clauses present agrees."""
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randrange(6, 12)
        cls = []
        for _ in range(int(n * 4)):
            vs = rng.sample(range(1, n + 1), 3)
            cls.append([v if rng.random() < 0.5 else -v for v in vs])
        first = run_solver(n, cls)
        again = run_solver(n, cls)
        assert first == again == brute_force_sat(n, cls)


def test_budget_returns_none():
    rng = random.Random(1)
    n = 24
    cls = []
    for _ in range(int(n * 4.26)):
        vs = rng.sample(range(1, n + 1), 3)
        cls.append([v if rng.random() < 0.5 else -v for v in vs])
    s = CdclSolver()
    for cl in cls:
        s.add_clause(cl)
    assert s.solve(conflict_budget=1) in (None, True, False)


def test_dimacs_dump():
    text = to_dimacs(3, [[1, -2], [3]])
    assert text.splitlines()[0] == "p cnf 3 2"
    assert text.splitlines()[1] == "1 -2 0"
