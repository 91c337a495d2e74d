"""Core IR: concrete semantics against a big-integer oracle, hash-consing,
substitution, and slicing round-trips."""

import pytest
from hypothesis import given, settings, strategies as st

from lazybv.errors import SortMismatch, InvalidAttr, UnboundSymbol
from lazybv.terms import BOOL, BvValue, Kind, TermTable, bv, bv_sort


# ---------------------------------------------------------------------------
# Reference oracle: plain modular arithmetic over Python ints, written from
# the SMT-LIB definitions and independent of lazybv.terms.concrete_op.
# ---------------------------------------------------------------------------

def _signed(u, w):
    return u - (1 << w) if u >= (1 << (w - 1)) else u


def _mod(v, w):
    return v % (1 << w)


def ref_binop(name, x, y, w):
    """x, y unsigned ints in [0, 2^w); returns unsigned int or bool."""
    xs, ys = _signed(x, w), _signed(y, w)
    ones = (1 << w) - 1
    if name == "bvadd":
        return _mod(x + y, w)
    if name == "bvsub":
        return _mod(x - y, w)
    if name == "bvmul":
        return _mod(x * y, w)
    if name == "bvand":
        return x & y
    if name == "bvor":
        return x | y
    if name == "bvxor":
        return x ^ y
    if name == "bvudiv":
        return ones if y == 0 else x // y
    if name == "bvurem":
        return x if y == 0 else x - (x // y) * y
    if name == "bvsdiv":
        # SMT-LIB reduction: case split on operand signs over bvudiv
        if xs >= 0 and ys >= 0:
            return ref_binop("bvudiv", x, y, w)
        if xs < 0 and ys >= 0:
            return _mod(-ref_binop("bvudiv", _mod(-x, w), y, w), w)
        if xs >= 0 and ys < 0:
            return _mod(-ref_binop("bvudiv", x, _mod(-y, w), w), w)
        return ref_binop("bvudiv", _mod(-x, w), _mod(-y, w), w)
    if name == "bvsrem":
        if xs >= 0 and ys >= 0:
            return ref_binop("bvurem", x, y, w)
        if xs < 0 and ys >= 0:
            return _mod(-ref_binop("bvurem", _mod(-x, w), y, w), w)
        if xs >= 0 and ys < 0:
            return ref_binop("bvurem", x, _mod(-y, w), w)
        return _mod(-ref_binop("bvurem", _mod(-x, w), _mod(-y, w), w), w)
    if name == "bvshl":
        return _mod(x * 2 ** y, w) if y < w else 0
    if name == "bvlshr":
        return x // 2 ** y if y < w else 0
    if name == "bvashr":
        if y >= w:
            return ones if xs < 0 else 0
        return _mod(xs // 2 ** y, w)  # floor division == arithmetic shift
    if name == "bvult":
        return x < y
    if name == "bvule":
        return x <= y
    if name == "bvslt":
        return xs < ys
    if name == "bvsle":
        return xs <= ys
    raise AssertionError(name)


BINOPS = ["bvadd", "bvsub", "bvmul", "bvand", "bvor", "bvxor", "bvudiv",
          "bvurem", "bvsdiv", "bvsrem", "bvshl", "bvlshr", "bvashr",
          "bvult", "bvule", "bvslt", "bvsle"]


@pytest.fixture()
def tt():
    return TermTable()


@pytest.mark.parametrize("name", BINOPS)
def test_eval_matches_bigint_oracle_exhaustive(tt, name):
    for w in range(1, 7):
        x = tt.sym("x", bv_sort(w))
        y = tt.sym("y", bv_sort(w))
        t = tt.mk(Kind(name), (x, y))
        for xu in range(1 << w):
            for yu in range(1 << w):
                got = tt.eval(t, {"x": bv(xu, w), "y": bv(yu, w)})
                want = ref_binop(name, xu, yu, w)
                if isinstance(want, bool):
                    assert got is want or got == want, (name, w, xu, yu)
                else:
                    assert got.u == want, (name, w, xu, yu)


def test_eval_unary_exhaustive(tt):
    for w in range(1, 7):
        x = tt.sym("x", bv_sort(w))
        for xu in range(1 << w):
            env = {"x": bv(xu, w)}
            assert tt.eval(tt.bvnot(x), env).u == (~xu) % (1 << w)
            assert tt.eval(tt.bvneg(x), env).u == (-xu) % (1 << w)


def test_spec_eval_examples(tt):
    w = 4
    x = tt.sym("x", bv_sort(w))
    y = tt.sym("y", bv_sort(w))
    def ev(kind, xu, yu):
        return tt.eval(tt.mk(kind, (x, y)), {"x": bv(xu, w), "y": bv(yu, w)})
    assert ev(Kind.BVMUL, 3, 5).u == 15
    assert ev(Kind.BVMUL, 8, 2).u == 0          # 16 mod 16
    assert ev(Kind.BVSDIV, 0b1001, 0b0010).u == 0b1101   # -7 / 2 = -3
    assert ev(Kind.BVUDIV, 5, 0).u == 0b1111
    assert ev(Kind.BVSREM, 0b1001, 2).u == 0b1111        # -7 rem 2 = -1


def test_hash_consing_identity(tt):
    x = tt.sym("x", bv_sort(8))
    y = tt.sym("y", bv_sort(8))
    a = tt.bvadd(x, y)
    b = tt.bvadd(x, y)
    assert a is b
    assert tt.sym("x", bv_sort(8)) is x
    assert tt.extract(3, 0, x) is tt.extract(3, 0, x)
    assert tt.extract(3, 0, x).sort == bv_sort(4)
    # distinct structure -> distinct nodes
    assert tt.bvadd(y, x) is not a


def test_constant_folding(tt):
    t = tt.bvmul(tt.bv(3, 4), tt.bv(5, 4))
    assert t.kind is Kind.BV_CONST and t.value.u == 15
    assert tt.eq(tt.bv(1, 4), tt.bv(1, 4)).kind is Kind.BOOL_CONST
    # symbols block folding
    x = tt.sym("x", bv_sort(4))
    assert tt.bvmul(x, tt.bv(5, 4)).kind is Kind.BVMUL


def test_sort_errors(tt):
    x = tt.sym("x", bv_sort(8))
    b = tt.sym("b", BOOL)
    with pytest.raises(SortMismatch):
        tt.eq(x, b)
    with pytest.raises(SortMismatch):
        tt.bvadd(x, tt.sym("y", bv_sort(4)))
    with pytest.raises(InvalidAttr):
        tt.extract(2, 3, x)
    with pytest.raises(InvalidAttr):
        tt.extract(8, 0, x)
    with pytest.raises(SortMismatch):
        tt.and_(x, x)


def test_unbound_symbol(tt):
    x = tt.sym("x", bv_sort(4))
    with pytest.raises(UnboundSymbol):
        tt.eval(x, {})


def test_substitute(tt):
    x = tt.sym("x", bv_sort(4))
    y = tt.sym("y", bv_sort(4))
    ap = tt.sym("ap", bv_sort(4))
    m = tt.bvmul(x, y)
    assert tt.substitute(m, {m: ap}) is ap
    assert tt.substitute(x, {}) is x
    # substitution is simultaneous and preserves sharing
    s = tt.bvadd(m, m)
    r = tt.substitute(s, {m: ap})
    assert r is tt.bvadd(ap, ap)
    assert r.children[0] is r.children[1]
    # no occurrence -> unchanged
    assert tt.substitute(s, {tt.bvmul(y, x): ap}) is s
    with pytest.raises(SortMismatch):
        tt.substitute(s, {m: tt.sym("w", bv_sort(8))})


def test_extract_concat_roundtrip(tt):
    for w in range(2, 7):
        x = tt.sym("x", bv_sort(w))
        for k in range(1, w):
            t = tt.concat(tt.extract(w - 1, k, x), tt.extract(k - 1, 0, x))
            for xu in range(1 << w):
                assert tt.eval(t, {"x": bv(xu, w)}).u == xu


def test_bvvalue_views():
    v = BvValue(4, 0b1001)
    assert v.u == 9 and v.s == -7
    assert bv(-1, 4).u == 15
    assert bv(16, 4).u == 0
    assert v.bit(0) == 1 and v.bit(1) == 0 and v.bit(3) == 1


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 16), st.data())
def test_signed_view_roundtrip(w, data):
    u = data.draw(st.integers(0, (1 << w) - 1))
    v = BvValue(w, u)
    assert bv(v.s, w).u == u


def test_free_symbols(tt):
    x = tt.sym("x", bv_sort(4))
    y = tt.sym("y", bv_sort(4))
    t = tt.bvadd(tt.bvmul(x, y), x)
    assert {s.name for s in tt.free_symbols(t)} == {"x", "y"}
    assert tt.free_symbols(tt.bv(3, 4)) == frozenset()


def test_deep_term_no_recursion_limit(tt):
    x = tt.sym("x", bv_sort(4))
    t = x
    for _ in range(5000):
        t = tt.bvadd(t, x)
    assert tt.eval(t, {"x": bv(1, 4)}).u == 5001 % 16
    assert tt.substitute(t, {x: tt.bv(0, 4)}).is_const()
