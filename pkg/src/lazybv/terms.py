"""Sorted, hash-consed term DAG for QF_BV with exact concrete semantics.

Terms are immutable and deduplicated per :class:`TermTable`: building the
same structure twice yields the identical object, so identity compares are
structural compares.  Construction folds operators whose operands are all
constants; no other rewriting happens here.

Concrete evaluation follows SMT-LIB 2.6 semantics, including the total
division conventions (``bvudiv`` by zero is all-ones, ``bvurem`` by zero is
the dividend, signed division truncates toward zero).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import InvalidAttr, SortMismatch, UnboundSymbol


@dataclass(frozen=True)
class Sort:
    """Bool or BitVec(width); width is 0 for Bool."""

    width: int = 0

    @property
    def is_bool(self) -> bool:
        return self.width == 0

    @property
    def is_bv(self) -> bool:
        return self.width > 0

    def __repr__(self) -> str:
        return "Bool" if self.is_bool else f"BitVec({self.width})"


BOOL = Sort(0)

_SORT_CACHE: dict[int, Sort] = {}


def bv_sort(width: int) -> Sort:
    if width < 1:
        raise InvalidAttr(f"bit-vector width must be >= 1, got {width}")
    s = _SORT_CACHE.get(width)
    if s is None:
        s = Sort(width)
        _SORT_CACHE[width] = s
    return s


@dataclass(frozen=True)
class BvValue:
    """Fixed-width bit string with unsigned and two's-complement views."""

    width: int
    u: int  # unsigned value, always in [0, 2**width)

    def __post_init__(self):
        if not (0 <= self.u < (1 << self.width)):
            object.__setattr__(self, "u", self.u & ((1 << self.width) - 1))

    @property
    def s(self) -> int:
        """Two's-complement signed value."""
        if self.u >= 1 << (self.width - 1):
            return self.u - (1 << self.width)
        return self.u

    def bit(self, i: int) -> int:
        return (self.u >> i) & 1

    def __repr__(self) -> str:
        return f"BvValue({self.width}, {self.u:#x})"


def bv(value: int, width: int) -> BvValue:
    return BvValue(width, value & ((1 << width) - 1))


class Kind(enum.Enum):
    BOOL_CONST = "bool-const"
    BV_CONST = "bv-const"
    SYMBOL = "symbol"
    NOT = "not"
    AND = "and"
    OR = "or"
    XOR = "xor"
    IMPLIES = "=>"
    EQ = "="
    ITE = "ite"
    BVNOT = "bvnot"
    BVAND = "bvand"
    BVOR = "bvor"
    BVXOR = "bvxor"
    BVNEG = "bvneg"
    BVADD = "bvadd"
    BVSUB = "bvsub"
    BVMUL = "bvmul"
    BVUDIV = "bvudiv"
    BVSDIV = "bvsdiv"
    BVUREM = "bvurem"
    BVSREM = "bvsrem"
    BVSHL = "bvshl"
    BVLSHR = "bvlshr"
    BVASHR = "bvashr"
    BVULT = "bvult"
    BVULE = "bvule"
    BVSLT = "bvslt"
    BVSLE = "bvsle"
    CONCAT = "concat"
    EXTRACT = "extract"
    SIGN_EXTEND = "sign_extend"
    ZERO_EXTEND = "zero_extend"


# bv x bv -> bv, both operands same width
_BV_BINOP = {
    Kind.BVAND, Kind.BVOR, Kind.BVXOR, Kind.BVADD, Kind.BVSUB, Kind.BVMUL,
    Kind.BVUDIV, Kind.BVSDIV, Kind.BVUREM, Kind.BVSREM, Kind.BVSHL,
    Kind.BVLSHR, Kind.BVASHR,
}
# bv x bv -> bool
_BV_CMP = {Kind.BVULT, Kind.BVULE, Kind.BVSLT, Kind.BVSLE}


class Term:
    """One node in the DAG.  Identity is structural identity (hash-consing)."""

    __slots__ = ("tid", "kind", "children", "sort", "param")

    def __init__(self, tid: int, kind: Kind, children: tuple["Term", ...],
                 sort: Sort, param):
        self.tid = tid
        self.kind = kind
        self.children = children
        self.sort = sort
        self.param = param

    @property
    def name(self) -> str:
        assert self.kind is Kind.SYMBOL
        return self.param[0]

    @property
    def value(self):
        """Constant payload: BvValue for BV_CONST, bool for BOOL_CONST."""
        return self.param

    @property
    def width(self) -> int:
        return self.sort.width

    def is_const(self) -> bool:
        return self.kind in (Kind.BOOL_CONST, Kind.BV_CONST)

    def __repr__(self) -> str:
        if self.kind is Kind.SYMBOL:
            return f"<{self.param[0]}:{self.sort!r}>"
        if self.is_const():
            return f"<{self.param!r}:{self.sort!r}>"
        return f"<{self.kind.value}#{self.tid}>"


def _infer_sort(kind: Kind, children: tuple[Term, ...], param) -> Sort:
    def want(n: int):
        if len(children) != n:
            raise SortMismatch(f"{kind.value} expects {n} children, got {len(children)}")

    def all_bool():
        for c in children:
            if not c.sort.is_bool:
                raise SortMismatch(f"{kind.value} expects Bool children")

    def bv_pair():
        a, b = children
        if not (a.sort.is_bv and b.sort.is_bv and a.width == b.width):
            raise SortMismatch(f"{kind.value} expects two bit-vectors of equal width")

    if kind is Kind.NOT:
        want(1); all_bool(); return BOOL
    if kind in (Kind.AND, Kind.OR):
        if len(children) < 2:
            raise SortMismatch(f"{kind.value} expects >= 2 children")
        all_bool(); return BOOL
    if kind in (Kind.XOR, Kind.IMPLIES):
        want(2); all_bool(); return BOOL
    if kind is Kind.EQ:
        want(2)
        if children[0].sort != children[1].sort:
            raise SortMismatch("= expects children of identical sort")
        return BOOL
    if kind is Kind.ITE:
        want(3)
        if not children[0].sort.is_bool:
            raise SortMismatch("ite condition must be Bool")
        if children[1].sort != children[2].sort:
            raise SortMismatch("ite branches must share a sort")
        return children[1].sort
    if kind in (Kind.BVNOT, Kind.BVNEG):
        want(1)
        if not children[0].sort.is_bv:
            raise SortMismatch(f"{kind.value} expects a bit-vector")
        return children[0].sort
    if kind in _BV_BINOP:
        want(2); bv_pair(); return children[0].sort
    if kind in _BV_CMP:
        want(2); bv_pair(); return BOOL
    if kind is Kind.CONCAT:
        want(2)
        a, b = children
        if not (a.sort.is_bv and b.sort.is_bv):
            raise SortMismatch("concat expects bit-vectors")
        return bv_sort(a.width + b.width)
    if kind is Kind.EXTRACT:
        want(1)
        hi, lo = param
        c = children[0]
        if not c.sort.is_bv:
            raise SortMismatch("extract expects a bit-vector")
        if not (0 <= lo <= hi < c.width):
            raise InvalidAttr(f"extract [{hi}:{lo}] out of range for width {c.width}")
        return bv_sort(hi - lo + 1)
    if kind in (Kind.SIGN_EXTEND, Kind.ZERO_EXTEND):
        want(1)
        if not children[0].sort.is_bv:
            raise SortMismatch(f"{kind.value} expects a bit-vector")
        if param < 0:
            raise InvalidAttr("extension amount must be >= 0")
        return bv_sort(children[0].width + param)
    raise SortMismatch(f"cannot infer sort for {kind}")


def concrete_op(kind: Kind, args: list, param=None):
    """Apply one operator to concrete values (BvValue or bool)."""
    if kind is Kind.NOT:
        return not args[0]
    if kind is Kind.AND:
        return all(args)
    if kind is Kind.OR:
        return any(args)
    if kind is Kind.XOR:
        return bool(args[0]) != bool(args[1])
    if kind is Kind.IMPLIES:
        return (not args[0]) or args[1]
    if kind is Kind.EQ:
        return args[0] == args[1]
    if kind is Kind.ITE:
        return args[1] if args[0] else args[2]

    a = args[0]
    w = a.width
    mask = (1 << w) - 1
    if kind is Kind.BVNOT:
        return BvValue(w, ~a.u & mask)
    if kind is Kind.BVNEG:
        return BvValue(w, -a.u & mask)
    if kind is Kind.EXTRACT:
        hi, lo = param
        return BvValue(hi - lo + 1, (a.u >> lo) & ((1 << (hi - lo + 1)) - 1))
    if kind is Kind.SIGN_EXTEND:
        return bv(a.s, w + param)
    if kind is Kind.ZERO_EXTEND:
        return BvValue(w + param, a.u)

    b = args[1]
    if kind is Kind.CONCAT:
        return BvValue(w + b.width, (a.u << b.width) | b.u)
    if kind is Kind.BVAND:
        return BvValue(w, a.u & b.u)
    if kind is Kind.BVOR:
        return BvValue(w, a.u | b.u)
    if kind is Kind.BVXOR:
        return BvValue(w, a.u ^ b.u)
    if kind is Kind.BVADD:
        return BvValue(w, (a.u + b.u) & mask)
    if kind is Kind.BVSUB:
        return BvValue(w, (a.u - b.u) & mask)
    if kind is Kind.BVMUL:
        return BvValue(w, (a.u * b.u) & mask)
    if kind is Kind.BVUDIV:
        return BvValue(w, mask if b.u == 0 else a.u // b.u)
    if kind is Kind.BVUREM:
        return BvValue(w, a.u if b.u == 0 else a.u % b.u)
    if kind is Kind.BVSDIV:
        if b.u == 0:
            return BvValue(w, 1 if a.s < 0 else mask)
        q = abs(a.s) // abs(b.s)
        if (a.s < 0) != (b.s < 0):
            q = -q
        return bv(q, w)
    if kind is Kind.BVSREM:
        if b.u == 0:
            return a
        r = abs(a.s) % abs(b.s)
        if a.s < 0:
            r = -r
        return bv(r, w)
    if kind is Kind.BVSHL:
        sh = b.u
        return BvValue(w, 0 if sh >= w else (a.u << sh) & mask)
    if kind is Kind.BVLSHR:
        sh = b.u
        return BvValue(w, 0 if sh >= w else a.u >> sh)
    if kind is Kind.BVASHR:
        sh = b.u
        if sh >= w:
            return BvValue(w, mask if a.s < 0 else 0)
        return bv(a.s >> sh, w)
    if kind is Kind.BVULT:
        return a.u < b.u
    if kind is Kind.BVULE:
        return a.u <= b.u
    if kind is Kind.BVSLT:
        return a.s < b.s
    if kind is Kind.BVSLE:
        return a.s <= b.s
    raise SortMismatch(f"no concrete semantics for {kind}")


class TermTable:
    """Owner of one hash-consed DAG.  Single-writer; see module docstring."""

    def __init__(self):
        self._nodes: dict[tuple, Term] = {}
        self._next_id = 0
        self._free_syms: dict[int, frozenset[Term]] = {}

    def mk(self, kind: Kind, children: Iterable[Term] = (), param=None) -> Term:
        children = tuple(children)
        key_param = param
        if isinstance(param, BvValue):
            key_param = ("bv", param.width, param.u)
        key = (kind, key_param, tuple(c.tid for c in children))
        hit = self._nodes.get(key)
        if hit is not None:
            return hit
        if kind is Kind.BOOL_CONST:
            sort = BOOL
        elif kind is Kind.BV_CONST:
            sort = bv_sort(param.width)
        elif kind is Kind.SYMBOL:
            sort = param[1]
        else:
            sort = _infer_sort(kind, children, param)
            if children and all(c.is_const() for c in children):
                folded = concrete_op(kind, [c.value for c in children], param)
                if isinstance(folded, bool):
                    return self.bool_const(folded)
                return self.const(folded)
        term = Term(self._next_id, kind, children, sort, param)
        self._next_id += 1
        self._nodes[key] = term
        return term

    # -- constructors ------------------------------------------------------

    def bool_const(self, value: bool) -> Term:
        return self.mk(Kind.BOOL_CONST, (), bool(value))

    def true_(self) -> Term:
        return self.bool_const(True)

    def false_(self) -> Term:
        return self.bool_const(False)

    def const(self, value: BvValue) -> Term:
        return self.mk(Kind.BV_CONST, (), value)

    def bv(self, value: int, width: int) -> Term:
        return self.const(bv(value, width))

    def sym(self, name: str, sort: Sort) -> Term:
        return self.mk(Kind.SYMBOL, (), (name, sort))

    def not_(self, t: Term) -> Term:
        return self.mk(Kind.NOT, (t,))

    def and_(self, *ts: Term) -> Term:
        ts = tuple(ts)
        if len(ts) == 1:
            return ts[0]
        return self.mk(Kind.AND, ts)

    def or_(self, *ts: Term) -> Term:
        ts = tuple(ts)
        if len(ts) == 1:
            return ts[0]
        return self.mk(Kind.OR, ts)

    def xor(self, a: Term, b: Term) -> Term:
        return self.mk(Kind.XOR, (a, b))

    def implies(self, a: Term, b: Term) -> Term:
        return self.mk(Kind.IMPLIES, (a, b))

    def eq(self, a: Term, b: Term) -> Term:
        return self.mk(Kind.EQ, (a, b))

    def ite(self, c: Term, a: Term, b: Term) -> Term:
        return self.mk(Kind.ITE, (c, a, b))

    def extract(self, hi: int, lo: int, t: Term) -> Term:
        return self.mk(Kind.EXTRACT, (t,), (hi, lo))

    def sign_extend(self, k: int, t: Term) -> Term:
        return self.mk(Kind.SIGN_EXTEND, (t,), k)

    def zero_extend(self, k: int, t: Term) -> Term:
        return self.mk(Kind.ZERO_EXTEND, (t,), k)

    def concat(self, a: Term, b: Term) -> Term:
        return self.mk(Kind.CONCAT, (a, b))

    def bit(self, t: Term, i: int) -> Term:
        """Bool test of bit i of a bit-vector term."""
        return self.eq(self.extract(i, i, t), self.bv(1, 1))

    def __getattr__(self, name: str):
        # bvadd/bvmul/... sugar: tt.bvadd(a, b)
        try:
            kind = Kind(name)
        except ValueError:
            raise AttributeError(name)
        def build(*children: Term) -> Term:
            return self.mk(kind, children)
        return build

    # -- queries -----------------------------------------------------------

    def iter_dag(self, roots: Iterable[Term]) -> Iterator[Term]:
        """Post-order over the union DAG of the given roots, each node once."""
        seen: set[int] = set()
        out: list[Term] = []
        stack: list[tuple[Term, bool]] = [(r, False) for r in roots]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                out.append(t)
                continue
            if t.tid in seen:
                continue
            seen.add(t.tid)
            stack.append((t, True))
            for c in t.children:
                if c.tid not in seen:
                    stack.append((c, False))
        return iter(out)

    def free_symbols(self, term: Term) -> frozenset[Term]:
        hit = self._free_syms.get(term.tid)
        if hit is not None:
            return hit
        for t in self.iter_dag([term]):
            if t.tid in self._free_syms:
                continue
            if t.kind is Kind.SYMBOL:
                syms = frozenset((t,))
            elif not t.children:
                syms = frozenset()
            else:
                syms = frozenset().union(*(self._free_syms[c.tid] for c in t.children))
            self._free_syms[t.tid] = syms
        return self._free_syms[term.tid]

    # -- semantics ---------------------------------------------------------

    def eval(self, term: Term, env: Mapping[str, BvValue | bool]):
        """Value of `term` under `env` (symbol name -> value)."""
        cache: dict[int, BvValue | bool] = {}
        for t in self.iter_dag([term]):
            if t.kind is Kind.SYMBOL:
                try:
                    v = env[t.param[0]]
                except KeyError:
                    raise UnboundSymbol(t.param[0]) from None
                if t.sort.is_bv and not (isinstance(v, BvValue) and v.width == t.width):
                    raise UnboundSymbol(f"{t.param[0]}: value/sort mismatch")
                cache[t.tid] = v
            elif t.is_const():
                cache[t.tid] = t.value
            else:
                cache[t.tid] = concrete_op(
                    t.kind, [cache[c.tid] for c in t.children], t.param)
        return cache[term.tid]

    def substitute(self, term: Term, mapping: Mapping[Term, Term]) -> Term:
        """Simultaneous replacement of DAG nodes; sharing preserved."""
        for src, dst in mapping.items():
            if src.sort != dst.sort:
                raise SortMismatch(
                    f"substitute: {src!r} -> {dst!r} changes sort")
        out: dict[int, Term] = {src.tid: dst for src, dst in mapping.items()}
        for t in self.iter_dag([term]):
            if t.tid in out:
                continue
            if not t.children:
                out[t.tid] = t
                continue
            new_children = tuple(out[c.tid] for c in t.children)
            if new_children == t.children:
                out[t.tid] = t
            else:
                out[t.tid] = self.mk(t.kind, new_children, t.param)
        return out[term.tid]
