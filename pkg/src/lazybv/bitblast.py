"""Tseitin encoding of bit-vector terms to CNF.

Each bit-vector node maps to a little-endian list of literals, each Boolean
node to one literal.  Gate construction hashes structurally and folds
constants, so repeated subcircuits encode once.  Signed division/remainder
are lowered to unsigned circuits through the sign-case decomposition before
encoding; udiv/urem use the definitional encoding q*y + r = x (at doubled
width, so the product cannot wrap) with the division-by-zero equalities.
"""

from __future__ import annotations

from .errors import EngineError
from .sat import CdclSolver
from .terms import Kind, Term, TermTable


class BitBlaster:
    def __init__(self, table: TermTable, solver: CdclSolver):
        self.tt = table
        self.solver = solver
        self.T = solver.new_var()  # reserved always-true variable
        solver.add_clause([self.T])
        self._gates: dict[tuple, int] = {}
        self._bits: dict[int, object] = {}      # tid -> int | list[int]
        self._divmod: dict[tuple[int, int], tuple[list[int], list[int]]] = {}
        self._lowered: dict[int, Term] = {}
        self.symbol_vars: dict[str, object] = {}  # name -> int | list[int]
        self.clauses_dimacs: list[list[int]] = []

    # -- CNF plumbing ------------------------------------------------------

    def _clause(self, lits: list[int]):
        self.clauses_dimacs.append(lits)
        self.solver.add_clause(lits)

    def _fresh(self) -> int:
        return self.solver.new_var()

    # -- gates -------------------------------------------------------------

    def g_and(self, a: int, b: int) -> int:
        T = self.T
        if a == T:
            return b
        if b == T:
            return a
        if a == -T or b == -T:
            return -T
        if a == b:
            return a
        if a == -b:
            return -T
        key = ("and", a, b) if a < b else ("and", b, a)
        v = self._gates.get(key)
        if v is None:
            v = self._fresh()
            self._clause([-v, a])
            self._clause([-v, b])
            self._clause([v, -a, -b])
            self._gates[key] = v
        return v

    def g_or(self, a: int, b: int) -> int:
        return -self.g_and(-a, -b)

    def g_xor(self, a: int, b: int) -> int:
        T = self.T
        if a == T:
            return -b
        if a == -T:
            return b
        if b == T:
            return -a
        if b == -T:
            return a
        if a == b:
            return -T
        if a == -b:
            return T
        key = ("xor", a, b) if a < b else ("xor", b, a)
        v = self._gates.get(key)
        if v is None:
            v = self._fresh()
            self._clause([-v, a, b])
            self._clause([-v, -a, -b])
            self._clause([v, -a, b])
            self._clause([v, a, -b])
            self._gates[key] = v
        return v

    def g_iff(self, a: int, b: int) -> int:
        return -self.g_xor(a, b)

    def g_ite(self, c: int, t: int, e: int) -> int:
        T = self.T
        if c == T:
            return t
        if c == -T:
            return e
        if t == e:
            return t
        if t == T and e == -T:
            return c
        if t == -T and e == T:
            return -c
        key = ("ite", c, t, e)
        v = self._gates.get(key)
        if v is None:
            v = self._fresh()
            self._clause([-v, -c, t])
            self._clause([-v, c, e])
            self._clause([v, -c, -t])
            self._clause([v, c, -e])
            self._gates[key] = v
        return v

    def g_and_many(self, lits: list[int]) -> int:
        acc = self.T
        for l in lits:
            acc = self.g_and(acc, l)
        return acc

    def g_or_many(self, lits: list[int]) -> int:
        return -self.g_and_many([-l for l in lits])

    # -- word-level circuits -------------------------------------------------

    def _adder(self, xs: list[int], ys: list[int], cin: int):
        out = []
        c = cin
        for a, b in zip(xs, ys):
            axb = self.g_xor(a, b)
            out.append(self.g_xor(axb, c))
            c = self.g_or(self.g_and(a, b), self.g_and(axb, c))
        return out, c

    def _negate(self, xs: list[int]) -> list[int]:
        zeros = [-self.T] * len(xs)
        out, _ = self._adder([-a for a in xs], zeros, self.T)
        return out

    def _mul(self, xs: list[int], ys: list[int]) -> list[int]:
        w = len(xs)
        acc = [self.g_and(ys[0], x) for x in xs]
        for i in range(1, w):
            partial = [self.g_and(ys[i], xs[j]) for j in range(w - i)]
            summed, _ = self._adder(acc[i:], partial, -self.T)
            acc = acc[:i] + summed
        return acc

    def _ult(self, xs: list[int], ys: list[int]) -> int:
        _, cout = self._adder(xs, [-b for b in ys], self.T)
        return -cout

    def _eq_bits(self, xs: list[int], ys: list[int]) -> int:
        return self.g_and_many([self.g_iff(a, b) for a, b in zip(xs, ys)])

    def _shift(self, xs: list[int], ys: list[int], kind: Kind) -> list[int]:
        w = len(xs)
        fill = xs[-1] if kind is Kind.BVASHR else -self.T
        bits = list(xs)
        overshoot = -self.T
        for k, sel in enumerate(ys):
            amount = 1 << k
            if amount >= w:
                overshoot = self.g_or(overshoot, sel)
                continue
            if kind is Kind.BVSHL:
                shifted = [-self.T] * amount + bits[:w - amount]
            else:
                shifted = bits[amount:] + [fill] * amount
            bits = [self.g_ite(sel, s, b) for s, b in zip(shifted, bits)]
        return [self.g_ite(overshoot, fill, b) for b in bits]

    def _divmod_bits(self, x: Term, y: Term):
        """Fresh q, r with q*y + r = x (2w bits), r < y when y != 0, and the
        SMT-LIB zero-divisor equalities."""
        key = (x.tid, y.tid)
        hit = self._divmod.get(key)
        if hit is not None:
            return hit
        xs, ys = self.bits(x), self.bits(y)
        w = len(xs)
        q = [self._fresh() for _ in range(w)]
        r = [self._fresh() for _ in range(w)]
        pad = [-self.T] * w
        prod = self._mul(q + pad, ys + pad)
        total, cout = self._adder(prod, r + pad, -self.T)
        self._assert_lit(self._eq_bits(total, xs + pad))
        y_nz = self.g_or_many(ys)
        self._clause([-y_nz, self._ult(r, ys)])
        self._clause([y_nz, self._eq_bits(q, [self.T] * w)])
        self._clause([y_nz, self._eq_bits(r, xs)])
        self._divmod[key] = (q, r)
        return q, r

    def _assert_lit(self, l: int):
        self._clause([l])

    # -- signed div/rem lowering --------------------------------------------

    def _lower(self, term: Term) -> Term:
        """Rewrites bvsdiv/bvsrem into sign-cased bvudiv/bvurem circuits."""
        tt = self.tt
        memo = self._lowered
        for t in tt.iter_dag([term]):
            if t.tid in memo:
                continue
            kids = tuple(memo[c.tid] for c in t.children)
            if t.kind in (Kind.BVSDIV, Kind.BVSREM):
                x, y = kids
                w = x.width
                nx = tt.bit(x, w - 1)
                ny = tt.bit(y, w - 1)
                xa = tt.ite(nx, tt.bvneg(x), x)
                ya = tt.ite(ny, tt.bvneg(y), y)
                if t.kind is Kind.BVSDIV:
                    q = tt.bvudiv(xa, ya)
                    memo[t.tid] = tt.ite(tt.xor(nx, ny), tt.bvneg(q), q)
                else:
                    r = tt.bvurem(xa, ya)
                    memo[t.tid] = tt.ite(nx, tt.bvneg(r), r)
            elif kids == t.children:
                memo[t.tid] = t
            else:
                memo[t.tid] = tt.mk(t.kind, kids, t.param)
        return memo[term.tid]

    # -- node encoding -------------------------------------------------------

    def bits(self, term: Term):
        """Literal (Bool) or little-endian literal list (bit-vector)."""
        hit = self._bits.get(term.tid)
        if hit is not None:
            return hit
        lowered = self._lower(term)
        for t in self.tt.iter_dag([lowered]):
            if t.tid not in self._bits:
                self._bits[t.tid] = self._encode(t)
        out = self._bits[lowered.tid]
        self._bits[term.tid] = out
        return out

    def _encode(self, t: Term):
        T = self.T
        enc = self._bits
        k = t.kind
        if k is Kind.BOOL_CONST:
            return T if t.value else -T
        if k is Kind.BV_CONST:
            return [T if t.value.bit(i) else -T for i in range(t.width)]
        if k is Kind.SYMBOL:
            if t.name in self.symbol_vars:
                return self.symbol_vars[t.name]
            v = [self._fresh() for _ in range(t.width)] if t.sort.is_bv \
                else self._fresh()
            self.symbol_vars[t.name] = v
            return v
        kids = [enc[c.tid] for c in t.children]
        if k is Kind.NOT:
            return -kids[0]
        if k is Kind.AND:
            return self.g_and_many(kids)
        if k is Kind.OR:
            return self.g_or_many(kids)
        if k is Kind.XOR:
            return self.g_xor(kids[0], kids[1])
        if k is Kind.IMPLIES:
            return self.g_or(-kids[0], kids[1])
        if k is Kind.EQ:
            if t.children[0].sort.is_bool:
                return self.g_iff(kids[0], kids[1])
            return self._eq_bits(kids[0], kids[1])
        if k is Kind.ITE:
            c, a, b = kids
            if t.sort.is_bool:
                return self.g_ite(c, a, b)
            return [self.g_ite(c, ai, bi) for ai, bi in zip(a, b)]
        if k is Kind.BVNOT:
            return [-b for b in kids[0]]
        if k is Kind.BVNEG:
            return self._negate(kids[0])
        if k is Kind.BVAND:
            return [self.g_and(a, b) for a, b in zip(*kids)]
        if k is Kind.BVOR:
            return [self.g_or(a, b) for a, b in zip(*kids)]
        if k is Kind.BVXOR:
            return [self.g_xor(a, b) for a, b in zip(*kids)]
        if k is Kind.BVADD:
            return self._adder(kids[0], kids[1], -T)[0]
        if k is Kind.BVSUB:
            return self._adder(kids[0], [-b for b in kids[1]], T)[0]
        if k is Kind.BVMUL:
            return self._mul(kids[0], kids[1])
        if k is Kind.BVUDIV:
            return self._divmod_bits(t.children[0], t.children[1])[0]
        if k is Kind.BVUREM:
            return self._divmod_bits(t.children[0], t.children[1])[1]
        if k in (Kind.BVSHL, Kind.BVLSHR, Kind.BVASHR):
            return self._shift(kids[0], kids[1], k)
        if k is Kind.BVULT:
            return self._ult(kids[0], kids[1])
        if k is Kind.BVULE:
            return -self._ult(kids[1], kids[0])
        if k is Kind.BVSLT:
            return self._ult(self._flip_sign(kids[0]), self._flip_sign(kids[1]))
        if k is Kind.BVSLE:
            return -self._ult(self._flip_sign(kids[1]), self._flip_sign(kids[0]))
        if k is Kind.CONCAT:
            return kids[1] + kids[0]
        if k is Kind.EXTRACT:
            hi, lo = t.param
            return kids[0][lo:hi + 1]
        if k is Kind.SIGN_EXTEND:
            return kids[0] + [kids[0][-1]] * t.param
        if k is Kind.ZERO_EXTEND:
            return kids[0] + [-T] * t.param
        raise EngineError(f"cannot encode {t.kind}")

    def _flip_sign(self, xs: list[int]) -> list[int]:
        return xs[:-1] + [-xs[-1]]

    # -- API -----------------------------------------------------------------

    def assert_term(self, term: Term):
        if not term.sort.is_bool:
            raise EngineError("assert_term expects a Bool term")
        self._assert_lit(self.bits(term))

    def ensure_symbol(self, term: Term):
        self.bits(term)

    def value_of(self, term: Term, model: list[bool]):
        """Concrete value of an encoded term under a SAT model."""
        from .terms import BvValue
        b = self.bits(term)
        if isinstance(b, int):
            return self._lit_val(b, model)
        u = 0
        for i, l in enumerate(b):
            if self._lit_val(l, model):
                u |= 1 << i
        return BvValue(len(b), u)

    @staticmethod
    def _lit_val(l: int, model: list[bool]) -> bool:
        var = abs(l)
        v = model[var] if var < len(model) else False
        return v if l > 0 else not v
