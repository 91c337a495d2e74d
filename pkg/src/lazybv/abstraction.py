"""Staged over-approximation of costly bit-vector operations.

Each targeted application (bvmul, bvsdiv, bvudiv, bvsrem, bvurem) is replaced
by a fresh proxy symbol.  Constraint stages describing the operation are then
asserted lazily, one stage per refinement request, ending in a stage that
pins the proxy to the native operation, so the chain of stages is complete
at every step and sound once finished.

Multiplication runs through four stages:

1. simple     -- zero/one/minus-one cases, overflow-safe sign facts, and
                 power-of-two shifts on the double-width magnitude product.
2. intervals  -- the double-width magnitude product is boxed between
                 shifted copies of the other factor, selected by the highest
                 set bit of the first.
3. relations  -- commutativity, division inverses and slicing identities
                 linking proxies of different applications and widths.
4. full-mul   -- per-interval exact multiplication, one highest-set-bit
                 index per refinement, exact after `width` rounds.

Division and remainder get a base stage (special cases plus the
quotient/remainder identity at doubled width, where no wrap can occur)
followed by a final exact stage; bvsrem starts directly with its relation
stage.  Applications introduced by relation constraints become first-class
instances that join the refinement loop at stage zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import ConfigError, EngineError, IndexAlreadyAsserted
from .smtlib import Script
from .terms import BvValue, Kind, Term, TermTable, bv_sort, concrete_op


class OpKind(enum.Enum):
    MUL = "mul"
    SDIV = "sdiv"
    UDIV = "udiv"
    SREM = "srem"
    UREM = "urem"

    @property
    def kind(self) -> Kind:
        return _OP_TO_KIND[self]


_OP_TO_KIND = {OpKind.MUL: Kind.BVMUL, OpKind.SDIV: Kind.BVSDIV,
               OpKind.UDIV: Kind.BVUDIV, OpKind.SREM: Kind.BVSREM,
               OpKind.UREM: Kind.BVUREM}
_KIND_TO_OP = {v: k for k, v in _OP_TO_KIND.items()}

S_SIMPLE = "simple"
S_INTERVALS = "intervals"
S_RELATIONS = "relations"
S_FULL_MUL = "full-mul"
S_BASE = "base"
S_FULL = "full"

MUL_STAGES = (S_SIMPLE, S_INTERVALS, S_RELATIONS, S_FULL_MUL)


@dataclass(frozen=True)
class SchemeConfig:
    """Stage schedule per operation plus symbol/rewrite policies.

    Each element of a step tuple is a group of stage names emitted together
    in one refinement round (a merged step has more than one name).
    """

    mul_steps: tuple[tuple[str, ...], ...] = ((S_SIMPLE,), (S_INTERVALS,),
                                              (S_RELATIONS,), (S_FULL_MUL,))
    srem_steps: tuple[tuple[str, ...], ...] = ((S_RELATIONS,), (S_FULL,))
    sdiv_steps: tuple[tuple[str, ...], ...] = ((S_BASE,), (S_FULL,))
    udiv_steps: tuple[tuple[str, ...], ...] = ((S_BASE,), (S_FULL,))
    urem_steps: tuple[tuple[str, ...], ...] = ((S_BASE,), (S_FULL,))
    fresh_symbols: str = "per-app"        # per-app | shared
    signed_mode: str = "signed"           # signed | rewrite-unsigned

    def __post_init__(self):
        flat = [s for grp in self.mul_steps for s in grp]
        if len(set(flat)) != len(flat):
            raise ConfigError("duplicate multiplication stage")
        for s in flat:
            if s not in MUL_STAGES:
                raise ConfigError(f"unknown multiplication stage {s!r}")
        if S_FULL_MUL in flat:
            if self.mul_steps[-1] != (S_FULL_MUL,):
                raise ConfigError("the full multiplication stage must be "
                                  "last and unmerged")
        if self.fresh_symbols not in ("per-app", "shared"):
            raise ConfigError(f"unknown symbol policy {self.fresh_symbols!r}")
        if self.signed_mode not in ("signed", "rewrite-unsigned"):
            raise ConfigError(f"unknown signed mode {self.signed_mode!r}")

    def steps_for(self, op: OpKind) -> tuple[tuple[str, ...], ...]:
        return {OpKind.MUL: self.mul_steps, OpKind.SREM: self.srem_steps,
                OpKind.SDIV: self.sdiv_steps, OpKind.UDIV: self.udiv_steps,
                OpKind.UREM: self.urem_steps}[op]

    # -- common variants -----------------------------------------------------

    @classmethod
    def default(cls) -> "SchemeConfig":
        return cls()

    @classmethod
    def mul_prefix(cls, n: int, **kw) -> "SchemeConfig":
        """Only the first n multiplication stages (an incomplete scheme for
        n < 4: verdicts degrade to unknown, never flip)."""
        if not 1 <= n <= 4:
            raise ConfigError("prefix length must be in [1, 4]")
        return cls(mul_steps=tuple((s,) for s in MUL_STAGES[:n]), **kw)

    @classmethod
    def omit_step(cls, n: int, **kw) -> "SchemeConfig":
        if not 1 <= n <= 4:
            raise ConfigError("stage number must be in [1, 4]")
        return cls(mul_steps=tuple((s,) for i, s in enumerate(MUL_STAGES)
                                   if i != n - 1), **kw)

    @classmethod
    def merge_steps(cls, a: int, b: int, **kw) -> "SchemeConfig":
        if b != a + 1 or not 1 <= a <= 3:
            raise ConfigError("only adjacent stages can merge")
        steps = []
        i = 0
        while i < 4:
            if i == a - 1:
                steps.append((MUL_STAGES[a - 1], MUL_STAGES[b - 1]))
                i += 2
            else:
                steps.append((MUL_STAGES[i],))
                i += 1
        return cls(mul_steps=tuple(steps), **kw)


@dataclass
class AbstractionInstance:
    idx: int
    op: OpKind
    x: Term
    y: Term
    proxy: Term
    # multiplication auxiliaries (None for other ops)
    x2: Term | None = None          # sext(x, w)     width 2w
    y2: Term | None = None
    x_mag2: Term | None = None      # |x| at 2w
    y_mag2: Term | None = None
    mag_prod: Term | None = None    # fresh symbol for |x|*|y| at 2w
    prod_signed: Term | None = None  # +-mag_prod by the factors' signs
    stage_cursor: int = 0
    hbs_asserted: set[int] = field(default_factory=set)
    defs_emitted: bool = False
    exhausted: bool = False
    stages_run: list[str] = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.x.width


@dataclass
class StageOutput:
    constraints: list[Term] = field(default_factory=list)
    spawned: list[AbstractionInstance] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Predicate builders
# ---------------------------------------------------------------------------

def hbs_term(tt: TermTable, x: Term, i: int) -> Term:
    """True iff the highest set bit of x is exactly i."""
    w = x.width
    if not 0 <= i < w:
        raise EngineError(f"bit index {i} out of range for width {w}")
    parts = [tt.bit(x, i)]
    parts += [tt.not_(tt.bit(x, j)) for j in range(i + 1, w)]
    return tt.and_(*parts)


def magnitude(tt: TermTable, x: Term) -> Term:
    w = x.width
    return tt.ite(tt.bit(x, w - 1), tt.bvneg(x), x)


def no_overflow_term(tt: TermTable, x: Term, y: Term) -> Term:
    """True only if the signed product of x and y fits in their width.

    Conservative leading-zero argument on the magnitudes: if |x| < 2^(w-p)
    and |y| < 2^(p-1) for some p, then |x*y| < 2^(w-1).  The converse does
    not hold, so some safe pairs are rejected.
    """
    w = x.width
    if w != y.width:
        raise EngineError("no_overflow_term: width mismatch")
    a = magnitude(tt, x)
    b = magnitude(tt, y)
    zero = tt.bv(0, w)
    parts = [tt.eq(x, zero), tt.eq(y, zero)]
    for p in range(1, w + 1):
        parts.append(tt.and_(
            tt.bvult(a, tt.bv(1 << (w - p), w)) if w - p < w else tt.eq(a, zero),
            tt.bvult(b, tt.bv(1 << (p - 1), w)) if p - 1 < w else tt.eq(b, zero),
        ))
    return tt.or_(*parts)


def interval_bound_terms(tt: TermTable, a: Term, b: Term, n: int) -> tuple[Term, Term]:
    """Lower/upper bounds for the magnitude product, unrolled over the
    highest-set-bit index of `a` from n down to 0."""
    w2 = a.width
    lo = tt.ite(hbs_term(tt, a, 0), b, tt.bv(0, w2))
    hi = tt.bvshl(b, tt.bv(1, w2))
    for k in range(1, n + 1):
        test = hbs_term(tt, a, k)
        lo = tt.ite(test, tt.bvshl(b, tt.bv(k, w2)), lo)
        hi = tt.ite(test, tt.bvshl(b, tt.bv(k + 1, w2)), hi)
    return lo, hi


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class Abstractor:
    def __init__(self, table: TermTable, config: SchemeConfig | None = None,
                 reserved_names: set[str] | None = None):
        self.tt = table
        self.config = config or SchemeConfig.default()
        self.registry: list[AbstractionInstance] = []
        self._by_app: dict[tuple[OpKind, int, int], AbstractionInstance] = {}
        self._dw_mul: dict[tuple[int, int], AbstractionInstance] = {}
        self.context_widths: set[int] = set()
        self._reserved = set(reserved_names or ())
        self._policy_queue: list[Term] = []

    # -- naming --------------------------------------------------------------

    def _fresh_name(self, base: str) -> str:
        name = base
        while name in self._reserved:
            name += "x"
        self._reserved.add(name)
        return name

    # -- instance management ---------------------------------------------------

    def _new_instance(self, op: OpKind, x: Term, y: Term) -> AbstractionInstance:
        tt = self.tt
        w = x.width
        idx = len(self.registry)
        proxy = tt.sym(self._fresh_name(f".{op.value}{w}.{idx}"), bv_sort(w))
        inst = AbstractionInstance(idx, op, x, y, proxy)
        if op is OpKind.MUL:
            inst.x2 = tt.sign_extend(w, x)
            inst.y2 = tt.sign_extend(w, y)
            inst.x_mag2 = magnitude(tt, inst.x2)
            inst.y_mag2 = magnitude(tt, inst.y2)
            inst.mag_prod = tt.sym(self._fresh_name(f".umul{2 * w}.{idx}"),
                                   bv_sort(2 * w))
            signs_differ = tt.xor(tt.bit(x, w - 1), tt.bit(y, w - 1))
            inst.prod_signed = tt.ite(signs_differ, tt.bvneg(inst.mag_prod),
                                      inst.mag_prod)
            self._dw_mul.setdefault((inst.x2.tid, inst.y2.tid), inst)
        if self.config.fresh_symbols == "shared":
            for other in self.registry:
                if other.op is op and other.width == w:
                    self._policy_queue.append(tt.implies(
                        tt.and_(tt.eq(other.x, x), tt.eq(other.y, y)),
                        tt.eq(other.proxy, proxy)))
        self.registry.append(inst)
        self._by_app[(op, x.tid, y.tid)] = inst
        self.context_widths.update((w, 2 * w))
        return inst

    def resolve(self, op: OpKind, x: Term, y: Term,
                spawned: list[AbstractionInstance]) -> Term:
        """Term standing for op(x, y): an existing proxy, the double-width
        product view of an existing multiplication, or a new instance."""
        if x.is_const() and y.is_const():
            return self.tt.const(concrete_op(op.kind, [x.value, y.value]))
        hit = self._by_app.get((op, x.tid, y.tid))
        if hit is not None:
            return hit.proxy
        if op is OpKind.MUL:
            dw = self._dw_mul.get((x.tid, y.tid))
            if dw is not None:
                return dw.prod_signed
        inst = self._new_instance(op, x, y)
        spawned.append(inst)
        return inst.proxy

    def _drain_policy(self, sink: list[Term]):
        sink.extend(self._policy_queue)
        self._policy_queue.clear()

    # -- formula abstraction -----------------------------------------------------

    def abstract_script(self, script: Script) -> list[Term]:
        """Replace targeted applications in all assertions; returns the
        rewritten assertion list (no stage constraints yet)."""
        for a in script.assertions:
            for t in self.tt.iter_dag([a]):
                if t.sort.is_bv:
                    self.context_widths.add(t.width)
        out = []
        spawned: list[AbstractionInstance] = []
        for a in script.assertions:
            out.append(self._rewrite(a, spawned))
        self._drain_policy(out)
        return out

    def _rewrite(self, term: Term, spawned: list[AbstractionInstance]) -> Term:
        tt = self.tt
        memo: dict[int, Term] = {}
        unsigned_rewrite = self.config.signed_mode == "rewrite-unsigned"
        for t in tt.iter_dag([term]):
            if t.tid in memo:
                continue
            kids = tuple(memo[c.tid] for c in t.children)
            op = _KIND_TO_OP.get(t.kind)
            if op is None:
                memo[t.tid] = t if kids == t.children else tt.mk(t.kind, kids, t.param)
                continue
            x, y = kids
            if x.is_const() and y.is_const():
                memo[t.tid] = tt.const(concrete_op(t.kind, [x.value, y.value]))
                continue
            if unsigned_rewrite and op in (OpKind.SDIV, OpKind.SREM):
                memo[t.tid] = self._signed_to_unsigned(op, x, y, spawned)
                continue
            memo[t.tid] = self.resolve(op, x, y, spawned)
        return memo[term.tid]

    def _signed_to_unsigned(self, op: OpKind, x: Term, y: Term,
                            spawned: list[AbstractionInstance]) -> Term:
        """Sign-cased decomposition of bvsdiv/bvsrem over one unsigned
        application of the magnitudes."""
        tt = self.tt
        w = x.width
        nx = tt.bit(x, w - 1)
        ny = tt.bit(y, w - 1)
        xa = magnitude(tt, x)
        ya = magnitude(tt, y)
        if op is OpKind.SDIV:
            q = self.resolve(OpKind.UDIV, xa, ya, spawned)
            return tt.ite(tt.xor(nx, ny), tt.bvneg(q), q)
        r = self.resolve(OpKind.UREM, xa, ya, spawned)
        return tt.ite(nx, tt.bvneg(r), r)

    # -- stages -------------------------------------------------------------------

    def _defs(self, inst: AbstractionInstance, cons: list[Term]):
        """Link the proxy to the signed double-width product, once."""
        if not inst.defs_emitted:
            w = inst.width
            cons.append(self.tt.eq(
                inst.proxy, self.tt.extract(w - 1, 0, inst.prod_signed)))
            inst.defs_emitted = True

    def mul_stage_simple(self, inst: AbstractionInstance) -> StageOutput:
        tt = self.tt
        x, y, p = inst.x, inst.y, inst.proxy
        w = inst.width
        out = StageOutput()
        cons = out.constraints
        self._defs(inst, cons)
        zero, one, ones = tt.bv(0, w), tt.bv(1, w), tt.bv(-1, w)
        cons.append(tt.implies(tt.eq(x, zero), tt.eq(p, zero)))
        cons.append(tt.implies(tt.eq(y, zero), tt.eq(p, zero)))
        cons.append(tt.implies(tt.eq(x, one), tt.eq(p, y)))
        cons.append(tt.implies(tt.eq(y, one), tt.eq(p, x)))
        cons.append(tt.implies(tt.eq(x, ones), tt.eq(p, tt.bvneg(y))))
        cons.append(tt.implies(tt.eq(y, ones), tt.eq(p, tt.bvneg(x))))
        safe = no_overflow_term(tt, x, y)
        xs, ys, ps = tt.bit(x, w - 1), tt.bit(y, w - 1), tt.bit(p, w - 1)
        xpos = tt.bvslt(zero, x)
        ypos = tt.bvslt(zero, y)
        cons.append(tt.implies(tt.and_(safe, tt.not_(xs), tt.not_(ys)),
                               tt.not_(ps)))
        cons.append(tt.implies(tt.and_(safe, xpos, ys), ps))
        cons.append(tt.implies(tt.and_(safe, xs, ypos), ps))
        cons.append(tt.implies(tt.and_(safe, xs, ys), tt.not_(ps)))
        # power-of-two factors pin the magnitude product to a shift
        for i in range(1, w):
            for a, other_mag in ((x, inst.y_mag2), (y, inst.x_mag2)):
                guard = tt.and_(*[tt.bit(a, j) if j == i else
                                  tt.not_(tt.bit(a, j)) for j in range(w)])
                cons.append(tt.implies(guard, tt.eq(
                    inst.mag_prod,
                    tt.bvshl(other_mag, tt.bv(i, 2 * w)))))
        self._drain_policy(cons)
        inst.stages_run.append(S_SIMPLE)
        return out

    def mul_stage_intervals(self, inst: AbstractionInstance) -> StageOutput:
        tt = self.tt
        w = inst.width
        out = StageOutput()
        cons = out.constraints
        self._defs(inst, cons)
        a, b, r = inst.x_mag2, inst.y_mag2, inst.mag_prod
        lo, hi = interval_bound_terms(tt, a, b, w - 1)
        zero2 = tt.bv(0, 2 * w)
        guard = tt.and_(tt.not_(tt.eq(a, zero2)), tt.not_(tt.eq(b, zero2)))
        cons.append(tt.implies(guard, tt.and_(tt.bvule(lo, r),
                                              tt.bvult(r, hi))))
        self._drain_policy(cons)
        inst.stages_run.append(S_INTERVALS)
        return out

    def mul_stage_relations(self, inst: AbstractionInstance) -> StageOutput:
        tt = self.tt
        w = inst.width
        out = StageOutput()
        cons, spawn = out.constraints, out.spawned
        self._defs(inst, cons)
        u, v, prod = inst.x2, inst.y2, inst.prod_signed
        zero2 = tt.bv(0, 2 * w)
        cons.append(tt.eq(prod, self.resolve(OpKind.MUL, v, u, spawn)))
        cons.append(tt.or_(tt.eq(u, zero2),
                           tt.eq(v, self.resolve(OpKind.SDIV, prod, u, spawn))))
        cons.append(tt.or_(tt.eq(v, zero2),
                           tt.eq(u, self.resolve(OpKind.SDIV, prod, v, spawn))))
        for wp in sorted(cw for cw in self.context_widths if cw < 2 * w):
            ul = tt.extract(wp - 1, 0, u)
            vl = tt.extract(wp - 1, 0, v)
            pl = tt.extract(wp - 1, 0, prod)
            cons.append(tt.eq(pl, self.resolve(OpKind.MUL, ul, vl, spawn)))
            cons.append(tt.eq(pl, self.resolve(OpKind.MUL, vl, ul, spawn)))
            # half-width factors are narrow enough that their product cannot
            # wrap at width wp+1, except when both sit at the slice minimum
            h = wp // 2
            ext = wp - h
            xp = tt.sign_extend(ext, tt.extract(h, 0, u))
            yp = tt.sign_extend(ext, tt.extract(h, 0, v))
            m = self.resolve(OpKind.MUL, xp, yp, spawn)
            cons.append(tt.eq(m, self.resolve(OpKind.MUL, yp, xp, spawn)))
            minval = tt.bv(-(1 << h), wp + 1)
            both_min = tt.and_(tt.eq(xp, minval), tt.eq(yp, minval))
            zp = tt.bv(0, wp + 1)
            cons.append(tt.or_(
                tt.eq(yp, zp), both_min,
                tt.eq(xp, self.resolve(OpKind.SDIV, m, yp, spawn))))
            cons.append(tt.or_(
                tt.eq(xp, zp), both_min,
                tt.eq(yp, self.resolve(OpKind.SDIV, m, xp, spawn))))
        self._drain_policy(cons)
        inst.stages_run.append(S_RELATIONS)
        return out

    def full_interval_constraint(self, inst: AbstractionInstance, i: int) -> Term:
        tt = self.tt
        return tt.implies(hbs_term(tt, inst.x, i),
                          tt.eq(inst.proxy, tt.bvmul(inst.x, inst.y)))

    def mul_stage_full_interval(self, inst: AbstractionInstance,
                                model: dict) -> StageOutput:
        tt = self.tt
        out = StageOutput()
        vx = tt.eval(inst.x, model)
        if vx.u == 0:
            # the zero-factor equality from the simple stage already pins
            # the proxy; nothing to assert, no index consumed
            return out
        i = vx.u.bit_length() - 1
        if i in inst.hbs_asserted:
            raise IndexAlreadyAsserted(
                f"instance {inst.idx} saw highest-bit index {i} twice")
        inst.hbs_asserted.add(i)
        out.constraints.append(self.full_interval_constraint(inst, i))
        if len(inst.hbs_asserted) == inst.width:
            inst.exhausted = True
        self._drain_policy(out.constraints)
        inst.stages_run.append(S_FULL_MUL)
        return out

    def srem_stage_relations(self, inst: AbstractionInstance) -> StageOutput:
        tt = self.tt
        w = inst.width
        out = StageOutput()
        cons, spawn = out.constraints, out.spawned
        x2 = tt.sign_extend(w, inst.x)
        y2 = tt.sign_extend(w, inst.y)
        r2 = self.resolve(OpKind.SREM, x2, y2, spawn)
        d2 = self.resolve(OpKind.SDIV, x2, y2, spawn)
        m2 = self.resolve(OpKind.MUL, d2, y2, spawn)
        cons.append(tt.eq(inst.proxy, tt.extract(w - 1, 0, r2)))
        cons.append(tt.eq(x2, tt.bvadd(m2, r2)))
        self._drain_policy(cons)
        inst.stages_run.append(S_RELATIONS)
        return out

    def div_stage_base(self, inst: AbstractionInstance) -> StageOutput:
        tt = self.tt
        w = inst.width
        x, y, p = inst.x, inst.y, inst.proxy
        out = StageOutput()
        cons, spawn = out.constraints, out.spawned
        zero, one, ones = tt.bv(0, w), tt.bv(1, w), tt.bv(-1, w)
        if inst.op is OpKind.SDIV:
            minv = tt.bv(1 << (w - 1), w)
            cons.append(tt.implies(tt.eq(y, zero), tt.eq(
                p, tt.ite(tt.bvslt(x, zero), one, ones))))
            cons.append(tt.implies(tt.eq(y, one), tt.eq(p, x)))
            cons.append(tt.implies(tt.eq(y, ones), tt.eq(p, tt.bvneg(x))))
            cons.append(tt.implies(tt.and_(tt.eq(x, zero),
                                           tt.not_(tt.eq(y, zero))),
                                   tt.eq(p, zero)))
            cons.append(tt.implies(tt.and_(tt.bvsle(zero, x), tt.bvslt(zero, y)),
                                   tt.bvsle(zero, p)))
            cons.append(tt.implies(tt.and_(tt.bvsle(x, zero), tt.bvslt(zero, y)),
                                   tt.bvsle(p, zero)))
            cons.append(tt.implies(tt.and_(tt.bvsle(zero, x), tt.bvslt(y, zero)),
                                   tt.bvsle(p, zero)))
            overflow_pair = tt.and_(tt.eq(x, minv), tt.eq(y, ones))
            cons.append(tt.implies(
                tt.and_(tt.bvslt(x, zero), tt.bvslt(y, zero),
                        tt.not_(overflow_pair)),
                tt.bvsle(zero, p)))
            x2 = tt.sign_extend(w, x)
            y2 = tt.sign_extend(w, y)
            d2 = self.resolve(OpKind.SDIV, x2, y2, spawn)
            r2 = self.resolve(OpKind.SREM, x2, y2, spawn)
            m2 = self.resolve(OpKind.MUL, d2, y2, spawn)
            cons.append(tt.eq(p, tt.extract(w - 1, 0, d2)))
            cons.append(tt.eq(x2, tt.bvadd(m2, r2)))
        elif inst.op is OpKind.UDIV:
            cons.append(tt.implies(tt.eq(y, zero), tt.eq(p, ones)))
            cons.append(tt.implies(tt.eq(y, one), tt.eq(p, x)))
            cons.append(tt.implies(tt.and_(tt.eq(x, zero),
                                           tt.not_(tt.eq(y, zero))),
                                   tt.eq(p, zero)))
            cons.append(tt.implies(tt.not_(tt.eq(y, zero)), tt.bvule(p, x)))
            x2 = tt.zero_extend(w, x)
            y2 = tt.zero_extend(w, y)
            d2 = self.resolve(OpKind.UDIV, x2, y2, spawn)
            r2 = self.resolve(OpKind.UREM, x2, y2, spawn)
            m2 = self.resolve(OpKind.MUL, d2, y2, spawn)
            cons.append(tt.eq(p, tt.extract(w - 1, 0, d2)))
            cons.append(tt.eq(x2, tt.bvadd(m2, r2)))
        elif inst.op is OpKind.UREM:
            cons.append(tt.implies(tt.eq(y, zero), tt.eq(p, x)))
            cons.append(tt.implies(tt.eq(y, one), tt.eq(p, zero)))
            cons.append(tt.implies(tt.eq(x, zero), tt.eq(p, zero)))
            cons.append(tt.bvule(p, x))
            cons.append(tt.implies(tt.not_(tt.eq(y, zero)), tt.bvult(p, y)))
            x2 = tt.zero_extend(w, x)
            y2 = tt.zero_extend(w, y)
            d2 = self.resolve(OpKind.UDIV, x2, y2, spawn)
            r2 = self.resolve(OpKind.UREM, x2, y2, spawn)
            m2 = self.resolve(OpKind.MUL, d2, y2, spawn)
            cons.append(tt.eq(p, tt.extract(w - 1, 0, r2)))
            cons.append(tt.eq(x2, tt.bvadd(m2, r2)))
        else:
            raise EngineError(f"no base stage for {inst.op}")
        self._drain_policy(cons)
        inst.stages_run.append(S_BASE)
        return out

    def op_stage_full(self, inst: AbstractionInstance) -> StageOutput:
        if inst.op is OpKind.MUL:
            raise EngineError("multiplication ends with the interval stage")
        out = StageOutput()
        out.constraints.append(self.tt.eq(
            inst.proxy, self.tt.mk(inst.op.kind, (inst.x, inst.y))))
        inst.exhausted = True
        self._drain_policy(out.constraints)
        inst.stages_run.append(S_FULL)
        return out

    # -- refinement schedule ------------------------------------------------------

    def next_refinement(self, inst: AbstractionInstance,
                        model: dict) -> StageOutput | None:
        """One refinement step for a spurious instance; None when the scheme
        has nothing left (possible only for stage-prefix configurations)."""
        if inst.exhausted:
            return None
        steps = self.config.steps_for(inst.op)
        if inst.stage_cursor >= len(steps):
            return None
        group = steps[inst.stage_cursor]
        if group == (S_FULL_MUL,):
            return self.mul_stage_full_interval(inst, model)
        out = StageOutput()
        for name in group:
            part = self._emit(inst, name, model)
            out.constraints.extend(part.constraints)
            out.spawned.extend(part.spawned)
        inst.stage_cursor += 1
        return out

    def _emit(self, inst: AbstractionInstance, stage: str, model: dict) -> StageOutput:
        if inst.op is OpKind.MUL:
            emitters = {S_SIMPLE: self.mul_stage_simple,
                        S_INTERVALS: self.mul_stage_intervals,
                        S_RELATIONS: self.mul_stage_relations}
            if stage == S_FULL_MUL:
                return self.mul_stage_full_interval(inst, model)
            return emitters[stage](inst)
        if inst.op is OpKind.SREM and stage == S_RELATIONS:
            return self.srem_stage_relations(inst)
        if stage == S_BASE:
            return self.div_stage_base(inst)
        if stage == S_FULL:
            return self.op_stage_full(inst)
        raise EngineError(f"stage {stage!r} undefined for {inst.op}")

    # -- testing/verification support ----------------------------------------------

    def exact_extension(self, base_env: dict) -> dict:
        """Extend an assignment of the original symbols with the exact value
        of every proxy and auxiliary symbol, in registry order."""
        env = dict(base_env)
        for inst in self.registry:
            vx = self.tt.eval(inst.x, env)
            vy = self.tt.eval(inst.y, env)
            env[inst.proxy.name] = concrete_op(inst.op.kind, [vx, vy])
            if inst.op is OpKind.MUL:
                env[inst.mag_prod.name] = BvValue(
                    2 * inst.width, abs(vx.s) * abs(vy.s))
        return env
