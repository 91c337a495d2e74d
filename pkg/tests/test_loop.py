"""Refinement loop: verdicts, model validation, projection, stage stats."""

import random

import pytest

from lazybv.abstraction import Abstractor, OpKind, S_FULL_MUL, SchemeConfig
from lazybv.backends import BuiltinBackend, OracleBackend
from lazybv.loop import Limits, SolveResult, check_spurious, project_model, solve
from lazybv.smtlib import parse_script
from lazybv.terms import BvValue, TermTable, bv, bv_sort


def _solve(text, config=SchemeConfig.default(), backend_cls=BuiltinBackend,
           limits=None):
    tt = TermTable()
    script = parse_script(text, tt)
    backend = backend_cls(tt)
    return solve(script, config, backend, limits), script


DECLS4 = ("(declare-const x (_ BitVec 4))(declare-const y (_ BitVec 4))")


def test_sat_with_validated_model():
    res, script = _solve(
        DECLS4 + "(assert (= (bvmul x y) #x6))(assert (= x #x2))")
    assert res.status == "sat"
    assert res.model["x"].u == 2
    assert (res.model["x"].u * res.model["y"].u) % 16 == 6
    # projection only carries declared symbols
    assert set(res.model) == {"x", "y"}


def test_commutativity_contradiction_needs_no_full_mul():
    res, _ = _solve(DECLS4 + "(assert (distinct (bvmul x y) (bvmul y x)))")
    assert res.status == "unsat"
    for stats in res.per_instance:
        assert S_FULL_MUL not in stats.stages
        assert stats.full_intervals == 0


def test_square_cannot_be_two():
    res, _ = _solve("(declare-const x (_ BitVec 4))"
                    "(assert (= (bvmul x x) #x2))")
    assert res.status == "unsat"


def test_refinement_round_bound():
    res, _ = _solve(DECLS4 + "(assert (= (bvmul x y) #x7))")
    assert res.status == "sat"
    for s in res.per_instance:
        if s.op == "mul" and s.width == 4:
            assert s.refinements <= 3 + 4


def test_unsat_equality_chain():
    res, _ = _solve(
        DECLS4 +
        "(assert (= (bvmul x y) #x5))(assert (= x #x2))")
    # 2*y = 5 has no solution mod 16 (even product)
    assert res.status == "unsat"


def test_timeout_returns_unknown():
    res, _ = _solve(DECLS4 + "(assert (= (bvmul x y) #x6))",
                    limits=Limits(timeout=0.0))
    assert res.status == "unknown" and res.reason == "timeout"


def test_prefix_config_never_flips_verdicts():
    full, _ = _solve("(declare-const x (_ BitVec 4))"
                     "(assert (= (bvmul x x) #x2))")
    prefix, _ = _solve("(declare-const x (_ BitVec 4))"
                       "(assert (= (bvmul x x) #x2))",
                       config=SchemeConfig.mul_prefix(1))
    assert full.status == "unsat"
    assert prefix.status in ("unsat", "unknown")
    if prefix.status == "unknown":
        assert prefix.reason == "exhausted"


def test_baseline_concrete_mode():
    res, _ = _solve(DECLS4 + "(assert (= (bvmul x y) #x6))(assert (= x #x2))",
                    config=None)
    assert res.status == "sat"
    assert res.per_instance == []
    res2, _ = _solve("(declare-const x (_ BitVec 4))"
                     "(assert (= (bvmul x x) #x2))", config=None)
    assert res2.status == "unsat"


def test_unconstrained_symbols_get_defaults():
    res, _ = _solve("(declare-const x (_ BitVec 4))(declare-const fresh Bool)"
                    "(assert (= x x))")
    assert res.status == "sat"
    assert res.model["fresh"] is False


def test_check_spurious_and_projection():
    tt = TermTable()
    script = parse_script(DECLS4 + "(assert (= (bvmul x y) #x6))", tt)
    ab = Abstractor(tt)
    ab.abstract_script(script)
    inst = ab.registry[0]
    model = {"x": bv(2, 4), "y": bv(3, 4), inst.proxy.name: bv(6, 4)}
    assert check_spurious(script, model, ab.registry) == []
    model[inst.proxy.name] = bv(0, 4)
    assert check_spurious(script, model, ab.registry) == [inst]
    assert check_spurious(script, model, []) == []

    proj = project_model(model, script)
    assert set(proj) == {"x", "y"}
    assert project_model(proj, script) == proj  # idempotent


def test_oracle_backend_end_to_end():
    res, _ = _solve(DECLS4 + "(assert (= (bvmul x y) #x6))(assert (= x #x2))",
                    backend_cls=OracleBackend)
    assert res.status == "sat"
    assert (res.model["x"].u * res.model["y"].u) % 16 == 6


def test_assertions_only_grow():
    tt = TermTable()
    script = parse_script(DECLS4 + "(assert (= (bvmul x y) #xb))", tt)
    backend = BuiltinBackend(tt)
    sizes = []
    orig_check = backend.check_sat
    def spy_check(timeout=None):
        sizes.append(len(backend.asserted))
        return orig_check(timeout=timeout)
    backend.check_sat = spy_check
    res = solve(script, SchemeConfig.default(), backend)
    assert res.status in ("sat", "unsat")
    assert sizes == sorted(sizes)
    assert len(sizes) == res.rounds + 1


def _random_abstracted_formula(tt, rng):
    width = rng.choice([3, 4, 5])
    nvars = rng.randrange(1, 4)
    syms = [tt.sym(f"v{i}", bv_sort(width)) for i in range(nvars)]
    from lazybv.terms import Kind
    def leaf():
        return syms[rng.randrange(nvars)] if rng.random() < 0.7 \
            else tt.bv(rng.randrange(1 << width), width)
    def term(depth):
        if depth == 0:
            return leaf()
        k = rng.choice([Kind.BVMUL, Kind.BVSDIV, Kind.BVUDIV, Kind.BVSREM,
                        Kind.BVUREM, Kind.BVADD, Kind.BVAND, Kind.BVSUB])
        return tt.mk(k, (term(depth - 1), term(depth - 1)))
    preds = []
    for _ in range(rng.randrange(1, 3)):
        k = rng.choice([Kind.EQ, Kind.BVULT, Kind.BVSLE])
        p = tt.mk(k, (term(rng.randrange(1, 3)), term(rng.randrange(0, 2))))
        if rng.random() < 0.4:
            p = tt.not_(p)
        preds.append(p)
    # guarantee at least one abstracted operation
    preds.append(tt.mk(Kind.BVULE, (tt.bvmul(syms[0], syms[-1]), leaf())))
    return preds, syms


def test_differential_smoke():
    """Small version of the acceptance differential (builtin vs oracle)."""
    rng = random.Random(123)
    for i in range(60):
        tt = TermTable()
        preds, syms = _random_abstracted_formula(tt, rng)
        from lazybv.smtlib import Script
        script = Script(tt)
        script.declarations = [(s.name, s.sort) for s in syms]
        script.assertions = preds
        oracle = OracleBackend(tt)
        for p in preds:
            oracle.assert_term(p)
        want = oracle.check_sat()
        got = solve(script, SchemeConfig.default(), BuiltinBackend(tt),
                    Limits(timeout=60.0))
        assert got.status == want, f"case {i}"
        if got.status == "sat":
            for p in preds:
                assert tt.eval(p, got.model) is True
