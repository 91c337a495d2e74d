"""Uniform incremental solving interface.

Three implementations:

* BuiltinBackend  -- bit-blasts to the in-package CDCL solver.
* OracleBackend   -- exhaustive enumeration over the free symbols with
                     eager constraint pruning; the ground-truth backend for
                     small instances.
* ExternalBackend -- SMT-LIB 2 text protocol over a spawned process
                     (assert / check-sat / get-value, add-only).

All backends are add-only: the asserted conjunction grows monotonically, so
an unsat answer is final.
"""

from __future__ import annotations

import queue
import subprocess
import threading
import time

from .bitblast import BitBlaster
from .errors import (BackendProtocolError, EngineError, NotSat,
                     OracleCapacityExceeded)
from .sat import CdclSolver
from .smtlib import format_sort, format_symbol, format_value, print_term, read_sexprs
from .terms import BvValue, Kind, Term, TermTable

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"


class Backend:
    """Shared bookkeeping: symbol registry, asserted list, solver state."""

    def __init__(self, table: TermTable):
        self.tt = table
        self.asserted: list[Term] = []
        self.state = "idle"  # idle | sat | unsat
        self._symbols: dict[str, Term] = {}

    def _register_symbols(self, term: Term) -> list[Term]:
        fresh = []
        for t in self.tt.iter_dag([term]):
            if t.kind is Kind.SYMBOL and t.name not in self._symbols:
                self._symbols[t.name] = t
                fresh.append(t)
        return fresh

    def known_symbols(self) -> list[Term]:
        return list(self._symbols.values())

    def assert_term(self, term: Term):
        if not term.sort.is_bool:
            raise EngineError("assert_term expects a Bool term")
        self._register_symbols(term)
        self.asserted.append(term)
        if self.state != "unsat":
            self.state = "idle"
        self._assert_impl(term)

    def _assert_impl(self, term: Term):
        raise NotImplementedError

    def check_sat(self, timeout: float | None = None) -> str:
        """Decide the current conjunction; `timeout` is seconds for this call."""
        raise NotImplementedError

    def get_value(self, symbols) -> dict[str, BvValue | bool]:
        raise NotImplementedError

    def close(self):
        pass


class BuiltinBackend(Backend):
    def __init__(self, table: TermTable):
        super().__init__(table)
        self.solver = CdclSolver()
        self.blaster = BitBlaster(table, self.solver)

    def _assert_impl(self, term: Term):
        if self.state == "unsat":
            return
        self.blaster.assert_term(term)

    def check_sat(self, timeout: float | None = None) -> str:
        if self.state == "unsat":
            return UNSAT
        deadline = None if timeout is None else time.process_time() + timeout
        res = self.solver.solve(deadline=deadline)
        self.state = {True: "sat", False: "unsat", None: "idle"}[res]
        return {True: SAT, False: UNSAT, None: UNKNOWN}[res]

    def get_value(self, symbols) -> dict[str, BvValue | bool]:
        if self.state != "sat":
            raise NotSat("no model available")
        model = self.solver.model()
        out = {}
        for s in symbols:
            out[s.name] = self.blaster.value_of(s, model)
        return out

    def dimacs(self) -> str:
        from .sat import to_dimacs
        return to_dimacs(self.solver.num_vars, self.blaster.clauses_dimacs)


# ---------------------------------------------------------------------------
# Enumeration oracle
# ---------------------------------------------------------------------------

def _udiv(a, b, ones):
    return ones if b == 0 else a // b


def _urem(a, b):
    return a if b == 0 else a % b


def _to_signed(a, half, full):
    return a - full if a >= half else a


def _sdiv(a, b, w):
    full, half = 1 << w, 1 << (w - 1)
    sa, sb = _to_signed(a, half, full), _to_signed(b, half, full)
    if sb == 0:
        return (1 if sa < 0 else full - 1)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    return q % full


def _srem(a, b, w):
    full, half = 1 << w, 1 << (w - 1)
    sa, sb = _to_signed(a, half, full), _to_signed(b, half, full)
    if sb == 0:
        return a
    r = abs(sa) % abs(sb)
    if sa < 0:
        r = -r
    return r % full


def _ashr(a, sh, w):
    full, half = 1 << w, 1 << (w - 1)
    if sh >= w:
        return full - 1 if a >= half else 0
    return (_to_signed(a, half, full) >> sh) % full


_HELPERS = {"_udiv": _udiv, "_urem": _urem, "_sdiv": _sdiv, "_srem": _srem,
            "_ashr": _ashr}


def compile_term(table: TermTable, term: Term):
    """Compile a term into `fn(env) -> int|bool` with env keyed by symbol
    name; bit-vector values are masked unsigned ints."""
    lines = ["def _f(env):"]
    names: dict[int, str] = {}
    n = 0
    for t in table.iter_dag([term]):
        if t.tid in names:
            continue
        var = f"v{n}"
        n += 1
        names[t.tid] = var
        k = t.kind
        c = [names[ch.tid] for ch in t.children]
        if k is Kind.SYMBOL:
            expr = f"env[{t.name!r}]"
        elif k is Kind.BOOL_CONST:
            expr = repr(t.value)
        elif k is Kind.BV_CONST:
            expr = repr(t.value.u)
        elif k is Kind.NOT:
            expr = f"(not {c[0]})"
        elif k is Kind.AND:
            expr = "(" + " and ".join(c) + ")"
        elif k is Kind.OR:
            expr = "(" + " or ".join(c) + ")"
        elif k is Kind.XOR:
            expr = f"(bool({c[0]}) != bool({c[1]}))"
        elif k is Kind.IMPLIES:
            expr = f"((not {c[0]}) or {c[1]})"
        elif k is Kind.EQ:
            expr = f"({c[0]} == {c[1]})"
        elif k is Kind.ITE:
            expr = f"({c[1]} if {c[0]} else {c[2]})"
        else:
            w = t.children[0].width
            mask = (1 << w) - 1
            half = 1 << (w - 1)
            full = 1 << w
            sa = f"({c[0]} - {full} if {c[0]} >= {half} else {c[0]})"
            if len(c) > 1:
                sb = f"({c[1]} - {full} if {c[1]} >= {half} else {c[1]})"
            if k is Kind.BVNOT:
                expr = f"({c[0]} ^ {mask})"
            elif k is Kind.BVNEG:
                expr = f"(-{c[0]} & {mask})"
            elif k is Kind.BVAND:
                expr = f"({c[0]} & {c[1]})"
            elif k is Kind.BVOR:
                expr = f"({c[0]} | {c[1]})"
            elif k is Kind.BVXOR:
                expr = f"({c[0]} ^ {c[1]})"
            elif k is Kind.BVADD:
                expr = f"(({c[0]} + {c[1]}) & {mask})"
            elif k is Kind.BVSUB:
                expr = f"(({c[0]} - {c[1]}) & {mask})"
            elif k is Kind.BVMUL:
                expr = f"(({c[0]} * {c[1]}) & {mask})"
            elif k is Kind.BVUDIV:
                expr = f"_udiv({c[0]}, {c[1]}, {mask})"
            elif k is Kind.BVUREM:
                expr = f"_urem({c[0]}, {c[1]})"
            elif k is Kind.BVSDIV:
                expr = f"_sdiv({c[0]}, {c[1]}, {w})"
            elif k is Kind.BVSREM:
                expr = f"_srem({c[0]}, {c[1]}, {w})"
            elif k is Kind.BVSHL:
                expr = f"((({c[0]} << {c[1]}) & {mask}) if {c[1]} < {w} else 0)"
            elif k is Kind.BVLSHR:
                expr = f"(({c[0]} >> {c[1]}) if {c[1]} < {w} else 0)"
            elif k is Kind.BVASHR:
                expr = f"_ashr({c[0]}, {c[1]}, {w})"
            elif k is Kind.BVULT:
                expr = f"({c[0]} < {c[1]})"
            elif k is Kind.BVULE:
                expr = f"({c[0]} <= {c[1]})"
            elif k is Kind.BVSLT:
                expr = f"({sa} < {sb})"
            elif k is Kind.BVSLE:
                expr = f"({sa} <= {sb})"
            elif k is Kind.CONCAT:
                expr = f"(({c[0]} << {t.children[1].width}) | {c[1]})"
            elif k is Kind.EXTRACT:
                hi, lo = t.param
                expr = f"(({c[0]} >> {lo}) & {(1 << (hi - lo + 1)) - 1})"
            elif k is Kind.SIGN_EXTEND:
                fill = ((1 << (w + t.param)) - 1) ^ mask
                expr = f"(({c[0]} | {fill}) if {c[0]} >= {half} else {c[0]})"
            elif k is Kind.ZERO_EXTEND:
                expr = c[0]
            else:
                raise EngineError(f"cannot compile {k}")
        lines.append(f"    {var} = {expr}")
    lines.append(f"    return {names[term.tid]}")
    ns = dict(_HELPERS)
    exec("\n".join(lines), ns)
    return ns["_f"]


class OracleBackend(Backend):
    """Decides by depth-first enumeration over symbol values, evaluating each
    constraint as soon as its last symbol is assigned."""

    def __init__(self, table: TermTable, max_free_bits: int = 28):
        super().__init__(table)
        self.max_free_bits = max_free_bits
        self._compiled: list[tuple] = []  # (fn, last_symbol_index)
        self._witness: dict[str, BvValue | bool] | None = None
        self._order: list[Term] = []
        self._index: dict[str, int] = {}

    def _assert_impl(self, term: Term):
        # registration order defines the enumeration order
        for s in self.tt.iter_dag([term]):
            if s.kind is Kind.SYMBOL and s.name not in self._index:
                self._index[s.name] = len(self._order)
                self._order.append(s)
        fn = compile_term(self.tt, term)
        last = max((self._index[s.name] for s in self.tt.free_symbols(term)),
                   default=-1)
        self._compiled.append((fn, last))

    def check_sat(self, timeout: float | None = None) -> str:
        if self.state == "unsat":
            return UNSAT
        bits = sum(s.width if s.sort.is_bv else 1 for s in self._order)
        if bits > self.max_free_bits:
            raise OracleCapacityExceeded(
                f"{bits} free bits exceeds oracle bound {self.max_free_bits}")
        deadline = None if timeout is None else time.process_time() + timeout
        ready: list[list] = [[] for _ in range(len(self._order) + 1)]
        for fn, last in self._compiled:
            ready[last + 1].append(fn)
        env: dict[str, int | bool] = {}
        if not all(fn(env) for fn in ready[0]):
            self.state = "unsat"
            return UNSAT
        counter = [0]

        def search(d: int) -> bool:
            if deadline is not None:
                counter[0] += 1
                if (counter[0] & 0x3FFF) == 0 and time.process_time() > deadline:
                    raise TimeoutError
            if d == len(self._order):
                return True
            s = self._order[d]
            checks = ready[d + 1]
            if s.sort.is_bool:
                domain = (False, True)
            else:
                domain = range(1 << s.width)
            for v in domain:
                env[s.name] = v
                if all(fn(env) for fn in checks) and search(d + 1):
                    return True
            del env[s.name]
            return False

        try:
            found = search(0)
        except TimeoutError:
            self.state = "idle"
            return UNKNOWN
        if found:
            self._witness = {
                s.name: (bool(env[s.name]) if s.sort.is_bool
                         else BvValue(s.width, env[s.name]))
                for s in self._order}
            self.state = "sat"
            return SAT
        self.state = "unsat"
        return UNSAT

    def get_value(self, symbols) -> dict[str, BvValue | bool]:
        if self.state != "sat" or self._witness is None:
            raise NotSat("no witness available")
        out = {}
        for s in symbols:
            v = self._witness.get(s.name)
            if v is None:
                # symbol never occurred in a constraint: any value works
                v = False if s.sort.is_bool else BvValue(s.width, 0)
            out[s.name] = v
        return out


# ---------------------------------------------------------------------------
# External process client
# ---------------------------------------------------------------------------

class ExternalBackend(Backend):
    def __init__(self, table: TermTable, argv: list[str]):
        super().__init__(table)
        try:
            self.proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as e:
            raise BackendProtocolError(f"cannot spawn {argv[0]}: {e}") from e
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._declared: set[str] = set()
        self._send("(set-option :print-success false)")
        self._send("(set-logic QF_BV)")

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def _send(self, text: str):
        try:
            self.proc.stdin.write(text + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise BackendProtocolError(f"solver process gone: {e}") from e

    def _recv_line(self, timeout: float | None) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError
        if line is None:
            raise BackendProtocolError("solver closed its output")
        return line.strip()

    def _assert_impl(self, term: Term):
        for s in self.known_symbols():
            if s.name not in self._declared:
                self._declared.add(s.name)
                self._send(f"(declare-const {format_symbol(s.name)} "
                           f"{format_sort(s.sort)})")
        self._send(f"(assert {print_term(term)})")

    def check_sat(self, timeout: float | None = None) -> str:
        if self.state == "unsat":
            return UNSAT
        self._send("(check-sat)")
        try:
            while True:
                line = self._recv_line(timeout)
                if line:
                    break
        except TimeoutError:
            self.kill()
            return UNKNOWN
        if line not in (SAT, UNSAT, UNKNOWN):
            raise BackendProtocolError(f"unexpected check-sat reply: {line!r}")
        self.state = line if line in ("sat", "unsat") else "idle"
        return line

    def get_value(self, symbols) -> dict[str, BvValue | bool]:
        if self.state != "sat":
            raise NotSat("no model available")
        symbols = list(symbols)
        if not symbols:
            return {}
        names = " ".join(format_symbol(s.name) for s in symbols)
        self._send(f"(get-value ({names}))")
        text = ""
        while True:
            text += self._recv_line(timeout=60.0) + " "
            if text.count("(") and text.count("(") == text.count(")"):
                break
        forms = read_sexprs(text)
        if len(forms) != 1 or not isinstance(forms[0], list):
            raise BackendProtocolError(f"bad get-value reply: {text!r}")
        out: dict[str, BvValue | bool] = {}
        by_name = {s.name: s for s in symbols}
        for pair in forms[0]:
            if not (isinstance(pair, list) and len(pair) == 2):
                raise BackendProtocolError(f"bad value pair in {text!r}")
            name = pair[0].text
            if name.startswith("|") and name.endswith("|"):
                name = name[1:-1]
            sym = by_name.get(name)
            if sym is None:
                raise BackendProtocolError(f"value for unknown symbol {name}")
            out[name] = _parse_value(pair[1], sym)
        missing = set(by_name) - set(out)
        if missing:
            raise BackendProtocolError(f"values missing for {sorted(missing)}")
        return out

    def kill(self):
        try:
            self.proc.kill()
        except OSError:
            pass

    def close(self):
        try:
            self._send("(exit)")
        except BackendProtocolError:
            pass
        try:
            self.proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self.kill()


def _parse_value(node, sym: Term) -> BvValue | bool:
    if isinstance(node, list):
        # (_ bvN w)
        if len(node) == 3 and node[0].text == "_" and node[1].text.startswith("bv"):
            return BvValue(int(node[2].text), int(node[1].text[2:]))
        raise BackendProtocolError(f"unparseable value {node!r}")
    t = node.text
    if t == "true":
        return True
    if t == "false":
        return False
    if t.startswith("#b"):
        return BvValue(len(t) - 2, int(t[2:], 2))
    if t.startswith("#x"):
        return BvValue(4 * (len(t) - 2), int(t[2:], 16))
    raise BackendProtocolError(f"unparseable value {t!r}")


def make_backend(spec: str, table: TermTable,
                 oracle_bits: int = 28) -> Backend:
    """'builtin' | 'oracle' | 'external:<command line>'."""
    if spec == "builtin":
        return BuiltinBackend(table)
    if spec == "oracle":
        return OracleBackend(table, max_free_bits=oracle_bits)
    if spec.startswith("external:"):
        import shlex
        return ExternalBackend(table, shlex.split(spec[len("external:"):]))
    raise ValueError(f"unknown backend {spec!r}")
