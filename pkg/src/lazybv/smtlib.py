"""SMT-LIB 2 frontend: parse a QF_BV subset into the term DAG, print back out.

Supported commands: set-logic, set-info, set-option (ignored), declare-fun
(zero arity) / declare-const, define-fun (zero arity, inlined), assert,
check-sat, get-model / get-value, exit.  push/pop, arrays, quantifiers and
parameterized define-fun are rejected with UnsupportedFeature.

Canonical constant printing: hexadecimal when the width is divisible by 4,
binary otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (SmtSyntaxError, SortMismatch, UndeclaredSymbol,
                     UnsupportedFeature)
from .terms import BOOL, BvValue, Kind, Sort, Term, TermTable, bv_sort

_SIMPLE_SYMBOL_CHARS = set(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    "~!@$%^&*_-+=<>.?/")


# ---------------------------------------------------------------------------
# S-expression reader
# ---------------------------------------------------------------------------

@dataclass
class Atom:
    text: str
    line: int
    col: int


def tokenize(text: str):
    line, col = 1, 0
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 0
            i += 1
            continue
        if ch in " \t\r":
            col += 1
            i += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield Atom(ch, line, col)
            col += 1
            i += 1
            continue
        if ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SmtSyntaxError("unterminated quoted symbol", line, col)
            tok = text[i:j + 1]
            yield Atom(tok, line, col)
            col += j + 1 - i
            i = j + 1
            continue
        if ch == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise SmtSyntaxError("unterminated string literal", line, col)
            yield Atom(text[i:j + 1], line, col)
            col += j + 1 - i
            i = j + 1
            continue
        j = i
        while j < n and text[j] not in " \t\r\n();|\"":
            j += 1
        yield Atom(text[i:j], line, col)
        col += j - i
        i = j


def read_sexprs(text: str):
    """All top-level s-expressions as nested lists of Atom."""
    stack: list[list] = []
    top: list = []
    for tok in tokenize(text):
        if tok.text == "(":
            stack.append([])
        elif tok.text == ")":
            if not stack:
                raise SmtSyntaxError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            (stack[-1] if stack else top).append(tok)
    if stack:
        raise SmtSyntaxError("unbalanced '('", 0, 0)
    return top


def _pos(node) -> tuple[int, int]:
    while isinstance(node, list):
        if not node:
            return (0, 0)
        node = node[0]
    return (node.line, node.col)


# ---------------------------------------------------------------------------
# Script
# ---------------------------------------------------------------------------

@dataclass
class Script:
    table: TermTable
    logic: str | None = None
    declarations: list[tuple[str, Sort]] = field(default_factory=list)
    assertions: list[Term] = field(default_factory=list)
    has_check_sat: bool = False
    wants_model: bool = False
    status_hint: str | None = None

    def symbol(self, name: str) -> Term:
        for n, sort in self.declarations:
            if n == name:
                return self.table.sym(n, sort)
        raise UndeclaredSymbol(name)

    def declared_symbols(self) -> list[Term]:
        return [self.table.sym(n, s) for n, s in self.declarations]


_NARY_LEFT = {"bvadd": Kind.BVADD, "bvmul": Kind.BVMUL, "bvand": Kind.BVAND,
              "bvor": Kind.BVOR, "bvxor": Kind.BVXOR, "concat": Kind.CONCAT,
              "bvsub": Kind.BVSUB}
_BINARY = {"bvudiv": Kind.BVUDIV, "bvsdiv": Kind.BVSDIV,
           "bvurem": Kind.BVUREM, "bvsrem": Kind.BVSREM,
           "bvshl": Kind.BVSHL, "bvlshr": Kind.BVLSHR, "bvashr": Kind.BVASHR,
           "bvult": Kind.BVULT, "bvule": Kind.BVULE,
           "bvslt": Kind.BVSLT, "bvsle": Kind.BVSLE}
_SWAPPED = {"bvugt": Kind.BVULT, "bvuge": Kind.BVULE,
            "bvsgt": Kind.BVSLT, "bvsge": Kind.BVSLE}
_UNARY = {"not": Kind.NOT, "bvnot": Kind.BVNOT, "bvneg": Kind.BVNEG}


class _Parser:
    def __init__(self, table: TermTable):
        self.tt = table
        self.script = Script(table)
        self.globals: dict[str, Term] = {}

    # -- commands ----------------------------------------------------------

    def run(self, text: str) -> Script:
        for form in read_sexprs(text):
            if not isinstance(form, list) or not form or not isinstance(form[0], Atom):
                line, col = _pos(form)
                raise SmtSyntaxError("expected a command", line, col)
            if self.command(form):
                break
        return self.script

    def command(self, form: list) -> bool:
        head = form[0].text
        if head == "set-logic":
            self.script.logic = form[1].text if len(form) > 1 else None
        elif head == "set-info":
            if len(form) >= 3 and isinstance(form[1], Atom) \
                    and form[1].text == ":status" and isinstance(form[2], Atom):
                self.script.status_hint = form[2].text
        elif head == "set-option":
            pass
        elif head == "declare-const":
            self._need(form, 3)
            self.declare(form[1], self.sort(form[2]))
        elif head == "declare-fun":
            self._need(form, 4)
            if form[2] != []:
                raise UnsupportedFeature(
                    "declare-fun with arguments (uninterpreted functions)")
            self.declare(form[1], self.sort(form[3]))
        elif head == "define-fun":
            self._need(form, 5)
            if form[2] != []:
                raise UnsupportedFeature("define-fun with parameters")
            sort = self.sort(form[3])
            body = self.term(form[4], {})
            if body.sort != sort:
                raise SortMismatch(
                    f"define-fun {form[1].text}: body sort {body.sort!r} "
                    f"!= declared {sort!r}")
            name = self._symbol_name(form[1])
            if name in self.globals:
                raise SmtSyntaxError(f"redefinition of {name}",
                                     form[1].line, form[1].col)
            self.globals[name] = body
        elif head == "assert":
            self._need(form, 2)
            t = self.term(form[1], {})
            if not t.sort.is_bool:
                raise SortMismatch("assert expects a Bool term")
            self.script.assertions.append(t)
        elif head == "check-sat":
            self.script.has_check_sat = True
        elif head in ("get-model", "get-value"):
            self.script.wants_model = True
        elif head == "exit":
            return True
        elif head in ("push", "pop"):
            raise UnsupportedFeature(f"{head} (incremental scripts)")
        else:
            raise UnsupportedFeature(f"command {head}")
        return False

    def _need(self, form: list, n: int):
        if len(form) < n:
            line, col = _pos(form)
            raise SmtSyntaxError(f"{form[0].text}: expected {n - 1} arguments",
                                 line, col)

    def _symbol_name(self, atom) -> str:
        if not isinstance(atom, Atom):
            line, col = _pos(atom)
            raise SmtSyntaxError("expected a symbol", line, col)
        t = atom.text
        if t.startswith("|") and t.endswith("|"):
            return t[1:-1]
        return t

    def declare(self, atom, sort: Sort):
        name = self._symbol_name(atom)
        if name in self.globals:
            raise SmtSyntaxError(f"redeclaration of {name}", atom.line, atom.col)
        self.globals[name] = self.tt.sym(name, sort)
        self.script.declarations.append((name, sort))

    def sort(self, form) -> Sort:
        if isinstance(form, Atom):
            if form.text == "Bool":
                return BOOL
            raise UnsupportedFeature(f"sort {form.text}")
        if (len(form) == 3 and isinstance(form[0], Atom) and form[0].text == "_"
                and form[1].text == "BitVec"):
            return bv_sort(self._numeral(form[2]))
        line, col = _pos(form)
        raise UnsupportedFeature(f"sort at {line}:{col}")

    def _numeral(self, atom) -> int:
        if isinstance(atom, Atom) and atom.text.isdigit():
            return int(atom.text)
        line, col = _pos(atom)
        raise SmtSyntaxError("expected a numeral", line, col)

    # -- terms -------------------------------------------------------------

    def term(self, form, env: dict[str, Term]) -> Term:
        tt = self.tt
        if isinstance(form, Atom):
            t = form.text
            if t == "true":
                return tt.true_()
            if t == "false":
                return tt.false_()
            if t.startswith("#b"):
                bits = t[2:]
                if not bits or set(bits) - {"0", "1"}:
                    raise SmtSyntaxError(f"bad binary literal {t}", form.line, form.col)
                return tt.bv(int(bits, 2), len(bits))
            if t.startswith("#x"):
                digits = t[2:]
                try:
                    v = int(digits, 16)
                except ValueError:
                    raise SmtSyntaxError(f"bad hex literal {t}", form.line, form.col) from None
                return tt.bv(v, 4 * len(digits))
            name = self._symbol_name(form)
            if name in env:
                return env[name]
            if name in self.globals:
                return self.globals[name]
            if t.isdigit():
                raise SmtSyntaxError("bare numerals are not valid QF_BV terms",
                                     form.line, form.col)
            raise UndeclaredSymbol(name)

        if not form:
            raise SmtSyntaxError("empty application", 0, 0)
        head = form[0]

        if isinstance(head, list):  # ((_ extract i j) t) and friends
            op = self._indexed_op(head)
            args = [self.term(a, env) for a in form[1:]]
            kind, param = op
            if kind is Kind.EXTRACT:
                self._arity(form, args, 1)
                return tt.mk(Kind.EXTRACT, (args[0],), param)
            self._arity(form, args, 1)
            return tt.mk(kind, (args[0],), param)

        h = head.text
        if h == "_":
            # standalone (_ bvN w) literal
            if len(form) == 3 and isinstance(form[1], Atom) and form[1].text.startswith("bv"):
                val = form[1].text[2:]
                if not val.isdigit():
                    raise SmtSyntaxError(f"bad literal {form[1].text}",
                                         head.line, head.col)
                return tt.bv(int(val), self._numeral(form[2]))
            raise SmtSyntaxError("unexpected indexed identifier", head.line, head.col)
        if h == "let":
            if len(form) != 3 or not isinstance(form[1], list):
                raise SmtSyntaxError("malformed let", head.line, head.col)
            new_env = dict(env)
            for binding in form[1]:
                if not (isinstance(binding, list) and len(binding) == 2):
                    raise SmtSyntaxError("malformed let binding", head.line, head.col)
                # parallel let: bound terms see the outer environment
                new_env[self._symbol_name(binding[0])] = self.term(binding[1], env)
            return self.term(form[2], new_env)
        if h == "!":
            raise UnsupportedFeature("term annotations")
        if h == "forall" or h == "exists":
            raise UnsupportedFeature("quantifiers")

        args = [self.term(a, env) for a in form[1:]]
        try:
            return self._apply(h, args, head)
        except SortMismatch:
            raise
        except (UndeclaredSymbol, UnsupportedFeature):
            raise

    def _arity(self, form, args, n):
        if len(args) != n:
            line, col = _pos(form)
            raise SmtSyntaxError(f"expected {n} arguments", line, col)

    def _indexed_op(self, head: list):
        if not (head and isinstance(head[0], Atom) and head[0].text == "_"):
            line, col = _pos(head)
            raise SmtSyntaxError("expected an indexed identifier", line, col)
        name = head[1].text
        if name == "extract":
            hi, lo = self._numeral(head[2]), self._numeral(head[3])
            return (Kind.EXTRACT, (hi, lo))
        if name == "sign_extend":
            return (Kind.SIGN_EXTEND, self._numeral(head[2]))
        if name == "zero_extend":
            return (Kind.ZERO_EXTEND, self._numeral(head[2]))
        raise UnsupportedFeature(f"indexed operator {name}")

    def _apply(self, h: str, args: list[Term], head: Atom) -> Term:
        tt = self.tt

        def fold_left(kind):
            if len(args) < 2:
                raise SmtSyntaxError(f"{h} expects >= 2 arguments", head.line, head.col)
            acc = args[0]
            for a in args[1:]:
                acc = tt.mk(kind, (acc, a))
            return acc

        if h in ("and", "or"):
            if len(args) < 1:
                raise SmtSyntaxError(f"{h} expects arguments", head.line, head.col)
            if len(args) == 1:
                return args[0]
            return tt.mk(Kind.AND if h == "and" else Kind.OR, tuple(args))
        if h == "xor":
            return fold_left(Kind.XOR)
        if h == "=>":
            if len(args) < 2:
                raise SmtSyntaxError("=> expects >= 2 arguments", head.line, head.col)
            acc = args[-1]
            for a in reversed(args[:-1]):
                acc = tt.implies(a, acc)
            return acc
        if h == "=":
            if len(args) < 2:
                raise SmtSyntaxError("= expects >= 2 arguments", head.line, head.col)
            eqs = [tt.eq(args[i], args[i + 1]) for i in range(len(args) - 1)]
            return tt.and_(*eqs)
        if h == "distinct":
            if len(args) < 2:
                raise SmtSyntaxError("distinct expects >= 2 arguments",
                                     head.line, head.col)
            neqs = [tt.not_(tt.eq(args[i], args[j]))
                    for i in range(len(args)) for j in range(i + 1, len(args))]
            return tt.and_(*neqs)
        if h == "ite":
            self._arity([head], args, 3)
            return tt.ite(*args)
        if h in _UNARY:
            self._arity([head], args, 1)
            return tt.mk(_UNARY[h], tuple(args))
        if h in _NARY_LEFT:
            return fold_left(_NARY_LEFT[h])
        if h in _BINARY:
            self._arity([head], args, 2)
            return tt.mk(_BINARY[h], tuple(args))
        if h in _SWAPPED:
            self._arity([head], args, 2)
            return tt.mk(_SWAPPED[h], (args[1], args[0]))
        raise UnsupportedFeature(f"operator {h}")


def parse_script(text: str | bytes, table: TermTable | None = None) -> Script:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(table or TermTable()).run(text)


def parse_term(text: str, script: Script) -> Term:
    """Parse one term in the context of an already-parsed script."""
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise SmtSyntaxError("expected exactly one term", 0, 0)
    p = _Parser(script.table)
    p.script = script
    p.globals = {n: script.table.sym(n, s) for n, s in script.declarations}
    return p.term(forms[0], {})


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def format_value(v: BvValue | bool) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v.width % 4 == 0:
        return "#x{:0{}x}".format(v.u, v.width // 4)
    return "#b{:0{}b}".format(v.u, v.width)


def format_symbol(name: str) -> str:
    if name and not name[0].isdigit() and all(c in _SIMPLE_SYMBOL_CHARS for c in name):
        return name
    return f"|{name}|"


def format_sort(sort: Sort) -> str:
    return "Bool" if sort.is_bool else f"(_ BitVec {sort.width})"


def _render(term: Term, names: dict[int, str]) -> str:
    """Tree-render `term`; nodes in `names` (except the root itself, which is
    being defined) are emitted as their let-bound name."""
    out: list[str] = []
    stack: list = [(term, True)]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        t, is_root = item
        if not is_root and t.tid in names:
            out.append(names[t.tid])
            continue
        if t.kind is Kind.BOOL_CONST:
            out.append("true" if t.value else "false")
        elif t.kind is Kind.BV_CONST:
            out.append(format_value(t.value))
        elif t.kind is Kind.SYMBOL:
            out.append(format_symbol(t.name))
        else:
            if t.kind is Kind.EXTRACT:
                head = f"((_ extract {t.param[0]} {t.param[1]})"
            elif t.kind in (Kind.SIGN_EXTEND, Kind.ZERO_EXTEND):
                head = f"((_ {t.kind.value} {t.param})"
            else:
                head = f"({t.kind.value}"
            out.append(head)
            stack.append(")")
            for c in reversed(t.children):
                stack.append((c, False))
                stack.append(" ")
    return "".join(out)


def print_term(term: Term, table: TermTable | None = None) -> str:
    """Valid SMT-LIB 2 syntax; shared internal nodes are bound with let."""
    counts: dict[int, int] = {}
    seen: set[int] = set()
    stack = [term]
    while stack:
        t = stack.pop()
        for c in t.children:
            counts[c.tid] = counts.get(c.tid, 0) + 1
            if c.tid not in seen:
                seen.add(c.tid)
                stack.append(c)
    shared = [t for t in _topo(term) if counts.get(t.tid, 0) >= 2 and t.children]
    if not shared:
        return _render(term, {})
    taken = {t.name for t in _topo(term) if t.kind is Kind.SYMBOL}
    prefix = "?l"
    while any(n.startswith(prefix) for n in taken):
        prefix += "%"
    names = {t.tid: f"{prefix}{i}" for i, t in enumerate(shared)}
    body = _render(term, names)
    for t in reversed(shared):
        bound = _render(t, names)
        body = f"(let (({names[t.tid]} {bound})) {body})"
    return body


def _topo(term: Term) -> list[Term]:
    seen: set[int] = set()
    out: list[Term] = []
    stack: list[tuple[Term, bool]] = [(term, False)]
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
    return out


def print_script(script: Script) -> str:
    lines = [f"(set-logic {script.logic or 'QF_BV'})"]
    if script.status_hint:
        lines.append(f"(set-info :status {script.status_hint})")
    for name, sort in script.declarations:
        lines.append(f"(declare-const {format_symbol(name)} {format_sort(sort)})")
    for a in script.assertions:
        lines.append(f"(assert {print_term(a)})")
    if script.has_check_sat:
        lines.append("(check-sat)")
    if script.wants_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"
