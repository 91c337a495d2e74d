#!/usr/bin/env python3
"""Tiny SMT-LIB 2 REPL over stdin/stdout, used to exercise the external
backend protocol in tests.  Decides by bit-blasting each time check-sat
arrives; supports declare-const, assert, check-sat, get-value, exit."""

import sys

sys.dont_write_bytecode = True

from lazybv.backends import BuiltinBackend  # noqa: E402
from lazybv.smtlib import format_symbol, format_value, parse_script, read_sexprs  # noqa: E402
from lazybv.terms import TermTable  # noqa: E402


def main():
    buffered = ""
    depth = 0
    commands: list[str] = []
    model = None
    slow = "--slow" in sys.argv

    def complete_forms(text):
        nonlocal buffered, depth
        forms = []
        start = 0
        for i, ch in enumerate(text):
            if ch == ";":
                pass
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    forms.append(text[start:i + 1])
                    start = i + 1
        buffered = text[start:]
        return forms

    script_text = []
    for line in sys.stdin:
        for form in complete_forms(buffered + line):
            head = form.strip("() \t\n").split()
            head = head[0] if head else ""
            if head in ("set-option", "set-logic", "set-info"):
                continue
            if head in ("declare-const", "declare-fun", "assert"):
                script_text.append(form)
                continue
            if head == "check-sat":
                if slow:
                    import time
                    time.sleep(10)
                table = TermTable()
                script = parse_script("\n".join(script_text), table)
                backend = BuiltinBackend(table)
                for a in script.assertions:
                    backend.assert_term(a)
                verdict = backend.check_sat()
                if verdict == "sat":
                    model = backend.get_value(script.declared_symbols())
                else:
                    model = None
                print(verdict, flush=True)
                continue
            if head == "get-value":
                req = read_sexprs(form)[0][1]
                parts = []
                for atom in req:
                    name = atom.text
                    if name.startswith("|") and name.endswith("|"):
                        name = name[1:-1]
                    parts.append(f"({format_symbol(name)} "
                                 f"{format_value(model[name])})")
                print("(" + " ".join(parts) + ")", flush=True)
                continue
            if head == "exit":
                return


if __name__ == "__main__":
    main()
