"""CDCL SAT solver: two-watched literals, first-UIP learning, backjumping,
Luby restarts, activity-driven branching with phase saving.

Clause set only ever grows, so solved state stays valid across incremental
add_clause/solve cycles.  Literals use the DIMACS convention externally
(signed nonzero ints) and an even/odd encoding internally.
"""

from __future__ import annotations

import time
from heapq import heappop, heappush


def luby(i: int) -> int:
    """i-th element (1-based) of the Luby restart sequence 1,1,2,1,1,2,4,..."""
    x = i - 1
    size, seq = 1, 0
    while size < x + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != x:
        size = (size - 1) // 2
        seq -= 1
        x %= size
    return 1 << seq


class CdclSolver:
    RESTART_UNIT = 100
    VAR_DECAY = 0.95

    def __init__(self):
        self.num_vars = 0
        self.clauses: list[list[int]] = []     # attached, internal encoding
        self.pending: list[list[int]] = []     # added since last solve
        self.watches: list[list[list[int]]] = [[], []]
        self.assign: list[int] = [-1]          # var -> -1 / 0 / 1
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.phase: list[int] = [0]
        self.activity: list[float] = [0.0]
        self.var_inc = 1.0
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.order: list[tuple[float, int]] = []  # lazy max-heap on activity
        self.qhead = 0
        self.unsat = False
        self.conflicts = 0
        self.decisions = 0
        self.propagations = 0

    # -- construction ------------------------------------------------------

    def new_var(self) -> int:
        self.num_vars += 1
        self.assign.append(-1)
        self.level.append(0)
        self.reason.append(None)
        self.phase.append(0)
        self.activity.append(0.0)
        self.watches.append([])
        self.watches.append([])
        heappush(self.order, (0.0, self.num_vars))
        return self.num_vars

    def add_clause(self, lits: list[int]):
        """lits in DIMACS convention; the empty clause makes the instance
        permanently unsat."""
        enc = []
        seen = set()
        taut = False
        for l in lits:
            v = abs(l)
            while v > self.num_vars:
                self.new_var()
            e = (v << 1) | (1 if l < 0 else 0)
            if e in seen:
                continue
            if e ^ 1 in seen:
                taut = True
                break
            seen.add(e)
            enc.append(e)
        if taut:
            return
        if not enc:
            self.unsat = True
            return
        self.pending.append(enc)

    # -- internals ---------------------------------------------------------

    def _value(self, lit: int) -> int:
        a = self.assign[lit >> 1]
        if a < 0:
            return -1
        return a ^ (lit & 1)

    def _enqueue(self, lit: int, reason):
        v = lit >> 1
        self.assign[v] = 1 - (lit & 1)
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.phase[v] = 1 - (lit & 1)
        self.trail.append(lit)

    def _attach(self, c: list[int]) -> bool:
        """Attach a pending clause at level 0; False on immediate conflict."""
        if len(c) == 1:
            val = self._value(c[0])
            if val == 0:
                return False
            if val == -1:
                self._enqueue(c[0], None)
            return True
        # prefer unassigned or true literals as watches
        c.sort(key=lambda l: (self._value(l) == 0, -self.level[l >> 1]))
        self.clauses.append(c)
        self.watches[c[0]].append(c)
        self.watches[c[1]].append(c)
        if self._value(c[0]) == 0:  # all false
            return False
        if self._value(c[1]) == 0 and self._value(c[0]) == -1:
            self._enqueue(c[0], c)
        return True

    def _propagate(self):
        trail = self.trail
        watches = self.watches
        assign = self.assign
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            fl = p ^ 1
            ws = watches[fl]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                self.propagations += 1
                if c[0] == fl:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                a = assign[first >> 1]
                if a >= 0 and a ^ (first & 1) == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    ak = assign[lk >> 1]
                    if ak < 0 or ak ^ (lk & 1) == 1:
                        c[1], c[k] = lk, fl
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if a >= 0:  # first is false: conflict
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        return c
                    self._enqueue(first, c)
            del ws[j:]
        return None

    def _bump(self, v: int):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for i in range(1, self.num_vars + 1):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100
        heappush(self.order, (-self.activity[v], v))

    def _analyze(self, confl: list[int]):
        learnt = [0]
        seen = [False] * (self.num_vars + 1)
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        while True:
            for q in confl:
                if q == p:
                    continue
                v = q >> 1
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] == cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[self.trail[idx] >> 1]:
                idx -= 1
            p = self.trail[idx]
            v = p >> 1
            seen[v] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            confl = self.reason[v]
        learnt[0] = p ^ 1
        if len(learnt) == 1:
            bt = 0
        else:
            # second-highest decision level among learnt literals
            levels = sorted((self.level[l >> 1] for l in learnt[1:]), reverse=True)
            bt = levels[0]
            # move a literal of that level into watch position 1
            for k in range(1, len(learnt)):
                if self.level[learnt[k] >> 1] == bt:
                    learnt[1], learnt[k] = learnt[k], learnt[1]
                    break
        return learnt, bt

    def _backtrack(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        limit = self.trail_lim[lvl]
        for lit in reversed(self.trail[limit:]):
            v = lit >> 1
            self.assign[v] = -1
            self.reason[v] = None
            heappush(self.order, (-self.activity[v], v))
        del self.trail[limit:]
        del self.trail_lim[lvl:]
        self.qhead = min(self.qhead, limit)

    def _decide(self) -> int:
        while self.order:
            _, v = heappop(self.order)
            if self.assign[v] < 0:
                return (v << 1) | (0 if self.phase[v] else 1)
        return 0

    # -- main --------------------------------------------------------------

    def solve(self, deadline: float | None = None,
              conflict_budget: int | None = None):
        """True / False / None (budget or deadline exhausted)."""
        if self.unsat:
            return False
        self._backtrack(0)
        for c in self.pending:
            if not self._attach(c):
                self.unsat = True
                self.pending = []
                return False
        self.pending = []
        if self._propagate() is not None:
            self.unsat = True
            return False

        restart_num = 1
        conflicts_until_restart = luby(restart_num) * self.RESTART_UNIT
        start_conflicts = self.conflicts
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                if not self.trail_lim:
                    self.unsat = True
                    return False
                learnt, bt = self._analyze(confl)
                self._backtrack(bt)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self.clauses.append(learnt)
                    self.watches[learnt[0]].append(learnt)
                    self.watches[learnt[1]].append(learnt)
                    self._enqueue(learnt[0], learnt)
                self.var_inc /= self.VAR_DECAY
                conflicts_until_restart -= 1
                if conflict_budget is not None and \
                        self.conflicts - start_conflicts >= conflict_budget:
                    return None
                if deadline is not None and (self.conflicts & 63) == 0 \
                        and time.process_time() > deadline:
                    return None
                if conflicts_until_restart <= 0:
                    restart_num += 1
                    conflicts_until_restart = luby(restart_num) * self.RESTART_UNIT
                    self._backtrack(0)
            else:
                lit = self._decide()
                if lit == 0:
                    return True
                if deadline is not None and (self.decisions & 255) == 0 \
                        and time.process_time() > deadline:
                    return None
                self.decisions += 1
                self.trail_lim.append(len(self.trail))
                self._enqueue(lit, None)

    def model(self) -> list[bool]:
        """Assignment indexed by var (entry 0 unused); unassigned vars False."""
        return [a == 1 for a in self.assign]

    def model_satisfies(self, clauses_dimacs) -> bool:
        m = self.model()
        for cl in clauses_dimacs:
            if not any((m[abs(l)] if l > 0 else not m[abs(l)]) for l in cl):
                return False
        return True


def to_dimacs(num_vars: int, clauses_dimacs) -> str:
    lines = [f"p cnf {num_vars} {len(clauses_dimacs)}"]
    for cl in clauses_dimacs:
        lines.append(" ".join(map(str, cl)) + " 0")
    return "\n".join(lines) + "\n"
