"""Exact Pareto optimization of per-site implementation choices.

Each site ``i`` picks one candidate ``j`` with accuracy ``(eps_ij, delta_ij)``
and cost ``c_ij``.  The model error is ``E = sum_i A_i eps_i + B_i delta_i + C``
and the cost ``K = sum_i c_i``.  Conditional rows encode range requirements:
choosing ``(i, j)`` demands ``sum_k A^i_k eps_k + B^i_k delta_k < S_ij``.

The frontier is found by an epsilon-constraint sweep: minimize ``(K, E)``
lexicographically subject to ``E < E_prev``, emit, tighten, repeat.  Every
solve is a depth-first branch and bound over sites.  All data are binary
fractions, so everything is scaled to integers over a common power of two
and compared exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import InfeasibleError

Number = Fraction | float | int


def _q(x: Number) -> Fraction:
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
    return Fraction(x)


@dataclass(frozen=True)
class Candidate:
    name: str
    eps: Fraction
    delta: Fraction
    cost: Fraction

    def __post_init__(self):
        for k in ("eps", "delta", "cost"):
            object.__setattr__(self, k, _q(getattr(self, k)))
        if self.eps < 0 or self.delta < 0 or self.cost < 0:
            raise ValueError(f"candidate {self.name!r} has a negative value")


@dataclass(frozen=True)
class Conditional:
    """Choosing ``candidate`` at ``site`` requires ``row . (eps, delta) < slack``."""

    site: int
    candidate: int
    A: tuple[Fraction, ...]
    B: tuple[Fraction, ...]
    slack: Fraction

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(_q(a) for a in self.A))
        object.__setattr__(self, "B", tuple(_q(b) for b in self.B))
        object.__setattr__(self, "slack", _q(self.slack))
        if any(a < 0 for a in self.A + self.B):
            raise ValueError("conditional row coefficients must be non-negative")


@dataclass(frozen=True)
class SelectionProblem:
    sites: tuple[str, ...]
    candidates: tuple[tuple[Candidate, ...], ...]
    A: tuple[Fraction, ...]
    B: tuple[Fraction, ...]
    C: Fraction = Fraction(0)
    conditionals: tuple[Conditional, ...] = ()

    def __post_init__(self):
        n = len(self.sites)
        object.__setattr__(self, "A", tuple(_q(a) for a in self.A))
        object.__setattr__(self, "B", tuple(_q(b) for b in self.B))
        object.__setattr__(self, "C", _q(self.C))
        object.__setattr__(self, "candidates", tuple(tuple(c) for c in self.candidates))
        object.__setattr__(self, "conditionals", tuple(self.conditionals))
        if not (len(self.candidates) == len(self.A) == len(self.B) == n):
            raise ValueError("sites, candidates and coefficients differ in length")
        if any(a < 0 for a in self.A + self.B):
            raise ValueError("error coefficients must be non-negative")
        for i, cands in enumerate(self.candidates):
            if not cands:
                raise InfeasibleError(f"site {self.sites[i]} has no candidate")
        for c in self.conditionals:
            if not (0 <= c.site < n and 0 <= c.candidate < len(self.candidates[c.site])):
                raise ValueError(f"conditional refers to missing candidate {c.site}/{c.candidate}")
            if len(c.A) != n or len(c.B) != n:
                raise ValueError("conditional row length differs from the number of sites")

    def term(self, i: int, j: int) -> Fraction:
        c = self.candidates[i][j]
        return self.A[i] * c.eps + self.B[i] * c.delta

    def error(self, choice: Sequence[int]) -> Fraction:
        return self.C + sum((self.term(i, j) for i, j in enumerate(choice)), Fraction(0))

    def cost(self, choice: Sequence[int]) -> Fraction:
        return sum((self.candidates[i][j].cost for i, j in enumerate(choice)), Fraction(0))

    def feasible(self, choice: Sequence[int]) -> bool:
        for c in self.conditionals:
            if choice[c.site] != c.candidate:
                continue
            lhs = sum((c.A[k] * self.candidates[k][choice[k]].eps +
                       c.B[k] * self.candidates[k][choice[k]].delta
                       for k in range(len(choice))), Fraction(0))
            if not lhs < c.slack:
                return False
        return True


@dataclass(frozen=True)
class Assignment:
    choice: tuple[int, ...]
    error: Fraction
    cost: Fraction

    def names(self, problem: SelectionProblem) -> dict[str, str]:
        return {s: problem.candidates[i][j].name
                for i, (s, j) in enumerate(zip(problem.sites, self.choice))}


@dataclass(frozen=True)
class ParetoPoint:
    assignment: Assignment
    rank: int

    @property
    def error(self) -> Fraction:
        return self.assignment.error

    @property
    def cost(self) -> Fraction:
        return self.assignment.cost

    @property
    def choice(self) -> tuple[int, ...]:
        return self.assignment.choice


def dominates(a, b) -> bool:
    """Whether ``a`` is no worse in both error and cost and better in one."""
    return a.error <= b.error and a.cost <= b.cost and (a.error < b.error or a.cost < b.cost)


@dataclass
class ParetoResult:
    points: list[ParetoPoint] = field(default_factory=list)
    truncated: bool = False

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# integer-scaled branch and bound


def _scale(values: list[Fraction]) -> tuple[list[int], int]:
    den = 1
    for v in values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    return [int(v * den) for v in values], den


class _Search:
    def __init__(self, p: SelectionProblem):
        self.p = p
        n = len(p.sites)
        self.n = n
        # distinct error terms and costs, scaled to integers
        terms = [[p.term(i, j) for j in range(len(p.candidates[i]))] for i in range(n)]
        flat_e = [t for row in terms for t in row] + [p.C]
        ints, self.e_den = _scale(flat_e)
        it = iter(ints)
        self.term = [[next(it) for _ in row] for row in terms]
        self.C = next(it)
        costs = [[c.cost for c in p.candidates[i]] for i in range(n)]
        ints, self.k_den = _scale([c for row in costs for c in row])
        it = iter(ints)
        self.cost = [[next(it) for _ in row] for row in costs]
        # conditional rows: per-row integer contribution of each (site, candidate)
        self.rows = []
        self.active: list[list[list[int]]] = [[[] for _ in p.candidates[i]] for i in range(n)]
        for r, c in enumerate(p.conditionals):
            contrib = [[c.A[k] * cand.eps + c.B[k] * cand.delta for cand in p.candidates[k]]
                       for k in range(n)]
            ints, den = _scale([x for row in contrib for x in row] + [c.slack])
            it = iter(ints)
            rowc = [[next(it) for _ in row] for row in contrib]
            slack = next(it)
            suffix = [0] * (n + 1)
            for k in range(n - 1, -1, -1):
                suffix[k] = suffix[k + 1] + min(rowc[k])
            self.rows.append((rowc, slack, suffix))
            self.active[c.site][c.candidate].append(r)
        # candidates that are indistinguishable from an earlier one are skipped
        self.order = []
        for i in range(n):
            seen = set()
            keep = []
            for j in range(len(p.candidates[i])):
                key = (self.term[i][j], self.cost[i][j],
                       tuple(self.rows[r][0][i][j] for r in range(len(self.rows))),
                       tuple(self.active[i][j]))
                if key in seen:
                    continue
                seen.add(key)
                keep.append(j)
            keep.sort(key=lambda j: (self.cost[i][j], self.term[i][j], j))
            self.order.append(keep)
        self.min_cost_suffix = [0] * (n + 1)
        self.min_term_suffix = [0] * (n + 1)
        for k in range(n - 1, -1, -1):
            self.min_cost_suffix[k] = self.min_cost_suffix[k + 1] + min(self.cost[k][j] for j in self.order[k])
            self.min_term_suffix[k] = self.min_term_suffix[k + 1] + min(self.term[k][j] for j in self.order[k])

    def solve(self, e_limit: int | None) -> tuple[int, int, tuple[int, ...]] | None:
        """Lexicographically minimal (K, E, choice) with E < e_limit, or None."""
        n = self.n
        best: list = [None]
        choice = [0] * n
        row_sums = [0] * len(self.rows)
        live_rows: list[int] = []

        def rows_ok(depth):
            for r in live_rows:
                _, slack, suffix = self.rows[r]
                if row_sums[r] + suffix[depth] >= slack:
                    return False
            return True

        def dfs(i, k_acc, e_acc):
            k_lb = k_acc + self.min_cost_suffix[i]
            e_lb = e_acc + self.min_term_suffix[i]
            if e_limit is not None and e_lb >= e_limit:
                return
            b = best[0]
            if b is not None and (k_lb, e_lb) > (b[0], b[1]):
                return
            if i == n:
                key = (k_acc, e_acc, tuple(choice))
                if b is None or key < b:
                    best[0] = key
                return
            for j in self.order[i]:
                choice[i] = j
                for r in range(len(self.rows)):
                    row_sums[r] += self.rows[r][0][i][j]
                new_rows = self.active[i][j]
                live_rows.extend(new_rows)
                if rows_ok(i + 1):
                    dfs(i + 1, k_acc + self.cost[i][j], e_acc + self.term[i][j])
                del live_rows[len(live_rows) - len(new_rows):]
                for r in range(len(self.rows)):
                    row_sums[r] -= self.rows[r][0][i][j]

        dfs(0, 0, self.C)
        return best[0]


def iter_pareto(problem: SelectionProblem, max_points: int | None = None) -> Iterator[ParetoPoint]:
    """Yield Pareto points in order of increasing cost and decreasing error.

    Raises InfeasibleError before yielding anything if no assignment
    satisfies the conditional constraints.
    """
    search = _Search(problem)
    limit = None
    rank = 0
    while max_points is None or rank < max_points:
        res = search.solve(limit)
        if res is None:
            if rank == 0:
                raise InfeasibleError("no assignment satisfies the range constraints")
            return
        k, e, choice = res
        a = Assignment(choice, Fraction(e, search.e_den), Fraction(k, search.k_den))
        yield ParetoPoint(a, rank)
        rank += 1
        limit = e


def solve_pareto(problem: SelectionProblem, max_points: int | None = 64) -> ParetoResult:
    """The full frontier, or its ``max_points`` cheapest points with ``truncated`` set."""
    out = ParetoResult()
    gen = iter_pareto(problem, None if max_points is None else max_points + 1)
    for p in gen:
        if max_points is not None and len(out.points) == max_points:
            out.truncated = True
            break
        out.points.append(p)
    return out


def brute_force_pareto(problem: SelectionProblem) -> list[tuple[Fraction, Fraction]]:
    """Reference frontier as sorted (cost, error) pairs, by full enumeration."""
    from itertools import product

    pts = set()
    for choice in product(*[range(len(c)) for c in problem.candidates]):
        if problem.feasible(choice):
            pts.add((problem.cost(choice), problem.error(choice)))
    front = [p for p in pts if not any(q[0] <= p[0] and q[1] <= p[1] and q != p for q in pts)]
    return sorted(front)
