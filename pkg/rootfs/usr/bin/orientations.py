"""Orientations of a pairing, validity (in-degree 1 or 4 everywhere), exact counting
and a local-search finder for large graphs."""
import itertools
import json
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from errors import DomainError, SizeCapError
from pairing_model import DEGREE, Pairing, sample_pairing, sample_simple_pairing
from seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

VALID_IN_DEGREES = (1, DEGREE - 1)
DEFAULT_EXACT_COUNT_CAP = 40
BRUTE_FORCE_CAP = 20
DEFAULT_FIND_BUDGET = 1_000_000
DEFAULT_RESTART_FACTOR = 50

# Distance of an in-degree to {1, 4}, and its change for one more / one fewer in-edge.
PHI = (1, 0, 1, 1, 0, 1)
_NO_MOVE = 10


def _phi_plus(d: int) -> int:
    return PHI[d + 1] - PHI[d] if d < DEGREE else _NO_MOVE


def _phi_minus(d: int) -> int:
    return PHI[d - 1] - PHI[d] if d > 0 else _NO_MOVE


@dataclass(frozen=True)
class Orientation:
    """One (out_point, in_point) arc per pair, in the order of ``Pairing.pairs``."""

    arcs: Tuple[Tuple[int, int], ...]

    @classmethod
    def from_flags(cls, p: Pairing, flags: Sequence[int]) -> "Orientation":
        """Flag 0 orients pair (a, b) as a -> b, flag 1 as b -> a."""
        if len(flags) != len(p.pairs):
            raise DomainError(f"expected {len(p.pairs)} direction flags, got {len(flags)}")
        return cls(tuple((b, a) if f else (a, b) for (a, b), f in zip(p.pairs, flags)))

    def reversed(self) -> "Orientation":
        return Orientation(tuple((head, tail) for tail, head in self.arcs))

    def to_json(self) -> str:
        return json.dumps([[tail, head] for tail, head in self.arcs], separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Orientation":
        return cls(tuple((int(tail), int(head)) for tail, head in json.loads(text)))


@dataclass(frozen=True)
class ValidityReport:
    in_degrees: Tuple[int, ...]
    valid: bool
    violators: Tuple[int, ...]
    in_vertices: Tuple[int, ...]
    out_vertices: Tuple[int, ...]

    @property
    def out_degrees(self) -> Tuple[int, ...]:
        return tuple(DEGREE - d for d in self.in_degrees)

    def to_dict(self) -> Dict:
        return {
            "valid": self.valid,
            "in_degrees": list(self.in_degrees),
            "violators": list(self.violators),
            "in_vertices": len(self.in_vertices),
            "out_vertices": len(self.out_vertices),
        }


@dataclass
class FindResult:
    """Outcome of ``find_valid``; failure is a value, not an exception."""

    success: bool
    orientation: Optional[Orientation]
    best_potential: int
    steps: int
    restarts: int
    history: List[int] = field(default_factory=list)


def _in_degrees(p: Pairing, o: Orientation) -> List[int]:
    degrees = [0] * p.n
    for _, head in o.arcs:
        degrees[head // DEGREE] += 1
    return degrees


def validate(p: Pairing, o: Orientation) -> ValidityReport:
    """Check that ``o`` orients exactly the pairs of ``p`` and classify every vertex."""
    if len(o.arcs) != len(p.pairs) or {frozenset(arc) for arc in o.arcs} != {
        frozenset(pair) for pair in p.pairs
    }:
        raise DomainError("orientation does not cover exactly the pairs of the pairing")
    degrees = _in_degrees(p, o)
    violators = tuple(v for v, d in enumerate(degrees) if d not in VALID_IN_DEGREES)
    return ValidityReport(
        in_degrees=tuple(degrees),
        valid=not violators,
        violators=violators,
        in_vertices=tuple(v for v, d in enumerate(degrees) if d == 1),
        out_vertices=tuple(v for v, d in enumerate(degrees) if d == DEGREE - 1),
    )


def in_out_point_census(p: Pairing, o: Orientation) -> Tuple[int, int]:
    """Number of in-points and out-points; both are 5n/2 for any orientation."""
    validate(p, o)
    in_points = {head for _, head in o.arcs}
    out_points = {tail for tail, _ in o.arcs}
    return len(in_points), len(out_points)


def mod3_balanced(p: Pairing, o: Orientation) -> bool:
    """True when out-degree minus in-degree is divisible by 3 at every vertex,
    i.e. the orientation with value 1 on every arc is a nowhere-zero Z_3-flow."""
    degrees = _in_degrees(p, o)
    return all(((DEGREE - d) - d) % 3 == 0 for d in degrees)


def _can_finish(d: int, remaining: int) -> bool:
    return d <= 1 <= d + remaining or d <= DEGREE - 1 <= d + remaining


def _processing_order(p: Pairing) -> List[int]:
    """Pair indices ordered so vertices are completed as early as possible: always
    continue with the touched vertex that has the fewest unprocessed points left."""
    incident: List[List[int]] = [[] for _ in range(p.n)]
    for e, (a, b) in enumerate(p.pairs):
        incident[a // DEGREE].append(e)
        if b // DEGREE != a // DEGREE:
            incident[b // DEGREE].append(e)
    left = [DEGREE] * p.n
    done = [False] * len(p.pairs)
    touched = set()
    order: List[int] = []
    while len(order) < len(p.pairs):
        open_vertices = [v for v in touched if left[v] > 0]
        if open_vertices:
            v = min(open_vertices, key=lambda u: (left[u], u))
        else:
            v = min(u for u in range(p.n) if left[u] > 0)
        for e in incident[v]:
            if done[e]:
                continue
            done[e] = True
            order.append(e)
            a, b = p.pairs[e]
            for u in (a // DEGREE, b // DEGREE):
                touched.add(u)
            left[a // DEGREE] -= 1
            left[b // DEGREE] -= 1
    return order


def count_valid(p: Pairing, cap: int = DEFAULT_EXACT_COUNT_CAP) -> int:
    """Exact number Y(p) of valid orientations.

    Backtracking over the pairs with per-vertex feasibility pruning; the in-degrees of
    the vertices that are touched but not yet complete determine the rest of the
    search, so subtrees reached with the same frontier state are counted once.
    """
    m = len(p.pairs)
    if m > cap:
        raise SizeCapError("exact orientation count (use Monte Carlo or find_valid)", m, cap)
    order = _processing_order(p)
    heads: List[Tuple[int, int]] = []
    seen = [0] * p.n
    checks: List[Tuple[Tuple[int, int], ...]] = []
    frontiers: List[Tuple[int, ...]] = []
    for e in order:
        a, b = p.pairs[e]
        va, vb = a // DEGREE, b // DEGREE
        frontiers.append(tuple(v for v in range(p.n) if 0 < seen[v] < DEGREE))
        seen[va] += 1
        seen[vb] += 1
        heads.append((vb, va))
        checks.append(tuple((v, DEGREE - seen[v]) for v in sorted({va, vb})))

    indeg = [0] * p.n
    memo: Dict[Tuple, int] = {}

    def count_from(i: int) -> int:
        if i == m:
            return 1
        key = (i,) + tuple(indeg[v] for v in frontiers[i])
        cached = memo.get(key)
        if cached is not None:
            return cached
        total = 0
        for head in heads[i]:
            indeg[head] += 1
            if all(_can_finish(indeg[v], r) for v, r in checks[i]):
                total += count_from(i + 1)
            indeg[head] -= 1
        memo[key] = total
        return total

    total = count_from(0)
    logger.debug(f"count_valid: n={p.n}, pairs={m}, Y={total}, states={len(memo)}")
    return total


def count_valid_brute(p: Pairing, cap: int = BRUTE_FORCE_CAP) -> int:
    """Y(p) by checking all 2^(5n/2) direction assignments."""
    m = len(p.pairs)
    if m > cap:
        raise SizeCapError("brute-force orientation count", m, cap)
    total = 0
    for flags in itertools.product((0, 1), repeat=m):
        degrees = [0] * p.n
        for (a, b), f in zip(p.pairs, flags):
            degrees[(a if f else b) // DEGREE] += 1
        if all(d in VALID_IN_DEGREES for d in degrees):
            total += 1
    return total


def mean_count_exact(pairings) -> Fraction:
    """Exact average of Y over an explicit collection of pairings."""
    total = 0
    size = 0
    for p in pairings:
        total += count_valid(p)
        size += 1
    return Fraction(total, size)


class _LocalSearch:
    """State of the potential-descent search used by ``find_valid``.

    The potential is the sum over vertices of the distance of the in-degree to {1, 4}.
    A move reverses one arc, or a directed path between two vertices: reversing a path
    x0 -> ... -> xk raises the in-degree of x0 by one, lowers that of xk by one and
    leaves the inner vertices unchanged.
    """

    def __init__(self, p: Pairing, rng):
        self.p = p
        self.rng = rng
        self.ends = [(a // DEGREE, b // DEGREE) for a, b in p.pairs]
        self.incident: List[List[int]] = [[] for _ in range(p.n)]
        self.loop_in = [0] * p.n
        for e, (va, vb) in enumerate(self.ends):
            if va == vb:
                self.loop_in[va] += 1
            else:
                self.incident[va].append(e)
                self.incident[vb].append(e)
        self.flags: List[int] = []
        self.indeg: List[int] = []
        self.defects: List[int] = []
        self.slot: Dict[int, int] = {}
        self.randomize()

    def randomize(self) -> None:
        self.flags = self.rng.integers(0, 2, len(self.ends)).tolist()
        self.indeg = list(self.loop_in)
        for e, (va, vb) in enumerate(self.ends):
            if va != vb:
                self.indeg[self.head(e)] += 1
        self.defects = []
        self.slot = {}
        for v in range(self.p.n):
            self._track(v)

    def head(self, e: int) -> int:
        va, vb = self.ends[e]
        return va if self.flags[e] else vb

    def tail(self, e: int) -> int:
        va, vb = self.ends[e]
        return vb if self.flags[e] else va

    @property
    def potential(self) -> int:
        return len(self.defects)

    def _track(self, v: int) -> None:
        bad = PHI[self.indeg[v]] > 0
        if bad and v not in self.slot:
            self.slot[v] = len(self.defects)
            self.defects.append(v)
        elif not bad and v in self.slot:
            i = self.slot.pop(v)
            last = self.defects.pop()
            if last != v:
                self.defects[i] = last
                self.slot[last] = i

    def reverse(self, path: List[int]) -> None:
        start, end = self.tail(path[0]), self.head(path[-1])
        for e in path:
            self.flags[e] ^= 1
        self.indeg[start] += 1
        self.indeg[end] -= 1
        self._track(start)
        self._track(end)

    def _search(self, v: int, forward: bool) -> Tuple[Optional[List[int]], Optional[List[int]]]:
        """Breadth-first search for the shortest improving path through v.

        ``forward`` follows arcs out of v (v gains an in-edge), otherwise arcs into v.
        Returns (improving path, neutral path); either may be None.
        """
        d = self.indeg[v]
        own = _phi_plus(d) if forward else _phi_minus(d)
        if own >= _NO_MOVE:
            return None, None
        parent: Dict[int, int] = {v: -1}
        queue = deque([v])
        neutral: Optional[int] = None
        seen_neutral = 0
        while queue:
            x = queue.popleft()
            for e in self.incident[x]:
                if forward and self.tail(e) != x:
                    continue
                if not forward and self.head(e) != x:
                    continue
                y = self.head(e) if forward else self.tail(e)
                if y in parent:
                    continue
                parent[y] = e
                gain = own + (_phi_minus(self.indeg[y]) if forward else _phi_plus(self.indeg[y]))
                if gain < 0:
                    return self._unwind(parent, y, forward), None
                if gain == 0:
                    seen_neutral += 1
                    if self.rng.random() * seen_neutral < 1.0:
                        neutral = y
                queue.append(y)
        return None, (self._unwind(parent, neutral, forward) if neutral is not None else None)

    def _unwind(self, parent: Dict[int, int], y: int, forward: bool) -> List[int]:
        path = []
        while parent[y] != -1:
            e = parent[y]
            path.append(e)
            y = self.tail(e) if forward else self.head(e)
        # collected from y back to v; arcs run v -> y when forward, y -> v otherwise
        return path[::-1] if forward else path

    def step(self) -> bool:
        """Make one move from a random defective vertex; True if the potential dropped."""
        v = self.defects[int(self.rng.integers(len(self.defects)))]
        best_gain, best_edge = 0, -1
        for e in self.incident[v]:
            tail, head = self.tail(e), self.head(e)
            gain = _phi_minus(self.indeg[head]) + _phi_plus(self.indeg[tail])
            if gain < best_gain:
                best_gain, best_edge = gain, e
        if best_edge >= 0:
            self.reverse([best_edge])
            return True
        neutral_paths = []
        directions = [True, False]
        if self.rng.random() < 0.5:
            directions.reverse()
        for forward in directions:
            improving, neutral = self._search(v, forward)
            if improving:
                self.reverse(improving)
                return True
            if neutral:
                neutral_paths.append(neutral)
        if neutral_paths:
            self.reverse(neutral_paths[int(self.rng.integers(len(neutral_paths)))])
        return False

    def orientation(self) -> Orientation:
        return Orientation.from_flags(self.p, self.flags)


def find_valid(
    p: Pairing,
    budget: int = DEFAULT_FIND_BUDGET,
    seed: int = 0,
    restart_after: Optional[int] = None,
) -> FindResult:
    """Search for a valid orientation by potential descent with path reversals.

    Restarts from a fresh random orientation after ``restart_after`` moves without a
    new best potential (default 50 n). Never raises on failure.
    """
    rng = make_rng(seed)
    restart_after = restart_after or DEFAULT_RESTART_FACTOR * p.n
    search = _LocalSearch(p, rng)
    best = search.potential
    history = [best]
    stagnant = 0
    restarts = 0
    steps = 0
    while steps < budget:
        if search.potential == 0:
            orientation = search.orientation()
            if validate(p, orientation).valid:
                logger.debug(f"find_valid: n={p.n} solved in {steps} steps, {restarts} restarts")
                return FindResult(True, orientation, 0, steps, restarts, history)
        steps += 1
        search.step()
        if search.potential < best:
            best = search.potential
            history.append(best)
            stagnant = 0
        else:
            stagnant += 1
        if stagnant > restart_after:
            restarts += 1
            stagnant = 0
            logger.info(f"find_valid: restart {restarts} at step {steps}, best potential {best}")
            search.randomize()
    if search.potential == 0 and validate(p, search.orientation()).valid:
        return FindResult(True, search.orientation(), 0, steps, restarts, history)
    logger.info(f"find_valid: budget {budget} exhausted, best potential {best}")
    return FindResult(False, None, best, steps, restarts, history)


@dataclass(frozen=True)
class OrientTrial:
    """One sampled graph and the finder's certified outcome on it."""

    graph: int
    certified: bool
    steps: int
    restarts: int
    best_potential: int

    def row(self) -> List:
        return [self.graph, self.certified, self.steps, self.restarts, self.best_potential]


def orient_trial(
    graph: int,
    n: int,
    graph_seed: int,
    search_seed: int,
    budget: int = DEFAULT_FIND_BUDGET,
    restart_after: Optional[int] = None,
    simple_attempts: Optional[int] = None,
) -> OrientTrial:
    """Sample a pairing (simple when ``simple_attempts`` is given), run find_valid and
    certify the result by validate and the mod-3 flow check."""
    if simple_attempts is None:
        p = sample_pairing(n, graph_seed)
    else:
        p = sample_simple_pairing(n, graph_seed, simple_attempts)
    found = find_valid(p, budget, search_seed, restart_after)
    ok = (
        found.success
        and validate(p, found.orientation).valid
        and mod3_balanced(p, found.orientation)
    )
    logger.debug(f"graph {graph}: success={ok} steps={found.steps}")
    return OrientTrial(graph, ok, found.steps, found.restarts, found.best_potential)


def _orient_job(job: Tuple) -> OrientTrial:
    return orient_trial(*job)


def orient_trials(
    n: int,
    trials: int,
    seed: int,
    budget: int = DEFAULT_FIND_BUDGET,
    restart_after: Optional[int] = None,
    simple_attempts: Optional[int] = None,
    workers: int = 1,
) -> List[OrientTrial]:
    """``orient_trial`` on ``trials`` graphs, each with its own derived seeds."""
    jobs = [
        (
            i,
            n,
            derive_seed(seed, f"orient/graph:{i}"),
            derive_seed(seed, f"orient/search:{i}"),
            budget,
            restart_after,
            simple_attempts,
        )
        for i in range(trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_orient_job, jobs))
    return [_orient_job(job) for job in jobs]
