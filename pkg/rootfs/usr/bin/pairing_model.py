"""Pairing model P(n, 5): uniform pairings, induced multigraphs and short cycle counts."""
import json
import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Dict, Iterator, List, Optional, Tuple

import networkx as nx
import numpy as np

from errors import DomainError, RetryExhaustedError
from seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

DEGREE = 5
DEFAULT_CYCLE_K_MAX = 8


def _check_even_n(n: int) -> None:
    if not isinstance(n, int) or n < 2 or n % 2:
        raise DomainError(f"n must be an even integer >= 2, got {n!r}")


@dataclass(frozen=True)
class Pairing:
    """A perfect matching of the DEGREE*n points; point p lives in vertex p // DEGREE.

    Pairs are stored canonically as (a, b) with a < b, sorted by a.
    """

    n: int
    pairs: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        _check_even_n(self.n)
        canonical = tuple(sorted((min(a, b), max(a, b)) for a, b in self.pairs))
        object.__setattr__(self, "pairs", canonical)
        if len(canonical) != self.num_points // 2:
            raise DomainError(
                f"expected {self.num_points // 2} pairs for n={self.n}, got {len(canonical)}"
            )
        seen = [False] * self.num_points
        for a, b in canonical:
            for p in (a, b):
                if not 0 <= p < self.num_points or seen[p]:
                    raise DomainError(f"point {p} is out of range or paired twice")
                seen[p] = True

    @property
    def num_points(self) -> int:
        return DEGREE * self.n

    @staticmethod
    def vertex_of(point: int) -> int:
        return point // DEGREE

    def partner(self) -> List[int]:
        """Return the partner of every point as a list indexed by point."""
        mate = [0] * self.num_points
        for a, b in self.pairs:
            mate[a] = b
            mate[b] = a
        return mate

    def to_dict(self) -> Dict:
        return {"n": self.n, "pairs": [[a, b] for a, b in self.pairs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Dict) -> "Pairing":
        try:
            n = int(data["n"])
            pairs = tuple((int(a), int(b)) for a, b in data["pairs"])
        except (KeyError, TypeError, ValueError) as e:
            raise DomainError(f"malformed pairing document: {e}") from e
        return cls(n, pairs)

    @classmethod
    def from_json(cls, text: str) -> "Pairing":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class MultiGraph:
    """A DEGREE-regular multigraph given as (u, v, multiplicity) with u <= v.

    A loop (u, u) contributes 2 to the degree of u.
    """

    n: int
    edges: Tuple[Tuple[int, int, int], ...]

    def __post_init__(self):
        merged: Counter = Counter()
        for u, v, m in self.edges:
            if m <= 0:
                raise DomainError(f"edge ({u},{v}) has non-positive multiplicity {m}")
            merged[(min(u, v), max(u, v))] += m
        object.__setattr__(
            self, "edges", tuple((u, v, m) for (u, v), m in sorted(merged.items()))
        )
        degree = [0] * self.n
        for u, v, m in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"edge ({u},{v}) outside vertex range 0..{self.n - 1}")
            degree[u] += m
            degree[v] += m
        bad = [v for v, d in enumerate(degree) if d != DEGREE]
        if bad:
            raise DomainError(f"vertices {bad[:10]} do not have degree {DEGREE}")

    @property
    def num_edges(self) -> int:
        return sum(m for _, _, m in self.edges)

    def multiplicity(self) -> Dict[Tuple[int, int], int]:
        return {(u, v): m for u, v, m in self.edges}

    def neighbours(self) -> List[Dict[int, int]]:
        """Non-loop adjacency with edge multiplicities, indexed by vertex."""
        adjacency: List[Dict[int, int]] = [{} for _ in range(self.n)]
        for u, v, m in self.edges:
            if u != v:
                adjacency[u][v] = m
                adjacency[v][u] = m
        return adjacency

    def to_dict(self) -> Dict:
        return {"n": self.n, "edges": [[u, v, m] for u, v, m in self.edges]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Dict) -> "MultiGraph":
        return cls(int(data["n"]), tuple((int(u), int(v), int(m)) for u, v, m in data["edges"]))

    def to_networkx(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(self.n))
        for u, v, m in self.edges:
            for _ in range(m):
                graph.add_edge(u, v)
        return graph


@dataclass(frozen=True)
class CycleCountVector:
    """Counts X_1..X_K of cycles of each length."""

    counts: Tuple[int, ...]

    @property
    def k_max(self) -> int:
        return len(self.counts)

    def __getitem__(self, k: int) -> int:
        if not 1 <= k <= len(self.counts):
            raise DomainError(f"cycle length {k} outside 1..{len(self.counts)}")
        return self.counts[k - 1]


def num_pairings(s: int) -> Fraction:
    """M(s) = s! / ((s/2)! 2^(s/2)), the number of perfect matchings of s points."""
    if not isinstance(s, int) or s < 2 or s % 2:
        raise DomainError(f"number of points must be even and >= 2, got {s!r}")
    return Fraction(factorial(s), factorial(s // 2) * 2 ** (s // 2))


def _draw_pairs(n: int, seed: int, simple_only: bool = False) -> Optional[List[Tuple[int, int]]]:
    """Sequential matching behind the samplers.

    The lowest-indexed unmatched point is matched to a uniformly chosen unmatched
    partner. The s/2 partner draws have known ranges s-1, s-3, ..., 1, so they are
    taken from the generator in one vectorised call. With ``simple_only`` the draw
    stops at the first loop or repeated edge and returns None; it returns a pairing
    exactly when the full draw would have been simple.
    """
    s = DEGREE * n
    rng = make_rng(seed)
    draws = rng.integers(0, np.arange(s - 1, 0, -2)).tolist()

    pool = list(range(s))
    where = list(range(s))
    matched = bytearray(s)
    edges = set()

    def take(point: int) -> None:
        i = where[point]
        last = pool.pop()
        if last != point:
            pool[i] = last
            where[last] = i

    pairs = []
    t = 0
    for a in range(s):
        if matched[a]:
            continue
        take(a)
        b = pool[draws[t]]
        t += 1
        take(b)
        matched[b] = 1
        if simple_only:
            # every point below a is matched, so a < b and u <= v
            u, v = a // DEGREE, b // DEGREE
            if u == v or u * n + v in edges:
                return None
            edges.add(u * n + v)
        pairs.append((a, b))
    return pairs


def sample_pairing(n: int, seed: int) -> Pairing:
    """Draw a uniform pairing of P(n, 5)."""
    _check_even_n(n)
    return Pairing(n, tuple(_draw_pairs(n, seed)))


def enumerate_pairings(n: int) -> Iterator[Pairing]:
    """Yield every pairing of P(n, 5) exactly once (M(5n) of them; use for n = 2)."""
    _check_even_n(n)

    def match(points: List[int]) -> Iterator[List[Tuple[int, int]]]:
        if not points:
            yield []
            return
        first, rest = points[0], points[1:]
        for i, other in enumerate(rest):
            for tail in match(rest[:i] + rest[i + 1 :]):
                yield [(first, other)] + tail

    for pairs in match(list(range(DEGREE * n))):
        yield Pairing(n, tuple(pairs))


def to_multigraph(p: Pairing) -> MultiGraph:
    """Collapse each pair {a, b} to the edge {a // 5, b // 5}."""
    counts = Counter(
        (min(a // DEGREE, b // DEGREE), max(a // DEGREE, b // DEGREE)) for a, b in p.pairs
    )
    return MultiGraph(p.n, tuple((u, v, m) for (u, v), m in counts.items()))


def is_simple(g: MultiGraph) -> bool:
    return all(u != v and m == 1 for u, v, m in g.edges)


def _count_long_cycles(g: MultiGraph, k: int) -> int:
    # Start each cycle at its smallest vertex and break the reflection by
    # requiring path[1] < path[-1]; parallel edges multiply the count.
    adjacency = g.neighbours()
    total = 0

    def extend(path: List[int], on_path: set, weight: int) -> None:
        nonlocal total
        start, last = path[0], path[-1]
        if len(path) == k:
            closing = adjacency[last].get(start)
            if closing and path[1] < last:
                total += weight * closing
            return
        for nxt, m in adjacency[last].items():
            if nxt > start and nxt not in on_path:
                on_path.add(nxt)
                path.append(nxt)
                extend(path, on_path, weight * m)
                path.pop()
                on_path.discard(nxt)

    for start in range(g.n):
        extend([start], {start}, 1)
    return total


def count_k_cycles(g: MultiGraph, k: int) -> int:
    """X_k: loops for k=1, pairs of parallel edges for k=2, k-vertex cycles otherwise."""
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"cycle length must be a positive integer, got {k!r}")
    if k == 1:
        return sum(m for u, v, m in g.edges if u == v)
    if k == 2:
        return sum(comb(m, 2) for u, v, m in g.edges if u != v)
    if k > g.n:
        return 0
    return _count_long_cycles(g, k)


def count_cycles(g: MultiGraph, k_max: int = DEFAULT_CYCLE_K_MAX) -> CycleCountVector:
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    return CycleCountVector(tuple(count_k_cycles(g, k) for k in range(1, k_max + 1)))


def sample_simple_pairing(n: int, seed: int, max_attempts: int) -> Pairing:
    """Rejection-sample a pairing whose multigraph is simple.

    Attempts are abandoned at the first loop or repeated edge, which rejects exactly
    the draws a full is_simple test would reject.
    """
    _check_even_n(n)
    if n <= DEGREE:
        # a simple DEGREE-regular graph needs at least DEGREE + 1 vertices
        logger.warning(f"No simple {DEGREE}-regular graph exists on {n} vertices")
        raise RetryExhaustedError(f"simple {DEGREE}-regular graph on {n} vertices", 0)
    for attempt in range(max_attempts):
        pairs = _draw_pairs(n, derive_seed(seed, f"simple/attempt:{attempt}"), simple_only=True)
        if pairs is not None:
            logger.debug(f"Simple pairing at n={n} accepted after {attempt + 1} attempts")
            return Pairing(n, tuple(pairs))
    raise RetryExhaustedError(f"simple {DEGREE}-regular graph on {n} vertices", max_attempts)


def sample_simple_regular(n: int, seed: int, max_attempts: int) -> MultiGraph:
    """A uniform simple 5-regular graph on n vertices, by rejection on is_simple."""
    return to_multigraph(sample_simple_pairing(n, seed, max_attempts))


def edge_connectivity(g: MultiGraph) -> int:
    """Edge connectivity of a simple multigraph (via networkx)."""
    if not is_simple(g):
        raise DomainError("edge connectivity is only reported for simple graphs")
    return nx.edge_connectivity(nx.Graph(g.to_networkx()))


def simple_acceptance(n: int, seed: int, samples: int) -> Tuple[int, int]:
    """Count simple multigraphs among ``samples`` pairings; returns (simple, samples)."""
    _check_even_n(n)
    hits = 0
    for i in range(samples):
        if _draw_pairs(n, derive_seed(seed, f"accept:{i}"), simple_only=True) is not None:
            hits += 1
    return hits, samples


def cycle_statistics(
    n: int, seed: int, samples: int, k_max: int = 2
) -> Dict[int, Tuple[float, float]]:
    """Sample mean and standard error of X_1..X_k_max over ``samples`` pairings."""
    _check_even_n(n)
    rows: List[List[int]] = []
    for i in range(samples):
        g = to_multigraph(sample_pairing(n, derive_seed(seed, f"cycles:{i}")))
        rows.append([count_k_cycles(g, k) for k in range(1, k_max + 1)])
    table = np.asarray(rows, dtype=float)
    means = table.mean(axis=0)
    errors = table.std(axis=0, ddof=1) / np.sqrt(samples) if samples > 1 else np.zeros(k_max)
    return {k: (float(means[k - 1]), float(errors[k - 1])) for k in range(1, k_max + 1)}
