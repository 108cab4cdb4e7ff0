"""The exponent f of the second-moment summand on the polytope J, and its maximum.

Coordinates are ordered (z, z00, z01, z10, z11). h(x) = x log x is extended by 0 at 0,
so f is continuous on all of J; g and the gradient need strictly interior points.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, root

from errors import DomainError
from seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

LOG_25_8 = math.log(25 / 8)
MEMBERSHIP_TOL = 1e-12
H_ZERO_TOL = 1e-300
HESSIAN_STEP = 1e-5

# B at the maximum, as printed: (1/10) times this integer matrix.
B_PRINTED = (
    (-92, 33, -33, -33, 33),
    (33, -117, -8, -8, 8),
    (-33, -8, -117, 8, -8),
    (-33, -8, 8, -117, -8),
    (33, 8, -8, -8, -117),
)
B_EXACT = tuple(tuple(Fraction(v, 10) for v in row) for row in B_PRINTED)
DET_B_EXACT = Fraction(-328125, 4)
EIGENVALUES_CLOSED = (
    (-37 - math.sqrt(697)) / 4,
    -12.5,
    -12.5,
    -12.5,
    (-37 + math.sqrt(697)) / 4,
)
G_TILDE_SCALED = 1562.5  # g(z~) (pi n)^(5/2) = 5^5 / 2
PRINTED_BOUNDARY_VALUE = math.log(5 / 8)


class ZVector(NamedTuple):
    z: float
    z00: float
    z01: float
    z10: float
    z11: float

    def in_J(self, tol: float = MEMBERSHIP_TOL) -> bool:
        return (
            min(self) >= -tol
            and self.z <= 0.5 + tol
            and max(self.z00, self.z11) <= self.z + tol
            and max(self.z01, self.z10) <= 0.5 - self.z + tol
        )

    def is_interior(self) -> bool:
        return min(_slacks(self)) > 0

    def swapped(self) -> "ZVector":
        """Exchange the roles of the two orientations."""
        return ZVector(self.z, self.z11, self.z10, self.z01, self.z00)


class YVector(NamedTuple):
    """A displacement from the maximum point z~."""

    y: float
    y00: float
    y01: float
    y10: float
    y11: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self))

    def point(self) -> ZVector:
        return ZVector(*(a + b for a, b in zip(Z_TILDE, self)))


Z_TILDE = ZVector(0.25, 0.05, 0.05, 0.05, 0.05)
Z_TILDE_EXACT = (Fraction(1, 4),) + (Fraction(1, 20),) * 4


@dataclass(frozen=True)
class HessianB:
    """B = (1/2) of the Hessian of f, so that f(z~ + y) = f(z~) + y'By + O(|y|^3)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (5, 5):
            raise DomainError(f"HessianB must be 5x5, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    def quadratic_form(self, y: Sequence[float]) -> float:
        v = np.asarray(y, dtype=float)
        return float(v @ self.matrix @ v)

    def max_deviation_from(self, other: np.ndarray) -> float:
        return float(np.max(np.abs(self.matrix - np.asarray(other, dtype=float))))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: Tuple[float, ...]
    determinant: Fraction

    @property
    def negative_definite(self) -> bool:
        return max(self.eigenvalues) < 0

    def to_dict(self) -> Dict:
        return {
            "eigenvalues": list(self.eigenvalues),
            "determinant": f"{self.determinant.numerator}/{self.determinant.denominator}",
            "negative_definite": self.negative_definite,
        }


@dataclass
class LocalMaximum:
    point: ZVector
    value: float
    starts: int = 1

    def to_dict(self) -> Dict:
        return {"point": list(self.point), "value": self.value, "starts": self.starts}


@dataclass
class BoundaryCandidate:
    name: str
    printed_point: ZVector
    evaluated_point: ZVector
    printed_value: float
    computed_value: float
    notes: List[str] = field(default_factory=list)

    @property
    def below_maximum(self) -> bool:
        return self.computed_value < LOG_25_8

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "printed_point": list(self.printed_point),
            "evaluated_point": list(self.evaluated_point),
            "printed_value": self.printed_value,
            "computed_value": self.computed_value,
            "below_maximum": self.below_maximum,
            "notes": self.notes,
        }


@dataclass
class MaximizeResult:
    """Interior local maxima of f (best first) and the evaluated boundary candidates."""

    maxima: List[LocalMaximum]
    boundary: List[BoundaryCandidate]

    @property
    def best(self) -> LocalMaximum:
        return self.maxima[0]

    @property
    def highest_reported(self) -> float:
        return max([m.value for m in self.maxima] + [c.computed_value for c in self.boundary])

    def to_dict(self) -> Dict:
        return {
            "maxima": [m.to_dict() for m in self.maxima],
            "boundary": [c.to_dict() for c in self.boundary],
        }


def _h(x):
    x = np.asarray(x, dtype=float)
    safe = np.where(x > H_ZERO_TOL, x, 1.0)
    return np.where(x > H_ZERO_TOL, x * np.log(safe), 0.0)


def _slacks(zv: Sequence[float]) -> Tuple[float, ...]:
    z, z00, z01, z10, z11 = zv
    return (z00, z01, z10, z11, z - z00, z - z11, 0.5 - z - z01, 0.5 - z - z10)


def _as_point(zv: Sequence[float]) -> ZVector:
    point = ZVector(*(float(v) for v in zv))
    if not point.in_J():
        raise DomainError(f"{tuple(point)} is not in J")
    return point


def _require_interior(zv: Sequence[float]) -> ZVector:
    point = _as_point(zv)
    if not point.is_interior():
        raise DomainError(f"{tuple(point)} is on the boundary of J")
    return point


def b_of(zv: Sequence[float]) -> float:
    z, z00, z01, z10, z11 = _as_point(zv)
    return z + 1 + z00 - z01 - z10 + z11


def _f_array(zs: np.ndarray) -> np.ndarray:
    """f on an (..., 5) array of points of J, with no membership check."""
    z, z00, z01, z10, z11 = np.moveaxis(np.asarray(zs, dtype=float), -1, 0)
    b = z + 1 + z00 - z01 - z10 + z11
    return (
        (2.25 - z00 - z01 - z10 - z11) * math.log(4.0)
        + math.log(5.0)
        - 5 * math.log(5.0)
        + 2.5 * math.log(2.5)
        + _h(b)
        + _h(2.5 - b)
        - _h(z00)
        - _h(z01)
        - _h(z10)
        - _h(z11)
        - _h(z - z00)
        - _h(z - z11)
        - _h(0.5 - z - z01)
        - _h(0.5 - z - z10)
    )


def f_of(zv: Sequence[float]) -> float:
    return float(_f_array(np.asarray(_as_point(zv))))


def g_of(zv: Sequence[float], n: float) -> float:
    """The polynomial (Stirling) factor; requires an interior point."""
    z, z00, z01, z10, z11 = _require_interior(zv)
    b = z + 1 + z00 - z01 - z10 + z11
    denominator = z00 * z01 * z10 * z11 * (z - z00) * (z - z11) * (1 - 2 * z - 2 * z10) * (
        1 - 2 * z - 2 * z01
    )
    return math.sqrt(b * (5 - 2 * b) / denominator) / (math.sqrt(32) * (math.pi * n) ** 2.5)


def _partial_ratios(zv: Sequence[float]) -> Tuple[Tuple[float, float], ...]:
    """(numerator, denominator) with exp(df/dz_i) = numerator / denominator, per coordinate."""
    z, z00, z01, z10, z11 = zv
    b = z + 1 + z00 - z01 - z10 + z11
    c = 5 - 2 * b
    return (
        (2 * b * (0.5 - z - z01) * (0.5 - z - z10), c * (z - z00) * (z - z11)),
        ((z - z00) * b, 2 * z00 * c),
        (c * (1 - 2 * z - 2 * z01), 16 * b * z01),
        (c * (1 - 2 * z - 2 * z10), 16 * b * z10),
        ((z - z11) * b, 2 * z11 * c),
    )


def grad_f(zv: Sequence[float]) -> np.ndarray:
    point = _require_interior(zv)
    return np.array([math.log(num / den) for num, den in _partial_ratios(point)])


def dz00_printed(zv: Sequence[float]) -> float:
    """df/dz00 written out exactly as the closed form is usually displayed."""
    z, z00, z01, z10, z11 = _require_interior(zv)
    return math.log(
        (z - z00)
        * (z + 1 + z00 - z01 - z10 + z11)
        / (2 * z00 * (3 - 2 * z - 2 * z00 + 2 * z01 + 2 * z10 - 2 * z11))
    )


def stationary_polys(zv: Sequence[float]) -> Dict[str, float]:
    """P, P00, P01, P10, P11: numerator minus denominator of each exp(partial)."""
    names = ("P", "P00", "P01", "P10", "P11")
    return {name: num - den for name, (num, den) in zip(names, _partial_ratios(zv))}


def p6_of(zv: Sequence[float]) -> float:
    z, z00, z01, _, _ = zv
    return 5 * z - 5 * z00 - 10 * z**2 + 10 * z * z00 - 10 * z01 * z - 150 * z01 * z00


def p7_of(z: float, z00: float) -> float:
    return (
        -60 * z**3
        - 480 * z**2 * z00
        - 120 * z * z00
        - 1500 * z * z00**2
        + 2040 * z00**2
        - 1800 * z00**3
    )


def p7_factored_at_quarter(z00: float) -> float:
    """P7(1/4, z00) = -(15/16)(20 z00 - 1)(96 z00^2 - 84 z00 - 1)."""
    return -15 / 16 * (20 * z00 - 1) * (96 * z00**2 - 84 * z00 - 1)


def p01_star_at_tilde(z01: float) -> float:
    """P01 with z = 1/4, z00 = z11 = 1/20 and z10 = z01."""
    return stationary_polys((0.25, 0.05, z01, z01, 0.05))["P01"]


def f_bar(z01: float, z10: float) -> float:
    """f restricted to the face z = z00 = z11 = 0."""
    if not (0 <= z01 <= 0.5 and 0 <= z10 <= 0.5):
        raise DomainError(f"f_bar needs arguments in [0, 1/2]^2, got ({z01}, {z10})")
    return f_of((0.0, 0.0, z01, z10, 0.0))


def f_bar_diagonal_slope(t: float) -> float:
    """d f_bar(t, t) / dt = 2 log((3 + 4t) / (16 t)) for 0 < t < 1/2."""
    if not 0 < t < 0.5:
        raise DomainError(f"diagonal slope needs 0 < t < 1/2, got {t}")
    return 2 * math.log((3 + 4 * t) / (16 * t))


def diagonal_scan(points: int = 2001) -> List[Tuple[float, float]]:
    """Stationary points of t -> f_bar(t, t) on (0, 1/2) located by sign changes of a
    central-difference slope, each refined by bisection; returns (t, f_bar(t, t))."""
    ts = np.linspace(0, 0.5, points + 2)[1:-1]
    step = 1e-7

    def slope(t: float) -> float:
        return (f_bar(t + step, t + step) - f_bar(t - step, t - step)) / (2 * step)

    slopes = [slope(t) for t in ts]
    found = []
    for i in range(len(ts) - 1):
        if slopes[i] == 0 or slopes[i] * slopes[i + 1] < 0:
            lo, hi = ts[i], ts[i + 1]
            for _ in range(60):
                mid = (lo + hi) / 2
                if slope(lo) * slope(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            t = (lo + hi) / 2
            found.append((t, f_bar(t, t)))
    return found


def f_bar_maximize(n_starts: int = 32, seed: int = 0) -> Tuple[Tuple[float, float], float]:
    """Multistart bounded maximisation of f_bar over [0, 1/2]^2."""
    rng = make_rng(derive_seed(seed, "f_bar"))
    best: Optional[Tuple[Tuple[float, float], float]] = None
    for x0 in rng.uniform(0, 0.5, size=(n_starts, 2)):
        res = minimize(
            lambda v: -f_bar(float(v[0]), float(v[1])),
            x0,
            method="L-BFGS-B",
            bounds=[(0.0, 0.5), (0.0, 0.5)],
        )
        candidate = ((float(res.x[0]), float(res.x[1])), -float(res.fun))
        if best is None or candidate[1] > best[1]:
            best = candidate
    assert best is not None
    logger.debug(f"f_bar maximum {best[1]:.12g} at {best[0]}")
    return best


def _from_cube(u: Sequence[float]) -> ZVector:
    """Map the unit cube onto J: every point of [0,1]^5 lands in J."""
    u0, u1, u2, u3, u4 = (min(max(float(v), 0.0), 1.0) for v in u)
    z = u0 / 2
    return ZVector(z, u1 * z, u2 * (0.5 - z), u3 * (0.5 - z), u4 * z)


def _polish(point: ZVector) -> ZVector:
    """Newton polish on grad_f = 0; keeps the input unless f improves."""
    if min(_slacks(point)) <= 4 * HESSIAN_STEP:
        return point

    def usable(v: np.ndarray) -> bool:
        return min(_slacks(v)) > 4 * HESSIAN_STEP

    def gradient(v: np.ndarray) -> np.ndarray:
        return grad_f(v) if usable(v) else np.full(5, 1e3)

    def jacobian(v: np.ndarray) -> np.ndarray:
        return 2 * hessian_at(v).matrix if usable(v) else np.eye(5)

    sol = root(gradient, np.asarray(point), jac=jacobian, method="hybr")
    polished = ZVector(*(float(v) for v in sol.x))
    if sol.success and polished.is_interior() and f_of(polished) >= f_of(point):
        return polished
    return point


def _local_search(u0: np.ndarray) -> ZVector:
    def objective(u: np.ndarray) -> float:
        return -float(_f_array(np.asarray(_from_cube(u))))

    res = minimize(objective, u0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * 5)
    if not res.success:
        res = minimize(objective, res.x, method="Nelder-Mead", options={"xatol": 1e-12})
    return _polish(_from_cube(res.x))


def maximize_f(n_starts: int = 100, tol: float = 1e-6, seed: int = 0) -> MaximizeResult:
    """Local maxima of f over J from interior random starts, best first, together with
    the two boundary candidates of boundary_report.

    Converged points within ``tol`` of each other are merged; ties in value are broken
    lexicographically on the coordinates.
    """
    if n_starts < 1:
        raise DomainError(f"n_starts must be >= 1, got {n_starts}")
    found: List[LocalMaximum] = []
    for i in range(n_starts):
        rng = make_rng(derive_seed(seed, f"maximize/start:{i}"))
        point = _local_search(rng.uniform(0.05, 0.95, size=5))
        value = f_of(point)
        for known in found:
            if max(abs(a - b) for a, b in zip(known.point, point)) < tol:
                known.starts += 1
                break
        else:
            found.append(LocalMaximum(point, value))
    found.sort(key=lambda m: (-round(m.value, 12), tuple(m.point)))
    logger.debug(f"{len(found)} distinct maxima from {n_starts} starts; best {found[0].value:.12g}")
    return MaximizeResult(found, boundary_report())


def sample_uniform_J(samples: int, seed: int) -> np.ndarray:
    """Uniform points of J: z/ (1/2) ~ Beta(3, 3), the rest uniform on their ranges."""
    rng = make_rng(derive_seed(seed, "uniform_J"))
    z = rng.beta(3, 3, size=samples) / 2
    u = rng.uniform(size=(samples, 4))
    return np.column_stack((z, u[:, 0] * z, u[:, 1] * (0.5 - z), u[:, 2] * (0.5 - z), u[:, 3] * z))


def boundary_distance(zv: Sequence[float]) -> float:
    """Smallest slack among the eight constraints defining J."""
    return min(_slacks(zv))


def gradient_check(points: int, seed: int, step: float = 1e-6, margin: float = 1e-2) -> float:
    """Largest |grad_f - central difference of f| over ``points`` uniform interior points
    at least ``margin`` away from the boundary."""
    worst = 0.0
    checked = 0
    round_ = 0
    while checked < points:
        for row in sample_uniform_J(points, derive_seed(seed, f"grad:{round_}")):
            zv = ZVector(*(float(v) for v in row))
            if checked == points or boundary_distance(zv) < margin:
                continue
            analytic = grad_f(zv)
            for i in range(5):
                e = np.zeros(5)
                e[i] = step
                up = f_of(np.asarray(zv) + e)
                down = f_of(np.asarray(zv) - e)
                worst = max(worst, abs((up - down) / (2 * step) - analytic[i]))
            checked += 1
        round_ += 1
    return worst


def max_f_on_sample(samples: int, seed: int, chunk: int = 100_000) -> float:
    """Largest f over ``samples`` uniform points of J."""
    best = -math.inf
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        chunk_points = sample_uniform_J(size, derive_seed(seed, f"chunk:{done}"))
        best = max(best, float(_f_array(chunk_points).max()))
        done += size
    return best


def hessian_at(zv: Sequence[float], step: float = HESSIAN_STEP) -> HessianB:
    """B = (1/2) d^2 f by Richardson-extrapolated central differences of grad_f."""
    point = np.asarray(_require_interior(zv))
    if min(_slacks(point)) <= 2 * step:
        raise DomainError(f"{tuple(point)} is too close to the boundary for step {step}")

    def central(h: float) -> np.ndarray:
        cols = []
        for i in range(5):
            e = np.zeros(5)
            e[i] = h
            cols.append((grad_f(point + e) - grad_f(point - e)) / (2 * h))
        return np.column_stack(cols)

    second = (4 * central(step / 2) - central(step)) / 3
    return HessianB((second + second.T) / 4)


def _exact_determinant(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    a = [list(r) for r in rows]
    size = len(a)
    det = Fraction(1)
    for col in range(size):
        pivot = next((r for r in range(col, size) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, size):
            factor = a[r][col] / a[col][col]
            for c in range(col, size):
                a[r][c] -= factor * a[col][c]
    return det


def spectrum_B() -> Spectrum:
    """Eigenvalues (ascending) and exact determinant of the printed B."""
    eigenvalues = np.linalg.eigvalsh(np.array(B_EXACT, dtype=float))
    return Spectrum(tuple(float(v) for v in eigenvalues), _exact_determinant(B_EXACT))


def laplace_coefficient(n: float = 1.0) -> float:
    """g(z~)(pi n)^(5/2) / sqrt|det B|, which is 25 / sqrt(21) for every n."""
    scaled = g_of(Z_TILDE, n) * (math.pi * n) ** 2.5
    return scaled / math.sqrt(abs(float(spectrum_B().determinant)))


def laplace_coefficient_squared() -> Fraction:
    return Fraction(3125, 2) ** 2 / abs(_exact_determinant(B_EXACT))


def taylor_residual(y: Sequence[float]) -> float:
    """f(z~ + y) - log(25/8) - y'By with the printed B."""
    b = HessianB(np.array(B_EXACT, dtype=float))
    return f_of(YVector(*y).point()) - LOG_25_8 - b.quadratic_form(y)


def boundary_report() -> List[BoundaryCandidate]:
    """The two boundary local-maximum candidates, printed against computed values.

    (0, 1/2, 0, 0, 1/2) has z00 > z and so lies outside J; the point reached on the
    z = 1/2 face, (1/2, 1/2, 0, 0, 1/2), is evaluated in its place.
    """
    face_zero = ZVector(0.0, 0.0, 0.5, 0.5, 0.0)
    printed_half = ZVector(0.0, 0.5, 0.0, 0.0, 0.5)
    face_half = ZVector(0.5, 0.5, 0.0, 0.0, 0.5)
    candidates = [
        BoundaryCandidate(
            "z=0 corner", face_zero, face_zero, PRINTED_BOUNDARY_VALUE, f_of(face_zero)
        ),
        BoundaryCandidate(
            "z=1/2 corner",
            printed_half,
            face_half,
            PRINTED_BOUNDARY_VALUE,
            f_of(face_half),
            ["printed point is outside J; evaluated at (1/2, 1/2, 0, 0, 1/2)"],
        ),
    ]
    for c in candidates:
        if not math.isclose(c.computed_value, c.printed_value, abs_tol=1e-9):
            c.notes.append(
                f"computed {c.computed_value:.12g} differs from printed {c.printed_value:.12g}"
            )
            logger.info(f"Boundary candidate {c.name}: {c.notes[-1]}")
    return candidates
