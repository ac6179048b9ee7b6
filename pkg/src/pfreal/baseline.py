"""Random-polynomial baseline: Kac's expected real-root count and Sturm counting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from pfreal.distribution import EmpiricalDistribution, trial_rng

LEADING_TOL = 1e-12
DROP_TOL = 1e-12
MAX_DEGREE = 256


class QuadratureError(RuntimeError):
    pass


class SturmDegeneracy(ArithmeticError):
    """The Sturm chain collapsed early, so the input is numerically not squarefree."""


@dataclass(frozen=True)
class RealPolynomial:
    coefficients: tuple[float, ...]  # c_0 .. c_N

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if not c:
            raise ValueError("empty coefficient list")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polyval(self.coefficients[::-1], x)

    def scaled(self, s: float) -> "RealPolynomial":
        return RealPolynomial(tuple(s * c for c in self.coefficients))

    @classmethod
    def random(cls, N: int, rng: np.random.Generator) -> "RealPolynomial":
        """Gaussian coefficients, redrawing the leading one until ``|c_N| >= 1e-12``."""
        if N < 1:
            raise ValueError("degree must be >= 1")
        c = rng.standard_normal(N + 1)
        while abs(c[-1]) < LEADING_TOL:
            c[-1] = rng.standard_normal()
        return cls(tuple(c))


def _kac_integrand(t: float, N: int) -> float:
    a = 1.0 / (1.0 - t * t) ** 2
    tn = t ** (2 * N)
    b = (N + 1) ** 2 * tn / (1.0 - tn * t * t) ** 2
    return math.sqrt(max(a - b, 0.0))


def _kac_limit(N: int) -> float:
    # value of the integrand at t = 1 (removable singularity)
    return math.sqrt(N * (N + 2) / 12.0)


def kac_expected(N: int, tol: float = 1e-4) -> float:
    """Expected number of real roots of a degree-``N`` polynomial with iid N(0,1) coefficients.

    The integrand is even and invariant under ``t -> 1/t``, so the integral
    over the real line is four times the integral over ``[0, 1]``. The last
    stretch ``[1 - d, 1]`` is integrated with the trapezoid rule against the
    analytic limit at ``t = 1``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    d = min(1e-3, 0.01 / N)
    val, err = integrate.quad(_kac_integrand, 0.0, 1.0 - d, args=(N,),
                              epsabs=tol * 1e-3, epsrel=1e-10, limit=500)
    if not err < tol * math.pi / 4:
        raise QuadratureError(f"quadrature error estimate {err:.2e} exceeds {tol:.1e}")
    tail = 0.5 * d * (_kac_integrand(1.0 - d, N) + _kac_limit(N))
    return 4.0 / math.pi * (val + tail)


def _normalize(c: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(c))
    return c / m if m > 0 else c


def _trim(c: np.ndarray, tol: float) -> np.ndarray:
    """Drop leading (high-order) coefficients below ``tol``; ``c`` is high-to-low."""
    k = 0
    while k < len(c) - 1 and abs(c[k]) <= tol:
        k += 1
    return c[k:]


def sturm_chain(p: RealPolynomial) -> list[np.ndarray]:
    """Sturm sequence (high-to-low coefficient arrays), each member renormalized."""
    c = _normalize(np.array(p.coefficients[::-1]))
    chain = [c, _normalize(np.polyder(c))]
    while len(chain[-1]) > 1:
        _, r = np.polydiv(chain[-2], chain[-1])
        r = _trim(-r, DROP_TOL)
        if np.max(np.abs(r)) <= DROP_TOL:
            raise SturmDegeneracy(f"remainder vanished at degree {len(chain[-1]) - 1}")
        chain.append(_normalize(r))
    return chain


def _variations(signs) -> int:
    s = [v for v in signs if v != 0]
    return sum(1 for a, b in zip(s, s[1:]) if a != b)


def sturm_real_root_count(p: RealPolynomial) -> int:
    """Number of distinct real roots by sign variations of the Sturm chain at -inf and +inf."""
    if p.degree < 1:
        raise ValueError("need degree >= 1")
    if p.degree > MAX_DEGREE:
        raise ValueError(f"degree above the supported {MAX_DEGREE}")
    if abs(p.coefficients[-1]) == 0.0:
        raise ValueError("leading coefficient is zero")
    chain = sturm_chain(p)
    at_pos = [np.sign(q[0]) for q in chain]
    at_neg = [np.sign(q[0]) * (-1) ** (len(q) - 1) for q in chain]
    return _variations(at_neg) - _variations(at_pos)


def cauchy_bound(p: RealPolynomial) -> float:
    c = np.asarray(p.coefficients)
    return 1.0 + float(np.max(np.abs(c[:-1])) / abs(c[-1]))


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _real_roots_monotone(c: np.ndarray, lo: float, hi: float) -> list[float]:
    """Real roots in ``[lo, hi]`` of the high-to-low polynomial ``c``, via roots of its derivative."""
    if len(c) <= 1:
        return []
    f = lambda x: float(np.polyval(c, x))
    crit = [x for x in _real_roots_monotone(np.polyder(c), lo, hi) if lo < x < hi]
    knots = [lo, *crit, hi]
    roots = []
    for a, b in zip(knots, knots[1:]):
        fa, fb = f(a), f(b)
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(_bisect(f, a, b))
    if f(hi) == 0:
        roots.append(hi)
    return sorted(set(roots))


def bisection_root_count(p: RealPolynomial, bound: float = 1e6) -> int:
    """Independent check: sign changes between critical points on a Cauchy bracket."""
    r = min(cauchy_bound(p), bound)
    c = np.array(p.coefficients[::-1])
    return len(_real_roots_monotone(c / np.max(np.abs(c)), -r, r))


def random_poly_distribution(N: int, trials: int, seed: int | np.random.Generator = 0,
                             max_redraws: int = 3) -> EmpiricalDistribution:
    """Histogram of real-root counts of Gaussian polynomials of degree ``N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if trials < 1:
        raise ValueError("need at least one trial")
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    counts = []
    redraws = 0
    for i in range(trials):
        rng = trial_rng(seed, i)
        for _ in range(max_redraws + 1):
            try:
                counts.append(sturm_real_root_count(RealPolynomial.random(N, rng)))
                break
            except SturmDegeneracy:
                redraws += 1
        else:
            raise SturmDegeneracy(f"trial {i}: Sturm chain degenerate after {max_redraws} redraws")
    dist = EmpiricalDistribution.from_counts(counts)
    dist.extra.update({"degree": N, "kac_expected": kac_expected(N), "redraws": redraws})
    return dist
