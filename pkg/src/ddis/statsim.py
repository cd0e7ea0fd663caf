"""Monte-Carlo expectations of the set measures for 1-D Gaussian point sets.

Template points P are drawn from one Gaussian, target points Q from another;
averaging a measure over many draws approximates its expectation as a
function of Q's mean and spread.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import measures
from .errors import InputError

STAT_MEASURES = ("ssd", "bbs", "dis", "ddis")


@dataclass(frozen=True)
class GaussianSpec:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        # sigma == 0 is accepted as a point mass so grids may include that edge
        if not self.sigma >= 0:
            raise InputError(f"sigma must be >= 0, got {self.sigma}")


class DeformationMode(str, enum.Enum):
    SMALL = "small"  # both sets indexed in ascending order
    LARGE = "large"  # P ascending, Q descending
    IGNORE = "ignore"  # no locations, r = 0


@dataclass(frozen=True)
class ExpectationGrid:
    measure: str
    mode: DeformationMode
    mu_values: np.ndarray
    sigma_values: np.ndarray
    cells: np.ndarray  # (len(mu_values), len(sigma_values))
    trials: int
    n: int
    m: int
    seed: int
    raw: np.ndarray | None = None  # unnormalized mean SSD, ssd grids only

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.cells)), self.cells.shape)
        return float(self.mu_values[i]), float(self.sigma_values[j])

    def csv_text(self) -> str:
        """Header of sigma values, then one row per mu: ``mu, cell, cell, ...``."""
        lines = ["mu\\sigma," + ",".join(repr(float(s)) for s in self.sigma_values)]
        for mu, row in zip(self.mu_values, self.cells):
            lines.append(repr(float(mu)) + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.csv_text())


def sample_set(n: int, spec: GaussianSpec, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise InputError("sample size must be >= 1")
    return rng.normal(spec.mu, spec.sigma, size=n)


def _positions(n: int, descending: bool) -> np.ndarray:
    """Location of each point of a sorted-ascending set: its rank in the chosen order."""
    pos = np.arange(n, dtype=np.float64)
    return pos[::-1].copy() if descending else pos


def measure_once(measure: str, mode: DeformationMode, p: np.ndarray, q: np.ndarray) -> float:
    """Evaluate one measure on a single draw of 1-D sets (SSD unnormalized, positive)."""
    if measure == "ssd":
        if p.size != q.size:
            raise InputError("SSD between sets needs equal set sizes")
        d = np.sort(p) - np.sort(q)
        return float(d @ d)
    if measure == "bbs":
        return measures.bbs(p, q)
    if measure == "dis":
        return measures.dis(q, p)
    if measure == "ddis":
        mode = DeformationMode(mode)
        if mode is DeformationMode.IGNORE:
            return measures.ddis(q, p)
        ps, qs = np.sort(p), np.sort(q)
        P = measures.PointSet(ps, _positions(ps.size, False))
        Q = measures.PointSet(qs, _positions(qs.size, mode is DeformationMode.LARGE))
        return measures.ddis(Q, P)
    raise InputError(f"unknown measure {measure!r}; choose from {', '.join(STAT_MEASURES)}")


def estimate_expectation(measure: str, mode, p_spec: GaussianSpec, q_spec: GaussianSpec,
                         n: int, m: int, trials: int, seed: int) -> float:
    """Mean of ``measure`` over ``trials`` fresh draws of P (size n) and Q (size m).

    For SSD this is the raw mean sum of squared sort-aligned differences;
    :func:`expectation_grid` turns it into a similarity surface.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    mode = DeformationMode(mode)
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(trials):
        p = sample_set(n, p_spec, rng)
        q = sample_set(m, q_spec, rng)
        total += measure_once(measure, mode, p, q)
    return total / trials


def cell_seed(seed: int, i: int, j: int) -> int:
    """64-bit seed for grid cell (i, j), hashed from the base seed and the cell index."""
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1, np.uint64)[0])


def inclusive_range(start: float, stop: float, step: float) -> np.ndarray:
    """start, start+step, ... up to stop inclusive (1e-9 tolerance)."""
    if not step > 0:
        raise InputError("step must be > 0")
    if stop < start:
        raise InputError(f"empty range {start}:{stop}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def expectation_grid(measure: str, mode, mu_range, sigma_range, step: float | None = None,
                     n: int = 100, m: int = 100, trials: int = 200, seed: int = 0,
                     p_spec: GaussianSpec = GaussianSpec(0.0, 1.0), workers: int = 1) -> ExpectationGrid:
    """Expectation surface over Q's (mu, sigma).

    ``mu_range``/``sigma_range`` are either (start, stop) pairs expanded with
    ``step`` or explicit value lists when ``step`` is None. Each cell draws
    from its own seed, so the result does not depend on ``workers``.
    """
    if measure not in STAT_MEASURES:
        raise InputError(f"unknown measure {measure!r}")
    mode = DeformationMode(mode)
    if step is None:
        mus = np.asarray(mu_range, dtype=np.float64)
        sigmas = np.asarray(sigma_range, dtype=np.float64)
    else:
        mus = inclusive_range(*mu_range, step)
        sigmas = inclusive_range(*sigma_range, step)
    if mus.size == 0 or sigmas.size == 0:
        raise InputError("empty parameter range")

    def cell(ij):
        i, j = ij
        return estimate_expectation(measure, mode, p_spec, GaussianSpec(mus[i], sigmas[j]),
                                    n, m, trials, cell_seed(seed, i, j))

    todo = [(i, j) for i in range(mus.size) for j in range(sigmas.size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(cell, todo))
    else:
        vals = [cell(ij) for ij in todo]
    cells = np.array(vals).reshape(mus.size, sigmas.size)
    raw = None
    if measure == "ssd":
        raw = cells
        lo, hi = raw.min(), raw.max()
        cells = np.ones_like(raw) if hi == lo else (hi - raw) / (hi - lo)
    return ExpectationGrid(measure, mode, mus, sigmas, cells, trials, n, m, seed, raw)


def gaussian_cdf(x, spec: GaussianSpec):
    """Pr{q <= x} for q ~ N(mu, sigma^2); a point mass when sigma == 0."""
    x = np.asarray(x, dtype=np.float64)
    if spec.sigma == 0:
        out = (x >= spec.mu).astype(np.float64)
    else:
        out = ndtr((x - spec.mu) / spec.sigma)
    return out if out.ndim else float(out)


def dis_expectation_appendix(p_spec: GaussianSpec, q_spec: GaussianSpec, n: int, trials: int,
                             seed: int, m: int | None = None, every_index: bool = True) -> float:
    """E[DIS] through the probability that a template point is never chosen as NN.

    Given P, a point p_k is missed by one draw q with probability
    ``F_Q(p_k^-) + 1 - F_Q(p_k^+)``, where p_k^-/p_k^+ are the midpoints to the
    neighboring template points (infinite at the ends); it is missed by all m
    draws with that probability to the m-th power. Averaging over draws of P
    and subtracting from one gives E[DIS].

    With ``every_index`` the inner probability is averaged over all k of each
    draw (all indices are exchangeable); otherwise a single random k is used.
    """
    if n < 1 or trials < 1:
        raise InputError("n and trials must be >= 1")
    m = n if m is None else m
    if m < 1:
        raise InputError("m must be >= 1")
    rng = np.random.default_rng(seed)
    acc = 0.0
    for _ in range(trials):
        p = np.sort(sample_set(n, p_spec, rng))
        mids = (p[1:] + p[:-1]) / 2
        lo = np.concatenate([[-np.inf], mids])
        hi = np.concatenate([mids, [np.inf]])
        miss = gaussian_cdf(lo, q_spec) + 1.0 - gaussian_cdf(hi, q_spec)
        probs = np.clip(miss, 0.0, 1.0) ** m
        if every_index:
            acc += float(probs.mean())
        else:
            acc += float(probs[rng.integers(n)])
    return 1.0 - acc / trials
