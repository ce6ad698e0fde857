"""Recovery-condition diagnostics for the agile-radar sensing matrix.

Covers the brute-force spark census over all N-column submatrices, the
mutual coherence (with a fast single-row shortcut that exploits the
difference structure of the Gram matrix), Rayleigh tail bounds on the
column cross-correlations, and the resulting sparsity guarantees.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError, ResourceError, ShapeError
from .sensing import SensingMatrix
from .signal_model import TWO_PI, BandwidthMode, FrequencyCodes, RadarParams


def min_singular_normalized(submatrix: np.ndarray) -> float:
    """Smallest singular value of a square submatrix, divided by sqrt(N).

    The normalization makes 1 the scale of a perfectly conditioned submatrix,
    since every sensing column has norm sqrt(N).
    """
    submatrix = np.asarray(submatrix)
    if submatrix.ndim != 2 or submatrix.shape[0] != submatrix.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {submatrix.shape}")
    s = np.linalg.svd(submatrix, compute_uv=False)
    return float(s[-1]) / math.sqrt(submatrix.shape[0])


@dataclass
class SparkReport:
    """Census of smallest singular values over every N-column submatrix."""

    sigma_values: np.ndarray  # normalized sigma_N per submatrix, enumeration order
    sigma_omega: float  # the minimum over all submatrices
    n_submatrices: int
    eps_svd: float
    n_below_eps: int  # submatrices with sigma under eps_svd

    @property
    def full_spark(self) -> bool:
        """True when no submatrix fell below the numerical-zero threshold."""
        return self.n_below_eps == 0


@functools.lru_cache(maxsize=8)
def _combination_indices(n_cols: int, n_rows: int) -> np.ndarray:
    idx = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n_cols), n_rows)),
        dtype=np.intp,
        count=math.comb(n_cols, n_rows) * n_rows,
    ).reshape(-1, n_rows)
    idx.setflags(write=False)
    return idx


def spark_enumeration(phi: SensingMatrix, eps_svd: float = 1e-15,
                      max_submatrices: int = 1_000_000,
                      batch_size: int = 8192) -> SparkReport:
    """Exhaustively test every N-column submatrix for rank deficiency.

    Enumerates the C(NM, N) column subsets in lexicographic order, computes
    each smallest singular value (normalized by sqrt(N)) with a batched SVD,
    and flags the ones below ``eps_svd``.  Refuses to start when the subset
    count exceeds ``max_submatrices``.
    """
    if eps_svd <= 0:
        raise DomainError(f"eps_svd must be > 0, got {eps_svd}")
    N, n_cols = phi.shape
    total = math.comb(n_cols, N)
    if total > max_submatrices:
        raise ResourceError(
            f"C({n_cols}, {N}) = {total} submatrices exceeds the budget of "
            f"{max_submatrices}; raise max_submatrices to force the enumeration"
        )
    dense = phi.to_dense()
    combos = _combination_indices(n_cols, N)
    sqrt_n = math.sqrt(N)
    sigmas = np.empty(total)
    for start in range(0, total, batch_size):
        idx = combos[start:start + batch_size]
        sub = np.ascontiguousarray(np.moveaxis(dense[:, idx], 1, 0))
        s = np.linalg.svd(sub, compute_uv=False)
        sigmas[start:start + idx.shape[0]] = s[:, -1] / sqrt_n
    n_below = int(np.count_nonzero(sigmas < eps_svd))
    return SparkReport(
        sigma_values=sigmas,
        sigma_omega=float(sigmas.min()),
        n_submatrices=total,
        eps_svd=eps_svd,
        n_below_eps=n_below,
    )


def _validate_on_grid(value, step, name):
    if not 0.0 <= value < TWO_PI:
        raise DomainError(f"{name}={value} outside [0, 2*pi)")
    ratio = value / step
    if abs(ratio - round(ratio)) > 1e-9:
        raise DomainError(f"{name}={value} is not a multiple of {step}")
    return int(round(ratio))


def chi(params: RadarParams, codes: FrequencyCodes, p: float, q: float) -> complex:
    """Normalized cross-correlation of two sensing columns separated by (p, q).

    chi = (1/N) sum_n exp(1j * (p * M * d_n + q * n)) for on-grid phase
    offsets p = 2*pi*m/M and q = 2*pi*l/N.  Defined for the APPROXIMATE
    model, where column inner products depend only on the index difference.
    """
    _validate_on_grid(p, TWO_PI / params.n_hrr_bins, "p")
    _validate_on_grid(q, TWO_PI / params.n_pulses, "q")
    if codes.n_pulses != params.n_pulses:
        raise ShapeError(
            f"codes has {codes.n_pulses} pulses, params expects {params.n_pulses}"
        )
    n_idx = np.arange(params.n_pulses)
    vals = np.exp(1j * (p * params.n_hrr_bins * codes.codes + q * n_idx))
    return complex(vals.sum() / params.n_pulses)


@dataclass
class CoherenceSample:
    """Mutual coherence of one code realization."""

    mu: float
    chi_abs: np.ndarray | None  # |chi| per column-difference index (shortcut only)
    method: str  # "shortcut" or "gram"


def coherence(phi, method: str = "auto") -> CoherenceSample:
    """Mutual coherence: the largest normalized column cross-correlation.

    ``method="shortcut"`` evaluates chi over the difference set
    {N, ..., NM-1} only — every Gram entry is one of these values (or an
    exactly-zero same-range-bin correlation), so the maximum over column
    pairs collapses to a single row of differences.  Valid in APPROXIMATE
    mode for any codes.  ``method="gram"`` forms all pairwise inner products
    from the dense matrix and works in either mode; it also accepts a plain
    complex matrix (columns normalized by their own norms).  ``"auto"``
    picks the shortcut whenever the operator structure allows it.
    """
    structured = isinstance(phi, SensingMatrix)
    approx = structured and phi.params.mode is BandwidthMode.APPROXIMATE
    if method == "auto":
        method = "shortcut" if approx else "gram"
    if method == "shortcut":
        if not structured:
            raise DomainError(
                "the difference shortcut needs the structured operator; "
                "pass a SensingMatrix or use method='gram'"
            )
        if not approx:
            raise DomainError(
                "the difference shortcut requires APPROXIMATE mode; per-pulse "
                "Doppler stretching breaks the Gram difference structure"
            )
        N, M = phi.params.n_pulses, phi.params.n_hrr_bins
        if M == 1:
            return CoherenceSample(mu=0.0, chi_abs=np.empty(0), method=method)
        m_idx = np.arange(1, M)
        hop = np.exp(1j * TWO_PI * np.outer(phi.codes.codes, m_idx))  # (N, M-1)
        l_idx = np.arange(N)
        dft = np.exp(1j * TWO_PI * np.outer(l_idx, np.arange(N)) / N)  # (l, n)
        chi_mat = (dft @ hop) / N  # (N, M-1): rows Doppler offset, cols hop offset
        chi_abs = np.abs(chi_mat).flatten(order="F")  # index (l + m*N) - N
        mu = float(min(chi_abs.max(), 1.0))
        return CoherenceSample(mu=mu, chi_abs=chi_abs, method=method)
    if method == "gram":
        if structured:
            dense = phi.to_dense()
            gram = np.abs(dense.conj().T @ dense) / phi.n_pulses
        else:
            dense = np.asarray(phi, dtype=np.complex128)
            if dense.ndim != 2:
                raise ShapeError(f"expected a matrix, got shape {dense.shape}")
            norms = np.linalg.norm(dense, axis=0)
            if np.any(norms == 0.0):
                raise DomainError("matrix has a zero column; coherence undefined")
            gram = np.abs(dense.conj().T @ dense) / np.outer(norms, norms)
        np.fill_diagonal(gram, 0.0)
        return CoherenceSample(mu=float(min(gram.max(), 1.0)), chi_abs=None, method=method)
    raise ConfigurationError(f"unknown coherence method {method!r}")


class TailBound(NamedTuple):
    """Tail probability bound with its validity flag."""

    value: float
    asymptotic_valid: bool  # N * eps^2 > 2/pi, where the Rayleigh bound holds


def rayleigh_tail_bound(eps: float, n_pulses: int) -> TailBound:
    """Asymptotic bound P(|chi| > eps) <= exp(-N eps^2 / 2) for one offset.

    The bound comes from the Rayleigh limit of |chi| and is only a bound
    where N * eps^2 > 2/pi; outside that region the flag is False and the
    value is merely the evaluated expression.
    """
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    if n_pulses < 1:
        raise ConfigurationError(f"n_pulses must be >= 1, got {n_pulses}")
    n_eps2 = n_pulses * eps * eps
    return TailBound(value=math.exp(-0.5 * n_eps2), asymptotic_valid=n_eps2 > 2.0 / math.pi)


def union_bound(eps: float, n_pulses: int, n_hrr_bins: int) -> float:
    """Union bound P(mu > eps) <= (MN - N) exp(-N eps^2 / 2), returned raw.

    The value can exceed 1 for small eps; callers clip to [0, 1] when using
    it as a probability.
    """
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    if n_hrr_bins < 1:
        raise ConfigurationError(f"n_hrr_bins must be >= 1, got {n_hrr_bins}")
    n_offsets = n_pulses * n_hrr_bins - n_pulses
    return n_offsets * rayleigh_tail_bound(eps, n_pulses).value


def max_recoverable_K(n_pulses: int, n_hrr_bins: int, delta: float) -> float:
    """Sparsity supporting coherence-based recovery with probability 1 - delta.

    K = (1 / (2 sqrt(2))) * sqrt(N / (ln(MN - N) - ln(delta))) + 1/2.
    Requires 0 < delta < 1 and N(M - 1) >= 2 so the logarithm is positive.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if n_pulses * (n_hrr_bins - 1) < 2:
        raise DomainError(
            f"need N(M-1) >= 2 off-bin offsets, got N={n_pulses}, M={n_hrr_bins}"
        )
    denom = math.log(n_pulses * n_hrr_bins - n_pulses) - math.log(delta)
    return math.sqrt(n_pulses / denom) / (2.0 * math.sqrt(2.0)) + 0.5


def l0_limit(n_pulses: int) -> float:
    """Largest sparsity with a unique l0 solution under full spark: N / 2."""
    if n_pulses < 1:
        raise ConfigurationError(f"n_pulses must be >= 1, got {n_pulses}")
    return n_pulses / 2.0


class ChiStatistics(NamedTuple):
    """Monte-Carlo moments of chi at one grid offset over random codes."""

    mean: complex
    var_real: float
    var_imag: float
    cov: float  # covariance of real and imaginary parts
    abs_sq_mean: float  # estimate of E|chi|^2
    n_trials: int


def chi_statistics(params: RadarParams, p: float, q: float, n_trials: int,
                   seed=0, _block: int = 20000) -> ChiStatistics:
    """Sample moments of chi over fresh discrete code draws.

    Uses the full-alphabet hop set (n_codes == n_hrr_bins), for which the
    per-pulse terms are zero-mean: E|chi|^2 = 1/N at every off-bin offset,
    and away from the degenerate all-real offset (pi, pi) the real and
    imaginary parts each carry variance 1/(2N) with zero covariance.
    """
    if params.n_codes != params.n_hrr_bins:
        raise ConfigurationError(
            "chi statistics are defined for the full-alphabet hop set "
            f"(n_codes == n_hrr_bins), got n_codes={params.n_codes}"
        )
    m = _validate_on_grid(p, TWO_PI / params.n_hrr_bins, "p")
    _validate_on_grid(q, TWO_PI / params.n_pulses, "q")
    if m == 0:
        raise DomainError("p = 0 makes chi deterministic; pick an off-bin offset")
    if n_trials < 2:
        raise ConfigurationError(f"n_trials must be >= 2, got {n_trials}")
    N, M = params.n_pulses, params.n_hrr_bins
    rng = np.random.default_rng(seed)
    n_phase = q * np.arange(N)
    chi_vals = np.empty(n_trials, dtype=np.complex128)
    for start in range(0, n_trials, _block):
        stop = min(start + _block, n_trials)
        d = rng.integers(0, M, size=(stop - start, N)) / M
        chi_vals[start:stop] = np.exp(1j * (p * M * d + n_phase)).sum(axis=1) / N
    re, im = chi_vals.real, chi_vals.imag
    return ChiStatistics(
        mean=complex(chi_vals.mean()),
        var_real=float(re.var(ddof=1)),
        var_imag=float(im.var(ddof=1)),
        cov=float(np.cov(re, im, ddof=1)[0, 1]),
        abs_sq_mean=float(np.mean(re * re + im * im)),
        n_trials=n_trials,
    )
