"""Sensing operators linking the range-Doppler grid to slow-time samples.

The measurement of pulse n for grid cell (m, l) — range bin m, Doppler bin
l — is R[n, m] * D[n, l] with

    R[n, m] = exp(1j * 2 pi * m * d_n)          (carrier-hop response)
    D[n, l] = exp(1j * 2 pi * l * n * zeta_n / N)  (slow-time Doppler response)

Stacking cells column-wise as j = l + m * N gives the N x NM sensing matrix
Phi.  Columns all have Euclidean norm sqrt(N) since every entry has unit
modulus.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    ConfigurationError,
    DomainError,
    ResourceError,
    ShapeError,
    UnsupportedModeError,
)
from .signal_model import (
    BandwidthMode,
    FrequencyCodes,
    RadarParams,
    pulse_doppler_scalings,
)

# Default cap on materialized dense entries (complex128), ~512 MiB.
DEFAULT_DENSE_BUDGET = 1 << 25


def build_R(codes: FrequencyCodes, n_hrr_bins: int) -> np.ndarray:
    """Carrier-hop response matrix, shape (N, M): exp(1j 2 pi m d_n)."""
    if n_hrr_bins < 1:
        raise ConfigurationError(f"n_hrr_bins must be >= 1, got {n_hrr_bins}")
    m_idx = np.arange(n_hrr_bins)
    return np.exp(1j * 2.0 * np.pi * np.outer(codes.codes, m_idx))


def build_D(params: RadarParams, codes: FrequencyCodes) -> np.ndarray:
    """Doppler response matrix, shape (N, N): exp(1j 2 pi l n zeta_n / N).

    In APPROXIMATE mode (zeta = 1) this is the unnormalized inverse DFT
    matrix; in EXACT mode each row n is stretched by its own zeta_n.
    """
    N = params.n_pulses
    zetas = pulse_doppler_scalings(params, codes)
    n_scaled = np.arange(N) * zetas  # n * zeta_n per row
    l_idx = np.arange(N)
    return np.exp(1j * 2.0 * np.pi * np.outer(n_scaled, l_idx) / N)


class SensingMatrix:
    """Lazy N x NM sensing operator for one code realization.

    Stores only the N x M and N x N factors; columns, products and the dense
    matrix are formed on demand.  ``to_dense`` refuses to materialize more
    than ``max_dense_entries`` complex values.
    """

    def __init__(self, params: RadarParams, codes: FrequencyCodes,
                 max_dense_entries: int = DEFAULT_DENSE_BUDGET):
        if codes.n_pulses != params.n_pulses:
            raise ShapeError(
                f"codes has {codes.n_pulses} pulses, params expects {params.n_pulses}"
            )
        self.params = params
        self.codes = codes
        self.max_dense_entries = int(max_dense_entries)
        self._R = build_R(codes, params.n_hrr_bins)
        self._D = build_D(params, codes)
        self._dense: np.ndarray | None = None

    # --- shape bookkeeping -------------------------------------------------

    @property
    def n_pulses(self) -> int:
        return self.params.n_pulses

    @property
    def n_columns(self) -> int:
        return self.params.n_pulses * self.params.n_hrr_bins

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_pulses, self.n_columns)

    @property
    def hop_response(self) -> np.ndarray:
        return self._R

    @property
    def doppler_response(self) -> np.ndarray:
        return self._D

    # --- column access -----------------------------------------------------

    def _split_index(self, j):
        j = np.asarray(j)
        if np.any(j < 0) or np.any(j >= self.n_columns):
            raise DomainError(f"column index outside [0, {self.n_columns})")
        m, l = np.divmod(j, self.n_pulses)
        return m, l

    def column(self, j: int) -> np.ndarray:
        """Column j = l + m*N, shape (N,)."""
        m, l = self._split_index(int(j))
        return self._R[:, m] * self._D[:, l]

    def columns(self, indices) -> np.ndarray:
        """Submatrix of the given columns, shape (N, len(indices))."""
        m, l = self._split_index(np.asarray(indices, dtype=np.intp))
        return self._R[:, m] * self._D[:, l]

    def to_dense(self) -> np.ndarray:
        """Materialize the full N x NM matrix (cached)."""
        if self._dense is None:
            N, M = self.params.n_pulses, self.params.n_hrr_bins
            if N * N * M > self.max_dense_entries:
                raise ResourceError(
                    f"dense matrix has {N * N * M} entries, over the budget of "
                    f"{self.max_dense_entries}; raise max_dense_entries to force it"
                )
            dense = self._R[:, :, None] * self._D[:, None, :]  # (N, M, N)
            self._dense = dense.reshape(N, M * N)
        return self._dense

    # --- products ----------------------------------------------------------

    def matvec(self, x) -> np.ndarray:
        """Phi @ x for a length-NM vector, computed from the factors."""
        x = np.asarray(x)
        if x.shape != (self.n_columns,):
            raise ShapeError(f"expected shape ({self.n_columns},), got {x.shape}")
        N, M = self.params.n_pulses, self.params.n_hrr_bins
        # x[l + m*N] = X[m, l]  ->  columns of X_lm are range bins
        x_lm = x.reshape(M, N).T  # (N_l, M)
        return np.sum(self._R * (self._D @ x_lm), axis=1)

    def rmatvec(self, v) -> np.ndarray:
        """Phi^H @ v for a length-N vector."""
        v = np.asarray(v)
        if v.shape != (self.n_pulses,):
            raise ShapeError(f"expected shape ({self.n_pulses},), got {v.shape}")
        weighted = np.conj(self._R) * v[:, None]  # (N, M)
        out = self._D.conj().T @ weighted  # (N_l, M)
        return out.flatten(order="F")

    def row_gram(self) -> np.ndarray:
        """Phi @ Phi^H, shape (N, N): (R R^H) * (D D^H) elementwise.

        In APPROXIMATE mode with continuous or full-alphabet codes this is
        generally dense; for solvers it is cheap to factor once (N x N).
        """
        return (self._R @ self._R.conj().T) * (self._D @ self._D.conj().T)

    def is_row_orthogonal(self) -> bool:
        """Whether Phi Phi^H = N*M*I holds exactly (APPROXIMATE mode)."""
        return self.params.mode is BandwidthMode.APPROXIMATE


def build_phi(params: RadarParams, codes: FrequencyCodes,
              max_dense_entries: int = DEFAULT_DENSE_BUDGET) -> SensingMatrix:
    """Sensing operator for one code realization."""
    return SensingMatrix(params, codes, max_dense_entries=max_dense_entries)


def build_iwr_psi(params: RadarParams) -> np.ndarray:
    """Full MN x MN inverse-DFT dictionary of the stepped-frequency reference.

    Psi = F kron D with F[l, m] = exp(1j 2 pi m l / M) and D the N-point
    inverse DFT matrix; (1/MN) Psi^H Psi = I.  Only defined in APPROXIMATE
    mode — per-pulse Doppler stretching breaks the Kronecker structure.
    """
    if params.mode is not BandwidthMode.APPROXIMATE:
        raise UnsupportedModeError(
            "the stepped-frequency dictionary is only defined in APPROXIMATE mode"
        )
    M, N = params.n_hrr_bins, params.n_pulses
    lm = np.arange(M)
    F = np.exp(1j * 2.0 * np.pi * np.outer(lm, lm) / M)
    ln = np.arange(N)
    D = np.exp(1j * 2.0 * np.pi * np.outer(ln, ln) / N)
    return np.kron(F, D)


def phi_row_sampling_check(phi: SensingMatrix, psi: np.ndarray,
                           codes: FrequencyCodes, atol: float = 1e-12) -> bool:
    """Verify that Phi's rows are rows of Psi selected by the codes.

    Row n of Phi must equal row n + M * d_n * N of Psi.  Requires discrete
    codes with integer M * d_n (hop set size equal to the range-bin count).
    """
    M, N = phi.params.n_hrr_bins, phi.params.n_pulses
    if psi.shape != (M * N, M * N):
        raise ShapeError(f"psi must be ({M * N}, {M * N}), got {psi.shape}")
    offsets = np.asarray(codes.codes) * M
    if not codes.is_discrete or np.max(np.abs(offsets - np.round(offsets))) > 1e-9:
        raise DomainError(
            "row-sampling check needs discrete codes with integer M * d_n "
            "(continuous codes do not select dictionary rows)"
        )
    offsets = np.round(offsets).astype(int)
    dense = phi.to_dense()
    for n in range(N):
        if not np.allclose(dense[n], psi[n + offsets[n] * N], rtol=0.0, atol=atol):
            return False
    return True


# --- export for cross-checking against external tools -----------------------

_BIN_MAGIC = b"FARPHI01"


def dump_phi(phi: SensingMatrix, path, fmt: str = "csv") -> None:
    """Write the dense matrix with its dimensions and codes to ``path``.

    ``fmt="csv"``: '#'-prefixed header lines (N, M, n_codes, codes), then one
    row per line with interleaved real,imag fields at full precision.
    ``fmt="bin"``: little-endian magic/header followed by float64 code and
    entry pairs, row-major.
    """
    dense = phi.to_dense()
    N, M = phi.params.n_pulses, phi.params.n_hrr_bins
    n_codes = phi.codes.n_codes if phi.codes.is_discrete else -1
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write(f"# N={N}\n# M={M}\n# n_codes={n_codes}\n")
            fh.write("# codes=" + ",".join(repr(float(c)) for c in phi.codes.codes) + "\n")
            for row in dense:
                fields = []
                for z in row:
                    fields.append(repr(float(z.real)))
                    fields.append(repr(float(z.imag)))
                fh.write(",".join(fields) + "\n")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_BIN_MAGIC)
            fh.write(struct.pack("<qqq", N, M, n_codes))
            fh.write(np.ascontiguousarray(phi.codes.codes, dtype="<f8").tobytes())
            inter = np.empty((N, 2 * N * M), dtype="<f8")
            inter[:, 0::2] = dense.real
            inter[:, 1::2] = dense.imag
            fh.write(inter.tobytes())
    else:
        raise ConfigurationError(f"unknown dump format {fmt!r}; use 'csv' or 'bin'")


def load_phi_dump(path, fmt: str = "csv"):
    """Read a matrix written by ``dump_phi``; returns (N, M, codes, dense)."""
    if fmt == "csv":
        header = {}
        codes = None
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    if key == "codes":
                        codes = np.array([float(v) for v in val.split(",")])
                    else:
                        header[key] = int(val)
                    continue
                vals = np.array([float(v) for v in line.split(",")])
                rows.append(vals[0::2] + 1j * vals[1::2])
        N, M = header["N"], header["M"]
        dense = np.vstack(rows)
    elif fmt == "bin":
        with open(path, "rb") as fh:
            magic = fh.read(len(_BIN_MAGIC))
            if magic != _BIN_MAGIC:
                raise ConfigurationError(f"bad magic in {path}")
            N, M, _ = struct.unpack("<qqq", fh.read(24))
            codes = np.frombuffer(fh.read(8 * N), dtype="<f8").copy()
            raw = np.frombuffer(fh.read(), dtype="<f8").reshape(N, 2 * N * M)
            dense = raw[:, 0::2] + 1j * raw[:, 1::2]
    else:
        raise ConfigurationError(f"unknown dump format {fmt!r}; use 'csv' or 'bin'")
    if dense.shape != (N, N * M):
        raise ShapeError(f"dump has shape {dense.shape}, header says ({N}, {N * M})")
    return N, M, codes, dense
