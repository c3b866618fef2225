"""Covariance-matrix Gaussian states: thermal construction, real-space
transformation, partial trace, symplectic spectra, entropy and mutual
information.

Conventions.  A state of n degrees of freedom is a symmetric 2n x 2n
matrix in block form (Q, R; R^T, P); indices 0..n-1 are field quadratures,
n..2n-1 momentum quadratures, matching Omega = (0, I; -I, 0).  Entropy is
always in nats.  The vacuum is Gamma = I/2 and every physical state has
symplectic eigenvalues nu >= 1/2.

The momentum-to-real-space map multiplies the mode quadratures by the
dimensionless prefactors sqrt(c/(K omega)) (field) and sqrt(K omega / c)
(momentum) and rotates with the sampled basis G.  Because G already
carries the sqrt(cell area) lattice factor, the map is symplectic on the
retained mode span and physicality is preserved.  When the basis spans a
proper subspace of the pixel lattice (Neumann with the zero mode dropped),
the real-space matrix acquires exact null directions; these are structural
(the lattice simply has fewer physical collective degrees of freedom than
pixels), are tracked via ``structural_nulls`` and are excluded from the
spectrum rather than flagged as uncertainty violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnphysicalCovarianceError
from .physics import bose_einstein, DerivedParams, PhysicalConstants

MOMENTUM = "momentum"
REAL = "real"

# below 1/2 - CLAMP_TOL is round-off and clamped; below 1/2 - HARD_TOL is a bug
CLAMP_TOL = 1e-9
HARD_TOL = 1e-6


class CovarianceMatrix:
    """Immutable symmetric covariance matrix with quadrature-block layout."""

    def __init__(self, data: np.ndarray, labelling: str, basis=None,
                 structural_nulls: int = 0):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] % 2:
            raise ValueError(f"covariance must be square with even dimension, got {data.shape}")
        scale = np.max(np.abs(data))
        if scale > 0 and np.max(np.abs(data - data.T)) > 1e-12 * scale:
            raise ValueError("covariance matrix is not symmetric to 1e-12 relative")
        if not np.all(np.isfinite(data)):
            raise ValueError("covariance matrix has non-finite entries")
        if labelling not in (MOMENTUM, REAL):
            raise ValueError(f"unknown labelling {labelling!r}")
        self._data = 0.5 * (data + data.T)
        self._data.setflags(write=False)
        self.labelling = labelling
        self.basis = basis
        self.structural_nulls = int(structural_nulls)
        self._entropy_cache = None

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0] // 2

    @property
    def q_block(self) -> np.ndarray:
        return self._data[: self.n, : self.n]

    @property
    def r_block(self) -> np.ndarray:
        return self._data[: self.n, self.n:]

    @property
    def p_block(self) -> np.ndarray:
        return self._data[self.n:, self.n:]

    def __repr__(self):
        return (f"CovarianceMatrix(n={self.n}, labelling={self.labelling!r}, "
                f"structural_nulls={self.structural_nulls})")


@dataclass(frozen=True)
class SymplecticSpectrum:
    """Positive symplectic eigenvalues, ascending; n_null counts excluded
    structural zero directions."""

    values: np.ndarray
    n_null: int = 0

    @property
    def min(self) -> float:
        return float(self.values[0])


def thermal_momentum_covariance(basis, temperature: float,
                                constants: PhysicalConstants = PhysicalConstants()) -> CovarianceMatrix:
    """Thermal state in the mode basis: Q~ = P~ = diag(n_T(omega) + 1/2), R~ = 0."""
    diag = bose_einstein(basis.omegas, temperature, constants) + 0.5
    n = basis.n_modes
    data = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    data[idx, idx] = diag
    data[n + idx, n + idx] = diag
    return CovarianceMatrix(data, MOMENTUM, basis=basis)


def _mode_prefactors(basis, derived: DerivedParams):
    d_phi = np.sqrt(derived.c3 / (derived.luttinger_k * basis.omegas))
    return d_phi, 1.0 / d_phi


def to_real_space(gamma: CovarianceMatrix, basis, derived: DerivedParams) -> CovarianceMatrix:
    """Transform a mode-space covariance to pixel-lattice labelling."""
    if gamma.labelling != MOMENTUM:
        raise ValueError("to_real_space expects a momentum-space covariance")
    if gamma.n != basis.n_modes:
        raise ValueError(f"covariance has {gamma.n} modes, basis has {basis.n_modes}")
    g = basis.sampled
    d_phi, d_eta = _mode_prefactors(basis, derived)
    q = g.T @ (d_phi[:, None] * gamma.q_block * d_phi[None, :]) @ g
    p = g.T @ (d_eta[:, None] * gamma.p_block * d_eta[None, :]) @ g
    r = g.T @ (d_phi[:, None] * gamma.r_block * d_eta[None, :]) @ g
    n_pix = basis.grid.n_pixels
    data = np.empty((2 * n_pix, 2 * n_pix))
    data[:n_pix, :n_pix] = q
    data[:n_pix, n_pix:] = r
    data[n_pix:, :n_pix] = r.T
    data[n_pix:, n_pix:] = p
    return CovarianceMatrix(data, REAL, basis=basis,
                            structural_nulls=n_pix - basis.n_modes)


def to_momentum_space(gamma: CovarianceMatrix, basis, derived: DerivedParams) -> CovarianceMatrix:
    """Inverse of :func:`to_real_space` on the retained mode span."""
    if gamma.labelling != REAL:
        raise ValueError("to_momentum_space expects a real-space covariance")
    if gamma.n != basis.grid.n_pixels:
        raise ValueError("covariance dimension does not match the basis grid")
    g = basis.sampled
    d_phi, d_eta = _mode_prefactors(basis, derived)
    qt = (g @ gamma.q_block @ g.T) / np.outer(d_phi, d_phi)
    pt = (g @ gamma.p_block @ g.T) / np.outer(d_eta, d_eta)
    rt = (g @ gamma.r_block @ g.T) / np.outer(d_phi, d_eta)
    n = basis.n_modes
    data = np.empty((2 * n, 2 * n))
    data[:n, :n] = 0.5 * (qt + qt.T)
    data[:n, n:] = rt
    data[n:, :n] = rt.T
    data[n:, n:] = 0.5 * (pt + pt.T)
    return CovarianceMatrix(data, MOMENTUM, basis=basis)


def _balance(gamma: CovarianceMatrix):
    """Symplectic per-dof rescaling phi_i -> s_i phi_i, eta_i -> eta_i / s_i
    that equalises the Q and P diagonals.  Symplectic eigenvalues are
    invariant, but without this the eigensolver sees matrix norms set by
    the huge momentum-quadrature scale (K omega / c ~ 1e18) and absolute
    eigenvalue errors swamp nu ~ 1/2."""
    n = gamma.n
    dq = np.diag(gamma.q_block).copy()
    dp = np.diag(gamma.p_block).copy()
    if np.all(dq > 0) and np.all(dp > 0):
        s = (dp / dq) ** 0.25
    else:
        tq, tp = np.trace(gamma.q_block), np.trace(gamma.p_block)
        if tq > 0 and tp > 0:
            s = np.full(n, (tp / tq) ** 0.25)
        else:
            s = np.ones(n)
    scale = np.concatenate([s, 1.0 / s])
    return scale[:, None] * gamma.data * scale[None, :]


def symplectic_spectrum(gamma: CovarianceMatrix) -> SymplecticSpectrum:
    """Symplectic eigenvalues as |Im eig(Omega Gamma)|, paired and sorted.

    Declared structural null directions (rank deficiency inherited from a
    mode basis smaller than the pixel lattice) are verified to be
    numerically tiny and dropped.  Any remaining value below
    1/2 - 1e-6 raises; values within 1e-9 below 1/2 are clamped.
    """
    n = gamma.n
    balanced = _balance(gamma)
    m = np.vstack([balanced[n:, :], -balanced[:n, :]])   # Omega @ Gamma
    eigs = np.linalg.eigvals(m)
    nus = np.sort(np.abs(eigs.imag))   # 2n values in +/- pairs, ascending

    k = gamma.structural_nulls
    if k:
        null_tol = max(1e-12, 1e-6 * nus[-1])
        dropped = nus[: 2 * k]
        if np.any(dropped > null_tol):
            raise UnphysicalCovarianceError(
                f"declared {k} structural nulls but smallest spectrum values "
                f"{dropped} exceed tolerance {null_tol:g}")
        nus = nus[2 * k:]

    values = 0.5 * (nus[::2] + nus[1::2])   # average the +/- pair estimates
    if values.size and values[0] < 0.5 - HARD_TOL:
        raise UnphysicalCovarianceError(
            f"symplectic eigenvalue {values[0]:.9g} violates the uncertainty bound 1/2")
    values[np.abs(values - 0.5) < CLAMP_TOL] = 0.5   # round-off band
    return SymplecticSpectrum(values=values, n_null=k)


def _entropy_terms(nus: np.ndarray) -> np.ndarray:
    # (nu+1/2)ln(nu+1/2) - (nu-1/2)ln(nu-1/2) rewritten as
    # ln(nu+1/2) + (nu-1/2) log1p(1/(nu-1/2)), which avoids the large-nu
    # cancellation (both terms stay O(ln nu)) and is exactly 0 at nu = 1/2
    b = np.maximum(nus - 0.5, 0.0)
    out = np.log(nus + 0.5)
    pos = b > 0
    out[pos] += b[pos] * np.log1p(1.0 / b[pos])
    return out


def von_neumann_entropy(gamma: CovarianceMatrix) -> float:
    """Entropy in nats from the symplectic spectrum; cached per matrix."""
    if gamma._entropy_cache is None:
        spectrum = symplectic_spectrum(gamma)
        gamma._entropy_cache = float(math.fsum(_entropy_terms(spectrum.values)))
    return gamma._entropy_cache


def _selector_indices(gamma: CovarianceMatrix, selector) -> np.ndarray:
    if hasattr(selector, "indices"):   # RegionMask-like
        if gamma.labelling != REAL:
            raise ValueError("pixel masks select from real-space covariances only")
        idx = np.asarray(selector.indices(), dtype=int)
    else:
        idx = np.asarray(selector, dtype=int)
    if idx.size == 0:
        raise ValueError("cannot restrict to an empty selection")
    if idx.size != np.unique(idx).size:
        raise ValueError("selection contains repeated indices")
    if np.any(idx < 0) or np.any(idx >= gamma.n):
        raise ValueError("selection out of range")
    return np.sort(idx)


def restrict(gamma: CovarianceMatrix, selector) -> CovarianceMatrix:
    """Partial trace: keep rows/columns of the selected degrees of freedom.

    `selector` is a pixel mask (real-space labelling) or a plain index
    array into the n degrees of freedom (either labelling).
    """
    idx = _selector_indices(gamma, selector)
    rows = np.concatenate([idx, gamma.n + idx])
    sub = gamma.data[np.ix_(rows, rows)]
    nulls = gamma.structural_nulls if idx.size == gamma.n else 0
    return CovarianceMatrix(sub, gamma.labelling, basis=gamma.basis,
                            structural_nulls=nulls)


def mutual_information(gamma: CovarianceMatrix, a, b) -> float:
    """I(A:B) = S(A) + S(B) - S(A u B) in nats, clamped at zero.

    A and B are masks or index arrays and must be disjoint.
    """
    ia = _selector_indices(gamma, a)
    ib = _selector_indices(gamma, b)
    if np.intersect1d(ia, ib).size:
        raise ValueError("regions A and B overlap")
    s_a = von_neumann_entropy(restrict(gamma, ia))
    s_b = von_neumann_entropy(restrict(gamma, ib))
    s_ab = von_neumann_entropy(restrict(gamma, np.concatenate([ia, ib])))
    return max(s_a + s_b - s_ab, 0.0)


def save_covariance_csv(gamma: CovarianceMatrix, path) -> None:
    """Plain-text serialization: two comment lines, then 2n x 2n rows."""
    with open(path, "w") as fh:
        fh.write("# thirdsound-covariance v1\n")
        fh.write(f"# n={gamma.n} labelling={gamma.labelling} "
                 f"structural_nulls={gamma.structural_nulls}\n")
        for row in gamma.data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_covariance_csv(path) -> CovarianceMatrix:
    labelling, nulls, rows = None, 0, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("labelling="):
                        labelling = token.split("=", 1)[1]
                    elif token.startswith("structural_nulls="):
                        nulls = int(token.split("=", 1)[1])
                continue
            rows.append([float(v) for v in line.split(",")])
    if labelling is None:
        raise ValueError(f"{path} has no labelling header")
    return CovarianceMatrix(np.array(rows), labelling, structural_nulls=nulls)
