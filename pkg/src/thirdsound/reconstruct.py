"""Single-quadrature covariance reconstruction.

Each mode pair rotates in phase space at its own frequency,

    phi_m(t) = phi_m(0) cos(w_m t) + eta_m(0) sin(w_m t),
    eta_m(t) = eta_m(0) cos(w_m t) - phi_m(0) sin(w_m t),

so an equal-time two-point function of a single quadrature carries beat
notes at |w_m - w_n| and w_m + w_n whose amplitudes are linear in the
initial mode covariances.  Sampling one two-point function over time and
regressing those trigonometric amplitudes therefore recovers the full
initial momentum-space covariance (Q~, P~, R~).

The field-field model, with mode prefactor c / (K sqrt(w_m w_n)) and
sampled mode functions G, reads

    <phi_i phi_j>(t) = sum_mn pref * G_mi G_nj *
        [cos(w_m t) cos(w_n t) Q~_mn + sin(w_m t) sin(w_n t) P~_mn]
        + pref * (G_mi G_nj + G_ni G_mj) cos(w_m t) sin(w_n t) R~_mn,

and the momentum-momentum model swaps Q~ <-> P~, inverts the prefactor
and flips the sign of the R~ term (both follow directly from the rotation
above).  Because G has orthonormal rows, conjugating a measured sample
with G and the inverse prefactors recovers the mode-space observable
Y_mn(t) exactly, and the regression decouples into independent
4-unknown least-squares problems per mode pair; this is the same
least-squares minimiser as a pixel-space normal-equations assembly at a
tiny fraction of the cost.

Pairs with degenerate frequencies (w_m = w_n, generic on square grids)
carry no beat note, so the antisymmetric part of R~ is unidentifiable
there; those pairs are solved with a small ridge penalty (which pins the
antisymmetric part to zero) and reported in `unidentifiable_pairs`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RankDeficiencyError
from .gaussian import CovarianceMatrix, MOMENTUM, _mode_prefactors
from .physics import DerivedParams

FIELD = "field"
MOMENTUM_QUADRATURE = "momentum"

DEGENERACY_RTOL = 1e-9
RIDGE_FRACTION = 1e-10


@dataclass
class TwoPointSeries:
    """Time-stamped equal-time two-point samples of one quadrature."""

    quadrature: str
    times: np.ndarray
    samples: np.ndarray          # (n_times, n_pix, n_pix), symmetric
    noise_sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.samples = np.asarray(self.samples, dtype=float)
        if self.quadrature not in (FIELD, MOMENTUM_QUADRATURE):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.samples.shape[0] != self.times.size:
            raise ValueError("one sample matrix per time stamp required")
        scale = np.max(np.abs(self.samples)) or 1.0
        skew = np.max(np.abs(self.samples - np.transpose(self.samples, (0, 2, 1))))
        if skew > 1e-12 * scale:
            raise ValueError("two-point samples must be symmetric to 1e-12 relative")
        self.samples = 0.5 * (self.samples + np.transpose(self.samples, (0, 2, 1)))

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def n_pixels(self) -> int:
        return self.samples.shape[1]


@dataclass
class ReconstructionResult:
    qt: np.ndarray                      # recovered Q~(0)
    pt: np.ndarray                      # recovered P~(0)
    rt: np.ndarray                      # recovered R~(0)
    residual_rms: float                 # pixel-space model residual
    condition: float                    # worst per-pair design conditioning
    unidentifiable_pairs: list = field(default_factory=list)

    def gamma(self, basis=None) -> CovarianceMatrix:
        n = self.qt.shape[0]
        data = np.empty((2 * n, 2 * n))
        data[:n, :n] = self.qt
        data[:n, n:] = self.rt
        data[n:, :n] = self.rt.T
        data[n:, n:] = self.pt
        return CovarianceMatrix(data, MOMENTUM, basis=basis)


def evolve_mode_covariance(gamma0: CovarianceMatrix, t: float) -> CovarianceMatrix:
    """Free evolution of a mode-space covariance: per-mode phase rotation
    by omega_m t.  The symplectic spectrum is invariant."""
    if gamma0.labelling != MOMENTUM:
        raise ValueError("evolution acts on momentum-space covariances")
    if gamma0.basis is None:
        raise ValueError("covariance carries no mode basis")
    omegas = gamma0.basis.omegas
    c, s = np.cos(omegas * t), np.sin(omegas * t)
    n = gamma0.n
    rot = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    rot[idx, idx] = c
    rot[idx, n + idx] = s
    rot[n + idx, idx] = -s
    rot[n + idx, n + idx] = c
    return CovarianceMatrix(rot @ gamma0.data @ rot.T, MOMENTUM, basis=gamma0.basis)


def _mode_observable(gamma0: CovarianceMatrix, omegas: np.ndarray, t: float,
                     quadrature: str) -> np.ndarray:
    c, s = np.cos(omegas * t), np.sin(omegas * t)
    qt, pt, rt = gamma0.q_block, gamma0.p_block, gamma0.r_block
    if quadrature == FIELD:
        y = (c[:, None] * qt * c[None, :] + s[:, None] * pt * s[None, :]
             + c[:, None] * rt * s[None, :] + s[:, None] * rt.T * c[None, :])
    else:
        y = (c[:, None] * pt * c[None, :] + s[:, None] * qt * s[None, :]
             - s[:, None] * rt * c[None, :] - c[:, None] * rt.T * s[None, :])
    return y


def synth_two_point(gamma0: CovarianceMatrix, basis, derived: DerivedParams,
                    times, quadrature: str = FIELD, noise_sigma: float = 0.0,
                    seed: int = 0) -> TwoPointSeries:
    """Exact two-point series of the chosen quadrature, plus optional
    i.i.d. Gaussian noise on each independent matrix entry.

    The t-th sample equals the corresponding block of the freely evolved
    covariance transformed to the pixel lattice.
    """
    if gamma0.labelling != MOMENTUM:
        raise ValueError("synthesis starts from a momentum-space covariance")
    if gamma0.n != basis.n_modes:
        raise ValueError("covariance dimension does not match the basis")
    times = np.asarray(times, dtype=float)
    d_phi, d_eta = _mode_prefactors(basis, derived)
    d = d_phi if quadrature == FIELD else d_eta
    g = basis.sampled
    omegas = basis.omegas
    rng = np.random.default_rng(seed)
    n_pix = basis.grid.n_pixels
    samples = np.empty((times.size, n_pix, n_pix))
    iu = np.triu_indices(n_pix)
    for it, t in enumerate(times):
        y = _mode_observable(gamma0, omegas, t, quadrature)
        m = g.T @ (d[:, None] * y * d[None, :]) @ g
        m = 0.5 * (m + m.T)
        if noise_sigma > 0:
            noise = np.zeros_like(m)
            noise[iu] = rng.normal(0.0, noise_sigma, size=iu[0].size)
            noise = noise + np.triu(noise, 1).T
            m = m + noise
        samples[it] = m
    return TwoPointSeries(quadrature=quadrature, times=times, samples=samples,
                          noise_sigma=noise_sigma, seed=seed)


def suggested_times(basis, nyquist_factor: float = 4.0, span_cycles: float = 2.0,
                    max_samples: int = 50000) -> np.ndarray:
    """Uniform time grid satisfying the default sampling rules:
    dt <= pi / (nyquist_factor * w_max) and a total span of `span_cycles`
    full periods of the smallest nonzero frequency gap."""
    omegas = np.sort(np.unique(basis.omegas))
    gaps = np.diff(omegas)
    gaps = gaps[gaps > DEGENERACY_RTOL * omegas[-1]]
    if gaps.size == 0:
        raise ValueError("basis has no resolvable frequency gaps")
    span = span_cycles * 2.0 * np.pi / gaps.min()
    dt = np.pi / (nyquist_factor * omegas[-1])
    n = int(np.ceil(span / dt)) + 1
    if n > max_samples:
        raise ValueError(f"default sampling would need {n} > {max_samples} samples")
    return np.arange(n) * dt


def fit_covariance(series: TwoPointSeries, basis, derived: DerivedParams) -> ReconstructionResult:
    """Least-squares recovery of (Q~, P~, R~) at t=0 from a two-point series."""
    if series.n_pixels != basis.grid.n_pixels:
        raise ValueError("series pixel count does not match the basis grid")
    g = basis.sampled
    d_phi, d_eta = _mode_prefactors(basis, derived)
    d = d_phi if series.quadrature == FIELD else d_eta
    omegas = basis.omegas
    n = basis.n_modes
    nt = series.n_times

    # project samples onto the mode basis: Y(t) = D^-1 G M(t) G^T D^-1
    y_obs = np.empty((nt, n, n))
    for it in range(nt):
        y_obs[it] = (g @ series.samples[it] @ g.T) / np.outer(d, d)

    cos_t = np.cos(np.outer(series.times, omegas))   # (nt, n)
    sin_t = np.sin(np.outer(series.times, omegas))

    qt = np.zeros((n, n))
    pt = np.zeros((n, n))
    rt = np.zeros((n, n))
    unidentifiable = []
    worst_cond = 0.0
    omega_scale = omegas[-1] if omegas.size else 1.0

    def solve(a_mat, rhs, degenerate):
        nonlocal worst_cond
        sing = np.linalg.svd(a_mat, compute_uv=False)
        rank = int(np.count_nonzero(sing > sing[0] * 1e-12)) if sing[0] > 0 else 0
        if rank < a_mat.shape[1]:
            if not degenerate:
                raise RankDeficiencyError(
                    f"design matrix rank {rank} < {a_mat.shape[1]}; "
                    "add time samples spanning the slowest beat period")
            ridge = RIDGE_FRACTION * sing[0] ** 2
            ata = a_mat.T @ a_mat + ridge * np.eye(a_mat.shape[1])
            sol = np.linalg.solve(ata, a_mat.T @ rhs)
        else:
            sol = np.linalg.lstsq(a_mat, rhs, rcond=None)[0]
            worst_cond = max(worst_cond, sing[0] / sing[-1])
        return sol

    for m in range(n):
        cm, sm = cos_t[:, m], sin_t[:, m]
        # diagonal: unknowns (Q~_mm, P~_mm, R~_mm); the momentum quadrature
        # swaps the Q~/P~ roles and flips the R~ sign
        if series.quadrature == FIELD:
            cols = (cm * cm, sm * sm, 2.0 * cm * sm)
        else:
            cols = (sm * sm, cm * cm, -2.0 * cm * sm)
        a_mat = np.column_stack(cols)
        sol = solve(a_mat, y_obs[:, m, m], degenerate=False)
        qt[m, m], pt[m, m], rt[m, m] = sol
        for nn in range(m + 1, n):
            cn, sn = cos_t[:, nn], sin_t[:, nn]
            degenerate = abs(omegas[m] - omegas[nn]) <= DEGENERACY_RTOL * omega_scale
            if degenerate:
                unidentifiable.append((m, nn))
            if series.quadrature == FIELD:
                row_mn = (cm * cn, sm * sn, cm * sn, sm * cn)
                row_nm = (cm * cn, sm * sn, sn * cm, cn * sm)
            else:
                row_mn = (sm * sn, cm * cn, -sm * cn, -cm * sn)
                row_nm = (sm * sn, cm * cn, -cn * sm, -sn * cm)
            a_mat = np.vstack([np.column_stack(row_mn), np.column_stack(row_nm)])
            rhs = np.concatenate([y_obs[:, m, nn], y_obs[:, nn, m]])
            sol = solve(a_mat, rhs, degenerate)
            qt[m, nn] = qt[nn, m] = sol[0]
            pt[m, nn] = pt[nn, m] = sol[1]
            rt[m, nn], rt[nn, m] = sol[2], sol[3]

    result = ReconstructionResult(qt=qt, pt=pt, rt=rt, residual_rms=0.0,
                                  condition=worst_cond,
                                  unidentifiable_pairs=unidentifiable)
    gamma_fit = result.gamma(basis=basis)
    sq = 0.0
    for it, t in enumerate(series.times):
        y = _mode_observable(gamma_fit, omegas, t, series.quadrature)
        model = g.T @ (d[:, None] * y * d[None, :]) @ g
        sq += float(np.mean((model - series.samples[it]) ** 2))
    result.residual_rms = float(np.sqrt(sq / nt))
    return result


def save_series(series: TwoPointSeries, directory) -> None:
    """CSV container: a manifest plus one matrix file per time sample."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.csv", "w") as fh:
        fh.write("# thirdsound-series v1\n")
        fh.write(f"# quadrature={series.quadrature} noise_sigma={series.noise_sigma:.17g} "
                 f"seed={series.seed} n_pixels={series.n_pixels}\n")
        fh.write("index,time,filename\n")
        for i, t in enumerate(series.times):
            fh.write(f"{i},{t:.17g},sample_{i:05d}.csv\n")
    for i in range(series.n_times):
        np.savetxt(directory / f"sample_{i:05d}.csv", series.samples[i],
                   delimiter=",", fmt="%.17g")


def load_series(directory) -> TwoPointSeries:
    directory = Path(directory)
    quadrature, noise_sigma, seed = FIELD, 0.0, None
    times, files = [], []
    with open(directory / "manifest.csv") as fh:
        for line in fh:
            line = line.strip()
            if not line or line == "index,time,filename":
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "quadrature":
                        quadrature = value
                    elif key == "noise_sigma":
                        noise_sigma = float(value)
                    elif key == "seed" and value != "None":
                        seed = int(value)
                continue
            _, t, name = line.split(",")
            times.append(float(t))
            files.append(name)
    samples = np.array([np.loadtxt(directory / name, delimiter=",", ndmin=2)
                        for name in files])
    return TwoPointSeries(quadrature=quadrature, times=np.array(times),
                          samples=samples, noise_sigma=noise_sigma, seed=seed)
