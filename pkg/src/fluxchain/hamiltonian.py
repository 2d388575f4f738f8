"""Normal-mode Hamiltonians: assembly, eigensolving, anti-crossings, T1.

A Hamiltonian is a constant plus per-mode quadratic terms a_i*(n_i^2 +
theta_i^2) plus complex-amplitude exponential terms amp * prod_i
exp(i b_i theta_i) with hermitian closure, all coefficients in GHz (h=1).
Operators live in per-mode truncated oscillator bases combined by
Kronecker products.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import FitError, ModelError
from .units import TWO_PI

MAX_TOTAL_DIM = 50000


def build_mode_ops(dim):
    """Phase and charge quadratures in the dim-truncated oscillator basis.

    theta = (a + a^dag)/sqrt(2), n = (a - a^dag)/(i sqrt(2)); both
    Hermitian, [theta, n] = i on all but the last basis state.
    """
    if dim < 2:
        raise ModelError("mode dimension must be at least 2")
    ladder = np.diag(np.sqrt(np.arange(1, dim)), 1)
    theta = (ladder + ladder.T) / math.sqrt(2.0)
    n = (ladder - ladder.T) / (1j * math.sqrt(2.0))
    return theta, n


@dataclass(frozen=True)
class ExpTerm:
    amp: complex                  # GHz
    b: tuple                      # one phase coefficient per mode


@dataclass(frozen=True)
class NormalModeHamiltonian:
    """Eq-of-motion-free spectral model: c0, per-mode (a_i, dim_i), exp terms."""

    c0: float
    mode_coeffs: tuple            # a_i in GHz
    dims: tuple
    exp_terms: tuple              # of ExpTerm

    def __post_init__(self):
        if len(self.mode_coeffs) != len(self.dims):
            raise ModelError("mode_coeffs and dims must have equal length")
        if any(d < 1 for d in self.dims):
            raise ModelError("mode dimensions must be >= 1")
        for term in self.exp_terms:
            if len(term.b) != len(self.dims):
                raise ModelError("each exp term needs one b entry per mode")

    @property
    def total_dim(self):
        return int(np.prod(self.dims))

    def with_dims(self, dims):
        return replace(self, dims=tuple(int(d) for d in dims))

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        modes = raw["modes"]
        return cls(
            c0=float(raw.get("c0", 0.0)),
            mode_coeffs=tuple(float(m["a"]) for m in modes),
            dims=tuple(int(m["dim"]) for m in modes),
            exp_terms=tuple(
                ExpTerm(amp=complex(t.get("re", 0.0), t.get("im", 0.0)),
                        b=tuple(float(x) for x in t["b"]))
                for t in raw.get("terms", [])),
        )

    def to_json(self):
        return json.dumps({
            "c0": self.c0,
            "modes": [{"a": a, "dim": d} for a, d in zip(self.mode_coeffs, self.dims)],
            "terms": [{"re": t.amp.real, "im": t.amp.imag, "b": list(t.b)}
                      for t in self.exp_terms],
        }, indent=2)


_EXP_PAD = 48


def exp_theta_factor(b, dim, pad=_EXP_PAD):
    """Truncation of exp(i*b*theta) to the lowest ``dim`` oscillator states.

    Computed by eigendecomposition of theta in a ``pad``-state-larger basis
    and projected back, so the assembled Hamiltonian is (to machine
    precision) a projection of the untruncated operator. Nested projections
    make truncation variational: eigenvalues can only decrease as dims grow.
    """
    theta, _ = build_mode_ops(dim + pad)
    lam, vec = np.linalg.eigh(theta)
    full = (vec * np.exp(1j * b * lam)) @ vec.conj().T
    return np.ascontiguousarray(full[:dim, :dim])


def _quad_diag(coeffs, dims):
    """Diagonal of sum_i a_i (n_i^2 + theta_i^2) in the oscillator basis.

    The infinite-basis operator is diagonal with entries a_i*(2k+1); its
    projection is used directly. (Squaring the dim-truncated ladder
    operators instead would deflate the last entry to a_i*(dim-1), a
    spurious low-energy sink that destroys variational truncation.)
    """
    total = int(np.prod(dims))
    diag = np.zeros(total)
    for i, (a_i, d) in enumerate(zip(coeffs, dims)):
        q = a_i * (2.0 * np.arange(d) + 1.0)
        shape = [1] * len(dims)
        shape[i] = d
        diag = diag + np.broadcast_to(q.reshape(shape), dims).ravel()
    return diag


def assemble(h):
    """Dense Hermitian matrix of a NormalModeHamiltonian (GHz units)."""
    if h.total_dim > MAX_TOTAL_DIM:
        raise ModelError(
            f"total dimension {h.total_dim} exceeds the dense-assembly guard "
            f"({MAX_TOTAL_DIM}); reduce mode dims")
    total = h.total_dim
    out = np.diag((h.c0 + _quad_diag(h.mode_coeffs, h.dims)).astype(complex))
    for term in h.exp_terms:
        op = np.array([[1.0 + 0j]])
        for b, d in zip(term.b, h.dims):
            op = np.kron(op, exp_theta_factor(b, d))
        t = term.amp * op
        out += t + t.conj().T
    return out


def structured_operator(h):
    """Matrix-free LinearOperator applying the Hamiltonian via per-mode tensor
    contractions; used where dense assembly would not fit."""
    dims = list(h.dims)
    total = h.total_dim
    diag = (h.c0 + _quad_diag(h.mode_coeffs, dims)).reshape(dims)
    factors = [(term.amp, [exp_theta_factor(b, d) for b, d in zip(term.b, dims)])
               for term in h.exp_terms]

    def matvec(v):
        x = v.reshape(dims)
        out = (diag * x).astype(complex)
        for amp, mats in factors:
            y = x
            z = x
            for ax, mat in enumerate(mats):
                y = np.moveaxis(np.tensordot(mat, y, axes=(1, ax)), 0, ax)
                z = np.moveaxis(np.tensordot(mat.conj().T, z, axes=(1, ax)), 0, ax)
            out = out + amp * y + np.conj(amp) * z
        return out.ravel()

    return LinearOperator((total, total), matvec=matvec, dtype=complex)


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending lowest-k eigenvalues (GHz) with an escalation convergence
    measure: max change of those eigenvalues when every mode dim grows by 2."""

    eigenvalues: np.ndarray
    convergence_delta: float | None = None

    def to_csv(self):
        rows = ["index,energy_ghz"]
        for i, e in enumerate(self.eigenvalues):
            rows.append(f"{i},{e:.17g}")
        return "\n".join(rows) + "\n"


def _lowest_k(h, k):
    total = h.total_dim
    if total <= 6000:
        w = np.linalg.eigvalsh(assemble(h))
        return np.sort(w)[:k]
    op = structured_operator(h)
    v0 = np.ones(total) / math.sqrt(total)
    try:
        w, _ = eigsh(op, k=k, which="SA", v0=v0, tol=1e-12, maxiter=200000)
    except Exception as exc:  # ArpackError / no convergence
        raise ModelError(f"iterative eigensolver failed: {exc}") from exc
    return np.sort(w)


def eigensolve_lowest(h, k, escalate=False):
    """Lowest ``k`` eigenvalues of ``h``; dense for small total dimensions,
    matrix-free Lanczos above that.

    ``h`` is a NormalModeHamiltonian, or a dense Hermitian ndarray (then
    escalation is unavailable). With ``escalate`` the spectrum is recomputed
    with every mode dim incremented by 2 and the maximum eigenvalue change
    is reported as ``convergence_delta``.
    """
    if isinstance(h, np.ndarray):
        if escalate:
            raise ModelError("escalation needs the coefficient form, not a matrix")
        if h.shape[0] < k:
            raise ModelError("k exceeds matrix dimension")
        if np.abs(h - h.conj().T).max() > 1e-9 * max(1.0, np.abs(h).max()):
            raise ModelError("matrix is not Hermitian")
        w = np.linalg.eigvalsh(h)
        return SpectrumResult(eigenvalues=np.sort(w)[:k])

    if h.total_dim < k:
        raise ModelError("k exceeds total Hilbert-space dimension")
    base = _lowest_k(h, k)
    if not escalate:
        return SpectrumResult(eigenvalues=base)
    grown = _lowest_k(h.with_dims([d + 2 for d in h.dims]), k)
    return SpectrumResult(eigenvalues=base,
                          convergence_delta=float(np.abs(grown - base).max()))


@dataclass(frozen=True)
class AntiCrossing:
    """Minimum-gap extraction from a flux-swept spectrum family."""

    phi_min: float
    gap: float                    # GHz
    g: float                      # gap/2, GHz
    resolution: float             # local grid-induced gap change (GHz)


def anticrossing_gap(spectra, pair=1, resolution=None):
    """Locate the avoided crossing of one eigenvalue pair over a flux sweep.

    ``spectra`` is a sequence of (flux, eigenvalues); the gap of pair ``m``
    is E_{m+1} - E_m. The minimum sample is refined by quadratic
    interpolation through its neighbors. A refined gap below the local
    grid-induced gap variation (or an explicit ``resolution``) is reported
    as unresolved: "no anti-crossing detected", with the bound attached.
    """
    pts = sorted(((float(f), np.sort(np.asarray(e, dtype=float))) for f, e in spectra),
                 key=lambda x: x[0])
    if len(pts) < 5:
        raise ModelError("need at least 5 flux points")
    if any(len(e) < pair + 2 for _, e in pts):
        raise ModelError(f"need at least {pair + 2} eigenvalues per flux point")

    flux = np.array([f for f, _ in pts])
    gaps = np.array([e[pair + 1] - e[pair] for _, e in pts])
    i = int(np.argmin(gaps))
    if i == 0 or i == len(gaps) - 1:
        raise FitError("no anti-crossing detected: gap minimum sits on the sweep edge")

    x0, x1, x2 = flux[i - 1], flux[i], flux[i + 1]
    y0, y1, y2 = gaps[i - 1], gaps[i], gaps[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    phi_min, gap = x1, y1
    if a > 0.0:
        phi_ref = -b / (2.0 * a)
        if x0 <= phi_ref <= x2:
            c = y0 - a * x0 * x0 - b * x0
            phi_min, gap = phi_ref, a * phi_ref * phi_ref + b * phi_ref + c
    gap = float(max(gap, 0.0))

    local = float(max(abs(y0 - y1), abs(y2 - y1)))
    threshold = local if resolution is None else float(resolution)
    if gap < threshold:
        raise FitError(
            "no anti-crossing detected: refined gap "
            f"{gap:.3e} GHz is below the resolution {threshold:.3e} GHz; "
            f"interaction bounded by g <= {threshold / 2.0:.3e} GHz")
    return AntiCrossing(phi_min=float(phi_min), gap=gap, g=gap / 2.0,
                        resolution=threshold)


def two_mode_spectrum(detunings, g, f_center=6.46):
    """Synthetic qubit/resonator pair: eigenvalues f_center +/- sqrt(d^2+4g^2)/2.

    Produces (flux-like detuning, [e_lower, e_upper]) rows for anti-crossing
    tests; labeled synthetic wherever it is written out. GHz units.
    """
    rows = []
    for d in detunings:
        split = math.hypot(d, 2.0 * g)
        rows.append((float(d), np.array([f_center - split / 2.0, f_center + split / 2.0])))
    return rows


def purcell_t1(g, delta, kappa):
    """Purcell-limited lifetime Delta^2/(kappa g^2) (s).

    ``g`` and ``delta`` in Hz, ``kappa`` in rad/s; the 2*pi factors on g and
    Delta cancel. Diverges as the coupling vanishes; zero-detuning input is
    rejected (the rate diverges, T1 -> 0).
    """
    if kappa <= 0.0 or g < 0.0:
        raise ModelError("kappa must be positive and g nonnegative")
    if delta == 0.0:
        raise ModelError("divergent Purcell rate at zero detuning (T1 -> 0 limit)")
    if g == 0.0:
        return math.inf
    return delta * delta / (kappa * g * g)


def combined_t1(t1_avg, t1_purcell):
    """Reciprocal sum of the background and Purcell-limited lifetimes (s)."""
    if t1_avg <= 0.0 or t1_purcell <= 0.0:
        raise ModelError("lifetimes must be positive")
    if math.isinf(t1_purcell):
        return t1_avg
    return 1.0 / (1.0 / t1_avg + 1.0 / t1_purcell)
