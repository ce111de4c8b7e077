"""The renormalized 2d Schrodinger operator with white-noise potential.

On a fixed grid the regularized operator is H = Laplacian + xi_eps - c - shift
restricted to the Fourier ball |k| <= K.  Functions in its domain are not
smooth: they follow the noise through the high-frequency ansatz

    u = band_{(N, K]}( u lt X + correction(u) ) + u_sharp,

with X = (1-Lap)^{-1} xi and a twice-differentiable remainder u_sharp.  The
map u_sharp -> u (``from_remainder``) is the fixed point of an affine
contraction once the low-frequency cutoff N is large enough; its inverse
(``to_remainder``) is a single evaluation.  ``apply_hamiltonian`` evaluates H
through the remainder coordinates by an exact regrouping of the product
xi * u into paraproducts (Leibniz for the low-high pairing plus
(1-Lap) X = xi), so it agrees with the direct Fourier-ball action to rounding
error -- that agreement is the module's self-check.

All operations are pure; the dense matrix and its eigendecomposition are
cached lazily behind a lock for reuse by the propagator.
"""

import threading
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from . import fields as fl
from ._linalg import (ball_to_field, field_to_ball, lanczos_extremal_max,
                      mode_ball, potential_matrix)
from .fields import TorusField
from .noise import EnhancedNoise2d
from .paraproducts import para_gt, para_lt, resonant

FIXED_POINT_NORM = 0.9   # Sobolev index used for the contraction iteration
FIXED_POINT_TOL = 1e-10
MAX_ITERATIONS = 200


class ContractionError(RuntimeError):
    """The high-frequency ansatz failed to contract; increase the cutoff."""


def correction(u: TorusField, noise: EnhancedNoise2d) -> TorusField:
    """Smoothing correction of the ansatz:

    (1-Lap)^{-1}( Lap u lt X + 2 grad u lt grad X + xi lt u - u lt xi2 ).

    Constants in xi2 are invisible to the low-high pairing, so the Wick
    subtraction does not enter here.
    """
    if u.M != noise.M:
        raise ValueError("grid mismatch between field and noise")
    x, xi = noise.x, noise.xi
    inner = para_lt(fl.laplacian(u), x)
    for i in range(2):
        inner = inner + 2.0 * para_lt(fl.derivative(u, i), fl.derivative(x, i))
    inner = inner + para_lt(xi, u) - para_lt(u, noise.xi2)
    return fl.inv_helmholtz(inner)


@dataclass
class AndersonOperator2d:
    """Assembled operator data; build with :func:`assemble_operator_2d`."""

    noise: EnhancedNoise2d
    cutoff_N: int
    K: int
    shift: float
    contraction_factor: float
    _lock: threading.Lock = dc_field(default_factory=threading.Lock, repr=False)
    _modes: np.ndarray = None
    _matrix: np.ndarray = None
    _eig: tuple = None

    @property
    def dim(self):
        return 2

    @property
    def M(self):
        return self.noise.M

    # -- coordinate maps ------------------------------------------------

    def _ansatz_term(self, u: TorusField) -> TorusField:
        raw = para_lt(u, self.noise.x) + correction(u, self.noise)
        return fl.band_pass(raw, self.cutoff_N, self.K)

    def from_remainder(self, u_sharp: TorusField, tol: float = FIXED_POINT_TOL,
                       max_iter: int = MAX_ITERATIONS, return_log: bool = False):
        """Solve u = band(u lt X + correction(u)) + u_sharp by fixed point."""
        if u_sharp.max_radius() > self.K:
            raise ValueError("remainder data must be supported in the operator ball")
        u = u_sharp
        diffs = []
        for _ in range(max_iter):
            nxt = self._ansatz_term(u) + u_sharp
            d = fl.sobolev_norm(nxt - u, FIXED_POINT_NORM)
            diffs.append(d)
            u = nxt
            if d < tol:
                break
            if len(diffs) >= 3 and diffs[-1] > diffs[-2] > diffs[-3] and diffs[-1] > diffs[0]:
                raise ContractionError(
                    "ansatz iteration diverging (residual %.3e); increase the cutoff" % d)
        else:
            raise ContractionError("no contraction after %d iterations" % max_iter)
        return (u, diffs) if return_log else u

    def to_remainder(self, u: TorusField) -> TorusField:
        """Inverse map: u - band(u lt X + correction(u))."""
        return u - self._ansatz_term(u)

    # -- operator action -------------------------------------------------

    def apply_regularized(self, u: TorusField) -> TorusField:
        """Direct Fourier-ball action (Lap + xi - c - shift) u."""
        out = fl.laplacian(u) + fl.low_pass(fl.mult(self.noise.xi, u), self.K)
        return out - (self.noise.c_eps + self.shift) * u

    def apply_hamiltonian(self, u_sharp: TorusField) -> TorusField:
        """H applied through the remainder coordinates (exact regrouping).

        Equals apply_regularized(from_remainder(u_sharp)) to rounding error.
        """
        noise = self.noise
        u = self.from_remainder(u_sharp)
        bracket = para_lt(u, noise.x) + correction(u, noise) + para_lt(u, noise.xi2)
        out = fl.laplacian(u_sharp)
        out = out + fl.low_pass(para_lt(u, noise.xi) + para_gt(u, noise.xi), self.cutoff_N)
        out = out + fl.band_pass(bracket, self.cutoff_N, self.K)
        out = out + fl.low_pass(resonant(u, noise.xi), self.K)
        return out - (noise.c_eps + self.shift) * u

    def apply_conjugated(self, u_sharp: TorusField) -> TorusField:
        """The similarity-transformed operator acting on remainders."""
        return self.to_remainder(self.apply_hamiltonian(u_sharp))

    def energy_form(self, u: TorusField, v: TorusField) -> float:
        """-<H u, v> (shift included); nonnegative on the ball after the shift."""
        return float(np.real(-fl.inner(self.apply_regularized(u), v)))

    # -- dense matrix (lazy) ----------------------------------------------

    @property
    def modes(self) -> np.ndarray:
        if self._modes is None:
            self._modes = mode_ball(2, self.K)
        return self._modes

    def matrix(self) -> np.ndarray:
        """Hermitian matrix of Lap + xi - c - shift on the mode ball."""
        with self._lock:
            if self._matrix is None:
                modes = self.modes
                ksq = np.sum(modes.astype(np.float64) ** 2, axis=1)
                diag = -4.0 * np.pi**2 * ksq - self.noise.c_eps - self.shift
                self._matrix = potential_matrix(self.noise.xi, modes, diag)
            return self._matrix

    def eigensystem(self):
        with self._lock:
            if self._eig is None:
                A = None
            else:
                return self._eig
        A = self.matrix()
        w, U = scipy.linalg.eigh(A)
        with self._lock:
            self._eig = (w, U)
        return self._eig

    def manifest(self) -> dict:
        out = {
            "dim": 2,
            "M": self.M,
            "N": int(self.cutoff_N),
            "K": int(self.K),
            "eps": self.noise.eps,
            "seed": self.noise.seed,
            "amplitude": self.noise.amplitude,
            "c_eps": self.noise.c_eps,
            "shift": self.shift,
            "contraction_factor": self.contraction_factor,
        }
        if self._eig is not None:
            out["lambda_min"] = float(np.min(-self._eig[0]))
        return out


def _probe_fields(M: int, K: int, seeds, norm_index: float):
    probes = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
        f = fl.low_pass(TorusField(c), K // 2)
        probes.append((1.0 / fl.sobolev_norm(f, norm_index)) * f)
    return probes


def measure_contraction(noise: EnhancedNoise2d, cutoff_N: int, K: int,
                        probe_seeds=(101, 102, 103, 104, 105), steps: int = 6) -> float:
    """Largest (over probes) median ratio of successive iterates of the
    linear part of the ansatz map."""
    factors = []
    for probe in _probe_fields(noise.M, K, probe_seeds, FIXED_POINT_NORM):
        d = probe
        ratios = []
        prev = fl.sobolev_norm(d, FIXED_POINT_NORM)
        for _ in range(steps):
            d = fl.band_pass(para_lt(d, noise.x) + correction(d, noise), cutoff_N, K)
            cur = fl.sobolev_norm(d, FIXED_POINT_NORM)
            if prev == 0:
                break
            ratios.append(cur / prev)
            prev = cur
            if cur == 0:
                break
        factors.append(float(np.median(ratios[1:])) if len(ratios) > 1 else 0.0)
    return max(factors)


def select_cutoff(noise: EnhancedNoise2d, K: int, target: float = 0.5,
                  probe_seeds=(101, 102, 103, 104, 105)) -> int:
    """Smallest dyadic N whose measured contraction factor is <= target."""
    N = 2
    while N <= max(2, K // 2):
        if measure_contraction(noise, N, K, probe_seeds) <= target:
            return N
        N *= 2
    raise ContractionError("grid too small for this noise realization "
                           "(no dyadic cutoff up to K/2 contracts)")


def assemble_operator_2d(noise: EnhancedNoise2d, K: int = None, cutoff_N: int = None,
                         shift: float = None) -> AndersonOperator2d:
    """Pick the cutoff, compute the positivity shift, return the operator.

    K defaults to M/4 and must leave room for the noise band (K + band(xi)
    <= M/2 - 1) so ball products are alias-free.
    """
    M = noise.M
    noise_band = int(np.ceil(noise.xi.max_radius()))
    if K is None:
        K = M // 4
    if K + noise_band > M // 2 - 1:
        raise ValueError("mode cap K too large for the noise band: need K + band <= M/2 - 1")
    if cutoff_N is None:
        cutoff_N = 2 if noise.is_zero() else select_cutoff(noise, K)
    factor = 0.0 if noise.is_zero() else measure_contraction(noise, cutoff_N, K)
    if shift is None:
        modes = mode_ball(2, K)
        ksq = np.sum(modes.astype(np.float64) ** 2, axis=1)
        diag = -4.0 * np.pi**2 * ksq - noise.c_eps
        xi = noise.xi

        def matvec(v):
            f = ball_to_field(v, modes, 2, M)
            out = fl.low_pass(fl.mult(xi, f), K)
            return field_to_ball(out, modes) + diag * v

        lam_max = lanczos_extremal_max(matvec, len(modes))
        shift = max(0.0, lam_max) + 1.0
    return AndersonOperator2d(noise=noise, cutoff_N=int(cutoff_N), K=int(K),
                              shift=float(shift), contraction_factor=float(factor))
