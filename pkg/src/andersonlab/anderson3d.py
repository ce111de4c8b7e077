"""The renormalized 3d Schrodinger operator with white-noise potential.

The 3d noise is too rough for the plain high-frequency ansatz, so the unknown
is first written as u = e^w u_flat with w the sum of the first three noise
functionals; the conjugated generator is

    H_flat = Lap + 2 (grad w) . grad + (1 - Lap) z .

Then u_flat follows the paracontrolled ansatz

    u_flat = P_{>N}( u_flat lt z + 2 grad u_flat lt w_tilde + correction(u_flat) ) + u_sharp

whose correction has eighteen paraproduct terms.  ``apply_hamiltonian``
evaluates e^w H_flat u_flat directly; ``apply_hamiltonian_regrouped``
evaluates the same operator through the remainder coordinates where the
leading part is Lap u_sharp plus resonant pairings -- the two paths agree to
rounding error because the correction's coefficients are derived from the
exact product Leibniz rule (the conventionally printed coefficients of three
derivative terms differ; see the term audit in :func:`correction`).

The dense Fourier-ball matrix of Lap + xi - c1 - shift drives the unitary
group; the paracontrolled machinery supplies the coordinate maps around it.
"""

import threading
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from . import fields as fl
from ._linalg import (ball_to_field, field_to_ball, lanczos_extremal_max,
                      mode_ball, potential_matrix)
from .fields import TorusField
from .noise import EnhancedNoise3d
from .paraproducts import (ValueAccumulator, para_gt, para_lt, para_lt_into,
                           resonant, resonant_into)

FIXED_POINT_NORM = 1.4
FIXED_POINT_TOL = 1e-9
MAX_ITERATIONS = 200

from .anderson2d import ContractionError  # shared failure mode


@dataclass
class ResonantStatics:
    """Noise-only resonant combinations entering the correction."""

    lw: tuple            # (1-Lap) w_tilde = grad w, componentwise
    lz: TorusField       # (1-Lap) z
    lw_o_z: tuple        # vector: resonant(lw_i, z)
    lw_o_gradz: TorusField      # sum_i resonant(lw_i, dz/dx_i)
    lw_o_gradwt: tuple   # vector j: sum_i resonant(lw_i, d w_tilde_j / dx_i)
    lz_o_z: TorusField
    lz_o_wt: tuple       # vector: resonant(lz, w_tilde_i)


def resonant_statics(noise: EnhancedNoise3d) -> ResonantStatics:
    lw = tuple(fl.derivative(noise.w, i) for i in range(3))
    lz = fl.helmholtz(noise.z)
    gz = fl.gradient(noise.z)
    lw_o_z = tuple(resonant(lw[i], noise.z) for i in range(3))
    lw_o_gradz = resonant(lw[0], gz[0]) + resonant(lw[1], gz[1]) + resonant(lw[2], gz[2])
    lw_o_gradwt = []
    for j in range(3):
        gwtj = fl.gradient(noise.w_tilde[j])
        lw_o_gradwt.append(resonant(lw[0], gwtj[0]) + resonant(lw[1], gwtj[1])
                           + resonant(lw[2], gwtj[2]))
    lz_o_z = resonant(lz, noise.z)
    lz_o_wt = tuple(resonant(lz, noise.w_tilde[i]) for i in range(3))
    return ResonantStatics(lw=lw, lz=lz, lw_o_z=lw_o_z, lw_o_gradz=lw_o_gradz,
                           lw_o_gradwt=tuple(lw_o_gradwt), lz_o_z=lz_o_z, lz_o_wt=lz_o_wt)


def correction_terms(u: TorusField, noise: EnhancedNoise3d, statics: ResonantStatics) -> dict:
    """The eighteen paraproduct terms whose Helmholtz preimage is the
    correction.  Derivative-group coefficients follow the exact Leibniz
    regrouping (2, 4, +2 where 1, 2, -1 are conventionally printed); the
    resonant group carries the frequency-ordered halves of the noise-noise
    pairings.  Returns name -> field; the correction is L^{-1} of their sum.
    """
    z, wt = noise.z, noise.w_tilde
    gu = fl.gradient(u)
    lap_u = fl.laplacian(u)
    gz = fl.gradient(z)
    terms = {}
    terms["lap_u lt z"] = para_lt(lap_u, z)
    terms["2 grad_u lt grad_z"] = 2.0 * sum_fields(para_lt(gu[i], gz[i]) for i in range(3))
    terms["u lt z"] = para_lt(u, z)
    glap = fl.gradient(lap_u)
    terms["2 grad_lap_u lt wt"] = 2.0 * sum_fields(para_lt(glap[i], wt[i]) for i in range(3))
    hess_terms = []
    for i in range(3):
        gwti = fl.gradient(wt[i])
        dgu_i = fl.gradient(gu[i])
        hess_terms.extend(para_lt(dgu_i[j], gwti[j]) for j in range(3))
    terms["4 hess_u lt grad_wt"] = 4.0 * sum_fields(hess_terms)
    terms["2 grad_u lt wt"] = 2.0 * sum_fields(para_lt(gu[i], wt[i]) for i in range(3))
    terms["2 lw gt grad_u"] = 2.0 * sum_fields(para_lt(statics.lw[i], gu[i]) for i in range(3))
    terms["lz gt u"] = para_lt(statics.lz, u)
    terms["2 grad_u lt (lw o z)"] = 2.0 * sum_fields(para_lt(gu[i], statics.lw_o_z[i]) for i in range(3))
    terms["2 grad_u gt (lw o z)"] = 2.0 * sum_fields(para_gt(gu[i], statics.lw_o_z[i]) for i in range(3))
    terms["2 u lt (lw o grad_z)"] = 2.0 * para_lt(u, statics.lw_o_gradz)
    terms["2 u gt (lw o grad_z)"] = 2.0 * para_gt(u, statics.lw_o_gradz)
    terms["2 grad_u lt (lw o grad_wt)"] = 2.0 * sum_fields(
        para_lt(gu[j], statics.lw_o_gradwt[j]) for j in range(3))
    terms["2 grad_u gt (lw o grad_wt)"] = 2.0 * sum_fields(
        para_gt(gu[j], statics.lw_o_gradwt[j]) for j in range(3))
    terms["u lt (lz o z)"] = para_lt(u, statics.lz_o_z)
    terms["u gt (lz o z)"] = para_gt(u, statics.lz_o_z)
    terms["grad_u lt (lz o wt)"] = sum_fields(para_lt(gu[i], statics.lz_o_wt[i]) for i in range(3))
    terms["grad_u gt (lz o wt)"] = sum_fields(para_gt(gu[i], statics.lz_o_wt[i]) for i in range(3))
    return terms


RESONANT_TERM_NAMES = (
    "2 grad_u lt (lw o z)", "2 grad_u gt (lw o z)",
    "2 u lt (lw o grad_z)", "2 u gt (lw o grad_z)",
    "2 grad_u lt (lw o grad_wt)", "2 grad_u gt (lw o grad_wt)",
    "u lt (lz o z)", "u gt (lz o z)",
    "grad_u lt (lz o wt)", "grad_u gt (lz o wt)",
)


def sum_fields(fields_iter):
    fields_list = list(fields_iter)
    out = fields_list[0]
    for f in fields_list[1:]:
        out = out + f
    return out


def correction(u: TorusField, noise: EnhancedNoise3d, statics: ResonantStatics = None,
               return_terms: bool = False):
    """Smoothing correction of the 3d ansatz (Helmholtz preimage of the
    eighteen-term sum).

    The default path evaluates the derivative group in its fused form
    (Lap applied to the ansatz paraproducts plus low-order leftovers), which
    is the same sum by the product Leibniz rule at a third of the transforms;
    return_terms=True evaluates the literal term list for the audit.
    """
    if u.M != noise.M:
        raise ValueError("grid mismatch between field and noise")
    statics = statics or resonant_statics(noise)
    if return_terms:
        terms = correction_terms(u, noise, statics)
        total = sum_fields(terms.values())
        return fl.inv_helmholtz(total), terms
    b, _ = _correction_fused(u, noise, statics)
    return b


def _lt_plus_gt(f, g):
    # f lt g + f gt g = f g - f o g
    return fl.mult(f, g) - resonant(f, g)


def _resonant_pairs(gu, u, statics):
    pairs = [(2.0, gu[i], statics.lw_o_z[i]) for i in range(3)]
    pairs.append((2.0, u, statics.lw_o_gradz))
    pairs.extend((2.0, gu[j], statics.lw_o_gradwt[j]) for j in range(3))
    pairs.append((1.0, u, statics.lz_o_z))
    pairs.extend((1.0, gu[i], statics.lz_o_wt[i]) for i in range(3))
    return pairs


def _resonant_group(gu, u, statics):
    return sum_fields(c * _lt_plus_gt(d, s) for c, d, s in _resonant_pairs(gu, u, statics))


def _correction_fused(u: TorusField, noise: EnhancedNoise3d, statics: ResonantStatics):
    """Returns (correction, raw ansatz sum u lt z + 2 grad u lt wt + correction).

    All low-order products are accumulated in value space (one final
    transform); the ansatz paraproducts are shared with their Laplacians.
    """
    gu = fl.gradient(u)
    acc0 = ValueAccumulator(3, u.M)
    para_lt_into(acc0, 1.0, u, noise.z)
    p0 = acc0.field()
    pv = []
    for i in range(3):
        acci = ValueAccumulator(3, u.M)
        para_lt_into(acci, 1.0, gu[i], noise.w_tilde[i])
        pv.append(acci.field())
    acc = ValueAccumulator(3, u.M)
    para_lt_into(acc, 1.0, u, statics.lz)
    para_lt_into(acc, 1.0, statics.lz, u)
    for i in range(3):
        para_lt_into(acc, 2.0, gu[i], statics.lw[i])
        para_lt_into(acc, 2.0, statics.lw[i], gu[i])
    for coef, d, s in _resonant_pairs(gu, u, statics):
        acc.add_product(coef, d, s)
        resonant_into(acc, -coef, d, s)
    inner = acc.field() + fl.laplacian(p0) + 2.0 * sum_fields(fl.laplacian(p) for p in pv)
    b = fl.inv_helmholtz(inner)
    ansatz_raw = p0 + 2.0 * sum_fields(pv) + b
    return b, ansatz_raw


@dataclass
class AndersonOperator3d:
    noise: EnhancedNoise3d
    cutoff_N: int
    K: int
    shift: float
    contraction_factor: float
    exp_w_plus: TorusField
    exp_w_minus: TorusField
    statics: ResonantStatics
    exp_roundtrip_error: float
    _lock: threading.Lock = dc_field(default_factory=threading.Lock, repr=False)
    _modes: np.ndarray = None
    _matrix: np.ndarray = None
    _eig: tuple = None

    @property
    def dim(self):
        return 3

    @property
    def M(self):
        return self.noise.M

    # -- coordinate maps ---------------------------------------------------

    def _ansatz_term(self, u: TorusField) -> TorusField:
        _, raw = _correction_fused(u, self.noise, self.statics)
        return fl.high_pass(raw, self.cutoff_N)

    def from_remainder(self, u_sharp: TorusField, tol: float = FIXED_POINT_TOL,
                       max_iter: int = MAX_ITERATIONS, return_log: bool = False):
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
                    "3d ansatz iteration diverging (residual %.3e); increase the cutoff" % d)
        else:
            raise ContractionError("no contraction after %d iterations" % max_iter)
        return (u, diffs) if return_log else u

    def to_remainder(self, u_flat: TorusField) -> TorusField:
        return u_flat - self._ansatz_term(u_flat)

    def materialize(self, u_sharp: TorusField):
        """Return (u_flat, u) with u = e^w u_flat."""
        u_flat = self.from_remainder(u_sharp)
        return u_flat, fl.mult(self.exp_w_plus, u_flat)

    # -- operator action -----------------------------------------------------

    def apply_flat(self, u_flat: TorusField) -> TorusField:
        """H_flat = Lap + 2 grad w . grad + lz (pre-ansatz form, no shift)."""
        out = fl.laplacian(u_flat) + fl.mult(self.statics.lz, u_flat)
        gu = fl.gradient(u_flat)
        for i in range(3):
            out = out + 2.0 * fl.mult(self.statics.lw[i], gu[i])
        return out

    def regular_part(self, u_flat: TorusField, u_sharp: TorusField = None) -> TorusField:
        """Bounded remainder of the regrouped operator (everything but
        Lap u_sharp and the two leading resonant pairings)."""
        if u_sharp is None:
            u_sharp = self.to_remainder(u_flat)
        corr = u_flat - u_sharp
        b, _ = _correction_fused(u_flat, self.noise, self.statics)
        gu = fl.gradient(u_flat)
        res_sum = _resonant_group(gu, u_flat, self.statics)
        low_group = para_lt(u_flat, self.statics.lz) + para_lt(self.statics.lz, u_flat)
        for i in range(3):
            low_group = low_group + 2.0 * (para_lt(gu[i], self.statics.lw[i])
                                           + para_lt(self.statics.lw[i], gu[i]))
        out = fl.high_pass(b - res_sum, self.cutoff_N) + fl.low_pass(low_group, self.cutoff_N)
        gcorr = fl.gradient(corr)
        out = out + resonant(self.statics.lz, corr)
        for i in range(3):
            out = out + 2.0 * resonant(self.statics.lw[i], gcorr[i])
        return out

    def apply_flat_regrouped(self, u_flat: TorusField, u_sharp: TorusField = None) -> TorusField:
        """H_flat through remainder coordinates; equals apply_flat to rounding."""
        if u_sharp is None:
            u_sharp = self.to_remainder(u_flat)
        gs = fl.gradient(u_sharp)
        out = fl.laplacian(u_sharp) + resonant(self.statics.lz, u_sharp)
        for i in range(3):
            out = out + 2.0 * resonant(self.statics.lw[i], gs[i])
        return out + self.regular_part(u_flat, u_sharp)

    def apply_hamiltonian(self, u_sharp: TorusField, return_parts: bool = False):
        """e^w (H_flat - shift) applied through the remainder coordinates."""
        u_flat, u = self.materialize(u_sharp)
        out = fl.mult(self.exp_w_plus, self.apply_flat(u_flat)) - self.shift * u
        return (out, u_flat, u) if return_parts else out

    def apply_hamiltonian_regrouped(self, u_sharp: TorusField) -> TorusField:
        u_flat, u = self.materialize(u_sharp)
        return fl.mult(self.exp_w_plus, self.apply_flat_regrouped(u_flat, u_sharp)) - self.shift * u

    def apply_conjugated(self, u_sharp: TorusField) -> TorusField:
        """Conjugated operator on remainders (the e^{+-w} pair cancels exactly)."""
        u_flat = self.from_remainder(u_sharp)
        return self.to_remainder(self.apply_flat(u_flat) - self.shift * u_flat)

    def apply_regularized(self, u: TorusField) -> TorusField:
        """Full-grid action of Lap + xi - c1 - shift (Hermitian)."""
        return (fl.laplacian(u) + fl.mult(self.noise.xi, u)
                - (self.noise.c1_eps + self.shift) * u)

    def energy_form(self, u: TorusField, v: TorusField) -> float:
        return float(np.real(-fl.inner(self.apply_regularized(u), v)))

    # -- dense ball matrix ----------------------------------------------------

    @property
    def modes(self) -> np.ndarray:
        if self._modes is None:
            self._modes = mode_ball(3, self.K)
        return self._modes

    def matrix(self) -> np.ndarray:
        with self._lock:
            if self._matrix is None:
                modes = self.modes
                ksq = np.sum(modes.astype(np.float64) ** 2, axis=1)
                diag = -4.0 * np.pi**2 * ksq - self.noise.c1_eps - self.shift
                self._matrix = potential_matrix(self.noise.xi, modes, diag)
            return self._matrix

    def eigensystem(self):
        with self._lock:
            if self._eig is not None:
                return self._eig
        A = self.matrix()
        w, U = scipy.linalg.eigh(A)
        with self._lock:
            self._eig = (w, U)
        return self._eig

    def manifest(self) -> dict:
        out = {
            "dim": 3,
            "M": self.M,
            "N": int(self.cutoff_N),
            "K": int(self.K),
            "eps": self.noise.eps,
            "seed": self.noise.seed,
            "amplitude": self.noise.amplitude,
            "c1": self.noise.c1_eps,
            "c2": self.noise.c2_eps,
            "shift": self.shift,
            "contraction_factor": self.contraction_factor,
            "exp_roundtrip_error": self.exp_roundtrip_error,
            "noise_norms": dict(self.noise.norms),
        }
        if self._eig is not None:
            out["lambda_min"] = float(np.min(-self._eig[0]))
        return out


def _padded_exp(w: TorusField, sign: float) -> TorusField:
    P = (3 * w.M) // 2
    vals = np.exp(sign * fl.padded_values(w, P).real)
    return TorusField(fl.values_to_coeffs_truncated(vals, w.M), real=True)


def measure_contraction(noise: EnhancedNoise3d, cutoff_N: int,
                        statics: ResonantStatics = None,
                        probe_seeds=(111, 112, 113), steps: int = 5) -> float:
    statics = statics or resonant_statics(noise)
    M = noise.M
    factors = []
    for seed in probe_seeds:
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((M,) * 3) + 1j * rng.standard_normal((M,) * 3)
        d = fl.low_pass(TorusField(c), M // 4)
        d = (1.0 / fl.sobolev_norm(d, FIXED_POINT_NORM)) * d
        ratios = []
        prev = fl.sobolev_norm(d, FIXED_POINT_NORM)
        for _ in range(steps):
            _, raw = _correction_fused(d, noise, statics)
            d = fl.high_pass(raw, cutoff_N)
            cur = fl.sobolev_norm(d, FIXED_POINT_NORM)
            if prev == 0:
                break
            ratios.append(cur / prev)
            prev = cur
            if cur == 0:
                break
        factors.append(float(np.median(ratios[1:])) if len(ratios) > 1 else 0.0)
    return max(factors)


def select_cutoff(noise: EnhancedNoise3d, target: float = 0.5,
                  statics: ResonantStatics = None, probe_seeds=(111, 112, 113)) -> int:
    statics = statics or resonant_statics(noise)
    N = 2
    while N <= noise.M // 4:
        if measure_contraction(noise, N, statics, probe_seeds) <= target:
            return N
        N *= 2
    raise ContractionError("grid too small for this noise realization "
                           "(no dyadic cutoff up to M/4 contracts)")


def assemble_operator_3d(noise: EnhancedNoise3d, K: int = 10, cutoff_N: int = None,
                         shift: float = None) -> AndersonOperator3d:
    M = noise.M
    statics = resonant_statics(noise)
    if cutoff_N is None:
        cutoff_N = 2 if noise.is_zero() else select_cutoff(noise, statics=statics)
    factor = 0.0 if noise.is_zero() else measure_contraction(noise, cutoff_N, statics)
    if noise.is_zero():
        exp_plus = TorusField.constant(3, M, 1.0)
        exp_minus = TorusField.constant(3, M, 1.0)
    else:
        exp_plus = _padded_exp(noise.w, +1.0)
        exp_minus = _padded_exp(noise.w, -1.0)
    prod = fl.mult(exp_plus, exp_minus)
    roundtrip = float(np.max(np.abs(prod.values() - 1.0)))
    if shift is None:
        xi, c1 = noise.xi, noise.c1_eps

        def matvec(v):
            f = TorusField(v.reshape((M,) * 3))
            out = fl.laplacian(f) + fl.mult(xi, f) - c1 * f
            return out.coeffs.ravel()

        lam_max = lanczos_extremal_max(matvec, M**3, m=60)
        shift = max(0.0, lam_max) + 1.0
    return AndersonOperator3d(noise=noise, cutoff_N=int(cutoff_N), K=int(K),
                              shift=float(shift), contraction_factor=float(factor),
                              exp_w_plus=exp_plus, exp_w_minus=exp_minus,
                              statics=statics, exp_roundtrip_error=roundtrip)
