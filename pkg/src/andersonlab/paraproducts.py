"""Frequency-ordered products: paraproducts, resonant part, commutator.

The pointwise product of two fields splits into the low-high paraproduct
(f lt g), the diagonal resonant part (f o g, shells within one dyadic step of
each other) and the high-low paraproduct (f gt g).  The three pieces sum to
the dealiased product exactly; individually they have the mapping properties
that drive every construction downstream (the low-high part is defined for
arbitrarily rough factors, the resonant part needs the regularities to sum
positively).

All block products are dealiased via the shared 3/2-padded multiply, so the
reconstruction identity holds to rounding error.  Saturated tails (where the
partial smoothing equals the whole field) are collapsed into a single product
for speed; this is exact, not an approximation.
"""

from dataclasses import dataclass

import numpy as np

from .fields import TorusField, decomposition, mult


def _para_lt(f: TorusField, g: TorusField, dec) -> TorusField:
    """sum_j S_{j-1} f * block_j g  (S_{j-1} = blocks up to j-2)."""
    out = TorusField.zeros(f.dim, f.M, real=f.is_real and g.is_real)
    gj = [j for j in dec.active_blocks(g) if j >= 1]
    fj = dec.active_blocks(f)
    if not gj or not fj:
        return out
    f_top, f_min = max(fj), min(fj)
    tail_blocks = []
    for j in gj:
        if j - 2 >= f_top:
            tail_blocks.append(j)
        elif j - 2 >= f_min:
            out = out + mult(dec.low_sum(f, j - 2), dec.block(g, j))
    if tail_blocks:
        gtail = TorusField.zeros(g.dim, g.M, real=g.is_real)
        for j in tail_blocks:
            gtail = gtail + dec.block(g, j)
        out = out + mult(f, gtail)
    return out


def para_lt(f: TorusField, g: TorusField, flavor: str = "sharp") -> TorusField:
    """Low-high paraproduct: f paired below the active shells of g."""
    f._check(g)
    return _para_lt(f, g, decomposition(f.dim, f.M, flavor))


def para_gt(f: TorusField, g: TorusField, flavor: str = "sharp") -> TorusField:
    """High-low paraproduct; para_gt(f, g) == para_lt(g, f)."""
    return para_lt(g, f, flavor)


def resonant(f: TorusField, g: TorusField, flavor: str = "sharp") -> TorusField:
    """Diagonal part: sum over |i - j| <= 1 of block_i f * block_j g."""
    f._check(g)
    dec = decomposition(f.dim, f.M, flavor)
    out = TorusField.zeros(f.dim, f.M, real=f.is_real and g.is_real)
    fj, gj = dec.active_blocks(f), dec.active_blocks(g)
    if len(fj) <= len(gj):
        inner_field, inner_js, outer, outer_js = f, fj, g, set(gj)
    else:
        inner_field, inner_js, outer, outer_js = g, gj, f, set(fj)
    for j in inner_js:
        hits = [i for i in (j - 1, j, j + 1) if i in outer_js]
        if not hits:
            continue
        window = dec.block(outer, hits[0])
        for i in hits[1:]:
            window = window + dec.block(outer, i)
        out = out + mult(dec.block(inner_field, j), window)
    return out


def commutator(f: TorusField, g: TorusField, h: TorusField, flavor: str = "sharp") -> TorusField:
    """Trilinear commutator (f lt g) o h - f * (g o h)."""
    f._check(g)
    f._check(h)
    return resonant(para_lt(f, g, flavor), h, flavor) - mult(f, resonant(g, h, flavor))


class ValueAccumulator:
    """Accumulates sums of pointwise products in value space, deferring the
    single final transform.  Each product is taken on the plain grid when the
    factors' per-axis bands make aliasing impossible, on the 3/2-padded grid
    otherwise -- identical results to summing individual dealiased products.
    """

    def __init__(self, dim: int, M: int):
        self.dim, self.M = dim, M
        self.P = (3 * M) // 2
        self.plain = None
        self.padded = None

    def add_product(self, coef, f: TorusField, g: TorusField):
        from .fields import _axis_bands, padded_values

        bf, bg = _axis_bands(f), _axis_bands(g)
        if bf[0] < 0 or bg[0] < 0:
            return
        if np.all(bf + bg <= self.M // 2 - 1):
            if self.plain is None:
                self.plain = np.zeros((self.M,) * self.dim, dtype=np.complex128)
            self.plain += coef * (f.values() * g.values())
        else:
            if self.padded is None:
                self.padded = np.zeros((self.P,) * self.dim, dtype=np.complex128)
            self.padded += coef * (padded_values(f, self.P) * padded_values(g, self.P))

    def field(self) -> TorusField:
        from .fields import _fftn, values_to_coeffs_truncated

        out = np.zeros((self.M,) * self.dim, dtype=np.complex128)
        if self.plain is not None:
            out += _fftn(self.plain) / self.M**self.dim
        if self.padded is not None:
            out += values_to_coeffs_truncated(self.padded, self.M)
        return TorusField(out)


def _tail_field(g: TorusField, dec, j_from: int) -> TorusField:
    key = ("tail", dec.flavor, j_from)
    if key not in g._blocks:
        total = TorusField.zeros(g.dim, g.M, real=g.is_real)
        for j in dec.active_blocks(g):
            if j >= j_from:
                total = total + dec.block(g, j)
        g._blocks[key] = total
    return g._blocks[key]


def _window_field(g: TorusField, dec, j: int, hits) -> TorusField:
    key = ("win", dec.flavor, j)
    if key not in g._blocks:
        w = dec.block(g, hits[0])
        for i in hits[1:]:
            w = w + dec.block(g, i)
        g._blocks[key] = w
    return g._blocks[key]


def para_lt_into(acc: ValueAccumulator, coef, f: TorusField, g: TorusField,
                 flavor: str = "sharp"):
    """Accumulate coef * (f lt g) into acc."""
    dec = decomposition(f.dim, f.M, flavor)
    gj = [j for j in dec.active_blocks(g) if j >= 1]
    fj = dec.active_blocks(f)
    if not gj or not fj:
        return
    f_top, f_min = max(fj), min(fj)
    tail_from = None
    for j in gj:
        if j - 2 >= f_top:
            tail_from = j if tail_from is None else tail_from
        elif j - 2 >= f_min:
            acc.add_product(coef, dec.low_sum(f, j - 2), dec.block(g, j))
    if tail_from is not None:
        acc.add_product(coef, f, _tail_field(g, dec, tail_from))


def resonant_into(acc: ValueAccumulator, coef, dyn: TorusField, static: TorusField,
                  flavor: str = "sharp"):
    """Accumulate coef * (dyn o static) into acc.

    Iterates the blocks of `dyn` against three-block windows of `static`, so
    the windows (cached on the static field) are reused across evaluations.
    """
    dec = decomposition(dyn.dim, dyn.M, flavor)
    dj, sj = dec.active_blocks(dyn), set(dec.active_blocks(static))
    for j in dj:
        hits = [i for i in (j - 1, j, j + 1) if i in sj]
        if not hits:
            continue
        acc.add_product(coef, dec.block(dyn, j), _window_field(static, dec, j, hits))


@dataclass
class ProductTriple:
    lt: TorusField
    resonant: TorusField
    gt: TorusField

    def total(self) -> TorusField:
        return self.lt + self.resonant + self.gt


def product_triple(f: TorusField, g: TorusField, flavor: str = "sharp") -> ProductTriple:
    """All three pieces; their sum equals mult(f, g) to rounding error."""
    return ProductTriple(para_lt(f, g, flavor), resonant(f, g, flavor), para_gt(f, g, flavor))
