"""Pointwise algebra of (1,1)-forms on C^k and the Fubini-Study form on P^m.

Convention: ``dd^c u = (i/pi) d dbar u``. A (1,1)-form is stored through its
coefficient matrix ``A`` with

    alpha = (i/pi) * sum_{p,q} A[p, q] dz_q ^ dzbar_p,

so that ``A[p, q] = d^2 u / (dzbar_p dz_q)`` for ``alpha = dd^c u``. With this
layout the pullback by a holomorphic map with Jacobian ``J`` is ``J^H A J``.
Top-degree wedge products are returned as densities against Lebesgue measure
on C^k = R^{2k}; a single form ``A = [1]`` has density ``2/pi``.

Most functions accept stacked arrays with arbitrary leading batch dimensions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10
FLUSH_TOL = 1e-13
DICTIONARY_VERSION = "1"
MAX_DICT_DEGREE = 2


@dataclass(frozen=True)
class HermitianForm:
    """Coefficient matrix of a real (1,1)-form at a point.

    Attributes:
        coeff: k x k complex Hermitian matrix.
        positive: When True, positive semidefiniteness is asserted on creation.
    """

    coeff: np.ndarray
    positive: bool = False

    def __post_init__(self) -> None:
        a = np.array(self.coeff, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"coefficient matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficient matrix has non-finite entries")
        scale = np.linalg.norm(a)
        if np.linalg.norm(a - a.conj().T) > HERMITIAN_RTOL * max(scale, 1e-300):
            raise ValueError("coefficient matrix is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        if self.positive and scale > 0:
            lo = np.linalg.eigvalsh(a).min()
            if lo < -PSD_RTOL * scale:
                raise ValueError(f"form flagged positive has eigenvalue {lo:.3e}")
        a.setflags(write=False)
        object.__setattr__(self, "coeff", a)

    @property
    def dim(self) -> int:
        return self.coeff.shape[0]

    def __add__(self, other: "HermitianForm") -> "HermitianForm":
        return HermitianForm(self.coeff + other.coeff, self.positive and other.positive)

    def scaled(self, c: float) -> "HermitianForm":
        return HermitianForm(c * self.coeff, self.positive and c >= 0)


@dataclass(frozen=True)
class ChartPoint:
    """Point of P^m in the affine chart ``{Z_chart != 0}``."""

    chart: int
    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.w, dtype=complex))
        if w.ndim != 1:
            raise ValueError("chart coordinates must be a vector")
        if not 0 <= self.chart <= w.size:
            raise ValueError(f"chart index {self.chart} invalid for P^{w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("chart coordinates must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def m(self) -> int:
        return self.w.size

    def homogeneous(self) -> np.ndarray:
        """Homogeneous representative with a 1 in the chart slot."""
        return np.insert(np.array(self.w), self.chart, 1.0 + 0j)

    @classmethod
    def from_homogeneous(cls, z: Sequence[complex]) -> "ChartPoint":
        """Chart point in the chart of the largest homogeneous coordinate."""
        z = np.asarray(z, dtype=complex)
        if not np.any(z):
            raise ValueError("homogeneous coordinates are all zero")
        c = int(np.argmax(np.abs(z)))
        return cls(c, np.delete(z / z[c], c))


# ---------------------------------------------------------------------------
# mixed discriminants


def _grouped_polarization(mats: Sequence[np.ndarray], mults: Sequence[int]) -> np.ndarray:
    """k! * D(A_1^{m_1}, ..., A_s^{m_s}) by inclusion-exclusion over subset sizes.

    Uses ``k! D = sum_S (-1)^{k-|S|} det(sum_{i in S} A_i)`` with repeated
    matrices grouped, so that only ``prod (m_i + 1)`` determinants are needed.
    """
    k = int(sum(mults))
    out = None
    for counts in itertools.product(*[range(mu + 1) for mu in mults]):
        c = sum(counts)
        if c == 0:
            continue
        coef = (-1) ** (k - c)
        for mu, ci in zip(mults, counts):
            coef *= math.comb(mu, ci)
        acc = sum(ci * a for ci, a in zip(counts, mats) if ci)
        term = coef * np.linalg.det(acc)
        out = term if out is None else out + term
    return out


def mixed_det(groups: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Return ``k! * D(A_1,...,A_k)`` for batched (not necessarily Hermitian) matrices.

    Args:
        groups: Pairs ``(A, multiplicity)`` with ``A`` of shape ``(..., k, k)``.

    Returns:
        Array of shape ``(...)``; complex unless every input is real.
    """
    mats, mults = [], []
    for a, mu in groups:
        if mu < 0:
            raise ValueError("multiplicities must be non-negative")
        if mu == 0:
            continue
        mats.append(np.asarray(a))
        mults.append(int(mu))
    if not mats:
        raise ValueError("at least one form with positive multiplicity is required")
    k = mats[0].shape[-1]
    for a in mats:
        if a.shape[-2:] != (k, k):
            raise ValueError(f"dimension mismatch: expected {k}x{k}, got {a.shape[-2:]}")
    if sum(mults) != k:
        raise ValueError(f"multiplicities sum to {sum(mults)}, expected k={k}")
    return _grouped_polarization(mats, mults)


def wedge_density(groups: Sequence[tuple[np.ndarray, int]], hermitian: bool = True) -> np.ndarray:
    """Batched density of ``A_1^{m_1} ^ ... ^ A_s^{m_s}`` against Lebesgue measure.

    With ``hermitian`` the real part is returned (the imaginary part is rounding
    noise); pass False for complex coefficient matrices.
    """
    k = next(np.shape(a)[-1] for a, mu in groups if mu)
    val = (2.0 / math.pi) ** k * mixed_det(groups)
    return np.real(val) if hermitian else val


def mixed_wedge_density(forms_with_multiplicity: Sequence[tuple[HermitianForm, int]], k: int) -> float:
    """Scalar density of a top-degree wedge of (1,1)-forms on C^k.

    Args:
        forms_with_multiplicity: ``(form, multiplicity)`` pairs; multiplicities sum to ``k``.
        k: Domain dimension.

    Returns:
        ``(2/pi)^k * k! * D(A_1, ..., A_k)``.
    """
    for f, _ in forms_with_multiplicity:
        if f.dim != k:
            raise ValueError(f"form of dimension {f.dim} in a wedge on C^{k}")
    if sum(mu for _, mu in forms_with_multiplicity) != k:
        raise ValueError("multiplicities must sum to k")
    val = (2.0 / math.pi) ** k * mixed_det([(f.coeff, mu) for f, mu in forms_with_multiplicity])
    return float(np.real(val))


# ---------------------------------------------------------------------------
# Fubini-Study


def fs_coeff(w: np.ndarray) -> np.ndarray:
    """Batched FS coefficient ``(1/2) d^2 log(1+|w|^2) / dwbar dw`` in an affine chart.

    Args:
        w: Chart coordinates of shape ``(..., m)``.
    """
    w = np.asarray(w, dtype=complex)
    n2 = np.sum(np.abs(w) ** 2, axis=-1)
    m = w.shape[-1]
    eye = np.eye(m)
    outer = w[..., :, None] * np.conj(w)[..., None, :]
    num = (1.0 + n2)[..., None, None] * eye - outer
    return 0.5 * num / ((1.0 + n2) ** 2)[..., None, None]


def fs_form_at(p: ChartPoint) -> HermitianForm:
    """FS form ``dd^c log||Z||`` at a chart point; positive definite."""
    return HermitianForm(fs_coeff(p.w), positive=True)


def fs_pullback_coeff(F: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Coefficient of ``phi^* omega`` from a homogeneous representative.

    The result ``(1/2) (P J)^H (P J) / ||F||^2``, with ``P`` the orthogonal
    projection off ``F``, is unchanged when ``(F, J)`` are multiplied by the same
    positive scalar, so callers may rescale to avoid overflow.

    Args:
        F: Representative values, shape ``(..., m+1)``.
        J: Jacobian of the representative, shape ``(..., m+1, k)``.
    """
    F = np.asarray(F, dtype=complex)
    J = np.asarray(J, dtype=complex)
    nrm = np.linalg.norm(F, axis=-1)
    fh = F / nrm[..., None]
    jn = J / nrm[..., None, None]
    along = np.einsum("...i,...ik->...k", np.conj(fh), jn)
    proj = jn - fh[..., :, None] * along[..., None, :]
    return 0.5 * np.einsum("...ip,...iq->...pq", np.conj(proj), proj)


def pullback_form(J: np.ndarray, H: HermitianForm) -> HermitianForm:
    """Pull back a form on C^m along a linear map with Jacobian ``J`` (m x k)."""
    J = np.atleast_2d(np.asarray(J, dtype=complex))
    if J.shape[0] != H.dim:
        raise ValueError(f"Jacobian has {J.shape[0]} rows, form has dimension {H.dim}")
    return HermitianForm(J.conj().T @ H.coeff @ J, positive=H.positive)


def fs_sample(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` unit homogeneous vectors distributed by the normalized FS volume of P^m."""
    g = rng.standard_normal((n, m + 1)) + 1j * rng.standard_normal((n, m + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def fs_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """FS geodesic distance ``arccos |<p, q>| / (||p|| ||q||)``; diameter pi/2."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    ip = np.abs(np.sum(np.conj(p) * q, axis=-1))
    c = ip / (np.linalg.norm(p, axis=-1) * np.linalg.norm(q, axis=-1))
    return np.arccos(np.clip(c, 0.0, 1.0))


# ---------------------------------------------------------------------------
# numeric dd^c


def numeric_ddc(
    u: Callable[[np.ndarray], np.ndarray],
    z: Sequence[complex],
    h: float | None = None,
) -> HermitianForm:
    """Central-difference complex Hessian of a real function, as a (1,1)-form.

    Args:
        u: Vectorized evaluator taking an ``(n, k)`` complex array to ``n`` reals.
        z: Base point in C^k.
        h: Step; defaults to ``1e-4 * (1 + ||z||)``.

    Returns:
        Form with coefficient ``d^2 u / dzbar_p dz_q``; error O(h^2).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    k = z.size
    if h is None:
        h = 1e-4 * (1.0 + np.linalg.norm(z))
    if not h > 0:
        raise ValueError("step must be positive")
    n = 2 * k
    basis = np.zeros((n, k), dtype=complex)
    for p in range(k):
        basis[2 * p, p] = 1.0
        basis[2 * p + 1, p] = 1j
    pts = [z]
    index = {}
    for a in range(n):
        for b in range(a, n):
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                index[(a, b, sa, sb)] = len(pts)
                pts.append(z + h * (sa * basis[a] + sb * basis[b]))
    vals = np.asarray(u(np.array(pts)), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = np.array(pts)[~np.isfinite(vals)][0]
        raise ValueError(f"non-finite value of u near {bad}")
    hess = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            s = (
                vals[index[(a, b, 1, 1)]]
                - vals[index[(a, b, 1, -1)]]
                - vals[index[(a, b, -1, 1)]]
                + vals[index[(a, b, -1, -1)]]
            )
            hess[a, b] = hess[b, a] = s / (4 * h * h)
    coeff = np.empty((k, k), dtype=complex)
    for p in range(k):
        for q in range(k):
            xx = hess[2 * p, 2 * q]
            yy = hess[2 * p + 1, 2 * q + 1]
            yx = hess[2 * p + 1, 2 * q]
            xy = hess[2 * p, 2 * q + 1]
            coeff[p, q] = 0.25 * (xx + yy + 1j * (yx - xy))
    coeff[np.abs(coeff) < FLUSH_TOL] = 0.0
    if np.linalg.norm(coeff) < FLUSH_TOL:
        coeff[:] = 0.0
    return HermitianForm(0.5 * (coeff + coeff.conj().T))


# ---------------------------------------------------------------------------
# test-form dictionary


@dataclass(frozen=True)
class DictEntry:
    """One real function ``Re`` or ``Im`` of ``Z^alpha Zbar^beta / ||Z||^{2d}``."""

    index: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    part: str

    @property
    def degree(self) -> int:
        return sum(self.alpha)

    @property
    def label(self) -> str:
        if self.degree == 0:
            return "1"
        return f"{self.part}[a={''.join(map(str, self.alpha))},b={''.join(map(str, self.beta))}]"


def _multi_indices(n: int, d: int) -> list[tuple[int, ...]]:
    out = [c for c in itertools.product(range(d + 1), repeat=n) if sum(c) == d]
    return sorted(out, reverse=True)


def dictionary(m: int, max_degree: int = MAX_DICT_DEGREE) -> list[DictEntry]:
    """Frozen test-function dictionary on P^m (version ``DICTIONARY_VERSION``).

    Entry 0 is the constant 1. For each degree ``d = 1..max_degree`` the pairs
    ``(alpha, beta)`` with ``|alpha| = |beta| = d`` and ``alpha <= beta`` in the
    listing order contribute the real part, plus the imaginary part when
    ``alpha != beta``. P^1 has 14 entries, P^2 has 46.
    """
    entries = [DictEntry(0, (0,) * (m + 1), (0,) * (m + 1), "re")]
    for d in range(1, max_degree + 1):
        idx = _multi_indices(m + 1, d)
        for i, a in enumerate(idx):
            for b in idx[i:]:
                entries.append(DictEntry(len(entries), a, b, "re"))
                if a != b:
                    entries.append(DictEntry(len(entries), a, b, "im"))
    return entries


def eval_dict_function(entry: DictEntry, Z: np.ndarray) -> np.ndarray:
    """Evaluate a dictionary function at homogeneous coordinates ``Z`` (..., m+1)."""
    Z = np.asarray(Z, dtype=complex)
    if entry.degree == 0:
        return np.ones(Z.shape[:-1])
    y = Z / np.linalg.norm(Z, axis=-1, keepdims=True)
    val = np.prod(y ** np.array(entry.alpha), axis=-1) * np.prod(
        np.conj(y) ** np.array(entry.beta), axis=-1
    )
    return val.real if entry.part == "re" else val.imag


def _dmono(alpha: np.ndarray, beta: np.ndarray, Z: np.ndarray, d: int) -> np.ndarray:
    """``d/dZ_i`` of ``Z^alpha Zbar^beta / ||Z||^{2d}``."""
    n2 = np.sum(np.abs(Z) ** 2, axis=-1, keepdims=True)
    zb = np.prod(np.conj(Z) ** beta, axis=-1)
    mono = (np.prod(Z**alpha, axis=-1) * zb)[..., None]
    dz = np.zeros(Z.shape, dtype=complex)
    for i in np.nonzero(alpha)[0]:
        a2 = alpha.copy()
        a2[i] -= 1
        dz[..., i] = alpha[i] * np.prod(Z**a2, axis=-1) * zb
    return dz / n2**d - d * mono * np.conj(Z) / n2 ** (d + 1)


def grad_dict_function(entry: DictEntry, Z: np.ndarray) -> np.ndarray:
    """Holomorphic gradient ``df/dZ_i`` of a dictionary function, shape (..., m+1).

    Homogeneous of degree -1 in ``Z`` and annihilated by contraction with ``Z``
    (Euler), so the chain rule through a positively rescaled representative is
    exact.
    """
    Z = np.asarray(Z, dtype=complex)
    if entry.degree == 0:
        return np.zeros(Z.shape, dtype=complex)
    a = np.array(entry.alpha)
    b = np.array(entry.beta)
    g = _dmono(a, b, Z, entry.degree)
    gc = _dmono(b, a, Z, entry.degree)  # derivative of the conjugate monomial
    if entry.part == "re":
        return 0.5 * (g + gc)
    return (g - gc) / 2j


def _fs_bound_samples(m: int, n: int = 10_000, seed: int = 20240531) -> np.ndarray:
    return fs_sample(m, n, np.random.default_rng(seed))


@dataclass(frozen=True)
class TestForm:
    """Test form ``psi = f * omega^j`` with ``f`` a dictionary function on P^m.

    Attributes:
        m: Target dimension.
        j: Degree.
        index: Dictionary index of ``f``.
        sup_norm: Upper bound for ``|f|`` on P^m.
    """

    __test__ = False

    m: int
    j: int
    index: int
    sup_norm: float = field(default=1.0)

    def __post_init__(self) -> None:
        if not 0 <= self.j <= self.m:
            raise ValueError(f"degree {self.j} outside 0..{self.m}")
        n = len(dictionary(self.m))
        if not 0 <= self.index < n:
            raise ValueError(f"dictionary index {self.index} outside 0..{n - 1}")

    @property
    def entry(self) -> DictEntry:
        return dictionary(self.m)[self.index]

    def f(self, Z: np.ndarray) -> np.ndarray:
        return eval_dict_function(self.entry, Z)

    def grad(self, Z: np.ndarray) -> np.ndarray:
        return grad_dict_function(self.entry, Z)


def make_test_form(m: int, j: int, index: int, n_samples: int = 10_000) -> TestForm:
    """Build a TestForm with ``sup_norm`` from sampling, inflated by 5% and capped at 1.

    The analytic bound ``|Z^alpha Zbar^beta| <= ||Z||^{2d}`` gives 1, so the
    cap keeps the stored value a true upper bound.
    """
    entry = dictionary(m)[index]
    vals = np.abs(eval_dict_function(entry, _fs_bound_samples(m, n_samples)))
    return TestForm(m, j, index, float(min(1.05 * vals.max(), 1.0)))


def verify_sup_norm(tf: TestForm, n_samples: int = 10_000, seed: int = 7) -> bool:
    """Check ``|f| <= sup_norm`` on ``n_samples`` FS-random points."""
    pts = fs_sample(tf.m, n_samples, np.random.default_rng(seed))
    return bool(np.all(np.abs(tf.f(pts)) <= tf.sup_norm + 1e-15))


def dictionary_forms(m: int, j: int, count: int | None = None) -> list[TestForm]:
    """First ``count`` dictionary test forms of degree ``j`` on P^m."""
    n = len(dictionary(m)) if count is None else count
    return [make_test_form(m, j, i) for i in range(n)]


def fs_moments(m: int, entries: Sequence[DictEntry] | None = None, order: int = 8) -> np.ndarray:
    """Integrals of dictionary functions against the normalized FS volume of P^m.

    Uses the product rule: ``|Y_i|^2`` uniform on the simplex (Gauss-Jacobi
    stacked over coordinates) times independent phases (trapezoid, exact for
    the low-degree trigonometric content of the dictionary).
    """
    if entries is None:
        entries = dictionary(m)
    if m > 2:
        raise ValueError("grid FS moments implemented for m <= 2")
    x, wx = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    wx = 0.5 * wx
    nph = 8
    ph = 2 * np.pi * np.arange(nph) / nph
    if m == 1:
        s = x
        ws = wx
        mod = np.stack([np.sqrt(1 - s), np.sqrt(s)], axis=1)
        Z = mod[:, None, :] * np.exp(1j * np.stack([np.zeros(nph), ph], axis=1))[None, :, :]
        W = (ws[:, None] * np.full(nph, 1.0 / nph)[None, :]).ravel()
        Z = Z.reshape(-1, 2)
    else:
        # simplex {s1 + s2 <= 1} via s1 = a, s2 = (1 - a) b, Jacobian (1 - a), density 2
        a, b = np.meshgrid(x, x, indexing="ij")
        wa, wb = np.meshgrid(wx, wx, indexing="ij")
        s1 = a.ravel()
        s2 = ((1 - a) * b).ravel()
        ws = (2.0 * wa * wb * (1 - a)).ravel()
        mod = np.stack([np.sqrt(np.clip(1 - s1 - s2, 0, None)), np.sqrt(s1), np.sqrt(s2)], axis=1)
        p1, p2 = np.meshgrid(ph, ph, indexing="ij")
        phases = np.stack([np.zeros(p1.size), p1.ravel(), p2.ravel()], axis=1)
        Z = mod[:, None, :] * np.exp(1j * phases)[None, :, :]
        W = (ws[:, None] * np.full(phases.shape[0], 1.0 / phases.shape[0])[None, :]).ravel()
        Z = Z.reshape(-1, 3)
    return np.array([np.sum(W * eval_dict_function(e, Z)) for e in entries])
