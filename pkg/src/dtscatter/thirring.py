"""Two-fermion scattering for the contact-interaction walk model.

Two walkers evolve one step by the free two-particle walk followed by a
phase e^{i*chi} applied whenever both sit on the same site.  Because the
interaction only sees the relative coordinate, fixing the total
quasi-momentum p reduces the problem to a single walker on the relative
lattice with a rank-four defect at the origin.  Everything here lives in
that reduced picture.

Internal basis order for the 4-dimensional coin space is
(up-up, up-down, down-up, down-down); the first factor is the particle
carrying momentum p + k, the second the one carrying p - k.  The
antisymmetric combination (0, 1, -1, 0)/sqrt(2) is the only state the
contact interaction scatters in the fermionic sector.

Key objects:

* ``xy_factors`` -- the two overlap products x, y of the band eigenvector
  components that every closed-form amplitude is written in.
* ``gamma_matrix`` -- the 4x4 matrix Gamma(z), the Brillouin-zone average
  of the inverse free resolvent evaluated at the coincidence site.  Two
  independent evaluation routes are provided (pole bookkeeping vs
  regularized quadrature) and must agree; the scalar remainder entries of
  the pole route are validated against the quadrature route only.
* ``t_closed_thirring`` / ``amplitude_pp`` -- closed forms obtained by
  resumming the geometric Born series.
* ``umklapp_amplitudes`` -- the elastic and band-flip records related by
  exact sign flips.
* ``born_series_thirring`` -- the partial sums themselves, kept as an
  independent route to the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateMomentumError,
    DomainError,
    PoleError,
    ResonancePoleError,
    RootEnumerationError,
    StationaryPointError,
)
from .lippmann import AmplitudeRecord
from .spectral import Dispersion, make_dispersion, wrap_momentum

_HALF_PI = 0.5 * np.pi

# Pole bookkeeping in gamma_matrix refuses band crossings flatter than this.
STATIONARY_TOL = 1e-8
# Proximity to p = n*pi/2 (where the relative-coordinate reduction
# degenerates) that is rejected outright.
DEGENERATE_P_TOL = 1e-12


@dataclass(frozen=True)
class ThirringParams:
    """Model parameters: band parameter nu and collision phase chi.

    chi is wrapped into (-pi, pi]; lam = exp(i*chi) - 1 is the natural
    coupling the Born series is a power series in (lam = 0 iff chi = 0,
    |lam| <= 2).
    """

    nu: float
    chi: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.chi):
            raise DomainError(f"coupling phase must be finite, got {self.chi}")
        object.__setattr__(self, "chi", float(wrap_momentum(self.chi)))
        object.__setattr__(self, "dispersion", make_dispersion(self.nu))

    dispersion: Dispersion = None  # set in __post_init__

    @property
    def mu(self) -> float:
        return self.dispersion.mu

    @property
    def lam(self) -> complex:
        return complex(np.exp(1j * self.chi) - 1.0)


@dataclass(frozen=True)
class ThirringChannel:
    """Asymptotic two-particle label: total p, relative k, bands s1, s2.

    omega is the quasi-energy s1*w(p+k) + s2*w(p-k) in radians per step.
    Build through ``channel`` so omega stays consistent with (p, k, s1, s2).
    """

    p: float
    k: float
    s1: int
    s2: int
    omega: float


@dataclass(frozen=True)
class XYFactors:
    """Eigenvector overlap products x, y entering all closed forms.

    x = a_{+,up}(p+k) * a_{+,down}(p-k), y = a_{+,down}(p+k) * a_{+,up}(p-k)
    with a the band-eigenvector components.  k = 0 gives x = y, which is
    why the antisymmetric state decouples there.
    """

    x: float
    y: float


@dataclass(frozen=True)
class GammaMatrix:
    """Gamma(z) on the 4-dimensional coin space at the coincidence site.

    method records which evaluation route produced the block:
    "residue" (pole bookkeeping at the radial limit |z| -> 1+) or
    "quadrature" (regularized Brillouin integral, extrapolated in the
    regulator).  roots holds the (k, s1, s2) crossings the residue route
    kept, for diagnostics.
    """

    z: complex
    block: np.ndarray
    method: str
    roots: tuple = ()


def com_transform(k1: float, k2: float) -> tuple[float, float]:
    """Single-particle momenta (k1, k2) -> center-of-mass pair (p, k).

    p = (k1 + k2)/2, k = (k1 - k2)/2; for k1, k2 in (-pi, pi] both land in
    (-pi, pi] without wrapping, and com_inverse undoes this map exactly.
    The other composition is only defined modulo the simultaneous shift
    (p, k) -> (p + pi, k + pi), which leaves (k1, k2) unchanged.
    """
    k1 = float(wrap_momentum(k1))
    k2 = float(wrap_momentum(k2))
    return 0.5 * (k1 + k2), 0.5 * (k1 - k2)


def com_inverse(p: float, k: float) -> tuple[float, float]:
    """Center-of-mass pair (p, k) -> single-particle momenta, wrapped."""
    return float(wrap_momentum(p + k)), float(wrap_momentum(p - k))


def _check_total_momentum(p: float) -> None:
    r = p - _HALF_PI * np.round(p / _HALF_PI)
    if abs(r) < DEGENERATE_P_TOL:
        raise DegenerateMomentumError(
            f"total momentum p = {p} sits on a multiple of pi/2 where the "
            "relative-coordinate reduction degenerates"
        )


def two_particle_omega(params: ThirringParams, p: float, k: float,
                       s1: int, s2: int) -> float:
    """Quasi-energy s1*w(p+k) + s2*w(p-k) of the (s1, s2) band pair."""
    d = params.dispersion
    return float(s1 * d.omega(p + k) + s2 * d.omega(p - k))


def channel(params: ThirringParams, p: float, k: float,
            s1: int, s2: int) -> ThirringChannel:
    """Build a ThirringChannel with a consistent quasi-energy."""
    if s1 not in (+1, -1) or s2 not in (+1, -1):
        raise DomainError(f"band labels must be +-1, got ({s1}, {s2})")
    _check_total_momentum(p)
    p = float(wrap_momentum(p))
    k = float(wrap_momentum(k))
    return ThirringChannel(p=p, k=k, s1=s1, s2=s2,
                           omega=two_particle_omega(params, p, k, s1, s2))


def xy_factors(params: ThirringParams, p: float, k: float) -> XYFactors:
    """Overlap products (x, y) for the upper-band pair at (p, k)."""
    if params.nu >= 1.0:
        raise DomainError(
            "xy factors need a gapped band pair (nu < 1); the chiral point "
            "nu = 1 has trivial eigenvectors and x = y = 0"
        )
    _check_total_momentum(p)
    d = params.dispersion
    a_up_1, a_dn_1 = d.alpha(+1, p + k)
    a_up_2, a_dn_2 = d.alpha(+1, p - k)
    return XYFactors(x=float(a_up_1 * a_dn_2), y=float(a_dn_1 * a_up_2))


def _pair_vector(d: Dispersion, s1: int, s2: int, p: float, k: float) -> np.ndarray:
    """Product eigenvector u^{s1}(p+k) (x) u^{s2}(p-k) as a real 4-vector."""
    u1 = np.array(d.alpha(s1, p + k))
    u2 = np.array(d.alpha(s2, p - k))
    return np.kron(u1, u2)


def w_vector(params: ThirringParams, p: float, k: float) -> np.ndarray:
    """Antisymmetrized incoming weight for the (+, +) band pair.

    (v_{p,k} - v_{p,-k} with swapped factors)/sqrt(2)
    = (x - y)/sqrt(2) * (0, 1, -1, 0); vanishes at k = 0.
    """
    d = params.dispersion
    v_in = _pair_vector(d, +1, +1, p, k)
    # negating k swaps which particle carries which momentum, so this IS
    # the exchanged vector -- components (a, y, x, b) against (a, x, y, b)
    v_sw = _pair_vector(d, +1, +1, p, -k)
    return (v_in - v_sw) / np.sqrt(2.0)


def jacobian_pp(params: ThirringParams, p: float, k: float) -> float:
    """d(omega^{++})/dk = w'(p+k) - w'(p-k); equals 2(y^2 - x^2)."""
    d = params.dispersion
    return float(d.omega_prime(p + k) - d.omega_prime(p - k))


# ---------------------------------------------------------------------------
# Gamma(z): pole-bookkeeping route
# ---------------------------------------------------------------------------

def _band_pair_roots(d: Dispersion, s1: int, s2: int, p: float,
                     omega_target: float, scan_n: int,
                     bisect_tol: float) -> list[float]:
    """All k in (-pi, pi] with s1*w(p+k) + s2*w(p-k) = omega_target mod 2pi.

    The combination is smooth and 2pi-periodic in k, so its level crossings
    of omega_target + 2*pi*Z are found by tracking the integer part of
    (omega^{s1s2}(k) - omega_target)/(2pi) on a dense scan and bisecting
    each bracket.
    """

    def level(k: float | np.ndarray) -> float | np.ndarray:
        return (s1 * d.omega(p + k) + s2 * d.omega(p - k) - omega_target) / (2.0 * np.pi)

    ks = -np.pi + 2.0 * np.pi * np.arange(scan_n + 1) / scan_n
    vals = level(ks)
    roots: list[float] = []
    for i in range(scan_n):
        a, b = ks[i], ks[i + 1]
        fa, fb = vals[i], vals[i + 1]
        lo, hi = (fa, fb) if fa <= fb else (fb, fa)
        # integer levels strictly inside (lo, hi], one bisection per level
        for m in range(int(np.ceil(lo)), int(np.floor(hi)) + 1):
            if fa == m:
                continue  # exact hit counted at the left endpoint of cell i
            ga, gb = fa - m, fb - m
            if ga * gb > 0.0:
                continue
            x0, x1, g0 = a, b, ga
            for _ in range(200):
                if x1 - x0 <= bisect_tol:
                    break
                xm = 0.5 * (x0 + x1)
                gm = level(xm) - m
                if gm == 0.0:
                    x0 = x1 = xm
                    break
                if g0 * gm < 0.0:
                    x1 = xm
                else:
                    x0, g0 = xm, gm
            root = 0.5 * (x0 + x1)
            resid = level(root) - m
            if abs(resid) > 1e-9:
                raise RootEnumerationError(
                    f"bisection failed to pin a band crossing near k = {root} "
                    f"(residual {resid:.3e})"
                )
            roots.append(float(root))
    # exact hits at scan nodes (rare; the k = -pi node is the cell-0 endpoint)
    for i in range(scan_n):
        if float(vals[i]) == np.round(float(vals[i])) and not any(
            abs(ks[i] - r) < 1e-10 for r in roots
        ):
            roots.append(float(ks[i]))
    # de-duplicate brackets that converged to the same crossing
    roots.sort()
    out: list[float] = []
    for r in roots:
        if not out or abs(r - out[-1]) > 1e-10:
            out.append(r)
    return out


def _gamma_residue(params: ThirringParams, p: float, omega_target: float,
                   scan_n: int, bisect_tol: float) -> GammaMatrix:
    """Radial-limit Gamma via pole bookkeeping.

    Gamma(z) depends on z = exp(-i*omega) only, so omega_target is first
    reduced to its principal representative in (-pi, pi]; the crossing
    selection below (keep sin(2k) >= 0 when omega >= 0, sin(2k) < 0 when
    omega < 0) is only valid on that branch -- other representatives of
    the same z select the mirrored crossings and give a different, wrong
    matrix.  Each kept crossing contributes its projector over the signed
    slope of the band-pair energy; the slope-independent remainder is a
    fixed diagonal in the corner entries, with scalar form validated
    against the quadrature route.
    """
    d = params.dispersion
    omega_c = float(wrap_momentum(omega_target))
    positive = omega_c >= 0.0

    total = np.zeros((4, 4), dtype=complex)
    kept: list[tuple[float, int, int]] = []
    for s1 in (+1, -1):
        for s2 in (+1, -1):
            for kr in _band_pair_roots(d, s1, s2, p, omega_c, scan_n, bisect_tol):
                s2k = np.sin(2.0 * kr)
                keep = (s2k >= -1e-12) if positive else (s2k < 1e-12)
                if not keep:
                    continue
                slope = float(s1 * d.omega_prime(p + kr) - s2 * d.omega_prime(p - kr))
                if abs(slope) < STATIONARY_TOL:
                    raise StationaryPointError(
                        f"band pair ({s1:+d},{s2:+d}) crosses omega = {omega_c} "
                        f"with near-zero slope at k = {kr}"
                    )
                v = _pair_vector(d, s1, s2, p, kr)
                total += np.outer(v, v) / slope
                kept.append((float(kr), s1, s2))

    h_plus = omega_c + 2.0 * p
    h_minus = omega_c - 2.0 * p
    for idx, h in ((0, h_plus), (3, h_minus)):
        den = np.exp(-1j * h) - 1.0
        if abs(den) < 1e-12:
            raise PoleError(
                0.0, f"remainder entry {idx} diverges: omega {omega_c} and "
                f"total momentum {p} satisfy omega {'+' if idx == 0 else '-'} "
                "2p = 0 mod 2pi"
            )
        total[idx, idx] += 1.0 / den
    total[2, 2] += -1.0

    return GammaMatrix(z=complex(np.exp(-1j * omega_c)), block=total,
                       method="residue", roots=tuple(kept))


# ---------------------------------------------------------------------------
# Gamma(z): regularized-quadrature route
# ---------------------------------------------------------------------------

DEFAULT_GAMMA_EPS = tuple(0.1 * 0.5 ** j for j in range(5))


def _gamma_quadrature(params: ThirringParams, p: float, omega_target: float,
                      quad_n: int, eps_schedule: tuple) -> GammaMatrix:
    """Gamma via the Brillouin integral at z = exp(-i*omega + eps).

    The integrand has poles of width eps/|slope| in k, so the grid must
    resolve them: the node-average error decays like exp(-n*eps/|slope|),
    and the schedule should keep n*eps well above the largest band slope
    (about 2/mu).  The eps -> 0 limit is taken entrywise by polynomial
    extrapolation through the schedule.
    """
    d = params.dispersion
    omega_c = float(wrap_momentum(omega_target))
    kk = -np.pi + 2.0 * np.pi * np.arange(1, quad_n + 1) / quad_n

    # band data on the grid, reused across the schedule
    pair_data = []
    for s1 in (+1, -1):
        for s2 in (+1, -1):
            w12 = s1 * d.omega(p + kk) + s2 * d.omega(p - kk)
            u1 = np.stack(d.alpha(s1, p + kk))
            u2 = np.stack(d.alpha(s2, p - kk))
            v = np.einsum("an,bn->abn", u1, u2).reshape(4, quad_n)
            proj = np.einsum("in,jn->nij", v, v)
            pair_data.append((w12, proj))

    evals = []
    for eps in eps_schedule:
        z = np.exp(-1j * omega_c + eps)
        acc = np.zeros((4, 4), dtype=complex)
        for w12, proj in pair_data:
            weights = 1.0 / (z * np.exp(1j * w12) - 1.0)
            if not np.all(np.isfinite(weights)):
                raise PoleError(0.0, "regularized integrand is singular; "
                                     "eps schedule reached the unit circle")
            acc += np.tensordot(weights, proj, axes=(0, 0)) / quad_n
        evals.append(acc)

    eps_arr = np.asarray(eps_schedule, dtype=float)
    block = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            seq = np.array([m[i, j] for m in evals])
            block[i, j] = np.polyfit(eps_arr, seq, len(eps_arr) - 1)[-1]

    return GammaMatrix(z=complex(np.exp(-1j * omega_c)), block=block,
                       method="quadrature")


def gamma_matrix(params: ThirringParams, p: float, omega_target: float,
                 method: str = "residue", *, scan_n: int = 2048,
                 bisect_tol: float = 1e-13, quad_n: int = 8192,
                 eps_schedule: tuple = DEFAULT_GAMMA_EPS) -> GammaMatrix:
    """Gamma(z) at z -> exp(-i*omega_target) from outside the unit circle.

    method "residue" does explicit pole bookkeeping (fast, exact up to the
    crossing solves); "quadrature" integrates the regularized kernel over
    the zone and extrapolates the regulator to zero (slow, independent).
    The two agree to better than 1e-6 away from stationary band points
    when the quadrature resolves the poles (see _gamma_quadrature).
    Depends on (nu, p, omega_target) only, not on chi.
    """
    _check_total_momentum(p)
    if not 0.0 < params.nu < 1.0:
        raise DomainError(
            f"gamma_matrix needs dispersive gapped bands (0 < nu < 1), got {params.nu}"
        )
    if not np.isfinite(omega_target):
        raise DomainError(f"omega_target must be finite, got {omega_target}")
    if method == "residue":
        return _gamma_residue(params, p, omega_target, scan_n, bisect_tol)
    if method == "quadrature":
        return _gamma_quadrature(params, p, omega_target, quad_n, eps_schedule)
    raise ValueError(f"unknown gamma method {method!r}")


# ---------------------------------------------------------------------------
# Closed forms and Born series
# ---------------------------------------------------------------------------

def t_closed_thirring(params: ThirringParams, p: float, k: float) -> np.ndarray:
    """Closed-form 2x2 T block on span(up-down, down-up).

    T = lam/((lam+1)^2 x^2 - y^2) * [[(lam+1)x^2 - y^2, -lam*x*y],
                                     [-lam*x*y, (lam+1)x^2 - y^2]].
    Equals the geometric resummation lam*(I - lam*Gamma_Q)^{-1} of the
    Born series on the same subspace.
    """
    f = xy_factors(params, p, k)
    lam = params.lam
    x2, y2 = f.x * f.x, f.y * f.y
    den = (lam + 1.0) ** 2 * x2 - y2
    if abs(den) < 1e-12:
        raise ResonancePoleError(
            f"T denominator (lam+1)^2 x^2 - y^2 = {den} vanishes at "
            f"(nu, p, k, chi) = ({params.nu}, {p}, {k}, {params.chi})"
        )
    diag = (lam + 1.0) * x2 - y2
    off = -lam * f.x * f.y
    return (lam / den) * np.array([[diag, off], [off, diag]], dtype=complex)


def _amplitude_coefficient(params: ThirringParams, f: XYFactors) -> complex:
    lam = params.lam
    den = (lam + 1.0) * f.x + f.y
    if abs(den) < 1e-12:
        raise ResonancePoleError(
            f"amplitude denominator (lam+1)x + y = {den} vanishes"
        )
    return lam * (f.y - f.x) / (2.0 * den)


def amplitude_pp(params: ThirringParams, p: float, k: float) -> AmplitudeRecord:
    """Elastic scattering coefficient for the (+, +) band pair.

    coefficient = lam (y - x) / (2 ((lam+1) x + y)), attached to the
    momentum-conserving delta in k with channel labels (p, k, +, +).
    Unitary on its own: |1 + c|^2 + |c|^2 = 1 identically.
    """
    if not 0.0 <= k <= _HALF_PI:
        raise DomainError(
            f"relative momentum k = {k} outside the analyzed branch [0, pi/2]"
        )
    f = xy_factors(params, p, k)
    c = _amplitude_coefficient(params, f)
    ch = channel(params, p, k, +1, +1)
    return AmplitudeRecord(in_channel=ch, out_channel=ch, comb_index=0,
                           coefficient=c)


def umklapp_amplitudes(params: ThirringParams, p: float, k: float
                       ) -> tuple[AmplitudeRecord, AmplitudeRecord, AmplitudeRecord]:
    """The elastic record and its two sign-locked partners.

    With c the (+,+) elastic coefficient at (p, k):
      1. (+,+) -> (+,+) at k, coefficient +c, no quasi-energy jump;
      2. (+,+) -> (-,-) at k - pi, coefficient -c, quasi-energy drops by
         exactly 2pi (comb index -1): the band flip is allowed only
         because quasi-energy is conserved modulo 2pi;
      3. (-,-) -> (-,-) elastic at k - pi, coefficient +c.
    The three coefficients are built from one evaluation of c, so the
    sign relations hold bit-for-bit.
    """
    rec_pp = amplitude_pp(params, p, k)
    c = rec_pp.coefficient
    ch_in = rec_pp.in_channel
    ch_mm = channel(params, p, k - np.pi, -1, -1)
    rec_flip = AmplitudeRecord(in_channel=ch_in, out_channel=ch_mm,
                               comb_index=-1, coefficient=-c,
                               note="band flip across the zone edge")
    rec_mm = AmplitudeRecord(in_channel=ch_mm, out_channel=ch_mm,
                             comb_index=0, coefficient=+c)
    return rec_pp, rec_flip, rec_mm


@dataclass(frozen=True)
class BornSeries:
    """Partial sums sum_{n<=N} lam^{n+1} <w|Gamma^n|w> and diagnostics.

    partial_sums[N] is the N-th partial sum; term_ratios[N] =
    |term_{N+1}/term_N| (geometric for this model, ratio |lam| x/(x+y)).
    """

    partial_sums: np.ndarray
    term_ratios: np.ndarray

    @property
    def converged(self) -> bool:
        return bool(self.term_ratios.size) and float(self.term_ratios[-1]) < 1.0


def born_series_thirring(params: ThirringParams, p: float, k: float,
                         n_max: int) -> BornSeries:
    """Born partial sums for the elastic (+,+) weight at (p, k).

    Uses the full 4x4 pole-route Gamma at the pair energy; the
    antisymmetric weight w is an eigenvector of Gamma, so the terms are
    exactly geometric and the sums converge to <w|T|w> with T the closed
    form (divide by the band-pair slope to recover the amplitude).
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    w = w_vector(params, p, k)
    omega = two_particle_omega(params, p, k, +1, +1)
    g = gamma_matrix(params, p, omega, method="residue").block
    # Gamma commutes exactly with swapping the two coin factors (k -> -k in
    # the defining integral), which is what makes w an eigenvector and the
    # terms geometric.  The evaluated block carries O(root-tolerance)
    # asymmetry that power iteration would amplify, so enforce the symmetry.
    sw = [0, 2, 1, 3]
    g = 0.5 * (g + g[np.ix_(sw, sw)])
    lam = params.lam

    terms = np.empty(n_max + 1, dtype=complex)
    vec = w.astype(complex)
    for n in range(n_max + 1):
        terms[n] = lam ** (n + 1) * (w @ vec)
        vec = g @ vec
    sums = np.cumsum(terms)
    mags = np.abs(terms)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(mags[:-1] > 0.0, mags[1:] / mags[:-1], 0.0)
    return BornSeries(partial_sums=sums, term_ratios=ratios)
