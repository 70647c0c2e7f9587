"""Single-obstacle Born scattering of an outgoing spherical wave.

An alpha-like projectile is emitted as a spherical wave e^{ikR}/R and
scatters once, elastically or inelastically, off a gas atom with a Gaussian
coupling of width s.  The scattered wave is itself spherical, centred on the
atom and strongly peaked in the forward direction.  Requiring the total
probability flux through a large sphere to match the obstacle-free value
forces a global normalization |C|^2 < 1, i.e. the unscattered spherical
component is reduced by the presence of the obstacle.

Natural units throughout: hbar = m = 1, so k = sqrt(2 E) and the velocity
equals the wavenumber.  A scale map to MeV/fm (or any other system) only
rescales lengths and energies; every ratio reported here is unchanged.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .numerics import angle_between, gauss_legendre, norm, quad_1d, unit

__all__ = [
    "SingularPointError",
    "ScatteringContext",
    "Obstacle",
    "AngularAmplitude",
    "form_factor",
    "transferred_momentum",
    "angular_amplitude",
    "angular_table",
    "flux_free",
    "flux_free_numeric",
    "flux_total",
    "normalization_c2",
    "wave_field",
    "quadrature_convergence_check",
]

# below this distance from the emitter or the obstacle the 1/R fields blow up
SINGULAR_RADIUS = 1e-9

# far-field formulas need the obstacle many widths away from the emitter
MIN_DISTANCE_WIDTHS = 10.0

DEFAULT_QUAD_NODES = 128


class SingularPointError(ValueError):
    """Field evaluation requested at a singular point (emitter or obstacle)."""


@dataclass(frozen=True)
class ScatteringContext:
    """Projectile kinematics: kinetic energy and obstacle excitation energy.

    Wavenumbers and velocities follow from the natural units: the elastic
    channel has k = sqrt(2 e_alpha) and the inelastic channel loses delta_e
    to the obstacle, so k' = sqrt(2 (e_alpha - delta_e)) <= k.
    """

    e_alpha: float
    delta_e: float = 0.0

    def __post_init__(self):
        if not (self.e_alpha > 0.0 and math.isfinite(self.e_alpha)):
            raise ValueError(f"projectile energy must be positive, got {self.e_alpha}")
        if not (0.0 <= self.delta_e < self.e_alpha):
            raise ValueError(
                f"excitation energy must satisfy 0 <= delta_e < e_alpha, got {self.delta_e}"
            )

    @classmethod
    def from_wavenumber(cls, k: float, delta_e: float = 0.0) -> "ScatteringContext":
        if k <= 0.0:
            raise ValueError(f"wavenumber must be positive, got {k}")
        return cls(e_alpha=0.5 * k * k, delta_e=delta_e)

    @property
    def k(self) -> float:
        return math.sqrt(2.0 * self.e_alpha)

    @property
    def k_prime(self) -> float:
        return math.sqrt(2.0 * (self.e_alpha - self.delta_e))

    @property
    def v_alpha(self) -> float:
        return self.k

    @property
    def v_alpha_prime(self) -> float:
        return self.k_prime


@dataclass(frozen=True, eq=False)
class Obstacle:
    """One gas atom: position, Gaussian coupling width and channel strengths.

    ``g0`` couples the elastic channel, ``g1`` the inelastic one; ``delta_e``
    is the excitation energy the inelastic channel deposits.  The far-field
    amplitude formulas require the atom to sit many widths away from the
    emitter, enforced here as |position| >= 10 width.
    """

    position: np.ndarray
    width: float
    g0: float
    g1: float
    delta_e: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError(f"position must be a finite 3-vector, got {self.position}")
        object.__setattr__(self, "position", p)
        if not (self.width > 0.0 and math.isfinite(self.width)):
            raise ValueError(f"width must be positive, got {self.width}")
        if self.g0 < 0.0 or self.g1 < 0.0:
            raise ValueError(f"couplings must be non-negative, got g0={self.g0}, g1={self.g1}")
        if self.delta_e < 0.0:
            raise ValueError(f"excitation energy must be non-negative, got {self.delta_e}")
        ratio = self.distance / self.width
        if ratio < MIN_DISTANCE_WIDTHS:
            raise ValueError(
                "far-field amplitudes need |position| >= "
                f"{MIN_DISTANCE_WIDTHS:g} * width; got a/s = {ratio:g}"
            )

    @property
    def distance(self) -> float:
        return norm(self.position)

    @property
    def direction(self) -> np.ndarray:
        return unit(self.position)

    def coupling(self, channel: int) -> float:
        if channel == 0:
            return self.g0
        if channel == 1:
            return self.g1
        raise ValueError(f"channel must be 0 (elastic) or 1 (inelastic), got {channel}")


def form_factor(obstacle: Obstacle, channel: int, r) -> float:
    """Coupling matrix element g_j exp(-|r|^2 / (2 s^2)).

    ``r`` is measured from the obstacle centre (obstacle-local coordinates).
    """
    g = obstacle.coupling(channel)
    r = np.asarray(r, dtype=float)
    s = obstacle.width
    return g * math.exp(-float(np.dot(r, r)) / (2.0 * s * s))


def transferred_momentum(k: float, theta: float) -> float:
    """Momentum transfer q = 2 k sin(theta/2) for elastic scattering at angle theta."""
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"scattering angle must lie in [0, pi], got {theta}")
    return 2.0 * k * math.sin(0.5 * theta)


def angular_amplitude(ctx: ScatteringContext, obstacle: Obstacle, channel: int, theta: float) -> complex:
    """Amplitude I_j(theta) of the wave scattered once by the obstacle.

    The scattered wave is (e^{ik|R-a|} / |R-a|) I_j(theta), with theta
    measured from the emitter-to-obstacle direction.  For the Gaussian
    coupling the Fourier transform is closed-form:

        I_j(theta) = (1/2pi) (e^{ika} / a) g_j (2pi)^{3/2} s^3 exp(-q^2 s^2 / 2),

    with q = 2 k sin(theta/2).  The inelastic channel uses the same q since
    the excitation energy is negligible against the projectile energy; its
    distinct velocity only enters the flux bookkeeping.
    """
    g = obstacle.coupling(channel)
    a = obstacle.distance
    s = obstacle.width
    q = transferred_momentum(ctx.k, theta)
    ft = g * (2.0 * math.pi) ** 1.5 * s**3 * math.exp(-0.5 * q * q * s * s)
    return complex(np.exp(1j * ctx.k * a) / a * ft / (2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class AngularAmplitude:
    """Tabulated scattered-wave amplitude I_j on an ascending angle grid."""

    channel: int
    thetas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if thetas.ndim != 1 or thetas.shape != values.shape:
            raise ValueError("thetas and values must be 1-d arrays of equal length")
        if np.any(np.diff(thetas) <= 0.0):
            raise ValueError("angle grid must be strictly ascending")
        moduli = np.abs(values)
        if np.any(np.diff(moduli) > 1e-12 * moduli[0]):
            raise ValueError("|I(theta)| must be non-increasing for a Gaussian coupling")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "values", values)


def angular_table(
    ctx: ScatteringContext, obstacle: Obstacle, channel: int, thetas
) -> AngularAmplitude:
    """Evaluate :func:`angular_amplitude` on an angle grid."""
    thetas = np.asarray(thetas, dtype=float)
    values = np.array(
        [angular_amplitude(ctx, obstacle, channel, t) for t in thetas], dtype=complex
    )
    return AngularAmplitude(channel=channel, thetas=thetas, values=values)


def flux_free(ctx: ScatteringContext) -> float:
    """Probability flux 4 pi v of the bare spherical wave through any sphere."""
    return 4.0 * math.pi * ctx.v_alpha


def _radial_derivative(field, point: np.ndarray, direction: np.ndarray, h: float) -> complex:
    # five-point central stencil, O(h^4)
    def at(offset: float) -> complex:
        return field(point + offset * direction)

    return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h)


def flux_free_numeric(
    ctx: ScatteringContext,
    radius: float = 3.7,
    n_theta: int = 24,
    n_phi: int = 48,
    rel_step: float = 1e-3,
) -> float:
    """Cross-check of :func:`flux_free` from the probability current.

    Samples the bare spherical wave, takes the radial derivative with a
    five-point stencil of step ``rel_step / k``, forms the radial current
    J_r = Im(psi* dpsi/dR) and integrates J_r R^2 over the sphere with a
    Gauss-Legendre rule in cos(theta) and a uniform rule in phi.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    h = rel_step / ctx.k

    def field(p: np.ndarray) -> complex:
        return wave_field(ctx, None, p)

    cos_nodes, cos_weights = gauss_legendre(n_theta)
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    phi_weight = 2.0 * math.pi / n_phi
    total = 0.0
    for c, w in zip(cos_nodes, cos_weights):
        sin_t = math.sqrt(max(0.0, 1.0 - c * c))
        for phi in phis:
            direction = np.array([sin_t * math.cos(phi), sin_t * math.sin(phi), c])
            point = radius * direction
            psi = field(point)
            dpsi = _radial_derivative(field, point, direction, h)
            j_r = (np.conj(psi) * dpsi).imag
            total += w * phi_weight * j_r * radius * radius
    return float(total)


@functools.lru_cache(maxsize=4096)
def _intensity_integrals(
    k: float, a: float, s: float, g0: float, g1: float, n: int
) -> tuple[float, float]:
    # shared by flux_total and normalization_c2 so the flux identity holds bitwise
    def intensity(g: float):
        def f(theta: float) -> float:
            q = 2.0 * k * math.sin(0.5 * theta)
            amp = g * (2.0 * math.pi) ** 1.5 * s**3 * math.exp(-0.5 * q * q * s * s) / (
                2.0 * math.pi * a
            )
            return math.sin(theta) * amp * amp

        return f

    a0 = quad_1d(intensity(g0), 0.0, math.pi, n) if g0 > 0.0 else 0.0
    a1 = quad_1d(intensity(g1), 0.0, math.pi, n) if g1 > 0.0 else 0.0
    return a0, a1


def flux_total(ctx: ScatteringContext, obstacle: Obstacle, n: int = DEFAULT_QUAD_NODES) -> float:
    """Total flux through a large sphere around the emitter, obstacle included.

    F = 4 pi v + 2 pi v int sin(theta) |I_0|^2 + 2 pi v' int sin(theta) |I_1|^2.
    The scattered terms are non-negative, so F >= flux_free with equality only
    when both couplings vanish.  Interference between the unscattered and
    scattered waves integrates to zero on a large sphere and is dropped.
    """
    a0, a1 = _intensity_integrals(
        ctx.k, obstacle.distance, obstacle.width, obstacle.g0, obstacle.g1, n
    )
    return (
        4.0 * math.pi * ctx.v_alpha
        + 2.0 * math.pi * ctx.v_alpha * a0
        + 2.0 * math.pi * ctx.v_alpha_prime * a1
    )


def normalization_c2(ctx: ScatteringContext, obstacle: Obstacle, n: int = DEFAULT_QUAD_NODES) -> float:
    """Squared normalization |C|^2 in (0, 1] restoring flux conservation.

    |C|^2 = [1 + (1/2) int sin |I_0|^2 + (1/2)(v'/v) int sin |I_1|^2]^{-1},
    so |C|^2 * flux_total == flux_free identically and the unscattered
    spherical amplitude is reduced whenever either coupling is non-zero.
    """
    a0, a1 = _intensity_integrals(
        ctx.k, obstacle.distance, obstacle.width, obstacle.g0, obstacle.g1, n
    )
    ratio = ctx.v_alpha_prime / ctx.v_alpha
    return 1.0 / (1.0 + 0.5 * a0 + 0.5 * ratio * a1)


def wave_field(ctx: ScatteringContext, obstacle: Obstacle | None, point) -> complex:
    """Elastic-channel field value at ``point``.

    Without an obstacle this is the bare spherical wave e^{ikR}/R.  With one
    it is C [e^{ikR}/R + (e^{ik|R-a|}/|R-a|) I_0(theta)], the flux-normalized
    sum of the unscattered wave and the once-scattered elastic wave, with C
    taken real positive (only |C|^2 is fixed by flux conservation).
    """
    p = np.asarray(point, dtype=float)
    r = norm(p)
    if r < SINGULAR_RADIUS:
        raise SingularPointError(f"field is singular at the emitter, |R|={r!r}")
    free = complex(np.exp(1j * ctx.k * r) / r)
    if obstacle is None:
        return free
    rel = p - obstacle.position
    d = norm(rel)
    if d < SINGULAR_RADIUS:
        raise SingularPointError(f"field is singular at the obstacle, |R-a|={d!r}")
    theta = angle_between(obstacle.direction, rel / d)
    scattered = complex(np.exp(1j * ctx.k * d) / d) * angular_amplitude(ctx, obstacle, 0, theta)
    c = math.sqrt(normalization_c2(ctx, obstacle))
    return c * (free + scattered)


def quadrature_convergence_check(
    ctx: ScatteringContext,
    obstacle: Obstacle,
    n: int = DEFAULT_QUAD_NODES,
    rel_tol: float = 1e-8,
) -> None:
    """Verify the flux quadrature is converged by doubling the node count.

    Run once at the start of a computation; raises if the n-node and 2n-node
    total fluxes disagree beyond ``rel_tol``.
    """
    f_n = flux_total(ctx, obstacle, n)
    f_2n = flux_total(ctx, obstacle, 2 * n)
    if abs(f_n - f_2n) > rel_tol * abs(f_2n):
        raise ValueError(
            f"flux quadrature not converged at n={n}: {f_n!r} vs {f_2n!r} at 2n"
        )
