"""Multi-obstacle cloud-chamber model.

A spherical wave emitted at the origin crosses a shell of randomly placed gas
atoms.  Each scattering is strongly forward-peaked, so a high-order wave in
which several atoms are excited survives only when those atoms are aligned
with the emitter.  Every aligned atom multiplies the unscattered spherical
flux by |C|^2 < 1, so a long enough chain extinguishes the spherical wave and
the chain direction becomes the observed linear track.  For one fixed atom
configuration the selected track is a pure function of the atom positions;
randomness only enters through the thermal placement of the atoms, and an
ensemble of configurations spreads its tracks isotropically.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import chi2

from .mott import Obstacle, ScatteringContext, angular_amplitude, flux_free, normalization_c2
from .numerics import RngStream, norm, unit

__all__ = [
    "AtomSpecies",
    "GasConfiguration",
    "AlignmentChain",
    "TrackResult",
    "IsotropyResult",
    "sample_gas",
    "cone_half_angle",
    "second_order_amplitude",
    "build_chains",
    "select_track",
    "off_chain_c2_product",
    "isotropy_experiment",
    "direction_bin",
    "save_configuration",
    "load_configuration",
]

MAX_EXPECTED_ATOMS = 10_000_000

# cone wider than pi/6 means the forward peak is no longer narrow
WIDE_CONE_ANGLE = math.pi / 6.0

# chained far-field form needs the atoms many widths apart
SEPARATION_WIDTHS = 10.0


@dataclass(frozen=True)
class AtomSpecies:
    """Properties shared by every atom of the gas (the position is sampled)."""

    width: float
    g0: float
    g1: float
    delta_e: float = 0.0

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError(f"width must be positive, got {self.width}")
        if self.g0 < 0.0 or self.g1 < 0.0:
            raise ValueError(f"couplings must be non-negative, got g0={self.g0}, g1={self.g1}")
        if self.delta_e < 0.0:
            raise ValueError(f"excitation energy must be non-negative, got {self.delta_e}")

    def at(self, position) -> Obstacle:
        return Obstacle(
            position=np.asarray(position, dtype=float),
            width=self.width,
            g0=self.g0,
            g1=self.g1,
            delta_e=self.delta_e,
        )


@dataclass(frozen=True, eq=False)
class GasConfiguration:
    """One frozen microscopic state of the chamber gas.

    Atoms live in the shell inner_radius <= |a| <= chamber_radius; the
    exclusion zone around the emitter keeps every atom in the far field of
    the source.  ``seed``/``stream_id`` record the stream that produced the
    sample, for provenance and replay.
    """

    atoms: tuple[Obstacle, ...]
    chamber_radius: float
    inner_radius: float
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not (0.0 < self.inner_radius < self.chamber_radius):
            raise ValueError(
                f"need 0 < inner_radius < chamber_radius, got {self.inner_radius}, {self.chamber_radius}"
            )
        if self.atoms:
            max_width = max(a.width for a in self.atoms)
            if self.inner_radius < 10.0 * max_width:
                raise ValueError(
                    f"inner_radius must be >= 10 * max atom width, got {self.inner_radius} < {10 * max_width}"
                )
            for i, atom in enumerate(self.atoms):
                r = atom.distance
                if not (self.inner_radius <= r <= self.chamber_radius):
                    raise ValueError(
                        f"atom {i} at radius {r!r} lies outside the shell "
                        f"[{self.inner_radius}, {self.chamber_radius}]"
                    )

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms], dtype=float).reshape(-1, 3)


def sample_gas(
    density: float,
    inner_radius: float,
    chamber_radius: float,
    species: AtomSpecies,
    rng: RngStream,
) -> GasConfiguration:
    """Sample a Poisson gas of identical atoms, uniform in the shell volume.

    The atom count is Poisson with mean density * shell volume; positions are
    isotropic with radii uniform in volume.  Draw order is fixed (count, then
    all direction normals, then all radii), so a given stream reproduces the
    configuration bitwise.
    """
    if density < 0.0:
        raise ValueError(f"density must be non-negative, got {density}")
    if not (0.0 < inner_radius < chamber_radius):
        raise ValueError(
            f"need 0 < inner_radius < chamber_radius, got {inner_radius}, {chamber_radius}"
        )
    volume = 4.0 * math.pi / 3.0 * (chamber_radius**3 - inner_radius**3)
    expected = density * volume
    if expected > MAX_EXPECTED_ATOMS:
        raise ValueError(f"expected atom count {expected:g} exceeds guard {MAX_EXPECTED_ATOMS:g}")
    count = rng.poisson(expected) if expected > 0.0 else 0
    atoms = []
    if count > 0:
        normals = rng.standard_normal(size=(count, 3))
        u = rng.uniform(size=count)
        radii = np.cbrt(inner_radius**3 + u * (chamber_radius**3 - inner_radius**3))
        for i in range(count):
            direction = unit(normals[i])
            atoms.append(species.at(radii[i] * direction))
    return GasConfiguration(
        atoms=tuple(atoms),
        chamber_radius=chamber_radius,
        inner_radius=inner_radius,
        seed=rng.seed,
        stream_id=rng.stream_id,
    )


def cone_half_angle(ctx: ScatteringContext, s: float, envelope_drop: float = 0.5) -> float:
    """Half-angle of the forward scattering cone for coupling width ``s``.

    The scattered intensity envelope is exp(-q^2 s^2 / 2); the cone edge is
    where it has dropped by exp(-envelope_drop), i.e. q s = sqrt(2 drop),
    giving theta_c = 2 arcsin(sqrt(2 drop) / (2 k s)).  The default drop of
    1/2 puts the edge at q s = 1.  Warns when the cone is wider than pi/6,
    where the single-track picture degrades.
    """
    if envelope_drop <= 0.0:
        raise ValueError(f"envelope_drop must be positive, got {envelope_drop}")
    x = math.sqrt(2.0 * envelope_drop) / (2.0 * ctx.k * s)
    if x >= 1.0:
        raise ValueError(
            f"no forward cone: k*s = {ctx.k * s:g} too small for envelope drop {envelope_drop:g}"
        )
    theta_c = 2.0 * math.asin(x)
    if theta_c > WIDE_CONE_ANGLE:
        warnings.warn(
            f"wide-cone regime: half-angle {theta_c:.3f} rad exceeds {WIDE_CONE_ANGLE:.3f}",
            stacklevel=2,
        )
    return theta_c


def second_order_amplitude(
    ctx: ScatteringContext, atom_a: Obstacle, atom_b: Obstacle
) -> complex:
    """Chained twice-inelastic amplitude: excite atom a, then atom b.

    The forward-peaked inelastic wave from atom a propagates to atom b and
    scatters once more there,

        I_1^{(a)}(theta_ab) * (e^{ik|b-a|} / |b-a|) * sqrt(2 pi) g1_b s_b^3,

    with theta_ab the angle between the emitter->a direction and the a->b
    direction.  The last factor is the forward (q = 0) inelastic scattering
    strength of atom b.  The full double volume integral is not computed;
    this chained form keeps the essential feature that both atoms are excited
    only when b lies in the narrow forward cone of a.
    """
    rel = atom_b.position - atom_a.position
    d = norm(rel)
    if not atom_b.distance > atom_a.distance:
        raise ValueError(
            f"atom b must be farther from the emitter than atom a, got |b|={atom_b.distance!r}"
            f" <= |a|={atom_a.distance!r}"
        )
    if d < SEPARATION_WIDTHS * max(atom_a.width, atom_b.width):
        raise ValueError(
            f"atoms too close for the chained far-field form: |b-a| = {d!r}"
        )
    theta_ab = float(np.arccos(np.clip(np.dot(atom_a.direction, rel / d), -1.0, 1.0)))
    first = angular_amplitude(ctx, atom_a, 1, theta_ab)
    forward_b = math.sqrt(2.0 * math.pi) * atom_b.g1 * atom_b.width**3
    return complex(first * np.exp(1j * ctx.k * d) / d * forward_b)


@dataclass(frozen=True, eq=False)
class AlignmentChain:
    """Successive atoms each inside the forward cone of the chain head.

    ``indices`` are atom indices into one GasConfiguration, radii strictly
    increasing; ``direction`` is the emitter-to-head unit vector that serves
    as the cone axis for the whole chain.
    """

    indices: tuple[int, ...]
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if not self.indices:
            raise ValueError("a chain has at least its head atom")
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def head(self) -> int:
        return self.indices[0]


@dataclass(frozen=True, eq=False)
class TrackResult:
    """Deterministic outcome of one chamber configuration."""

    direction: np.ndarray
    chain: AlignmentChain
    surviving_spherical_flux: float
    c2_per_step: float

    @property
    def flux_ratio(self) -> float:
        return self.c2_per_step**self.chain.n


def build_chains(
    config: GasConfiguration, ctx: ScatteringContext, theta_c: float
) -> list[AlignmentChain]:
    """All maximal alignment chains of the configuration.

    Atoms are visited in ascending radius (ties by index).  From each head
    the chain grows greedily: the next member is the nearest atom strictly
    farther from the emitter whose direction from the current atom lies
    within ``theta_c`` of the head's emitter direction; distance ties go to
    the smallest index.  Atoms already absorbed into an earlier chain do not
    start their own, so the returned chains are the maximal ones.
    """
    n = config.n_atoms
    if n == 0:
        return []
    pos = config.positions()
    radii = np.sqrt(np.sum(pos * pos, axis=1))
    dirs = pos / radii[:, None]
    cos_c = math.cos(theta_c)
    order = sorted(range(n), key=lambda i: (radii[i], i))
    absorbed: set[int] = set()
    chains: list[AlignmentChain] = []
    for head in order:
        if head in absorbed:
            continue
        axis = dirs[head]
        members = [head]
        current = head
        while True:
            rel = pos - pos[current]
            dist = np.sqrt(np.sum(rel * rel, axis=1))
            with np.errstate(invalid="ignore", divide="ignore"):
                cos_angle = (rel @ axis) / dist
            eligible = (radii > radii[current]) & (dist > 0.0) & (cos_angle >= cos_c)
            if not np.any(eligible):
                break
            dist = np.where(eligible, dist, np.inf)
            nxt = int(np.argmin(dist))  # first minimum = smallest index on ties
            members.append(nxt)
            current = nxt
        absorbed.update(members[1:])
        chains.append(AlignmentChain(indices=tuple(members), direction=dirs[head]))
    return chains


def _uniform_species(config: GasConfiguration) -> bool:
    first = config.atoms[0]
    return all(
        (a.width, a.g0, a.g1, a.delta_e) == (first.width, first.g0, first.g1, first.delta_e)
        for a in config.atoms[1:]
    )


def select_track(
    config: GasConfiguration,
    ctx: ScatteringContext,
    envelope_drop: float = 0.5,
    n_quad: int = 128,
) -> Optional[TrackResult]:
    """Deterministic track selected by the atom configuration.

    Builds all alignment chains and keeps the longest one; ties go to the
    chain with the smallest surviving spherical flux, then the smallest head
    index.  The surviving flux is flux_free * (|C|^2)^N with the chain-head
    obstacle's |C|^2 used for every step.  Returns None for an empty
    configuration.
    """
    if config.n_atoms == 0:
        return None
    theta_c = cone_half_angle(ctx, max(a.width for a in config.atoms), envelope_drop)
    chains = build_chains(config, ctx, theta_c)
    best_n = max(c.n for c in chains)
    tied = [c for c in chains if c.n == best_n]
    if len(tied) > 1:
        if _uniform_species(config):
            # |C|^2 grows with head distance for a shared species, so head
            # distance orders the surviving flux without recomputing it
            tied.sort(key=lambda c: (config.atoms[c.head].distance, c.head))
        else:
            tied.sort(
                key=lambda c: (
                    flux_free(ctx)
                    * normalization_c2(ctx, config.atoms[c.head], n_quad) ** c.n,
                    c.head,
                )
            )
    winner = tied[0]
    c2 = normalization_c2(ctx, config.atoms[winner.head], n_quad)
    flux = flux_free(ctx) * c2**winner.n
    return TrackResult(
        direction=winner.direction,
        chain=winner,
        surviving_spherical_flux=flux,
        c2_per_step=c2,
    )


def off_chain_c2_product(
    config: GasConfiguration,
    ctx: ScatteringContext,
    chain: AlignmentChain,
    n_quad: int = 128,
) -> float:
    """Diagnostic: combined |C|^2 of the atoms not on the selected chain.

    The model reduces the spherical wave only along the selected chain; this
    reports how much further reduction the remaining atoms would contribute
    if they fed back as well.
    """
    members = set(chain.indices)
    product = 1.0
    for i, atom in enumerate(config.atoms):
        if i not in members:
            product *= normalization_c2(ctx, atom, n_quad)
    return product


def direction_bin(direction, n_z_bands: int = 4, n_phi_sectors: int = 8) -> int:
    """Equal-solid-angle bin index of a unit direction.

    Bands uniform in z = cos(theta) crossed with uniform phi sectors give
    n_z_bands * n_phi_sectors bins of equal solid angle.
    """
    d = np.asarray(direction, dtype=float)
    z = min(1.0, max(-1.0, float(d[2])))
    band = min(n_z_bands - 1, int((z + 1.0) * 0.5 * n_z_bands))
    phi = math.atan2(float(d[1]), float(d[0]))
    sector = int((phi + math.pi) / (2.0 * math.pi) * n_phi_sectors) % n_phi_sectors
    return band * n_phi_sectors + sector


@dataclass(frozen=True, eq=False)
class IsotropyResult:
    """Directional statistics of many independent chamber runs."""

    counts: np.ndarray
    chi_square: float
    p_value: float
    directions: np.ndarray
    chain_lengths: np.ndarray
    flux_ratios: np.ndarray
    n_empty: int


def isotropy_experiment(
    n_configs: int,
    density: float,
    inner_radius: float,
    chamber_radius: float,
    species: AtomSpecies,
    ctx: ScatteringContext,
    rng: RngStream,
    n_z_bands: int = 4,
    n_phi_sectors: int = 8,
    config_factory: Optional[Callable[[int], GasConfiguration]] = None,
) -> IsotropyResult:
    """Track directions over many independent gas configurations.

    Configuration i is sampled from the sub-stream ``rng.stream_id + 1 + i``,
    so runs parallelize over configurations without changing results.  Bins
    are equal-solid-angle; the chi-square statistic is against the uniform
    distribution with n_bins - 1 degrees of freedom.  ``config_factory``
    overrides the gas sampler (it receives the configuration index), which is
    how degenerate, non-isotropic gases are injected in tests.
    """
    if n_configs < 100:
        raise ValueError(f"need at least 100 configurations, got {n_configs}")
    n_bins = n_z_bands * n_phi_sectors
    counts = np.zeros(n_bins, dtype=int)
    directions = []
    chain_lengths = []
    flux_ratios = []
    n_empty = 0
    for i in range(n_configs):
        if config_factory is not None:
            config = config_factory(i)
        else:
            config = sample_gas(
                density,
                inner_radius,
                chamber_radius,
                species,
                rng.substream(rng.stream_id + 1 + i),
            )
        track = select_track(config, ctx)
        if track is None:
            n_empty += 1
            continue
        counts[direction_bin(track.direction, n_z_bands, n_phi_sectors)] += 1
        directions.append(track.direction)
        chain_lengths.append(track.chain.n)
        flux_ratios.append(track.flux_ratio)
    n_tracks = int(counts.sum())
    if n_tracks == 0:
        raise ValueError("no configuration produced a track; increase the density")
    expected = n_tracks / n_bins
    stat = float(np.sum((counts - expected) ** 2) / expected)
    p_value = float(chi2.sf(stat, n_bins - 1))
    return IsotropyResult(
        counts=counts,
        chi_square=stat,
        p_value=p_value,
        directions=np.array(directions).reshape(-1, 3),
        chain_lengths=np.array(chain_lengths, dtype=int),
        flux_ratios=np.array(flux_ratios, dtype=float),
        n_empty=n_empty,
    )


def configuration_to_dict(config: GasConfiguration) -> dict:
    return {
        "seed": config.seed,
        "stream_id": config.stream_id,
        "inner_radius": config.inner_radius,
        "chamber_radius": config.chamber_radius,
        "atoms": [
            {
                "x": float(a.position[0]),
                "y": float(a.position[1]),
                "z": float(a.position[2]),
                "s": a.width,
                "g0": a.g0,
                "g1": a.g1,
                "delta_e": a.delta_e,
            }
            for a in config.atoms
        ],
    }


def configuration_from_dict(data: dict) -> GasConfiguration:
    atoms = tuple(
        Obstacle(
            position=np.array([entry["x"], entry["y"], entry["z"]], dtype=float),
            width=entry["s"],
            g0=entry["g0"],
            g1=entry["g1"],
            delta_e=entry.get("delta_e", 0.0),
        )
        for entry in data["atoms"]
    )
    return GasConfiguration(
        atoms=atoms,
        chamber_radius=data["chamber_radius"],
        inner_radius=data["inner_radius"],
        seed=data["seed"],
        stream_id=data.get("stream_id", 0),
    )


def save_configuration(config: GasConfiguration, path) -> None:
    """Write the configuration as JSON; floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(configuration_to_dict(config), fh, indent=1)
        fh.write("\n")


def load_configuration(path) -> GasConfiguration:
    with open(path, "r", encoding="utf-8") as fh:
        return configuration_from_dict(json.load(fh))
