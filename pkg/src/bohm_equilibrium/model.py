"""Analytic model of an entangled two-particle Gaussian state.

The wavefunction factorizes over center-of-mass and relative coordinates,
Y = (y1 + y2)/2 and y = y1 - y2 (unit-Jacobian change of variables), each
coordinate carrying a freely spreading one-dimensional Gaussian packet.
One combination is prepared narrow, the other wide; which one is narrow is
the correlation orientation. All densities, widths, and velocities used
elsewhere derive from the closed-form evolution implemented here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _require_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Global constants: hbar and the single-particle mass."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def cm_mass(self) -> float:
        """Mass attached to the center-of-mass coordinate (2m)."""
        return 2.0 * self.mass

    @property
    def rel_mass(self) -> float:
        """Reduced mass attached to the relative coordinate (m/2)."""
        return 0.5 * self.mass


@dataclass(frozen=True)
class GaussianMode:
    """One freely evolving Gaussian packet in a single mode coordinate.

    Parameters
    ----------
    sigma0 : float
        Initial position-space width (standard deviation of |psi|^2).
    center0 : float
        Initial packet center.
    wavenumber : float
        Carrier wavenumber k; the packet drifts at hbar*k/coord_mass.
    coord_mass : float
        Mass conjugate to this coordinate (2m for the center of mass,
        m/2 for the relative coordinate).
    """

    sigma0: float
    center0: float = 0.0
    wavenumber: float = 0.0
    coord_mass: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0.0):
            raise ValueError(f"sigma0 must be positive and finite, got {self.sigma0!r}")
        if not (math.isfinite(self.coord_mass) and self.coord_mass > 0.0):
            raise ValueError(
                f"coord_mass must be positive and finite, got {self.coord_mass!r}"
            )
        for name in ("center0", "wavenumber"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")


class Correlation(enum.Enum):
    """Which linear combination of y1, y2 is prepared narrow."""

    SUM_NARROW = "sum"
    DIFFERENCE_NARROW = "difference"

    @classmethod
    def from_label(cls, label):
        if isinstance(label, cls):
            return label
        for member in cls:
            if member.value == label:
                return member
        valid = ", ".join(repr(m.value) for m in cls)
        raise ValueError(f"unknown correlation {label!r}; expected one of {valid}")

    @property
    def combination(self) -> str:
        """Label of the narrow combination: 'sum' or 'difference'."""
        return self.value


@dataclass(frozen=True)
class EvolvedMode:
    """Snapshot of a Gaussian mode at time t.

    sigma and center describe |psi|^2 = N(center, sigma^2). complex_width is
    A(t) = sigma0^2 + i*hbar*t/(2*coord_mass), the squared width appearing in
    the exponent; phase is the global dynamical phase -hbar*k^2*t/(2*coord_mass);
    stretch_rate is sigma'(t)/sigma(t), the logarithmic spreading rate that
    drives the pilot-wave velocity field.
    """

    mode: GaussianMode
    t: float
    sigma: float
    center: float
    drift: float
    stretch_rate: float
    complex_width: complex
    phase: float


def evolve_mode(mode: GaussianMode, params: PhysicalParams, t: float) -> EvolvedMode:
    """Evolve one Gaussian mode to time t under free dynamics.

    Width follows sigma(t) = sigma0 * sqrt(1 + (hbar*t / (2*m_c*sigma0^2))^2)
    and the center translates at the group velocity hbar*k/m_c.
    """
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    beta = params.hbar / (2.0 * mode.coord_mass * mode.sigma0**2)
    sf = beta * t
    sigma = mode.sigma0 * math.hypot(1.0, sf)
    drift = params.hbar * mode.wavenumber / mode.coord_mass
    center = mode.center0 + drift * t
    stretch_rate = beta * sf / (1.0 + sf * sf)
    complex_width = mode.sigma0**2 * complex(1.0, sf)
    phase = -0.5 * mode.wavenumber * drift * t
    return EvolvedMode(
        mode=mode,
        t=t,
        sigma=sigma,
        center=center,
        drift=drift,
        stretch_rate=stretch_rate,
        complex_width=complex_width,
        phase=phase,
    )


def mode_amplitude(evolved: EvolvedMode, u):
    """Complex amplitude of an evolved mode at coordinate u.

    Normalized so that |amplitude|^2 integrates to one; phase convention is
    real-positive at the center at t = 0.
    """
    mode = evolved.mode
    a = evolved.complex_width
    prefactor = (2.0 * mode.sigma0**2 / math.pi) ** 0.25 / np.sqrt(2.0 * a)
    xi = np.asarray(u, dtype=float) - mode.center0
    exponent = 1j * (mode.wavenumber * xi + evolved.phase)
    exponent = exponent - (np.asarray(u, dtype=float) - evolved.center) ** 2 / (4.0 * a)
    return prefactor * np.exp(exponent)


def mode_density(evolved: EvolvedMode, u):
    """|amplitude|^2 of an evolved mode: a normal pdf in u."""
    z = (np.asarray(u, dtype=float) - evolved.center) / evolved.sigma
    return np.exp(-0.5 * z * z) / (evolved.sigma * _SQRT_2PI)


@dataclass(frozen=True)
class TwoParticleState:
    """Product of a center-of-mass mode and a relative mode.

    The full wavefunction is psi(y1, y2, t) = psi_cm(Y, t) * psi_rel(y, t)
    with Y = (y1+y2)/2 and y = y1-y2. Mode masses must match the coordinate
    change: coord_mass = 2m for the cm mode and m/2 for the relative mode.
    """

    params: PhysicalParams
    cm_mode: GaussianMode
    rel_mode: GaussianMode
    correlation: Correlation = Correlation.SUM_NARROW

    def __post_init__(self):
        if not isinstance(self.correlation, Correlation):
            object.__setattr__(
                self, "correlation", Correlation.from_label(self.correlation)
            )
        expected_cm = self.params.cm_mass
        expected_rel = self.params.rel_mass
        if not math.isclose(self.cm_mode.coord_mass, expected_cm, rel_tol=1e-12):
            raise ValueError(
                f"cm_mode.coord_mass must equal 2*mass = {expected_cm!r}, "
                f"got {self.cm_mode.coord_mass!r}"
            )
        if not math.isclose(self.rel_mode.coord_mass, expected_rel, rel_tol=1e-12):
            raise ValueError(
                f"rel_mode.coord_mass must equal mass/2 = {expected_rel!r}, "
                f"got {self.rel_mode.coord_mass!r}"
            )

    @classmethod
    def from_widths(
        cls,
        sigma_narrow: float = 0.05,
        sigma_wide: float = 1.0,
        correlation="sum",
        params: PhysicalParams | None = None,
        cm_center: float = 0.0,
        rel_center: float = 0.0,
        cm_wavenumber: float = 0.0,
        rel_wavenumber: float = 0.0,
    ) -> "TwoParticleState":
        """Build a state from the narrow/wide mode widths.

        For sum-narrow states the cm mode gets sigma_narrow and the relative
        mode sigma_wide; difference-narrow swaps them.
        """
        params = params or PhysicalParams()
        correlation = Correlation.from_label(correlation)
        if correlation is Correlation.SUM_NARROW:
            sigma_cm, sigma_rel = sigma_narrow, sigma_wide
        else:
            sigma_cm, sigma_rel = sigma_wide, sigma_narrow
        cm = GaussianMode(
            sigma0=sigma_cm,
            center0=cm_center,
            wavenumber=cm_wavenumber,
            coord_mass=params.cm_mass,
        )
        rel = GaussianMode(
            sigma0=sigma_rel,
            center0=rel_center,
            wavenumber=rel_wavenumber,
            coord_mass=params.rel_mass,
        )
        return cls(params=params, cm_mode=cm, rel_mode=rel, correlation=correlation)

    @property
    def narrow_mode(self) -> GaussianMode:
        if self.correlation is Correlation.SUM_NARROW:
            return self.cm_mode
        return self.rel_mode

    @property
    def wide_mode(self) -> GaussianMode:
        if self.correlation is Correlation.SUM_NARROW:
            return self.rel_mode
        return self.cm_mode

    def with_narrow_sigma(self, sigma0: float) -> "TwoParticleState":
        """Copy of this state with the narrow mode's initial width replaced."""
        new_mode = replace(self.narrow_mode, sigma0=sigma0)
        if self.correlation is Correlation.SUM_NARROW:
            return replace(self, cm_mode=new_mode)
        return replace(self, rel_mode=new_mode)

    def evolved(self, t: float) -> tuple[EvolvedMode, EvolvedMode]:
        """(cm, rel) mode snapshots at time t."""
        return (
            evolve_mode(self.cm_mode, self.params, t),
            evolve_mode(self.rel_mode, self.params, t),
        )


def mode_coordinates(y1, y2):
    """Map particle positions to (Y, y) = ((y1+y2)/2, y1-y2)."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    return 0.5 * (y1 + y2), y1 - y2


def particle_coordinates(cm, rel):
    """Inverse of mode_coordinates: (y1, y2) = (Y + y/2, Y - y/2)."""
    cm = np.asarray(cm, dtype=float)
    rel = np.asarray(rel, dtype=float)
    return cm + 0.5 * rel, cm - 0.5 * rel


def eval_psi(state: TwoParticleState, y1, y2, t: float):
    """Full two-particle amplitude psi(y1, y2, t).

    The (y1, y2) -> (Y, y) change of variables has unit Jacobian, so the
    factorized amplitude is already normalized over (y1, y2).
    """
    _require_finite("y1", y1)
    _require_finite("y2", y2)
    cm, rel = state.evolved(t)
    big_y, small_y = mode_coordinates(y1, y2)
    return mode_amplitude(cm, big_y) * mode_amplitude(rel, small_y)


def eval_density(state: TwoParticleState, y1, y2, t: float):
    """|psi|^2 evaluated directly as a product of normal pdfs.

    Avoids complex arithmetic entirely, which makes it an independent check
    on eval_psi.
    """
    _require_finite("y1", y1)
    _require_finite("y2", y2)
    cm, rel = state.evolved(t)
    big_y, small_y = mode_coordinates(y1, y2)
    return mode_density(cm, big_y) * mode_density(rel, small_y)


def constraint_width(state: TwoParticleState, t: float, which: str = "sum") -> float:
    """Standard deviation of y1+y2 (which='sum') or y1-y2 (which='difference').

    Var(y1+y2) = 4*Var(Y) and Var(y1-y2) = Var(y), so the sum width is
    2*sigma_cm(t) and the difference width is sigma_rel(t).
    """
    cm, rel = state.evolved(t)
    if which == "sum":
        return 2.0 * cm.sigma
    if which == "difference":
        return rel.sigma
    raise ValueError(f"which must be 'sum' or 'difference', got {which!r}")


OBSERVABLES = ("y1", "y2", "y1+y2", "y1-y2")


def observable_normal(state: TwoParticleState, t: float, observable: str):
    """(mean, std) of the named linear observable under |psi|^2 at time t.

    Each of y1, y2, y1+y2, y1-y2 is a linear combination of the independent
    normal coordinates Y and y, hence exactly normal at every t.
    """
    cm, rel = state.evolved(t)
    if observable == "y1":
        return cm.center + 0.5 * rel.center, math.hypot(cm.sigma, 0.5 * rel.sigma)
    if observable == "y2":
        return cm.center - 0.5 * rel.center, math.hypot(cm.sigma, 0.5 * rel.sigma)
    if observable == "y1+y2":
        return 2.0 * cm.center, 2.0 * cm.sigma
    if observable == "y1-y2":
        return rel.center, rel.sigma
    raise ValueError(
        f"observable must be one of {OBSERVABLES}, got {observable!r}"
    )
