"""Physical parameters of the two-rod optomechanical setup and everything
derived from them: gravitationally shifted mode frequencies, optomechanical
and gravitational coupling constants, the revival-period shift, and the
thermal/decoherence feasibility quantities.

Geometry: two torsional micro-rods (end masses ``m`` and ``M``) suspended a
vertical distance ``h`` apart, each forming the movable end mirror of an
optical cavity of length ``d``.  Expanding the Newtonian attraction between
the end masses to quadratic order in the relative angle yields a bilinear
position-position coupling between the two mechanical modes and shifts each
bare frequency upward by the other rod's mass term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .constants import G_NEWTON, HBAR, K_BOLTZMANN
from .errors import ParameterError

TWO_PI = 2.0 * math.pi

UNITS_SI = "si"
UNITS_DIMENSIONLESS = "dimensionless"

#: Exponent guard: exp(x) overflows near 710, and the occupation is
#: indistinguishable from zero long before that.
_NBAR_EXP_CUTOFF = 700.0

_POSITIVE_FIELDS = (
    "mass_m",
    "mass_M",
    "separation_h",
    "cavity_length_d",
    "bare_freq_a",
    "bare_freq_b",
    "light_freq_c",
    "light_freq_d",
    "hbar",
)


@dataclass(frozen=True)
class PhysicalParams:
    """Free knobs of the experiment.

    All quantities are SI when ``units == "si"``.  In dimensionless mode
    (``hbar = 1`` convention) the mode frequencies are taken as given and the
    couplings are supplied directly through the ``direct_*`` fields, which is
    the only regime where the exact propagator can resolve first-order
    gravitational effects in double precision.

    ``frequency_convention`` states whether the frequency fields are angular
    (rad/s, the default) or cyclic (Hz, multiplied by 2*pi on use).
    """

    mass_m: float  # end-mass of rod m, kg
    mass_M: float  # end-mass of rod M, kg
    separation_h: float  # vertical rod separation, m
    cavity_length_d: float  # optical cavity length, m
    bare_freq_a: float  # uncoupled frequency of rod m
    bare_freq_b: float  # uncoupled frequency of rod M
    light_freq_c: float  # input light frequency, cavity of rod m
    light_freq_d: float  # input light frequency, cavity of rod M
    beta_m: complex = 1.0 + 0.0j  # initial coherent amplitude, rod m
    beta_M: complex = 1.0 + 0.0j  # initial coherent amplitude, rod M
    rod_half_length_L: float | None = None  # only the potential needs it
    grav_constant_G: float = G_NEWTON
    hbar: float = HBAR
    units: str = UNITS_SI
    frequency_convention: str = "angular"
    # Dimensionless-mode couplings, bypassing the SI formulas.
    direct_gamma: float | None = None
    direct_lambda_m: float | None = None
    direct_lambda_M: float | None = None

    def __post_init__(self):
        if self.units not in (UNITS_SI, UNITS_DIMENSIONLESS):
            raise ParameterError(
                f"units must be '{UNITS_SI}' or '{UNITS_DIMENSIONLESS}', got {self.units!r}"
            )
        if self.frequency_convention not in ("angular", "cyclic"):
            raise ParameterError(
                "frequency_convention must be 'angular' or 'cyclic', "
                f"got {self.frequency_convention!r}"
            )
        for name in _POSITIVE_FIELDS:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a finite positive number, got {value!r}")
        if not (math.isfinite(self.grav_constant_G) and self.grav_constant_G >= 0):
            raise ParameterError(
                f"grav_constant_G must be finite and non-negative, got {self.grav_constant_G!r}"
            )
        if self.rod_half_length_L is not None and not (
            math.isfinite(self.rod_half_length_L) and self.rod_half_length_L > 0
        ):
            raise ParameterError(
                f"rod_half_length_L must be finite and positive, got {self.rod_half_length_L!r}"
            )
        for name in ("beta_m", "beta_M"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        directs = (self.direct_gamma, self.direct_lambda_m, self.direct_lambda_M)
        if self.units == UNITS_DIMENSIONLESS:
            for name, value in zip(
                ("direct_gamma", "direct_lambda_m", "direct_lambda_M"), directs
            ):
                if value is None or not math.isfinite(value):
                    raise ParameterError(
                        f"dimensionless mode requires a finite {name}, got {value!r}"
                    )
            if self.direct_lambda_m < 0 or self.direct_lambda_M < 0:
                raise ParameterError("direct optomechanical couplings must be >= 0")
        elif any(v is not None for v in directs):
            raise ParameterError("direct_* couplings are only allowed in dimensionless mode")

    def angular_frequencies(self) -> tuple[float, float, float, float]:
        """(bare_a, bare_b, light_c, light_d) in rad/s honouring the convention."""
        factor = 1.0 if self.frequency_convention == "angular" else TWO_PI
        return (
            factor * self.bare_freq_a,
            factor * self.bare_freq_b,
            factor * self.light_freq_c,
            factor * self.light_freq_d,
        )

    def as_dict(self) -> dict:
        """Plain-type field mapping, suitable for fingerprinting and JSON."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, complex):
                value = [value.real, value.imag]
            out[f.name] = value
        return out


@dataclass(frozen=True)
class DerivedCouplings:
    """Coupling constants of the interacting system.

    ``omega_a``/``omega_b`` are the gravitationally shifted mode frequencies,
    ``lambda_m``/``lambda_M`` the optomechanical couplings evaluated at those
    shifted frequencies, and ``Lambda_m``/``Lambda_M`` the couplings of the
    gravity-free system.  ``gamma`` is the bilinear gravitational coupling
    (non-positive; zero exactly when G = 0) and ``delta_T`` the shift of the
    visibility revival period, the most accessible experimental signature.
    """

    omega_a: float  # rad/s
    omega_b: float  # rad/s
    lambda_m: float  # dimensionless
    lambda_M: float  # dimensionless
    Lambda_m: float  # dimensionless, gravity-free
    Lambda_M: float  # dimensionless, gravity-free
    gamma: float  # rad/s, <= 0 in SI mode
    delta_T: float  # s

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ThermalEnv:
    """Thermal occupation and environmental-dephasing quantities."""

    temperature_T: float  # K
    damping_rate_Gamma_a: float  # rad/s
    nbar: float  # mean thermal phonon number
    dephasing_rate_Gamma_D: float  # rad/s
    position_uncertainty_dx: float  # m
    quality_factor_Q: float  # dimensionless

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _optomech_coupling(light_freq, cavity_length, mass, mech_freq, hbar):
    # Shared by the coupled and uncoupled variants so that they are
    # bitwise-identical when the frequencies coincide (G = 0).
    return light_freq / (2.0 * cavity_length * mech_freq) * math.sqrt(
        hbar / (mass * mech_freq)
    )


def derive_couplings(p: PhysicalParams) -> DerivedCouplings:
    """Compute every derived coupling from the free parameters.

    SI mode evaluates the exact square-root frequency shift
    omega = sqrt(bare**2 + G*other_mass/h**3); the frequently quoted
    small-shift approximation G*other_mass/(2*h**3*bare) is documentation
    only and never used.  Dimensionless mode passes the ``direct_*``
    couplings through unchanged (no frequency shift, delta_T = 0).

    Raises
    ------
    ParameterError
        If any derived quantity fails to be finite; the message names the
        offending quantity.
    """
    bare_a, bare_b, light_c, light_d = p.angular_frequencies()
    if p.units == UNITS_DIMENSIONLESS:
        dc = DerivedCouplings(
            omega_a=bare_a,
            omega_b=bare_b,
            lambda_m=p.direct_lambda_m,
            lambda_M=p.direct_lambda_M,
            Lambda_m=p.direct_lambda_m,
            Lambda_M=p.direct_lambda_M,
            gamma=p.direct_gamma,
            delta_T=0.0,
        )
    else:
        G = p.grav_constant_G
        h3 = p.separation_h**3
        shift_a = G * p.mass_M / h3
        shift_b = G * p.mass_m / h3
        # Keep the G = 0 path bitwise equal to the bare constants.
        omega_a = bare_a if shift_a == 0.0 else math.sqrt(bare_a**2 + shift_a)
        omega_b = bare_b if shift_b == 0.0 else math.sqrt(bare_b**2 + shift_b)
        gamma = (
            0.0
            if G == 0.0
            else -(G / (2.0 * h3)) * math.sqrt(p.mass_M * p.mass_m / (omega_a * omega_b))
        )
        dc = DerivedCouplings(
            omega_a=omega_a,
            omega_b=omega_b,
            lambda_m=_optomech_coupling(light_c, p.cavity_length_d, p.mass_m, omega_a, p.hbar),
            lambda_M=_optomech_coupling(light_d, p.cavity_length_d, p.mass_M, omega_b, p.hbar),
            Lambda_m=_optomech_coupling(light_c, p.cavity_length_d, p.mass_m, bare_a, p.hbar),
            Lambda_M=_optomech_coupling(light_d, p.cavity_length_d, p.mass_M, bare_b, p.hbar),
            gamma=gamma,
            delta_T=TWO_PI / bare_a - TWO_PI / omega_a,
        )
    for name, value in dc.as_dict().items():
        if not math.isfinite(value):
            raise ParameterError(f"derived coupling {name} is not finite; check the inputs")
    return dc


def without_gravity(p: PhysicalParams) -> PhysicalParams:
    """Same setup with the gravitational interaction switched off."""
    if p.units == UNITS_DIMENSIONLESS:
        return replace(p, direct_gamma=0.0)
    return replace(p, grav_constant_G=0.0)


def gravitational_potential(theta_m, theta_M, p: PhysicalParams, mode="exact"):
    """Newtonian interaction energy of the two rods at angles theta_m, theta_M.

    ``mode="exact"`` evaluates the full inverse-distance expression between
    the end masses; ``mode="quadratic"`` the small-relative-angle expansion
    whose quadratic term generates the bilinear coupling.  The relative
    error of the expansion scales as the fourth power of the relative angle.
    Requires ``rod_half_length_L``-- the only quantity in the package that
    does; everywhere else the rod length cancels.
    """
    if mode not in ("exact", "quadratic"):
        raise ParameterError(f"mode must be 'exact' or 'quadratic', got {mode!r}")
    L = p.rod_half_length_L
    if L is None:
        raise ParameterError("gravitational_potential requires rod_half_length_L to be set")
    G, M, m, h = p.grav_constant_G, p.mass_M, p.mass_m, p.separation_h
    d_theta = theta_M - theta_m
    if mode == "exact":
        chord = 2.0 * L * math.sin(0.5 * d_theta)
        return -2.0 * G * M * m / math.sqrt(h * h + chord * chord)
    return -2.0 * G * M * m / h + (G * M * m * L * L / h**3) * d_theta * d_theta


def thermal_env(p: PhysicalParams, temperature_T: float, damping_rate_Gamma_a: float) -> ThermalEnv:
    """Thermal occupation, dephasing rate, and quality factor at temperature T.

    Uses the shifted frequency omega_a of the coupled system.  The dephasing
    rate models the environment as an Ohmic bath of oscillators with damping
    rate Gamma_a acting on a mode of position spread dx = sqrt(hbar/(m*omega_a)).
    SI mode only (temperatures are Kelvin).
    """
    if p.units != UNITS_SI:
        raise ParameterError("thermal_env is defined for SI-mode parameters only")
    if not (math.isfinite(temperature_T) and temperature_T >= 0):
        raise ParameterError(f"temperature_T must be >= 0, got {temperature_T!r}")
    if not (math.isfinite(damping_rate_Gamma_a) and damping_rate_Gamma_a > 0):
        raise ParameterError(
            f"damping_rate_Gamma_a must be positive, got {damping_rate_Gamma_a!r}"
        )
    omega_a = derive_couplings(p).omega_a
    if temperature_T == 0.0:
        nbar = 0.0
    else:
        x = p.hbar * omega_a / (K_BOLTZMANN * temperature_T)
        nbar = 0.0 if x > _NBAR_EXP_CUTOFF else 1.0 / math.expm1(x)
    dx = math.sqrt(p.hbar / (p.mass_m * omega_a))
    gamma_d = damping_rate_Gamma_a * K_BOLTZMANN * temperature_T * p.mass_m * dx * dx / (
        p.hbar * p.hbar
    )
    return ThermalEnv(
        temperature_T=temperature_T,
        damping_rate_Gamma_a=damping_rate_Gamma_a,
        nbar=nbar,
        dephasing_rate_Gamma_D=gamma_d,
        position_uncertainty_dx=dx,
        quality_factor_Q=omega_a / damping_rate_Gamma_a,
    )


def feasibility_bound(p: PhysicalParams, Q: float | None = None, T: float | None = None):
    """Decoherence-feasibility threshold Q = k_B*T / (hbar*omega_a).

    The underlying condition is an order-of-magnitude criterion (dephasing
    slower than the mechanical frequency); it is treated here as an equality
    and should be read as a threshold estimate, not a sharp bound.  Given Q,
    returns the maximum workable temperature; given T, the required quality
    factor.
    """
    if p.units != UNITS_SI:
        raise ParameterError("feasibility_bound is defined for SI-mode parameters only")
    if (Q is None) == (T is None):
        raise ParameterError("provide exactly one of Q or T")
    omega_a = derive_couplings(p).omega_a
    if Q is not None:
        if not (math.isfinite(Q) and Q >= 0):
            raise ParameterError(f"Q must be >= 0, got {Q!r}")
        return Q * p.hbar * omega_a / K_BOLTZMANN
    if not (math.isfinite(T) and T >= 0):
        raise ParameterError(f"T must be >= 0, got {T!r}")
    return K_BOLTZMANN * T / (p.hbar * omega_a)


def reference_params() -> PhysicalParams:
    """Micro-rod reference setup: 1e-13 kg end masses 10 nm apart, 3 krad/s
    torsional frequency (second rod detuned to 0.9 of that), 450 Trad/s light
    in 10 cm cavities, both rods cooled to coherent amplitude 1."""
    return PhysicalParams(
        mass_m=1e-13,
        mass_M=1e-13,
        separation_h=1e-8,
        cavity_length_d=0.1,
        bare_freq_a=3e3,
        bare_freq_b=0.9 * 3e3,
        light_freq_c=450e12,
        light_freq_d=450e12,
        beta_m=1.0 + 0.0j,
        beta_M=1.0 + 0.0j,
    )


def dimensionless_params(
    gamma: float,
    omega_a: float = 1.0,
    omega_b: float = 0.9,
    lambda_m: float = 0.445,
    lambda_M: float = 0.521,
    beta_m: complex = 1.0 + 0.0j,
    beta_M: complex = 1.0 + 0.0j,
) -> PhysicalParams:
    """hbar = 1 parameter set with couplings given directly.

    This is the regime for exact-propagator scaling studies: the physical
    gravitational coupling (|gamma|/omega_a ~ 4e-7 at the reference values)
    sits below double-precision resolvability, so validation runs boost gamma
    by hand.  Mass/geometry fields are inert placeholders here.
    """
    return PhysicalParams(
        mass_m=1.0,
        mass_M=1.0,
        separation_h=1.0,
        cavity_length_d=1.0,
        bare_freq_a=omega_a,
        bare_freq_b=omega_b,
        light_freq_c=1.0,
        light_freq_d=1.0,
        beta_m=beta_m,
        beta_M=beta_M,
        hbar=1.0,
        units=UNITS_DIMENSIONLESS,
        direct_gamma=gamma,
        direct_lambda_m=lambda_m,
        direct_lambda_M=lambda_M,
    )
