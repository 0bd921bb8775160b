"""Closed-form dynamics of the cavity-rod system.

Covers the exactly solvable gravity-free evolution (conditional coherent
trajectories of each rod and the resulting interference visibility), the
first-order-in-gamma visibility of the coupled system in both its quadrature
and closed forms, the thermal-mixture visibility, the revived-peak width
estimate, and the perturbative linear entropy (which borrows operator
machinery from :mod:`optograv.oracle`).

Conventions: the photon of each cavity is a two-path qubit; "visibility" is
twice the magnitude of the off-diagonal element of its reduced density
matrix between the two path states.  First-order formulas may exceed 1 by
an O(gamma^2) artifact; traces carry a flag instead of raising.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .config import fingerprint, fingerprint_params
from .constants import K_BOLTZMANN
from .errors import DegenerateFrequencyError, ParameterError
from .params import (
    UNITS_SI,
    DerivedCouplings,
    PhysicalParams,
    derive_couplings,
    without_gravity,
)

#: Relative frequency splitting below which the closed first-order formula
#: is refused (its denominator omega_a**2 - omega_b**2 degenerates).
DEGENERATE_SPLIT = 1e-9

#: Values may exceed 1 by this much before a trace is flagged unphysical.
UNITY_SLACK = 1e-9

METHOD_UNCOUPLED = "uncoupled"
METHOD_FIRST_ORDER_CLOSED = "first_order_closed"
METHOD_FIRST_ORDER_INTEGRAL = "first_order_integral"
METHOD_SHIFT_PREFIX = "shift_"
METHOD_ORACLE = "oracle_exact"
METHOD_THERMAL = "thermal"
METHOD_THERMAL_MC = "thermal_montecarlo"


@dataclass(frozen=True)
class CoherentTrajectory:
    """Conditional coherent-state amplitudes of one rod at time t.

    ``phi0`` is the amplitude when the cavity path is empty (free rotation
    of the initial amplitude), ``phi1`` the displaced amplitude conditioned
    on the photon being in the cavity, and ``phase`` the accumulated
    radiation-pressure phase of that branch.
    """

    phi0: complex
    phi1: complex
    phase: float
    rod_label: str


def _rod_constants(dc: DerivedCouplings, p: PhysicalParams, rod: str):
    if rod == "m":
        return p.beta_m, dc.lambda_m, dc.omega_a
    if rod == "M":
        return p.beta_M, dc.lambda_M, dc.omega_b
    raise ParameterError(f"rod must be 'm' or 'M', got {rod!r}")


def coherent_trajectories(
    dc: DerivedCouplings, p: PhysicalParams, rod: str, t: float
) -> CoherentTrajectory:
    """Conditional trajectories of one rod under its own cavity coupling.

    phi0 = beta*exp(-i*omega*t),
    phi1 = phi0 + lam*(1 - exp(-i*omega*t)),
    phase = lam**2*(omega*t - sin(omega*t)) + lam*Im[beta*(1 - exp(-i*omega*t))].
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    beta, lam, omega = _rod_constants(dc, p, rod)
    rot = np.exp(-1j * omega * t)
    phi0 = beta * rot
    phi1 = phi0 + lam * (1.0 - rot)
    phase = lam * lam * (omega * t - math.sin(omega * t)) + lam * (
        beta * (1.0 - rot)
    ).imag
    return CoherentTrajectory(phi0=complex(phi0), phi1=complex(phi1), phase=float(phase), rod_label=rod)


def photon_offdiagonal(beta, lam, omega, t):
    """Complex off-diagonal photon matrix element for a rod in state |beta>.

    Vectorised over ``beta``.  The visibility is twice its magnitude; thermal
    averaging must average this complex element (its beta-dependent phase is
    what produces the thermal enhancement), never the magnitude alone.
    """
    beta = np.asarray(beta, dtype=complex)
    rot = np.exp(-1j * omega * t)
    alpha = 1.0 - rot
    phi0 = beta * rot
    phi1 = phi0 + lam * alpha
    overlap = np.exp(
        -0.5 * np.abs(phi0) ** 2 - 0.5 * np.abs(phi1) ** 2 + np.conj(phi0) * phi1
    )
    phase = lam * lam * (omega * t - np.sin(omega * t)) + lam * (beta * alpha).imag
    return 0.5 * np.exp(1j * phase) * overlap


@dataclass(frozen=True)
class VisibilityTrace:
    """Time series of visibility values (or differences of them).

    ``values`` lie in [0, 1] for physical traces; ``exceeds_unity`` flags
    first-order artifacts beyond the numerical slack.  Shift traces
    (``method`` starting with "shift_") are signed differences and are
    exempt from the bounds.
    """

    times: np.ndarray
    values: np.ndarray
    method: str
    params_fingerprint: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ParameterError("times and values must be matching 1-d arrays")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ParameterError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def exceeds_unity(self) -> bool:
        return bool(np.any(self.values > 1.0 + UNITY_SLACK))

    @property
    def is_shift(self) -> bool:
        return self.method.startswith(METHOD_SHIFT_PREFIX)

    def to_csv_rows(self):
        """Rows for the ``t_seconds,value,method`` trace format."""
        return [
            (repr(float(t)), repr(float(v)), self.method)
            for t, v in zip(self.times, self.values)
        ]

    def to_json_dict(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "values": [float(v) for v in self.values],
            "method": self.method,
            "params_fingerprint": self.params_fingerprint,
        }


def _trace_fingerprint(dc, p, extra=None):
    payload = {"params": fingerprint_params(p), "couplings": dc.as_dict()}
    if extra:
        payload.update(extra)
    return fingerprint(payload)


def _check_times(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ParameterError("times must be >= 0")
    return times


def visibility_uncoupled(
    dc: DerivedCouplings, p: PhysicalParams, rod: str = "m", times=None
) -> VisibilityTrace:
    """Visibility of one cavity's photon with gravity absent from the state
    dynamics: V(t) = exp(-lam**2 * (1 - cos(omega*t))).

    Uses whatever constants ``dc`` carries, so passing couplings derived
    with G = 0 yields the gravity-free reference pattern.
    """
    times = _check_times(times)
    _, lam, omega = _rod_constants(dc, p, rod)
    values = np.exp(-(lam * lam) * (1.0 - np.cos(omega * times)))
    return VisibilityTrace(
        times=times,
        values=values,
        method=METHOD_UNCOUPLED,
        params_fingerprint=_trace_fingerprint(dc, p, {"rod": rod}),
    )


def first_order_bracket(dc: DerivedCouplings, p: PhysicalParams, times, form="closed"):
    """The real bracket x(t) with V1 = V0 * |1 + i*x(t)|, to first order in gamma.

    ``form="closed"`` evaluates the antiderivative (requires
    non-degenerate frequencies and real beta_M); ``form="integral"``
    evaluates the underlying time integral by adaptive quadrature and also
    handles complex beta_M and degenerate frequencies.
    """
    times = _check_times(times)
    lam_m, lam_M = dc.lambda_m, dc.lambda_M
    omega_a, omega_b = dc.omega_a, dc.omega_b
    gamma = dc.gamma
    beta_M = complex(p.beta_M)
    if form == "closed":
        if abs(omega_a - omega_b) < DEGENERATE_SPLIT * abs(omega_a):
            raise DegenerateFrequencyError(
                "closed form is singular for |omega_a - omega_b| < "
                f"{DEGENERATE_SPLIT:g}*omega_a; use form='integral'"
            )
        if beta_M.imag != 0.0:
            raise ParameterError(
                "closed form assumes a real beta_M; use form='integral' "
                "for complex amplitudes"
            )
        b = beta_M.real
        sin_a = np.sin(omega_a * times)
        sin_b = np.sin(omega_b * times)
        osc = sin_b / omega_b - (omega_a * sin_a - omega_b * sin_b) / (
            omega_a**2 - omega_b**2
        )
        secular = times - sin_a / omega_a
        return 2.0 * gamma * lam_m * ((2.0 * b - lam_M) * osc + lam_M * secular)
    if form != "integral":
        raise ParameterError(f"form must be 'closed' or 'integral', got {form!r}")

    def integrand(u, t):
        envelope = 1.0 - math.cos(omega_a * (u - t))
        drive = 2.0 * (beta_M * complex(math.cos(omega_b * u), -math.sin(omega_b * u))).real
        return envelope * (drive + lam_M * (1.0 - math.cos(omega_b * u)))

    out = np.empty_like(times)
    with warnings.catch_warnings():
        # Near-zero integrals trip quad's roundoff heuristic; the absolute
        # tolerance below is already at the precision floor.
        warnings.simplefilter("ignore", IntegrationWarning)
        for i, t in enumerate(times):
            if t == 0.0:
                out[i] = 0.0
                continue
            value, _ = quad(
                integrand, 0.0, t, args=(t,), epsabs=1e-13, epsrel=1e-12, limit=400
            )
            out[i] = value
    return 2.0 * gamma * lam_m * out


def visibility_first_order(
    dc: DerivedCouplings, p: PhysicalParams, times, form="closed"
) -> VisibilityTrace:
    """Visibility of the rod-m cavity with the gravitational coupling treated
    to first order: V1(t) = exp(-lam_m**2*(1-cos(omega_a*t))) * |1 + i*x(t)|.

    The modulus makes the magnitude shift second order in gamma even though
    the state correction is first order.
    """
    times = _check_times(times)
    x = first_order_bracket(dc, p, times, form=form)
    envelope = np.exp(-(dc.lambda_m**2) * (1.0 - np.cos(dc.omega_a * times)))
    method = METHOD_FIRST_ORDER_CLOSED if form == "closed" else METHOD_FIRST_ORDER_INTEGRAL
    return VisibilityTrace(
        times=times,
        values=envelope * np.hypot(1.0, x),
        method=method,
        params_fingerprint=_trace_fingerprint(dc, p, {"form": form}),
    )


def visibility_shift(
    dc: DerivedCouplings, p: PhysicalParams, times, form="closed"
) -> VisibilityTrace:
    """Gravitational change of the rod-m visibility pattern, V1 - V0.

    The reference V0 is the fully uncoupled pattern (couplings re-derived
    with G = 0 in SI mode), so the shift combines the frequency-pull effect
    omega_a vs. the bare frequency with the first-order state correction.
    In dimensionless mode there is no frequency pull and only the state
    correction remains.
    """
    times = _check_times(times)
    v1 = visibility_first_order(dc, p, times, form=form)
    dc0 = derive_couplings(without_gravity(p)) if p.units == UNITS_SI else dc
    v0 = visibility_uncoupled(dc0, p, "m", times)
    return VisibilityTrace(
        times=times,
        values=v1.values - v0.values,
        method=METHOD_SHIFT_PREFIX + form,
        params_fingerprint=_trace_fingerprint(dc, p, {"shift_form": form}),
    )


def thermal_visibility(
    dc: DerivedCouplings, p: PhysicalParams, nbar: float, times
) -> VisibilityTrace:
    """Rod-m visibility when the rod starts in a thermal coherent-state
    mixture with mean occupation nbar:
    V(t) = exp(-lam_m**2 * (2*nbar + 1) * (1 - cos(omega_a*t))).
    """
    if not (math.isfinite(nbar) and nbar >= 0):
        raise ParameterError(f"nbar must be >= 0, got {nbar!r}")
    times = _check_times(times)
    lam, omega = dc.lambda_m, dc.omega_a
    values = np.exp(-(lam * lam) * (2.0 * nbar + 1.0) * (1.0 - np.cos(omega * times)))
    return VisibilityTrace(
        times=times,
        values=values,
        method=METHOD_THERMAL,
        params_fingerprint=_trace_fingerprint(dc, p, {"nbar": nbar}),
    )


def revival_peak_width(dc: DerivedCouplings, p: PhysicalParams, temperature_T: float) -> float:
    """Scaling estimate of the revived visibility peak's width, in radians of
    omega_a*t: 1 / (lam_m * sqrt(4*k_B*T/(hbar*omega_a) + 2)).

    A scaling estimate, not an exact half-maximum width (it agrees with the
    numerically measured half-width of the thermal pattern to within a
    factor of two).  SI mode only.
    """
    if p.units != UNITS_SI:
        raise ParameterError("revival_peak_width is defined for SI-mode parameters only")
    if not (math.isfinite(temperature_T) and temperature_T >= 0):
        raise ParameterError(f"temperature_T must be >= 0, got {temperature_T!r}")
    ratio = 4.0 * K_BOLTZMANN * temperature_T / (p.hbar * dc.omega_a)
    return 1.0 / (dc.lambda_m * math.sqrt(ratio + 2.0))


def linear_entropy_first_order(
    dc: DerivedCouplings,
    p: PhysicalParams,
    t: float,
    spec=None,
    quadrature=None,
) -> float:
    """Perturbative linear entropy between the two rod-cavity systems.

    S = 2*gamma**2 times the entangling coefficient of the first-order
    perturbation: the squared norm of the component of A|psi> orthogonal
    to both pure factors of the gravity-free product state, with A the
    gamma-stripped time integral of the interaction generator.  The
    operator algebra runs on the truncated Fock space supplied by the
    exact-propagation layer.

    Non-negative up to quadrature tolerance (it is 2*gamma**2 times a
    squared norm); agrees with the exact propagated entropy through second
    order in gamma.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    if dc.gamma == 0.0 or t == 0.0:
        return 0.0
    from . import oracle

    coefficient, _diag = oracle.entropy_expectations(
        dc, p, spec=spec, t=t, quadrature=quadrature
    )
    return 2.0 * dc.gamma**2 * coefficient
