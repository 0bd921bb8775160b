"""Exact brute-force layer: dense propagation in a truncated Fock basis.

The four-subsystem state lives on (photon-c qubit) x (photon-d qubit) x
(mode a) x (mode b), in that fixed tensor order.  Each photon is a two-path
qubit: index 0 is the path that bypasses the cavity, index 1 the path whose
photon rides inside it, and the dynamics never leaves the one-photon-per-
cavity sector.  Because the photon operators enter the Hamiltonian only
through the cavity-path projectors, the Hamiltonian is block diagonal over
the four path sectors; all heavy linear algebra here works sector-by-sector
on (n_a+1)*(n_b+1)-dimensional real-symmetric blocks.

Energy offsets proportional to the identity (the constant photon energies)
are omitted throughout: they contribute a global phase only.  The
closed-form reference state below drops the same phase, so state vectors
from both routes are directly comparable.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import analytic
from .constants import HBAR
from .errors import (
    DimensionLimitError,
    OptogravError,
    ParameterError,
    QuadratureError,
    TruncationError,
)
from .params import DerivedCouplings, PhysicalParams, derive_couplings

LABELS = ("photon_c", "photon_d", "mode_a", "mode_b")

#: Desk-scale guard on the total Hilbert-space dimension.
MAX_TOTAL_DIM = 2**16

#: Coherent tail mass allowed beyond the truncation edge.
TAIL_TOL = 1e-12

_NORM_TOL = 1e-10


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre refinement policy: double the node count until two
    successive results agree to ``rel_tol``, give up at ``max_nodes``."""

    start_nodes: int = 32
    max_nodes: int = 4096
    rel_tol: float = 1e-8


@dataclass(frozen=True)
class HilbertSpec:
    """Truncation of the two mechanical modes (photon qubits are fixed 2x2)."""

    n_max_a: int
    n_max_b: int

    def __post_init__(self):
        if self.n_max_a < 1 or self.n_max_b < 1:
            raise ParameterError("n_max_a and n_max_b must be >= 1")
        if self.total_dim > MAX_TOTAL_DIM:
            raise DimensionLimitError(
                f"total dimension {self.total_dim} exceeds the guard {MAX_TOTAL_DIM}"
            )

    @property
    def dim_a(self) -> int:
        return self.n_max_a + 1

    @property
    def dim_b(self) -> int:
        return self.n_max_b + 1

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (2, 2, self.dim_a, self.dim_b)

    @property
    def total_dim(self) -> int:
        return 4 * self.dim_a * self.dim_b


def coherent_tail_mass(amplitude: float, n_max: int) -> float:
    """Probability mass of |amplitude|-coherent occupation beyond n_max."""
    mu = float(abs(amplitude)) ** 2
    if mu == 0.0:
        return 0.0
    term = math.exp(-mu)
    kept = [term]
    for n in range(1, n_max + 1):
        term *= mu / n
        kept.append(term)
    return max(0.0, 1.0 - math.fsum(kept))


def suggested_n_max(beta_abs: float, lam: float) -> int:
    """Truncation heuristic: the displaced coherent amplitude never exceeds
    |beta| + 2*lam, so size the ladder for that and pad generously."""
    s = abs(beta_abs) + 2.0 * abs(lam)
    return math.ceil(s * s + 8.0 * s + 16.0)


def default_spec(p: PhysicalParams, dc: DerivedCouplings | None = None) -> HilbertSpec:
    if dc is None:
        dc = derive_couplings(p)
    return HilbertSpec(
        n_max_a=suggested_n_max(abs(p.beta_m), dc.lambda_m),
        n_max_b=suggested_n_max(abs(p.beta_M), dc.lambda_M),
    )


def check_adequacy(spec: HilbertSpec, dc: DerivedCouplings, p: PhysicalParams, tol=TAIL_TOL):
    """Verify that the truncation holds the displaced amplitudes |beta|+2*lam.

    Raises :class:`TruncationError` (with a rule-based suggestion) otherwise.
    """
    for label, beta, lam, n_max in (
        ("a", p.beta_m, dc.lambda_m, spec.n_max_a),
        ("b", p.beta_M, dc.lambda_M, spec.n_max_b),
    ):
        displaced = abs(beta) + 2.0 * abs(lam)
        tail = coherent_tail_mass(displaced, n_max)
        if tail > tol:
            suggestion = suggested_n_max(abs(beta), lam)
            raise TruncationError(
                f"mode {label}: tail mass {tail:.3e} beyond n_max={n_max} exceeds "
                f"{tol:g} for displaced amplitude {displaced:.3f}; "
                f"use n_max_{label} >= {suggestion}",
                suggested_n_max=suggestion,
            )


@dataclass
class StateVector:
    """Flat complex amplitudes in the fixed tensor order of :data:`LABELS`."""

    amplitudes: np.ndarray
    spec: HilbertSpec
    time: float = 0.0

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.spec.total_dim,):
            raise ParameterError(
                f"amplitudes must have shape ({self.spec.total_dim},), got {amp.shape}"
            )
        self.amplitudes = amp

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.spec.dims)

    def sector(self, p_bit: int, q_bit: int) -> np.ndarray:
        """(dim_a, dim_b) view of the photon sector (p_bit, q_bit)."""
        return self.as_tensor()[p_bit, q_bit]


@dataclass
class DensityMatrix:
    """Reduced state over a subset of the subsystems."""

    matrix: np.ndarray
    subsystem_labels: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError("density matrix must be square")
        scale = max(1.0, float(np.max(np.abs(m))))
        if float(np.max(np.abs(m - m.conj().T))) > 1e-12 * scale:
            raise ParameterError("density matrix is not Hermitian to 1e-12")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise ParameterError("density matrix trace differs from 1 by more than 1e-10")
        self.matrix = m
        self.subsystem_labels = tuple(self.subsystem_labels)

    def purity(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def validate(self, eig_floor: float = -1e-10):
        """Full positivity check (eigenvalues above ``eig_floor``)."""
        eigs = np.linalg.eigvalsh(self.matrix)
        if eigs.min() < eig_floor:
            raise ParameterError(f"density matrix has eigenvalue {eigs.min():.3e} < {eig_floor:g}")
        return self


def destroy_op(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim))
    idx = np.arange(1, dim)
    a[idx - 1, idx] = np.sqrt(idx)
    return a


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float))


def position_coupling(dim: int) -> np.ndarray:
    """a^dag + a (dimensionless position quadrature, up to sqrt(2))."""
    a = destroy_op(dim)
    return a + a.T


_SECTORS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class SectorOperator:
    """Operator that is block diagonal over the four photon-path sectors.

    ``blocks[(p, q)]`` acts on the (mode a) x (mode b) factor of the sector
    with cavity-path occupations p (cavity c) and q (cavity d).  Frequency
    units (energy / hbar) throughout.
    """

    blocks: dict
    spec: HilbertSpec

    def full(self) -> np.ndarray:
        """Assemble the dense matrix in the fixed tensor ordering."""
        n = self.spec.total_dim
        block_dim = self.spec.dim_a * self.spec.dim_b
        sample = next(iter(self.blocks.values()))
        out = np.zeros((n, n), dtype=sample.dtype)
        for p_bit, q_bit in _SECTORS:
            start = (p_bit * 2 + q_bit) * block_dim
            out[start : start + block_dim, start : start + block_dim] = self.blocks[
                (p_bit, q_bit)
            ]
        return out

    def apply(self, state: StateVector) -> np.ndarray:
        """Matrix-vector product, returned as a flat amplitude array."""
        tensor = state.as_tensor()
        out = np.empty_like(tensor)
        block_dim = self.spec.dim_a * self.spec.dim_b
        for p_bit, q_bit in _SECTORS:
            vec = tensor[p_bit, q_bit].reshape(block_dim)
            out[p_bit, q_bit] = (self.blocks[(p_bit, q_bit)] @ vec).reshape(
                self.spec.dim_a, self.spec.dim_b
            )
        return out.reshape(-1)

    def expectation(self, state: StateVector) -> complex:
        return complex(np.vdot(state.amplitudes, self.apply(state)))


def hamiltonian_blocks(
    dc: DerivedCouplings,
    p: PhysicalParams,
    spec: HilbertSpec,
    include_gravity: bool = True,
    coupled_constants: bool | None = None,
) -> SectorOperator:
    """Sector blocks of the Hamiltonian in frequency units (H / hbar).

    ``coupled_constants`` selects between the gravitationally shifted
    constants (lambda, omega) and the bare ones (Lambda, bare frequencies);
    it defaults to ``include_gravity``, so the two documented cases are the
    full interacting Hamiltonian and the gravity-free one.  Passing
    ``include_gravity=False, coupled_constants=True`` yields the free part
    of the interacting system, the frame generator of the interaction
    picture.
    """
    if coupled_constants is None:
        coupled_constants = include_gravity
    bare_a, bare_b, _, _ = p.angular_frequencies()
    if coupled_constants:
        omega_a, omega_b = dc.omega_a, dc.omega_b
        lam_m, lam_M = dc.lambda_m, dc.lambda_M
    else:
        omega_a, omega_b = bare_a, bare_b
        lam_m, lam_M = dc.Lambda_m, dc.Lambda_M
    da, db = spec.dim_a, spec.dim_b
    num_a = omega_a * number_op(da)
    num_b = omega_b * number_op(db)
    x_a = position_coupling(da)
    x_b = position_coupling(db)
    eye_a = np.eye(da)
    eye_b = np.eye(db)
    free = np.kron(num_a, eye_b) + np.kron(eye_a, num_b)
    gravity = dc.gamma * np.kron(x_a, x_b) if include_gravity else None
    blocks = {}
    for p_bit, q_bit in _SECTORS:
        block = free.copy()
        if p_bit:
            block -= lam_m * omega_a * np.kron(x_a, eye_b)
        if q_bit:
            block -= lam_M * omega_b * np.kron(eye_a, x_b)
        if gravity is not None:
            block += gravity
        blocks[(p_bit, q_bit)] = block
    return SectorOperator(blocks=blocks, spec=spec)


def build_hamiltonian(
    dc: DerivedCouplings,
    p: PhysicalParams,
    spec: HilbertSpec,
    include_gravity: bool = True,
    coupled_constants: bool | None = None,
) -> np.ndarray:
    """Dense Hamiltonian matrix in energy units (real symmetric).

    Identity energy offsets (constant photon terms) are omitted, so the
    vacuum expectation value vanishes for every parameter set.
    """
    return p.hbar * hamiltonian_blocks(
        dc, p, spec, include_gravity=include_gravity, coupled_constants=coupled_constants
    ).full()


class Propagator:
    """exp(-i*H*t) evaluator from one eigendecomposition per sector block.

    Decompose once, evolve at arbitrarily many times.  Identical blocks
    (e.g. both cavity-c sectors when lambda_m = 0) share a decomposition,
    which keeps degenerate configurations bitwise symmetric.
    """

    def __init__(self, op: SectorOperator):
        self.spec = op.spec
        self._eigs = {}
        done: list[tuple[tuple[int, int], np.ndarray]] = []
        for key in _SECTORS:
            block = op.blocks[key]
            shared = next((k for k, b in done if np.array_equal(b, block)), None)
            if shared is not None:
                self._eigs[key] = self._eigs[shared]
            else:
                self._eigs[key] = np.linalg.eigh(block)
                done.append((key, block))

    def evolve(self, psi0: StateVector, t: float) -> StateVector:
        """Propagate a t=0 state to time t."""
        tensor = psi0.as_tensor()
        out = np.empty(self.spec.dims, dtype=complex)
        block_dim = self.spec.dim_a * self.spec.dim_b
        for p_bit, q_bit in _SECTORS:
            w, v = self._eigs[(p_bit, q_bit)]
            vec = tensor[p_bit, q_bit].reshape(block_dim)
            phases = np.exp(-1j * w * t)
            out[p_bit, q_bit] = (v @ (phases * (v.T @ vec))).reshape(
                self.spec.dim_a, self.spec.dim_b
            )
        state = StateVector(amplitudes=out.reshape(-1), spec=self.spec, time=t)
        if abs(state.norm() - psi0.norm()) > _NORM_TOL:
            raise OptogravError("propagation failed to preserve the norm to 1e-10")
        return state


def propagate(H: np.ndarray, psi0: StateVector, t: float, hbar: float = HBAR) -> StateVector:
    """Evolve ``psi0`` under the dense Hamiltonian ``H`` (energy units).

    One Hermitian eigendecomposition per call; prefer
    :class:`Propagator` over :func:`hamiltonian_blocks` output when many
    times are needed.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    H = np.asarray(H)
    if H.shape != (psi0.spec.total_dim, psi0.spec.total_dim):
        raise ParameterError("Hamiltonian shape does not match the state's space")
    w, v = np.linalg.eigh(H / hbar)
    amp = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0.amplitudes))
    state = StateVector(amplitudes=amp, spec=psi0.spec, time=t)
    if abs(state.norm() - psi0.norm()) > _NORM_TOL:
        raise OptogravError("propagation failed to preserve the norm to 1e-10")
    return state


def coherent_vector(beta: complex, dim: int) -> tuple[np.ndarray, float]:
    """Truncated, renormalised coherent-state amplitudes and the tail mass
    that was cut off (before renormalisation)."""
    beta = complex(beta)
    amps = np.empty(dim, dtype=complex)
    amps[0] = math.exp(-0.5 * abs(beta) ** 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * beta / math.sqrt(n)
    kept = float(np.sum(np.abs(amps) ** 2))
    tail = max(0.0, 1.0 - kept)
    if kept == 0.0:
        raise TruncationError(f"coherent amplitude {abs(beta):.3f} underflows dim {dim}")
    return amps / math.sqrt(kept), tail


def initial_state(p: PhysicalParams, spec: HilbertSpec, tail_tol: float = TAIL_TOL) -> StateVector:
    """Path superposition in both cavities times coherent rods:
    each photon enters (|no-cavity> + |cavity>)/sqrt(2), rod m in
    |beta_m>, rod M in |beta_M> (truncated and renormalised).
    """
    for label, beta, n_max in (("a", p.beta_m, spec.n_max_a), ("b", p.beta_M, spec.n_max_b)):
        tail = coherent_tail_mass(abs(beta), n_max)
        if tail > tail_tol:
            suggestion = suggested_n_max(abs(beta), 0.0)
            raise TruncationError(
                f"mode {label}: coherent tail mass {tail:.3e} beyond n_max={n_max} exceeds "
                f"{tail_tol:g}; raise n_max_{label} to at least {suggestion} "
                "(more if strong optomechanical displacement is expected)",
                suggested_n_max=suggestion,
            )
    qubit = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    coh_a, _ = coherent_vector(p.beta_m, spec.dim_a)
    coh_b, _ = coherent_vector(p.beta_M, spec.dim_b)
    amp = np.kron(np.kron(np.kron(qubit, qubit), coh_a), coh_b)
    return StateVector(amplitudes=amp, spec=spec, time=0.0)


def closed_form_state(
    dc: DerivedCouplings, p: PhysicalParams, spec: HilbertSpec, t: float
) -> StateVector:
    """Gravity-free evolved state mapped into the truncated basis.

    Each photon branch carries its conditional coherent amplitude and
    radiation-pressure phase; the global photon-energy phase is omitted to
    match the Hamiltonians built here.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    traj_m = analytic.coherent_trajectories(dc, p, "m", t)
    traj_M = analytic.coherent_trajectories(dc, p, "M", t)
    branches_a = (
        coherent_vector(traj_m.phi0, spec.dim_a)[0],
        coherent_vector(traj_m.phi1, spec.dim_a)[0] * np.exp(1j * traj_m.phase),
    )
    branches_b = (
        coherent_vector(traj_M.phi0, spec.dim_b)[0],
        coherent_vector(traj_M.phi1, spec.dim_b)[0] * np.exp(1j * traj_M.phase),
    )
    out = np.empty(spec.dims, dtype=complex)
    for p_bit, q_bit in _SECTORS:
        out[p_bit, q_bit] = 0.5 * np.outer(branches_a[p_bit], branches_b[q_bit])
    return StateVector(amplitudes=out.reshape(-1), spec=spec, time=t)


def _axes_for(labels) -> list[int]:
    axes = []
    for label in labels:
        if label not in LABELS:
            raise ParameterError(f"unknown subsystem label {label!r}; valid: {LABELS}")
        axes.append(LABELS.index(label))
    if len(set(axes)) != len(axes):
        raise ParameterError("duplicate subsystem labels")
    return axes


def reduce(state, keep) -> DensityMatrix:
    """Partial trace onto the subsystems named in ``keep``.

    Accepts a :class:`StateVector` or a :class:`DensityMatrix` over the full
    space.  ``keep`` must be a non-empty proper subset of the four labels;
    the result's row ordering follows the fixed tensor order.
    """
    keep = tuple(keep)
    axes = _axes_for(keep)
    if not axes or len(axes) == len(LABELS):
        raise ParameterError("keep must be a non-empty proper subset of the subsystems")
    order = sorted(axes)
    ordered_labels = tuple(LABELS[i] for i in order)
    if isinstance(state, StateVector):
        dims = state.spec.dims
        rest = [i for i in range(4) if i not in order]
        tensor = state.as_tensor().transpose(order + rest)
        keep_dim = int(np.prod([dims[i] for i in order]))
        mat = tensor.reshape(keep_dim, -1)
        rho = mat @ mat.conj().T
        return DensityMatrix(matrix=rho, subsystem_labels=ordered_labels)
    if isinstance(state, DensityMatrix):
        if state.subsystem_labels != LABELS:
            raise ParameterError("can only reduce a density matrix over the full space")
        dims = None
        side = state.matrix.shape[0]
        # Infer mode dimensions: 4 * d_a * d_b with the qubits fixed.
        rest_dim = side // 4
        root = int(round(math.sqrt(rest_dim)))
        if 4 * root * root != side:
            raise ParameterError("cannot infer mode dimensions from a non-square layout")
        dims = (2, 2, root, root)
        tensor = state.matrix.reshape(dims + dims)
        letters = "abcdefgh"
        row = list(letters[:4])
        col = list(letters[4:8])
        for i in range(4):
            if i not in order:
                col[i] = row[i]
        out_rows = "".join(row[i] for i in order)
        out_cols = "".join(col[i] for i in order)
        subscript = "".join(row) + "".join(col) + "->" + out_rows + out_cols
        keep_dim = int(np.prod([dims[i] for i in order]))
        rho = np.einsum(subscript, tensor).reshape(keep_dim, keep_dim)
        return DensityMatrix(matrix=rho, subsystem_labels=ordered_labels)
    raise ParameterError(f"cannot reduce object of type {type(state).__name__}")


def off_diagonal_exact(psi: StateVector, cavity: str = "c") -> complex:
    """Complex photon path-coherence element <cavity-branch| rho |bypass-branch>."""
    tensor = psi.as_tensor()
    if cavity == "c":
        return complex(np.sum(tensor[1] * np.conj(tensor[0])))
    if cavity == "d":
        return complex(np.sum(tensor[:, 1] * np.conj(tensor[:, 0])))
    raise ParameterError(f"cavity must be 'c' or 'd', got {cavity!r}")


def visibility_exact(psi: StateVector, cavity: str = "c") -> float:
    """Interference visibility: twice the magnitude of the photon's
    path-coherence element."""
    return 2.0 * abs(off_diagonal_exact(psi, cavity))


def linear_entropy_exact(psi: StateVector, system1=("photon_c", "mode_a")) -> float:
    """Linear entropy 1 - Tr(rho_1**2) of the bipartition system1 | rest.

    For the pure states handled here this comes from the Schmidt spectrum of
    the reshaped amplitude matrix, which is numerically stabler than forming
    the reduced matrix first.
    """
    axes = _axes_for(system1)
    if not axes or len(axes) == len(LABELS):
        raise ParameterError("system1 must be a non-empty proper subset of the subsystems")
    order = sorted(axes)
    rest = [i for i in range(4) if i not in order]
    dims = psi.spec.dims
    keep_dim = int(np.prod([dims[i] for i in order]))
    mat = psi.as_tensor().transpose(order + rest).reshape(keep_dim, -1)
    s = np.linalg.svd(mat, compute_uv=False)
    return float(1.0 - np.sum(s**4))


def _mode_factor(dim, lam, omega, s, occupancy):
    """e^{i*omega*s} a^dag + e^{-i*omega*s} a + 2*lam*occupancy*(1-cos(omega*s))."""
    a = destroy_op(dim)
    phase = complex(math.cos(omega * s), math.sin(omega * s))
    out = phase * a.T + np.conj(phase) * a
    if occupancy:
        out = out + (2.0 * lam * occupancy * (1.0 - math.cos(omega * s))) * np.eye(dim)
    return out


def interaction_generator_closed(
    dc: DerivedCouplings, spec: HilbertSpec, s: float
) -> SectorOperator:
    """Closed-form frame-rotated coupling generator at time offset s,
    stripped of the hbar*gamma prefactor (it factors out exactly)."""
    factors_a = {
        p_bit: _mode_factor(spec.dim_a, dc.lambda_m, dc.omega_a, s, p_bit) for p_bit in (0, 1)
    }
    factors_b = {
        q_bit: _mode_factor(spec.dim_b, dc.lambda_M, dc.omega_b, s, q_bit) for q_bit in (0, 1)
    }
    blocks = {
        (p_bit, q_bit): np.kron(factors_a[p_bit], factors_b[q_bit])
        for p_bit, q_bit in _SECTORS
    }
    return SectorOperator(blocks=blocks, spec=spec)


class InteractionPictureResidual:
    """Compares the numerically frame-rotated coupling against its closed form.

    The rotation exp(i*H0*t) X exp(-i*H0*t) is computed from one
    eigendecomposition of the free Hamiltonian per sector and reused across
    times.  Truncation corrupts the Fock levels near the edge (the identity
    holds only on the untruncated algebra), so the comparison is projected
    onto the interior n <= n_max - margin of both modes.  The leaked
    corruption decays factorially in the margin; at couplings ~0.5 a margin
    of 8 still leaves ~1e-2 relative deviation while 20 reaches ~1e-10,
    hence the conservative default.  The hbar*gamma prefactor is stripped
    from both sides, making the residual well defined at gamma = 0.
    """

    def __init__(
        self,
        dc: DerivedCouplings,
        p: PhysicalParams,
        spec: HilbertSpec,
        margin: int = 20,
    ):
        if margin < 1:
            raise ParameterError("margin must be >= 1")
        if margin >= spec.n_max_a or margin >= spec.n_max_b:
            raise ParameterError("margin must be smaller than both Fock truncations")
        self.dc, self.p, self.spec, self.margin = dc, p, spec, margin
        free = hamiltonian_blocks(dc, p, spec, include_gravity=False, coupled_constants=True)
        coupling = np.kron(position_coupling(spec.dim_a), position_coupling(spec.dim_b))
        self._eigs = {}
        self._rotated = {}
        for key in _SECTORS:
            w, v = np.linalg.eigh(free.blocks[key])
            self._eigs[key] = (w, v)
            self._rotated[key] = v.T @ coupling @ v
        keep_a = np.arange(spec.dim_a) <= spec.n_max_a - margin
        keep_b = np.arange(spec.dim_b) <= spec.n_max_b - margin
        self._interior = np.where(np.kron(keep_a, keep_b))[0]
        proj = coupling[np.ix_(self._interior, self._interior)]
        self._denominator = math.sqrt(4.0) * float(np.linalg.norm(proj))

    def residual(self, t: float) -> float:
        """Interior-projected relative Frobenius deviation at time t."""
        closed = interaction_generator_closed(self.dc, self.spec, t)
        idx = self._interior
        total = 0.0
        for key in _SECTORS:
            w, v = self._eigs[key]
            phases = np.exp(1j * w * t)
            numeric = (v * phases) @ self._rotated[key] @ (v * np.conj(phases)).T
            delta = (numeric - closed.blocks[key])[np.ix_(idx, idx)]
            total += float(np.linalg.norm(delta)) ** 2
        return math.sqrt(total) / self._denominator


def interaction_picture_check(
    dc: DerivedCouplings,
    p: PhysicalParams,
    spec: HilbertSpec,
    t: float,
    margin: int = 20,
) -> float:
    """One-shot interior residual between the numerically rotated coupling
    generator and its closed form; < 1e-8 at the default margin for
    couplings up to ~0.5."""
    return InteractionPictureResidual(dc, p, spec, margin=margin).residual(t)


def _legendre_nodes(t: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * t * (x + 1.0), 0.5 * t * w


def dyson_first_order_state(
    dc: DerivedCouplings,
    p: PhysicalParams,
    spec: HilbertSpec,
    t: float,
    quadrature: QuadratureSpec | None = None,
) -> StateVector:
    """First-order state correction: psi_exact(t) ~ psi0(t) + correction + O(gamma^2).

    correction = -i*gamma * integral over t' in [0, t] of the frame-rotated
    coupling generator at offset t'-t applied to the gravity-free state
    psi0(t).  Linear in gamma by construction.  Gauss-Legendre with node
    doubling; raises :class:`QuadratureError` if two refinements keep
    disagreeing at ``max_nodes``.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    quadrature = quadrature or QuadratureSpec()
    base = closed_form_state(dc, p, spec, t)
    tensor = base.as_tensor()
    a_dag_a = destroy_op(spec.dim_a).T
    a_a = destroy_op(spec.dim_a)
    a_dag_b = destroy_op(spec.dim_b).T
    a_b = destroy_op(spec.dim_b)

    def accumulate(nodes: int) -> np.ndarray:
        points, weights = _legendre_nodes(t, nodes)
        acc = np.zeros(spec.dims, dtype=complex)
        for tp, wk in zip(points, weights):
            s = tp - t
            phase_a = complex(math.cos(dc.omega_a * s), math.sin(dc.omega_a * s))
            phase_b = complex(math.cos(dc.omega_b * s), math.sin(dc.omega_b * s))
            fa = {
                p_bit: phase_a * a_dag_a
                + np.conj(phase_a) * a_a
                + (2.0 * dc.lambda_m * p_bit * (1.0 - math.cos(dc.omega_a * s)))
                * np.eye(spec.dim_a)
                for p_bit in (0, 1)
            }
            fb = {
                q_bit: phase_b * a_dag_b
                + np.conj(phase_b) * a_b
                + (2.0 * dc.lambda_M * q_bit * (1.0 - math.cos(dc.omega_b * s)))
                * np.eye(spec.dim_b)
                for q_bit in (0, 1)
            }
            for p_bit, q_bit in _SECTORS:
                acc[p_bit, q_bit] += wk * (fa[p_bit] @ tensor[p_bit, q_bit] @ fb[q_bit].T)
        return acc

    nodes = quadrature.start_nodes
    current = accumulate(nodes)
    while True:
        nodes *= 2
        refined = accumulate(nodes)
        delta = float(np.linalg.norm(refined - current))
        scale = float(np.linalg.norm(refined))
        if delta <= quadrature.rel_tol * max(scale, 1e-300) or scale == 0.0:
            break
        if nodes >= quadrature.max_nodes:
            raise QuadratureError(
                f"first-order correction did not converge at {nodes} nodes",
                diagnostics={"nodes": nodes, "delta": delta, "norm": scale},
            )
        current = refined
    amp = (-1j * dc.gamma) * refined.reshape(-1)
    return StateVector(amplitudes=amp, spec=spec, time=t)


def _system_branches(dc, p, spec, t):
    """Per-sector vectors of system 1 (photon-c, mode a) and system 2
    (photon-d, mode b) for the gravity-free product state at time t."""
    traj_m = analytic.coherent_trajectories(dc, p, "m", t)
    traj_M = analytic.coherent_trajectories(dc, p, "M", t)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    sys1 = (
        inv_sqrt2 * coherent_vector(traj_m.phi0, spec.dim_a)[0],
        inv_sqrt2 * np.exp(1j * traj_m.phase) * coherent_vector(traj_m.phi1, spec.dim_a)[0],
    )
    sys2 = (
        inv_sqrt2 * coherent_vector(traj_M.phi0, spec.dim_b)[0],
        inv_sqrt2 * np.exp(1j * traj_M.phase) * coherent_vector(traj_M.phi1, spec.dim_b)[0],
    )
    return sys1, sys2


def entropy_expectations(
    dc: DerivedCouplings,
    p: PhysicalParams,
    t: float,
    spec: HilbertSpec | None = None,
    quadrature: QuadratureSpec | None = None,
) -> tuple[float, dict]:
    """Entangling coefficient of the first-order perturbation.

    With A the gamma-stripped, Hermitian time integral of the frame-rotated
    coupling generator and psi = psi_1 x psi_2 the gravity-free product
    state at time t, returns

        ||A psi||^2 - ||<psi_2|A|psi_2> psi_1||^2
                    - ||<psi_1|A|psi_1> psi_2||^2 + <A>^2,

    the squared norm of the component of A*psi orthogonal to both pure
    factors.  Only that doubly-orthogonal component entangles: the partial
    expectations move a single subsystem and the mean is a phase.  Dropping
    the system-1 projection (tempting, since the reduced state of system 1
    is the target) overestimates the entropy at leading order.  Node count
    doubles until the coefficient is stable to ``rel_tol`` (default 1e-6).
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    if spec is None:
        spec = default_spec(p, dc)
    quadrature = quadrature or QuadratureSpec(rel_tol=1e-6)
    sys1, sys2 = _system_branches(dc, p, spec, t)
    a_dag_a = destroy_op(spec.dim_a).T
    a_a = destroy_op(spec.dim_a)
    a_dag_b = destroy_op(spec.dim_b).T
    a_b = destroy_op(spec.dim_b)

    def coefficient(nodes: int):
        points, weights = _legendre_nodes(t, nodes)
        full = {key: np.zeros((spec.dim_a, spec.dim_b), dtype=complex) for key in _SECTORS}
        part1 = [np.zeros(spec.dim_a, dtype=complex) for _ in (0, 1)]
        part2 = [np.zeros(spec.dim_b, dtype=complex) for _ in (0, 1)]
        mean = 0.0
        for tp, wk in zip(points, weights):
            s = tp - t
            phase_a = complex(math.cos(dc.omega_a * s), math.sin(dc.omega_a * s))
            phase_b = complex(math.cos(dc.omega_b * s), math.sin(dc.omega_b * s))
            fa_vecs, fb_vecs = {}, {}
            g_a = 0.0
            for p_bit in (0, 1):
                shift = 2.0 * dc.lambda_m * p_bit * (1.0 - math.cos(dc.omega_a * s))
                fa_vecs[p_bit] = (
                    phase_a * (a_dag_a @ sys1[p_bit])
                    + np.conj(phase_a) * (a_a @ sys1[p_bit])
                    + shift * sys1[p_bit]
                )
                g_a += np.vdot(sys1[p_bit], fa_vecs[p_bit]).real
            g_b = 0.0
            for q_bit in (0, 1):
                shift = 2.0 * dc.lambda_M * q_bit * (1.0 - math.cos(dc.omega_b * s))
                fb_vecs[q_bit] = (
                    phase_b * (a_dag_b @ sys2[q_bit])
                    + np.conj(phase_b) * (a_b @ sys2[q_bit])
                    + shift * sys2[q_bit]
                )
                g_b += np.vdot(sys2[q_bit], fb_vecs[q_bit]).real
            for p_bit, q_bit in _SECTORS:
                full[(p_bit, q_bit)] += wk * np.outer(fa_vecs[p_bit], fb_vecs[q_bit])
            for p_bit in (0, 1):
                part1[p_bit] += (wk * g_b) * fa_vecs[p_bit]
            for q_bit in (0, 1):
                part2[q_bit] += (wk * g_a) * fb_vecs[q_bit]
            mean += wk * g_a * g_b
        norm_full = sum(float(np.sum(np.abs(block) ** 2)) for block in full.values())
        norm_part1 = sum(float(np.sum(np.abs(vec) ** 2)) for vec in part1)
        norm_part2 = sum(float(np.sum(np.abs(vec) ** 2)) for vec in part2)
        return norm_full - norm_part1 - norm_part2 + mean * mean, norm_full

    nodes = quadrature.start_nodes
    coeff, scale = coefficient(nodes)
    while True:
        nodes *= 2
        coeff_new, scale_new = coefficient(nodes)
        delta = abs(coeff_new - coeff)
        # The coefficient is a difference of like-sized norms; once the
        # change drops below the cancellation floor of that difference the
        # refinement has converged for all practical purposes.
        floor = max(quadrature.rel_tol * abs(coeff_new), 1e-14 * abs(scale_new))
        if delta <= floor or (scale_new == 0.0 and delta == 0.0):
            return float(coeff_new), {
                "nodes": nodes,
                "delta": float(delta),
                "scale": float(scale_new),
            }
        if nodes >= quadrature.max_nodes:
            raise QuadratureError(
                f"entropy quadrature did not converge at {nodes} nodes",
                diagnostics={"nodes": nodes, "delta": delta, "coefficient": coeff_new},
            )
        coeff, scale = coeff_new, scale_new


def thermal_visibility_montecarlo(
    dc: DerivedCouplings,
    p: PhysicalParams,
    spec: HilbertSpec | None,
    nbar: float,
    t: float,
    n_samples: int,
    seed: int,
    method: str = "closedform",
    bootstrap_resamples: int = 200,
) -> tuple[float, float]:
    """Monte-Carlo thermal visibility of the rod-m cavity.

    Samples rod-m amplitudes beta from the circular complex Gaussian with
    E|beta|^2 = nbar (two independent normal draws of standard deviation
    sqrt(nbar/2) from ``numpy.random.default_rng(seed)``, real part first),
    averages the complex path-coherence element over the samples, and
    returns (2*|mean|, bootstrap standard error).

    ``method="closedform"`` evolves each sample with the exactly solvable
    gravity-free dynamics (exact when gamma = 0); ``method="oracle"``
    propagates each sample in the truncated basis under the full
    Hamiltonian carried by ``dc`` and needs ``spec``.
    """
    if n_samples < 100:
        raise ParameterError(f"n_samples must be >= 100, got {n_samples}")
    if not (math.isfinite(nbar) and nbar >= 0):
        raise ParameterError(f"nbar must be >= 0, got {nbar!r}")
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(nbar / 2.0)
    betas = rng.normal(0.0, sigma, n_samples) + 1j * rng.normal(0.0, sigma, n_samples)
    if method == "closedform":
        elements = analytic.photon_offdiagonal(betas, dc.lambda_m, dc.omega_a, t)
    elif method == "oracle":
        if spec is None:
            raise ParameterError("method='oracle' requires a HilbertSpec")
        from dataclasses import replace as _replace

        propagator = Propagator(hamiltonian_blocks(dc, p, spec))
        elements = np.empty(n_samples, dtype=complex)
        for i, beta in enumerate(betas):
            psi0 = initial_state(_replace(p, beta_m=complex(beta)), spec)
            elements[i] = off_diagonal_exact(propagator.evolve(psi0, t), "c")
    else:
        raise ParameterError(f"method must be 'closedform' or 'oracle', got {method!r}")
    mean_vis = 2.0 * abs(elements.mean())
    indices = rng.integers(0, n_samples, size=(bootstrap_resamples, n_samples))
    resampled = 2.0 * np.abs(elements[indices].mean(axis=1))
    std_error = float(resampled.std(ddof=1))
    return float(mean_vis), std_error


_MATRIX_MAGIC = b"OGMX"


def dump_matrix(path, matrix: np.ndarray):
    """Write a matrix as: magic "OGMX", rows and cols as little-endian
    uint64, then row-major (real, imag) little-endian float64 pairs."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=complex))
    if m.ndim != 2:
        raise ParameterError("dump_matrix expects a 2-d matrix")
    interleaved = np.empty((m.shape[0], m.shape[1], 2), dtype="<f8")
    interleaved[:, :, 0] = m.real
    interleaved[:, :, 1] = m.imag
    with open(path, "wb") as fh:
        fh.write(_MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        fh.write(interleaved.tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MATRIX_MAGIC:
            raise ParameterError(f"not a matrix container: bad magic {magic!r}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(rows, cols, 2)
        return (data[:, :, 0] + 1j * data[:, :, 1]).astype(complex)
