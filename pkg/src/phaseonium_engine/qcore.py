"""Dense linear algebra and quantum-state primitives.

Conventions: hbar = k_B = 1 and every frequency is measured in units of the
cavity frequency, so a single photon carries energy 1.  Operators are plain
complex ``numpy`` arrays; density matrices are wrapped in :class:`DensityMatrix`
so that their invariants are checked once, at construction.

Vectorisation is row-major: ``vec(A @ X @ B) = kron(A, B.T) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_DIM = 4096
# dense superoperator (dim**2 x dim**2) is only built below this Hilbert dim
SUPEROP_MAX_DIM = 32


class DimensionError(ValueError):
    """Raised when a composite space would exceed ``MAX_DIM``."""


class TruncationError(ValueError):
    """Raised when a Fock cutoff cannot hold a thermal state to tolerance."""


class IntegrationError(RuntimeError):
    """Raised when the fixed-step integrator loses the density-matrix invariants."""


class InvalidStateError(ValueError):
    """Raised when a matrix is not a valid density matrix."""


# ----------------------------------------------------------------------------
# operators


def tensor_product(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("tensor_product expects two matrices")
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise DimensionError(f"composite dimension {max(rows, cols)} exceeds {max_dim}")
    return np.kron(a, b)


def tensor(*ops, max_dim: int = MAX_DIM) -> np.ndarray:
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = tensor_product(out, op, max_dim=max_dim)
    return out


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def annihilation(dim: int, offset: int = 0) -> np.ndarray:
    """Truncated annihilation operator on Fock levels ``offset .. offset+dim-1``.

    With ``offset > 0`` the matrix acts on a window of the Fock ladder; the
    matrix elements are those of the full operator, ``<n-1|a|n> = sqrt(n)``.
    """
    if dim < 1 or offset < 0:
        raise ValueError("dim must be >= 1 and offset >= 0")
    a = np.zeros((dim, dim), dtype=complex)
    j = np.arange(1, dim)
    a[j - 1, j] = np.sqrt(offset + j)
    return a


def creation(dim: int, offset: int = 0) -> np.ndarray:
    return annihilation(dim, offset).conj().T


def number_operator(dim: int, offset: int = 0) -> np.ndarray:
    return np.diag(np.arange(offset, offset + dim)).astype(complex)


def basis_projector(dim: int, i: int, j: int | None = None) -> np.ndarray:
    """``|i><j|`` (``|i><i|`` when ``j`` is omitted)."""
    op = np.zeros((dim, dim), dtype=complex)
    op[i, i if j is None else j] = 1.0
    return op


def is_hermitian(op, tol: float = 1e-12) -> bool:
    op = np.asarray(op)
    return op.shape[0] == op.shape[1] and float(np.max(np.abs(op - op.conj().T))) <= tol


# ----------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix over ``dims``.

    The stored matrix is read-only.  ``dims`` lists the subsystem dimensions
    in tensor order (for the engine: atom first, field second).
    """

    matrix: np.ndarray
    dims: tuple[int, ...] = field(default=())

    HERMITIAN_TOL = 1e-12
    TRACE_TOL = 1e-10
    POSITIVITY_TOL = 1e-10

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidStateError(f"density matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("density matrix has non-finite entries")
        dims = tuple(int(d) for d in self.dims) if self.dims else (m.shape[0],)
        if int(np.prod(dims)) != m.shape[0]:
            raise InvalidStateError(f"dims {dims} do not match matrix size {m.shape[0]}")
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > self.HERMITIAN_TOL:
            raise InvalidStateError(f"not Hermitian (max asymmetry {herm:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise InvalidStateError(f"trace {tr.real:.12g} differs from 1")
        lmin = min_eigenvalue(m)
        if lmin < -self.POSITIVITY_TOL:
            raise InvalidStateError(f"not positive semidefinite (min eigenvalue {lmin:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expect(self, op) -> float:
        return float(np.real(np.trace(np.asarray(op) @ self.matrix)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def min_eigenvalue(m) -> float:
    m = np.asarray(m)
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def hermiticity_error(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T)))


def product_state(*states: DensityMatrix) -> DensityMatrix:
    mat = tensor(*[s.matrix for s in states])
    dims = tuple(d for s in states for d in s.dims)
    return DensityMatrix(mat, dims)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduce ``rho`` to the subsystem(s) listed in ``keep``."""
    dims = rho.dims
    if len(dims) < 2:
        raise ValueError("partial_trace needs at least two subsystems")
    keep_idx = (keep,) if np.isscalar(keep) else tuple(keep)
    if not keep_idx or any(not (0 <= int(k) < len(dims)) for k in keep_idx):
        raise ValueError(f"invalid subsystem index {keep!r} for dims {dims}")
    keep_idx = tuple(sorted(set(int(k) for k in keep_idx)))
    n = len(dims)
    t = np.asarray(rho.matrix).reshape(dims + dims)
    # einsum over traced subsystems
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for k in range(n):
        if k not in keep_idx:
            col[k] = row[k]
    out = "".join(row[k] for k in keep_idx) + "".join(col[k] for k in keep_idx)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims[k] for k in keep_idx]))
    m = red.reshape(d, d)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m, tuple(dims[k] for k in keep_idx))


@dataclass(frozen=True)
class FieldSpec:
    """Truncated single cavity mode.

    ``n_max`` is the number of Fock levels kept (``|0> .. |n_max-1>``).
    ``tail_tol`` bounds the thermal weight discarded above the cutoff.
    """

    n_max: int = 30
    omega: float = 1.0
    tail_tol: float = 1e-8

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.omega <= 0:
            raise ValueError("omega must be positive")


def bose_einstein(T: float, omega: float = 1.0) -> float:
    if T <= 0:
        return 0.0
    return float(1.0 / np.expm1(omega / T))


def thermal_tail(T: float, n_max: int, omega: float = 1.0) -> float:
    """Weight of levels ``>= n_max`` in the untruncated thermal state."""
    if T <= 0:
        return 0.0
    return float(np.exp(-n_max * omega / T))


def required_cutoff(T: float, tail_tol: float = 1e-8, omega: float = 1.0) -> int:
    """Smallest ``n_max`` whose thermal tail at ``T`` is below ``tail_tol``."""
    if T <= 0:
        return 2
    return max(2, int(np.ceil(-np.log(tail_tol) * T / omega)))


def thermal_populations_field(T: float, n_max: int, omega: float = 1.0) -> np.ndarray:
    if T <= 0:
        p = np.zeros(n_max)
        p[0] = 1.0
        return p
    logw = -np.arange(n_max) * omega / T
    w = np.exp(logw - logw.max())
    return w / w.sum()


def thermal_field_state(spec: FieldSpec, T: float) -> DensityMatrix:
    if T <= 0:
        raise ValueError("temperature must be positive")
    tail = thermal_tail(T, spec.n_max, spec.omega)
    if tail >= spec.tail_tol:
        need = required_cutoff(T, spec.tail_tol, spec.omega)
        raise TruncationError(
            f"n_max={spec.n_max} leaves thermal tail {tail:.2e} >= {spec.tail_tol:.0e} "
            f"at T={T}; need n_max >= {need}"
        )
    p = thermal_populations_field(T, spec.n_max, spec.omega)
    return DensityMatrix(np.diag(p).astype(complex), (spec.n_max,))


def truncated_thermal_mean(T, n_max: int, omega: float = 1.0):
    """Mean photon number of the thermal state renormalised on ``n_max`` levels."""
    T = np.asarray(T, dtype=float)
    q = np.exp(-omega / T)
    qn = q ** n_max
    return q / (1 - q) - n_max * qn / (1 - qn)


# ----------------------------------------------------------------------------
# Lindblad evolution


def dissipator_superop(L: np.ndarray) -> np.ndarray:
    """Superoperator of ``L rho L^+ - (L^+L rho + rho L^+L)/2``."""
    L = np.asarray(L, dtype=complex)
    d = L.shape[0]
    eye = np.eye(d)
    LdL = L.conj().T @ L
    return np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)


def liouvillian(H, dissipators: Sequence[tuple[float, np.ndarray]] = ()) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, L in dissipators:
        if rate:
            sup = sup + rate * dissipator_superop(L)
    return sup


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, dissipators) -> np.ndarray:
    out = -1j * (H @ rho - rho @ H)
    for rate, L in dissipators:
        if not rate:
            continue
        LdL = L.conj().T @ L
        out = out + rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def rk4_propagator(L: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step of ``dx/dt = L x`` as a matrix."""
    hL = dt * L
    eye = np.eye(L.shape[0], dtype=complex)
    h2 = hL @ hL
    h3 = h2 @ hL
    return eye + hL + h2 / 2 + h3 / 6 + h3 @ hL / 24


def _matrix_power(P: np.ndarray, n: int) -> np.ndarray:
    out = np.eye(P.shape[0], dtype=complex)
    base = P
    while n:
        if n & 1:
            out = out @ base
        n >>= 1
        if n:
            base = base @ base
    return out


def _validate_inputs(H, dissipators, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not is_hermitian(H, 1e-10):
        raise ValueError("Hamiltonian is not Hermitian")
    for rate, L in dissipators:
        if rate < 0:
            raise ValueError("dissipator rates must be non-negative")
        if np.asarray(L).shape != np.asarray(H).shape:
            raise ValueError("jump operator shape does not match Hamiltonian")


def _check_step(m: np.ndarray, dt: float, where: str, trace_tol: float, pos_tol: float):
    drift = abs(np.trace(m) - 1.0)
    herm = hermiticity_error(m)
    if not np.all(np.isfinite(m)) or drift > trace_tol or herm > 1e-10:
        raise IntegrationError(
            f"step dt={dt:.6g} too large: trace drift {drift:.2e}, asymmetry {herm:.2e} ({where})"
        )
    if np.linalg.norm(m) > 1.0 + 1e-8:
        raise IntegrationError(f"step dt={dt:.6g} too large: state norm grew to {np.linalg.norm(m):.4g} ({where})")
    lmin = min_eigenvalue(m)
    if lmin < -pos_tol:
        raise IntegrationError(f"step dt={dt:.6g} too large: min eigenvalue {lmin:.2e} ({where})")


def lindblad_trajectory(rho0: DensityMatrix, H, dissipators, t: float, dt: float,
                        n_samples: int = 1, *, trace_tol: float = 1e-8,
                        pos_tol: float = 1e-8):
    """Fixed-step RK4 solution sampled at ``n_samples`` evenly spaced times.

    Returns ``(times, states)`` where ``states`` are raw complex matrices (not
    re-Hermitised) so callers can audit the integrator.  ``t`` is rounded to
    a whole number of steps of size at most ``dt``.
    """
    H = np.asarray(H, dtype=complex)
    dissipators = [(float(r), np.asarray(L, dtype=complex)) for r, L in dissipators]
    _validate_inputs(H, dissipators, dt)
    if t < 0:
        raise ValueError("duration must be non-negative")
    d = H.shape[0]
    if rho0.dim != d:
        raise ValueError("state and Hamiltonian dimensions differ")
    n_samples = max(1, int(n_samples))
    n_steps = int(np.ceil(t / dt - 1e-9)) if t > 0 else 0
    n_steps = max(n_steps, n_samples) if t > 0 else 0
    # equal chunks; rounding spreads the remainder over the first chunks
    chunks = [n_steps // n_samples + (1 if k < n_steps % n_samples else 0) for k in range(n_samples)]
    h = t / n_steps if n_steps else 0.0

    x = np.array(rho0.matrix, dtype=complex)
    times, states = [], []
    elapsed = 0
    if d <= SUPEROP_MAX_DIM:
        P = rk4_propagator(liouvillian(H, dissipators), h) if n_steps else None
        cache: dict[int, np.ndarray] = {}
        for c in chunks:
            if c:
                if c not in cache:
                    cache[c] = _matrix_power(P, c)
                x = (cache[c] @ x.reshape(-1)).reshape(d, d)
            elapsed += c
            _check_step(x, h, f"after {elapsed} steps", trace_tol, pos_tol)
            times.append(elapsed * h)
            states.append(x.copy())
    else:
        for c in chunks:
            for _ in range(c):
                k1 = lindblad_rhs(x, H, dissipators)
                k2 = lindblad_rhs(x + 0.5 * h * k1, H, dissipators)
                k3 = lindblad_rhs(x + 0.5 * h * k2, H, dissipators)
                k4 = lindblad_rhs(x + h * k3, H, dissipators)
                x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            elapsed += c
            _check_step(x, h, f"after {elapsed} steps", trace_tol, pos_tol)
            times.append(elapsed * h)
            states.append(x.copy())
    return np.array(times), states


def evolve_lindblad(rho0: DensityMatrix, H, dissipators, t: float, dt: float,
                    *, n_checks: int = 4) -> DensityMatrix:
    """Evolve ``rho0`` for time ``t`` under the Lindblad equation.

    ``dissipators`` is a sequence of ``(rate, L)`` pairs contributing
    ``rate * (L rho L^+ - {L^+L, rho}/2)``.  Invariants are audited at
    ``n_checks`` evenly spaced points; a violation raises
    :class:`IntegrationError` naming the step size.
    """
    if t == 0:
        return rho0
    _, states = lindblad_trajectory(rho0, H, dissipators, t, dt, n_samples=n_checks)
    m = states[-1]
    m = 0.5 * (m + m.conj().T)
    m = m / np.trace(m).real
    return DensityMatrix(m, rho0.dims)
