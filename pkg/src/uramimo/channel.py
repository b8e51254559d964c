"""Joint-correlated MIMO channel law: validation, sampling, coupling statistics.

The channel of one user is ``H = U_r @ (Hbar + P * Hhat) @ U_t^H`` where
``Hbar`` is a deterministic line-of-sight matrix with at most one nonzero
per row and per column (placed on the leading diagonal), ``P`` holds the
nonnegative scattering amplitudes per eigenmode pair, and ``Hhat`` has
i.i.d. unit-variance circularly-symmetric complex Gaussian entries.  The
inner factor ``Htilde = Hbar + P * Hhat`` is the coupling matrix; its
entrywise mean power ``Omega = |Hbar|^2 + P^2`` is normalized so that the
total channel power equals ``n_k * m``.
"""

from __future__ import annotations

import dataclasses
import weakref
from dataclasses import dataclass

import numpy as np

from .errors import SpecError

UNITARY_TOL = 1e-10
POWER_TOL = 1e-10

MODE_IID = "iid"
MODE_CORRELATED = "correlated"
MODES = (MODE_IID, MODE_CORRELATED)


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Deterministic parameters defining one user's channel law.

    Immutable after construction; sampling takes an explicit generator so
    callers can sample in parallel with independent streams.
    """

    m: int
    n_k: int
    hbar: np.ndarray  # complex (m, n_k), line-of-sight
    p: np.ndarray     # real nonnegative (m, n_k), scattering amplitudes
    u_t: np.ndarray   # complex unitary (n_k, n_k)
    u_r: np.ndarray   # complex unitary (m, m)
    mode: str         # "iid" or "correlated"

    def __post_init__(self):
        object.__setattr__(self, "hbar", _frozen(self.hbar, np.complex128))
        object.__setattr__(self, "p", _frozen(self.p, np.float64))
        object.__setattr__(self, "u_t", _frozen(self.u_t, np.complex128))
        object.__setattr__(self, "u_r", _frozen(self.u_r, np.complex128))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One sampled channel: the coupling matrix and the full-basis channel."""

    h_tilde: np.ndarray  # complex (m, n_k), Hbar + P * Hhat
    h: np.ndarray        # complex (m, n_k), U_r @ h_tilde @ U_t^H

    def __post_init__(self):
        object.__setattr__(self, "h_tilde", _frozen(self.h_tilde, np.complex128))
        object.__setattr__(self, "h", _frozen(self.h, np.complex128))


@dataclass(frozen=True)
class ChannelParams:
    """Parametric channel description carried by configuration files.

    ``rho_r``/``rho_t`` are exponential-correlation coefficients for the
    receive/transmit side, ``rician_k`` the line-of-sight power ratio, and
    ``seed`` fixes the (phase-only) randomness of the generated spec.
    """

    mode: str
    m: int
    n_k: int
    rho_r: float = 0.0
    rho_t: float = 0.0
    rician_k: float = 0.0
    seed: int = 0


def iid_spec(m: int, n_k: int) -> ChannelSpec:
    """Spec for the uncorrelated Rayleigh special case (already normalized)."""
    if m < 1 or n_k < 1:
        raise SpecError(f"antenna counts must be >= 1, got m={m}, n_k={n_k}")
    return ChannelSpec(
        m=m,
        n_k=n_k,
        hbar=np.zeros((m, n_k), dtype=np.complex128),
        p=np.ones((m, n_k)),
        u_t=np.eye(n_k, dtype=np.complex128),
        u_r=np.eye(m, dtype=np.complex128),
        mode=MODE_IID,
    )


def validate_spec(spec: ChannelSpec, require_power: bool = True) -> None:
    """Raise SpecError unless ``spec`` satisfies its structural invariants.

    ``require_power=False`` skips the total-power check, for specs that have
    not been normalized yet.
    """
    m, n_k = spec.m, spec.n_k
    if m < 1 or n_k < 1:
        raise SpecError(f"antenna counts must be >= 1, got m={m}, n_k={n_k}")
    if spec.hbar.shape != (m, n_k) or spec.p.shape != (m, n_k):
        raise SpecError(
            f"hbar/p must both be ({m}, {n_k}), got {spec.hbar.shape} and {spec.p.shape}"
        )
    if spec.u_t.shape != (n_k, n_k) or spec.u_r.shape != (m, m):
        raise SpecError("unitary factor shapes do not match the antenna counts")
    if spec.mode not in MODES:
        raise SpecError(f"mode must be one of {MODES}, got {spec.mode!r}")
    if np.any(spec.p < 0):
        raise SpecError("scattering amplitudes must be nonnegative")
    for name, u in (("u_t", spec.u_t), ("u_r", spec.u_r)):
        err = np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0]))
        if err > UNITARY_TOL:
            raise SpecError(f"{name} is not unitary (Frobenius defect {err:.3e})")
    rows, cols = np.nonzero(spec.hbar)
    nd = min(m, n_k)
    if np.any(rows != cols) or np.any(rows >= nd):
        raise SpecError("line-of-sight entries are only allowed at (d, d), d < min(m, n_k)")
    if spec.mode == MODE_IID:
        if np.any(spec.hbar != 0) or np.any(spec.p != 1):
            raise SpecError("iid mode requires hbar == 0 and p == 1")
        if not (
            np.array_equal(spec.u_t, np.eye(n_k)) and np.array_equal(spec.u_r, np.eye(m))
        ):
            raise SpecError("iid mode requires identity unitaries")
    if require_power:
        total = float(build_omega(spec).sum())
        target = float(n_k * m)
        if abs(total - target) > POWER_TOL * target:
            raise SpecError(
                f"total coupling power {total!r} deviates from {target!r} "
                "beyond tolerance; normalize the spec first"
            )


def build_omega(spec: ChannelSpec) -> np.ndarray:
    """Average power coupling ``|Hbar|^2 + P^2``, real nonnegative (m, n_k)."""
    if spec.hbar.shape != spec.p.shape:
        raise SpecError(
            f"hbar shape {spec.hbar.shape} does not match p shape {spec.p.shape}"
        )
    return (spec.hbar * spec.hbar.conj()).real + spec.p * spec.p


def normalize_spec(spec: ChannelSpec) -> ChannelSpec:
    """Rescale hbar and p by a common factor so the coupling sums to n_k*m."""
    total = float(build_omega(spec).sum())
    if total <= 0.0:
        raise SpecError("degenerate spec: coupling matrix is identically zero")
    scale = np.sqrt(spec.n_k * spec.m / total)
    return dataclasses.replace(spec, hbar=spec.hbar * scale, p=spec.p * scale)


# specs whose invariants have already been checked; validation is O(m^3),
# sampling is called per user per slot
_validated_specs: "weakref.WeakSet[ChannelSpec]" = weakref.WeakSet()


def sample_coupling(spec: ChannelSpec, rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel realization from a valid, normalized spec."""
    if spec not in _validated_specs:
        validate_spec(spec)
        _validated_specs.add(spec)
    hhat = (
        rng.standard_normal((spec.m, spec.n_k))
        + 1j * rng.standard_normal((spec.m, spec.n_k))
    ) / np.sqrt(2.0)
    h_tilde = spec.hbar + spec.p * hhat
    h = spec.u_r @ h_tilde @ spec.u_t.conj().T
    return ChannelRealization(h_tilde=h_tilde, h=h)


def transmit_eigenvalues(omega: np.ndarray) -> np.ndarray:
    """Column sums of the coupling matrix (transmit-side eigenvalues)."""
    omega = np.asarray(omega)
    if omega.ndim != 2:
        raise SpecError("coupling matrix must be two-dimensional")
    return omega.sum(axis=0)


def receive_eigenvalues(omega: np.ndarray) -> np.ndarray:
    """Row sums of the coupling matrix (receive-side eigenvalues)."""
    omega = np.asarray(omega)
    if omega.ndim != 2:
        raise SpecError("coupling matrix must be two-dimensional")
    return omega.sum(axis=1)


def exp_correlation(n: int, rho: float) -> np.ndarray:
    """Exponential correlation matrix with entries rho**|i - j|."""
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def make_exp_correlated_spec(
    m: int,
    n_k: int,
    rho_r: float,
    rho_t: float,
    rician_k: float,
    rng: np.random.Generator,
) -> ChannelSpec:
    """Parametric correlated spec from exponential-correlation eigenvalues.

    The coupling matrix is the outer product of the eigenvalue profiles of
    ``rho^|i-j|`` correlation matrices on each side, the unitaries are the
    corresponding eigenvector bases (strongest mode first), and a fraction
    ``rician_k / (1 + rician_k)`` of the total power sits on the diagonal
    line-of-sight entries with phases drawn from ``rng``.  The result is
    normalized to total power ``n_k * m``.
    """
    if not (0.0 <= rho_r < 1.0 and 0.0 <= rho_t < 1.0):
        raise SpecError(f"correlation coefficients must be in [0, 1), got {rho_r}, {rho_t}")
    if rician_k < 0.0:
        raise SpecError(f"line-of-sight ratio must be >= 0, got {rician_k}")
    if m < 1 or n_k < 1:
        raise SpecError(f"antenna counts must be >= 1, got m={m}, n_k={n_k}")

    eig_r, u_r = np.linalg.eigh(exp_correlation(m, rho_r))
    eig_t, u_t = np.linalg.eigh(exp_correlation(n_k, rho_t))
    order_r = np.argsort(eig_r)[::-1]
    order_t = np.argsort(eig_t)[::-1]
    eig_r, u_r = np.clip(eig_r[order_r], 0.0, None), u_r[:, order_r]
    eig_t, u_t = np.clip(eig_t[order_t], 0.0, None), u_t[:, order_t]

    total = float(m * n_k)
    scatter_power = total / (1.0 + rician_k)
    los_power = total - scatter_power

    p = np.sqrt(np.outer(eig_r, eig_t) * (scatter_power / (eig_r.sum() * eig_t.sum())))
    hbar = np.zeros((m, n_k), dtype=np.complex128)
    if los_power > 0.0:
        nd = min(m, n_k)
        amp = np.sqrt(los_power / nd)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=nd)
        hbar[np.arange(nd), np.arange(nd)] = amp * np.exp(1j * phases)

    spec = ChannelSpec(
        m=m,
        n_k=n_k,
        hbar=hbar,
        p=p,
        u_t=u_t.astype(np.complex128),
        u_r=u_r.astype(np.complex128),
        mode=MODE_CORRELATED,
    )
    return normalize_spec(spec)


def build_spec(params: ChannelParams) -> ChannelSpec:
    """Materialize a ChannelSpec from its parametric description."""
    if params.mode == MODE_IID:
        return iid_spec(params.m, params.n_k)
    if params.mode == MODE_CORRELATED:
        rng = np.random.default_rng(np.random.SeedSequence(params.seed))
        return make_exp_correlated_spec(
            params.m, params.n_k, params.rho_r, params.rho_t, params.rician_k, rng
        )
    raise SpecError(f"unknown channel mode {params.mode!r}")


def export_complex_array(path, arr: np.ndarray) -> None:
    """Dump a complex matrix as column-major interleaved re/im float64."""
    flat = np.asarray(arr, dtype=np.complex128).ravel(order="F")
    flat.view(np.float64).tofile(path)


def load_complex_array(path, shape: tuple[int, int]) -> np.ndarray:
    """Read back a matrix written by :func:`export_complex_array`."""
    raw = np.fromfile(path, dtype=np.float64)
    expected = 2 * shape[0] * shape[1]
    if raw.size != expected:
        raise SpecError(f"file holds {raw.size} floats, expected {expected} for {shape}")
    return raw.view(np.complex128).reshape(shape, order="F")
