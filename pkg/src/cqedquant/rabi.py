"""Multimode Rabi model of a Cooper-pair box coupled to a quarter-wave line."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants as sc
from scipy import optimize, sparse
from scipy.sparse import linalg as spla

from .lumped import multiport_inverse
from .symplectic import bogoliubov_modes, map_couplings

__all__ = [
    "RabiError",
    "RabiConfig",
    "RenormalizedParameters",
    "foster_expand",
    "foster_impedance",
    "foster_expand_2port",
    "two_port_impedance",
    "two_port_couplings",
    "renormalized_parameters",
    "cutoff_mode",
    "dressed_modes",
    "cpb_diagonalize",
    "build_and_diagonalize",
    "convergence_trace",
    "lamb_shift_estimate",
    "extrapolate_trace",
    "dressed_charging_energy",
    "blackbox_reference",
    "MAX_STATES",
]

HBAR = sc.hbar
E = sc.e
H_PLANCK = sc.h
FLUX_Q = sc.hbar / (2 * sc.e)
MAX_STATES = 2_000_000


class RabiError(ValueError):
    pass


@dataclass(frozen=True)
class RabiConfig:
    """Parameters of the circuit: line, coupling capacitor and junction.

    ``omega0`` is angular; ``E_J`` in joules. ``photon_levels`` lists the
    Fock cutoff per mode; when omitted it is graded by mode index.
    """

    omega0: float = 2 * np.pi * 10e9
    Z0: float = 50.0
    C_c: float = 50e-15
    C_J: float = 0.0
    E_J: float = H_PLANCK * 20e9
    M: int = 1
    photon_levels: tuple | None = None
    n_atom: int = 16
    N_max: int = 20

    def __post_init__(self):
        if self.M < 1 or self.n_atom < 1 or self.N_max < 1:
            raise RabiError("mode count and truncations must be at least 1")
        for name in ("omega0", "Z0"):
            if not getattr(self, name) > 0:
                raise RabiError(f"nonpositive parameter: {name}")
        if self.C_c < 0 or self.C_J < 0 or self.E_J < 0:
            raise RabiError("capacitances and E_J must be nonnegative")

    def levels(self):
        if self.photon_levels is not None:
            lv = tuple(int(x) for x in self.photon_levels)
            if len(lv) != self.M or min(lv) < 1:
                raise RabiError("photon_levels needs one positive entry per mode")
            return lv
        graded = (6, 4)
        return tuple(graded[m] if m < len(graded) else 3 for m in range(self.M))


def foster_expand(omega0, Z0, M):
    """Lumped ladder of a shorted quarter-wave line.

    Returns ``(C0, L, omega)`` with ``C0 = pi/(4 w0 Z0)``,
    ``L_m = 4 Z0 / ((2m+1)^2 pi w0)`` and ``omega_m = (2m+1) w0``.
    """
    m = np.arange(M)
    C0 = np.pi / (4 * omega0 * Z0)
    L = 4 * Z0 / ((2 * m + 1) ** 2 * np.pi * omega0)
    return C0, L, (2 * m + 1) * omega0


def foster_impedance(omega, C0, L):
    """Impedance ``sum_m i w L_m / (1 - w^2 L_m C0)`` of the truncated ladder."""
    w = np.asarray(omega, dtype=float)[..., None]
    return np.sum(1j * w * L / (1 - w * w * L * C0), axis=-1)


@dataclass(frozen=True)
class TwoPortLadder:
    C0: float
    C: np.ndarray
    L: np.ndarray
    turns: np.ndarray

    @property
    def omega(self):
        return 1.0 / np.sqrt(self.L * self.C)


def foster_expand_2port(c, l, length, N):
    """Foster ladder of an open two-port line with ``N`` resonant stages.

    ``C0 = c L``, ``C_n = c L / 2``, ``L_n = 2 l L / (n pi)^2`` and turns
    ``T_n = [1, (-1)^n]`` for ``n = 1..N``.
    """
    n = np.arange(1, N + 1)
    C0 = c * length
    Cn = np.full(N, c * length / 2)
    Ln = 2 * l * length / (n * np.pi) ** 2
    T = np.column_stack([np.ones(N), (-1.0) ** n])
    return TwoPortLadder(C0, Cn, Ln, T)


def two_port_impedance(ladder, s):
    """Impedance matrix of the ladder at complex frequency ``s``."""
    s = complex(s)
    w2 = ladder.omega**2
    Z = np.zeros((2, 2), dtype=complex)
    Z += 1.0 / (ladder.C0 * s)
    for i in range(2):
        for j in range(2):
            Z[i, j] += np.sum(ladder.turns[:, i] * ladder.turns[:, j] / ladder.C * s / (s * s + w2))
    return Z


@dataclass(frozen=True)
class TwoPortCouplings:
    omega: np.ndarray
    g: np.ndarray

    def peak_hz(self, port):
        i = int(np.argmax(np.abs(self.g[:, port])))
        return self.omega[i] / (2 * np.pi), i


def two_port_couplings(c, l, length, N, C_c, C_J):
    """Charge couplings of two junctions at the ends of a Foster-expanded line.

    Junction ``i`` has capacitance ``C_J[i]`` and couples through
    ``C_c[i]``. The static stage is removed, the impedance block of the
    inverse capacitance is symmetrized by its square root ``P`` and
    ``P W P`` is diagonalized with ``W = diag(1/L_n)``.

    Returns
    -------
    TwoPortCouplings
        ``g[n, i]`` in rad/s.
    """
    lad = foster_expand_2port(c, l, length, N)
    Cc = np.asarray(C_c, dtype=float)
    CJ = np.asarray(C_J, dtype=float)
    Cn = np.concatenate([[lad.C0], lad.C])
    sgn = np.concatenate([[1.0], lad.turns[:, 1]])
    A = np.diag(Cc + CJ)
    a = np.diag(np.sqrt(Cc))
    u = np.vstack([np.sqrt(Cc[0]) * np.ones(N + 1), np.sqrt(Cc[1]) * sgn])
    inv = multiport_inverse(A, a, Cn, u)
    K = inv.LR[1:, 1:]
    cross = inv.LL[1:, :]
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    P = (V * np.sqrt(w)) @ V.T
    Pinv = (V / np.sqrt(w)) @ V.T
    W = np.diag(1.0 / lad.L)
    Om2, O = np.linalg.eigh(P @ W @ P)
    Om = np.sqrt(Om2)
    proj = O.T @ Pinv @ cross
    g = 2 * E * proj * np.sqrt(HBAR * Om / 2)[:, None] / HBAR
    return TwoPortCouplings(Om, np.abs(g))


@dataclass(frozen=True)
class RenormalizedParameters:
    E_C: float
    C0M: float
    omega: np.ndarray
    V_zpf: np.ndarray
    hbar_g: np.ndarray
    G_scale: float
    beta: float

    @property
    def G(self):
        """Mode-mode matrix ``G_scale V V^T`` with a zero diagonal (built on demand)."""
        G = self.G_scale * np.outer(self.V_zpf, self.V_zpf)
        np.fill_diagonal(G, 0.0)
        return G


def renormalized_parameters(cfg):
    """Mode-number dependent parameters of the truncated circuit.

    With ``den = M C_c C_J + C0 (C_c + C_J)``:
    ``E_C = (e^2/2)(C0 + M C_c)/den``,
    ``C0M = C0 den / (den - C_c C_J)``,
    ``omega_m = (2m+1)/sqrt(L0 C0M)``,
    ``hbar g_m = 2 e beta V_zpf,m`` with ``beta = C_c C0M / den`` and
    mode-mode terms ``G = -(C_c C_J / (C0 den)) C0M^2 V V^T`` off the
    diagonal.
    """
    C0, L, _ = foster_expand(cfg.omega0, cfg.Z0, cfg.M)
    M = cfg.M
    Cc, CJ = cfg.C_c, cfg.C_J
    den = M * Cc * CJ + C0 * (Cc + CJ)
    if den <= 0:
        raise RabiError("C_c and C_J vanish together")
    E_C = E**2 / 2 * (C0 + M * Cc) / den
    C0M = C0 * den / (den - Cc * CJ)
    L0 = 4 * cfg.Z0 / (np.pi * cfg.omega0)
    m = np.arange(M)
    omega = (2 * m + 1) / math.sqrt(L0 * C0M)
    V = np.sqrt(HBAR * omega / (2 * C0M))
    beta = Cc * C0M / den
    G_scale = -(Cc * CJ / (C0 * den)) * C0M**2
    return RenormalizedParameters(E_C, C0M, omega, V, 2 * E * beta * V, G_scale, beta)


def cutoff_mode(cfg):
    """``m_c = (C_J + C_c) / (2 w0 Z0 C_J C_c)``."""
    if cfg.C_J == 0 or cfg.C_c == 0:
        return math.inf
    return (cfg.C_J + cfg.C_c) / (2 * cfg.omega0 * cfg.Z0 * cfg.C_J * cfg.C_c)


@dataclass(frozen=True)
class DressedModes:
    omega: np.ndarray
    hbar_g: np.ndarray
    method: str


def dressed_modes(cfg, method="auto"):
    """Normal modes of the line sector including mode-mode terms.

    ``method="bogoliubov"`` diagonalizes the bosonic blocks
    ``Theta = Xi = G/2`` (off the diagonal), ``Xi_mm = hbar w_m / 2``.
    ``method="quadrature"`` uses the symmetric problem
    ``K^1/2 W K^1/2`` of the charge-flux form. ``"auto"`` picks the
    bosonic route up to 400 modes.
    """
    p = renormalized_parameters(cfg)
    if method == "auto":
        method = "bogoliubov" if cfg.M <= 400 else "quadrature"
    if method == "bogoliubov":
        G = p.G
        theta = G / 2
        xi = np.diag(HBAR * p.omega / 2) + G / 2
        mu, A, B = bogoliubov_modes(theta, xi)
        g = map_couplings(p.hbar_g, A, B)
        return DressedModes(2 * mu / HBAR, np.abs(g), method)
    if method != "quadrature":
        raise RabiError(f"unknown method {method!r}")
    C0, L, _ = foster_expand(cfg.omega0, cfg.Z0, cfg.M)
    Cc, CJ = cfg.C_c, cfg.C_J
    den = cfg.M * Cc * CJ + C0 * (Cc + CJ)
    # inverse capacitance of the modes and their charge coupling to the island
    k_diag = 1.0 / C0
    k_rank = -Cc * CJ / (C0 * den)
    cvec = np.full(cfg.M, Cc / den)
    # square root of k_diag * 1 + k_rank * ones ones^T in closed form
    M = cfg.M
    top = k_diag + M * k_rank
    if top <= 0:
        raise RabiError("inverse capacitance of the modes is not positive definite")
    sd = math.sqrt(k_diag)
    P = np.eye(M) * sd + (math.sqrt(top) - sd) / M
    Pinv = np.eye(M) / sd + (1 / math.sqrt(top) - 1 / sd) / M
    Om2, O = np.linalg.eigh(P @ np.diag(1.0 / L) @ P)
    Om = np.sqrt(Om2)
    g = 2 * E * (O.T @ Pinv @ cvec) * np.sqrt(HBAR * Om / 2)
    return DressedModes(Om, np.abs(g), method)


@dataclass(frozen=True)
class CPBSpectrum:
    energies: np.ndarray
    vectors: np.ndarray
    n_matrix: np.ndarray
    charges: np.ndarray

    @property
    def omega_a(self):
        return (self.energies[1] - self.energies[0]) / HBAR


def cpb_diagonalize(E_C, E_J, N_max=20, n_g=0.0):
    """Charge-basis Cooper-pair box: ``4 E_C (n - n_g)^2`` and ``-E_J/2`` hops."""
    if N_max < 1:
        raise RabiError("N_max must be at least 1")
    n = np.arange(-N_max, N_max + 1, dtype=float)
    H = np.diag(4 * E_C * (n - n_g) ** 2) - E_J / 2 * (np.eye(len(n), k=1) + np.eye(len(n), k=-1))
    ev, V = np.linalg.eigh(H)
    nmat = V.T @ (n[:, None] * V)
    return CPBSpectrum(ev, V, nmat, n)


def _boson_ops(d):
    a = sparse.diags(np.sqrt(np.arange(1, d)), 1, format="csr")
    return a


def _kron_list(ops):
    out = ops[0]
    for o in ops[1:]:
        out = sparse.kron(out, o, format="csr")
    return out


@dataclass(frozen=True)
class DressedResult:
    omega_a: float
    energies: np.ndarray
    bare_omega_a: float
    dimension: int
    overlap: float


def build_and_diagonalize(cfg, renormalized=True, n_eigs=20, dressed=None):
    """Truncated diagonalization of the atom-multimode Hamiltonian.

    ``H = H_CPB + sum hbar w_m a_m^+ a_m + n sum hbar g_m (a_m + a_m^+)``.
    With ``renormalized=False`` the charging energy stays at ``e^2/2C_c``.
    When ``C_J > 0`` the modes are the Bogoliubov-rotated ones.

    The dressed qubit frequency is the lowest excitation gap; the qubit
    sits below every mode at the default parameters. ``overlap`` reports
    the weight of the bare ``|e, 0...0>`` state in that excited level.
    """
    p = renormalized_parameters(cfg)
    if renormalized:
        E_C = p.E_C
    else:
        if cfg.C_c == 0:
            raise RabiError("non-renormalized model needs C_c > 0")
        E_C = E**2 / (2 * cfg.C_c)
    if dressed is None:
        if cfg.C_J > 0:
            dm = dressed_modes(cfg)
            omega, hg = dm.omega, dm.hbar_g
        else:
            omega, hg = p.omega, p.hbar_g
    else:
        omega, hg = dressed
    levels = cfg.levels()
    dim = cfg.n_atom * int(np.prod(levels))
    if dim > MAX_STATES:
        raise RabiError(f"Hilbert dimension {dim} exceeds the budget of {MAX_STATES} states")
    cpb = cpb_diagonalize(E_C, cfg.E_J, cfg.N_max)
    na = cfg.n_atom
    Ha = sparse.diags(cpb.energies[:na] - cpb.energies[0])
    nop = sparse.csr_matrix(cpb.n_matrix[:na, :na])
    eyes = [sparse.identity(d, format="csr") for d in levels]
    H = _kron_list([Ha] + eyes)
    for m, d in enumerate(levels):
        a = _boson_ops(d)
        num = sparse.diags(np.arange(d, dtype=float))
        ops = [sparse.identity(na, format="csr")] + [num if j == m else eyes[j] for j in range(len(levels))]
        H = H + HBAR * omega[m] * _kron_list(ops)
        ops = [nop] + [(a + a.T) if j == m else eyes[j] for j in range(len(levels))]
        H = H + hg[m] * _kron_list(ops)
    H = (H + H.T) * 0.5
    k = min(n_eigs, dim - 1)
    if dim <= 600:
        ev, vec = np.linalg.eigh(H.toarray())
        ev, vec = ev[: k + 1], vec[:, : k + 1]
    else:
        # fixed start vector keeps repeated runs bit-identical
        v0 = np.random.default_rng(0).standard_normal(dim)
        ev, vec = spla.eigsh(H / HBAR / cfg.omega0, k=k, which="SA", tol=1e-12, v0=v0)
        ev = ev * HBAR * cfg.omega0
        order = np.argsort(ev)
        ev, vec = ev[order], vec[:, order]
    # weight of |e, vacuum> in the first excited state
    overlap = float(vec[int(np.prod(levels)), 1] ** 2)
    omega_a = (ev[1] - ev[0]) / HBAR
    return DressedResult(omega_a, ev, cpb.omega_a, dim, overlap)


def convergence_trace(cfg, M_values, renormalized=True):
    """Dressed qubit frequency (rad/s) for each mode count."""
    return np.array([build_and_diagonalize(replace(cfg, M=int(M), photon_levels=None), renormalized).omega_a
                     for M in M_values])


def lamb_shift_estimate(cfg, m, omega_a=None):
    """Classical per-mode shift ``-2 (g_m^2 / w_m)(w_a^2 / w_m^2)`` in rad/s.

    ``g_m`` and ``w_m`` are taken from the circuit truncated to ``m + 1``
    modes; ``omega_a`` defaults to the bare box frequency at that
    truncation.
    """
    p = renormalized_parameters(replace(cfg, M=m + 1, photon_levels=None))
    if omega_a is None:
        omega_a = cpb_diagonalize(p.E_C, cfg.E_J, cfg.N_max).omega_a
    g = p.hbar_g[m] / HBAR
    w = p.omega[m]
    return -2 * g**2 / w * (omega_a / w) ** 2


def extrapolate_trace(cfg, trace, m_max=20000):
    """Add the classical shifts of modes ``len(trace) .. m_max`` to the last value.

    The qubit frequency in the estimate is held at the last dressed value.
    """
    wa = trace[-1]
    m = np.arange(len(trace), m_max)
    C0, _, _ = foster_expand(cfg.omega0, cfg.Z0, 1)
    if cfg.C_J == 0:
        # closed form when C_J = 0: g^2 / w = 2 e^2 / (hbar C0)
        w = (2 * m + 1) * cfg.omega0
        tail = np.sum(-4 * E**2 / (HBAR * C0) * (wa / w) ** 2)
    else:
        tail = sum(lamb_shift_estimate(cfg, int(k), wa) for k in m)
    return trace[-1] + tail


def dressed_charging_energy(cfg, L):
    """Charging energy of an ``L``-mode model dressed by modes ``L .. M-1``.

    ``E_inf - sum_{L <= m < M} (hbar g_m)^2 / (4 hbar w_m)`` where ``E_inf``
    is the large-``M`` limit ``e^2 / 2 C_J`` of the renormalized charging
    energy. Without junction capacitance that limit diverges and
    ``E_C(M)`` is used instead, which makes the result equal ``E_C(L)``.

    Returns ``(value, tail)`` where ``tail`` is the subtracted sum.
    """
    if not 0 <= L <= cfg.M:
        raise RabiError("L must lie between 0 and M")
    p = renormalized_parameters(cfg)
    hg = p.hbar_g[L:]
    w = p.omega[L:]
    tail = float(np.sum(hg**2 / (4 * HBAR * w)))
    top = E**2 / (2 * cfg.C_J) if cfg.C_J > 0 else p.E_C
    return top - tail, tail


@dataclass(frozen=True)
class BlackBox:
    linear_omega: np.ndarray
    phi_zpf: np.ndarray
    transitions: np.ndarray


def blackbox_reference(cfg, n_modes=3, levels=5, omega_max=None):
    """Linear modes of the line-capacitor-junction loop and quartic spectrum.

    Linear frequencies are zeros of the admittance seen by the junction
    inductance ``L_J = (hbar/2e)^2 / E_J``. Zero-point phases follow from
    ``Phi_zpf^2 = hbar / (w Im Y'(w))``; the quartic correction
    ``-(E_J/24) phi^4`` is diagonalized in ``levels`` Fock states per mode.
    """
    if cfg.E_J <= 0:
        raise RabiError("black-box reference needs E_J > 0")
    LJ = FLUX_Q**2 / cfg.E_J
    w0, Z0, Cc, CJ = cfg.omega0, cfg.Z0, cfg.C_c, cfg.C_J

    def imY(w):
        z_ext = Z0 * np.tan(np.pi * w / (2 * w0)) - 1.0 / (w * Cc)
        return -1.0 / (w * LJ) + w * CJ - 1.0 / z_ext

    def loop(w):
        # zero of the series loop, free of poles of the line impedance
        t = np.pi * w / (2 * w0)
        zj = w * LJ / (1 - w * w * LJ * CJ)
        return Z0 * np.sin(t) + (zj - 1.0 / (w * Cc)) * np.cos(t)

    wmax = omega_max or 5 * w0
    grid = np.linspace(1e-6 * w0, wmax, 20001)
    vals = loop(grid)
    roots = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            if CJ > 0 and abs(1 - a * a * LJ * CJ) < 1e-3:
                continue
            r = optimize.brentq(loop, a, b, xtol=1e-6, rtol=1e-14)
            if abs(loop(r)) < 1e-6 * Z0:
                roots.append(r)
    roots = np.array(roots)
    if len(roots) == 0:
        return BlackBox(roots, roots, roots)
    h = 1e-7 * roots
    dY = (imY(roots + h) - imY(roots - h)) / (2 * h)
    Phi2 = HBAR / (roots * dY)
    phi = np.sqrt(np.abs(Phi2)) / FLUX_Q
    k = min(n_modes, len(roots))
    ops = []
    a = _boson_ops(levels).toarray()
    eye = np.eye(levels)
    H = np.zeros((levels**k, levels**k))
    phi_op = np.zeros_like(H)
    for m in range(k):
        fac = [eye] * k
        fac[m] = np.diag(np.arange(levels, dtype=float))
        op = fac[0]
        for f in fac[1:]:
            op = np.kron(op, f)
        H += HBAR * roots[m] * op
        fac = [eye] * k
        fac[m] = a + a.T
        op = fac[0]
        for f in fac[1:]:
            op = np.kron(op, f)
        phi_op += phi[m] * op
    H -= cfg.E_J / 24 * np.linalg.matrix_power(phi_op, 4)
    ev = np.linalg.eigvalsh(H)
    return BlackBox(roots, phi, (ev[1:] - ev[0]) / HBAR)
