"""Quadratic circuit matrices, exact block inversions and the Legendre map.

The Lagrangian of a lumped network in tree-branch fluxes ``Phi`` reads

    L = Phi'^T C Phi' / 2 - Phi^T M0 Phi / 2 + Phi'^T G Phi / 2 + sum E_J cos(...)

with ``C`` symmetric, ``M0`` symmetric and ``G`` skew. The equations of
motion are ``C Phi'' + G Phi' + M0 Phi = 0`` in the linear sector.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc

from . import netlist as nl
from .nonreciprocal import NonreciprocalError, ScatteringDevice, cayley_admittance
from .symplectic import normal_frequencies, symplectic_form, williamson_diagonalize

__all__ = [
    "LumpedError",
    "NoAdmittanceError",
    "SingularKineticError",
    "FrozenVariableError",
    "Junction",
    "QuadraticModel",
    "QuantizedHamiltonian",
    "FrozenReport",
    "BlockInverse",
    "assemble_matrices",
    "quadratic_model",
    "check_invertibility",
    "invert_block",
    "multiport_coefficients",
    "multiport_inverse",
    "dress_impedance_modes",
    "dressing_shift",
    "hamiltonian_hessian",
    "legendre_transform",
    "dual_charge_hamiltonian",
    "FROZEN_RTOL",
]

FROZEN_RTOL = 1e-12
TRIGGER_TOL = 1e-9
E = sc.e
HBAR = sc.hbar
H_PLANCK = sc.h
PHI0 = sc.h / (2 * sc.e)


class LumpedError(ValueError):
    pass


class NoAdmittanceError(LumpedError):
    pass


class SingularKineticError(LumpedError):
    pass


class FrozenVariableError(LumpedError):
    pass


@dataclass(frozen=True)
class Junction:
    """Josephson element with flux ``vector @ Phi + phi_ext``."""

    vector: np.ndarray
    EJ: float
    phi_ext: float = 0.0
    label: str = ""


@dataclass
class QuadraticModel:
    C: np.ndarray
    M0: np.ndarray
    G: np.ndarray
    junctions: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    linear: np.ndarray | None = None
    labels: list = field(default_factory=list)

    @property
    def size(self):
        return self.C.shape[0]


@dataclass
class QuantizedHamiltonian:
    """Normal-mode data of a quantized circuit.

    ``frequencies`` are angular (rad/s). ``couplings`` holds dictionaries with
    keys ``mode``, ``partner``, ``g`` (rad/s) and ``type``.
    """

    frequencies: np.ndarray
    S: np.ndarray | None
    couplings: list
    anharmonic: list
    G: np.ndarray
    Cinv: np.ndarray
    zero_modes: int = 0
    frozen: list = field(default_factory=list)

    def to_json(self):
        two_pi = 2 * np.pi
        return {
            "convention": "f=omega/2pi",
            "frequencies_hz": [float(w / two_pi) for w in self.frequencies],
            "couplings": [
                {"mode": int(c["mode"]), "partner": c["partner"], "g_hz": float(c["g"] / two_pi), "type": c["type"]}
                for c in self.couplings
            ],
            "EC_hz": [float(ec / H_PLANCK) for ec, _ in self.anharmonic],
            "EJ_hz": [float(ej / H_PLANCK) for _, ej in self.anharmonic],
            "G": np.asarray(self.G).tolist(),
            "Cinv": np.asarray(self.Cinv).tolist(),
            "zero_modes": int(self.zero_modes),
        }


def _sym(X):
    return 0.5 * (X + X.T)


def _skew(X):
    return 0.5 * (X - X.T)


def assemble_matrices(ls, net):
    """Capacitance, inverse inductance and gyration matrices of a netlist.

    Parameters
    ----------
    ls : LoopStructure
        Output of :func:`netlist.build_loop_structure`; transformers are
        eliminated here if still present.
    net : CircuitNetlist
    """
    if not ls.eliminated:
        ls = nl.eliminate_transformers(ls)
    edges = {e.id: e for e in net.expanded()}
    n = len(ls.tree)
    C = np.zeros((n, n))
    M0 = np.zeros((n, n))
    G = np.zeros((n, n))
    lin = np.zeros(n)
    labels = []
    for i, bid in enumerate(ls.tree):
        e = edges[bid]
        labels.append(f"{e.kind}{bid}:{e.start}-{e.end}")
        if e.kind == nl.CAP:
            C[i, i] += e.value
        elif e.kind == nl.IND:
            M0[i, i] += 1.0 / e.value
    junctions = []
    ports = {}
    for j, bid in enumerate(ls.chord):
        e = edges[bid]
        f = ls.F[:, j].astype(float)
        phi = 0.0 if ls.phi_ext is None else float(ls.phi_ext[j])
        if e.kind == nl.CAP:
            C += e.value * np.outer(f, f)
        elif e.kind == nl.IND:
            M0 += np.outer(f, f) / e.value
            lin += f * phi / e.value
        elif e.kind == nl.JUNC:
            junctions.append(Junction(f, e.value, phi, f"J{bid}"))
        elif e.kind == nl.YDEV:
            ports.setdefault(e.owner, {})[e.port] = f
    for owner, cols in sorted(ports.items()):
        spec = net.couplers[owner]
        try:
            Y = cayley_admittance(ScatteringDevice(spec["S"], spec["R"]))
        except NonreciprocalError as exc:
            raise NoAdmittanceError(
                f"device {owner} has no admittance description ({exc}); reduce it with nonreciprocal.reduce_frozen"
            ) from None
        FG = np.column_stack([cols[p] for p in sorted(cols)])
        G += FG @ Y @ FG.T
    return QuadraticModel(_sym(C), _sym(M0), _skew(G), junctions, [], lin, labels)


def quadratic_model(net):
    """Parse-to-matrices shortcut."""
    return assemble_matrices(nl.eliminate_transformers(nl.build_loop_structure(net)), net)


@dataclass
class FrozenReport:
    singular: bool
    null_C: list
    null_M0: list
    softest_value: float
    softest_vector: np.ndarray
    trigger: float | None = None
    trigger_text: str = ""

    def lines(self):
        out = []
        for v in self.null_C:
            out.append("frozen direction of C: " + np.array2string(v, precision=6))
        for v in self.null_M0:
            out.append("null direction of M0: " + np.array2string(v, precision=6))
        if self.trigger_text:
            out.append(self.trigger_text)
        return out


def _null_directions(X, rtol):
    w, V = np.linalg.eigh(_sym(X))
    top = max(abs(w).max(), 1e-300)
    return [V[:, k] for k in range(len(w)) if abs(w[k]) < rtol * top], w, V


def check_invertibility(qm, port=None, rtol=FROZEN_RTOL):
    """Report kinetic null directions and the softest kinetic eigenpair.

    Parameters
    ----------
    qm : QuadraticModel
    port : tuple (A, a, Cc), optional
        Network capacitance matrix, port vector and coupling capacitance.
        When given, the analytic trigger ``1 - Cc a^T A^-1 a`` is evaluated.
    """
    null_C, w, V = _null_directions(qm.C, rtol)
    null_M0 = []
    if not qm.junctions:
        null_M0, _, _ = _null_directions(qm.M0, rtol) if np.any(qm.M0) else ([], None, None)
    k = int(np.argmin(w))
    trigger = None
    text = ""
    if port is not None:
        A, a, Cc = port
        A = np.atleast_2d(np.asarray(A, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        trigger = float(1.0 - Cc * a @ np.linalg.solve(A, a))
        if abs(trigger) < TRIGGER_TOL:
            text = "1 - C_c a^T A^-1 a = 0: the port variable is frozen"
    return FrozenReport(bool(null_C), null_C, null_M0, float(w[k]), V[:, k], trigger, text)


@dataclass(frozen=True)
class BlockInverse:
    UL: np.ndarray
    UR: np.ndarray
    LL: np.ndarray
    LR: np.ndarray

    def dense(self):
        return np.block([[self.UL, self.UR], [self.LL, self.LR]])


def _inv_small(X, what, cond_max=1e12):
    X = np.atleast_2d(X)
    if np.linalg.cond(X) > cond_max:
        raise FrozenVariableError(f"near-singular pivot in {what}: a frozen variable is likely")
    return np.linalg.inv(X)


def invert_block(A, C1, D, rank=None, cond_max=1e12):
    """Inverse of ``[[A, D], [D^T, C1]]`` through a small pivot.

    ``A`` is the small block, ``C1`` the large one (a 1-d array is read as a
    diagonal) and ``D`` has low rank. Only ``A``, ``C1`` and the pivot
    ``1 - D C1^-1 D^T A^-1`` (of the size of ``A``) are inverted. For a
    rank-one ``D`` with a scalar ``A`` the pivot reduces to the scalar
    ``1 - Tr(D C1^-1 D^T A^-1)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    C1 = np.asarray(C1, dtype=float)
    if C1.ndim == 1:
        if np.any(C1 == 0):
            raise FrozenVariableError("zero diagonal in C1")
        C1inv_Dt = D.T / C1[:, None]
        C1inv = np.diag(1.0 / C1)
    else:
        C1inv = np.linalg.inv(C1)
        C1inv_Dt = C1inv @ D.T
    Ainv = _inv_small(A, "A", cond_max)
    DCD = D @ C1inv_Dt
    m = A.shape[0]
    if rank == 1 and m == 1:
        tr = float(np.trace(DCD @ Ainv))
        if abs(1.0 - tr) < 1.0 / cond_max:
            raise FrozenVariableError("1 - Tr(D C1^-1 D^T A^-1) vanishes: a frozen variable is likely")
        K1 = np.array([[1.0 / (1.0 - tr)]])
    else:
        K1 = _inv_small(np.eye(m) - DCD @ Ainv, "pivot 1 - D C1^-1 D^T A^-1", cond_max)
    AK = Ainv @ K1
    UL = Ainv + AK @ DCD @ Ainv
    UR = -AK @ C1inv_Dt.T
    LL = UR.T
    LR = C1inv + C1inv_Dt @ (Ainv @ K1) @ C1inv_Dt.T
    return BlockInverse(UL, UR, LL, LR)


def multiport_coefficients(A, a_vectors, Cn, u_vectors):
    """Coefficient matrices of the multiport inverse capacitance.

    Returns ``(mu, nu, Xi, Theta, Gamma, Lam)`` with
    ``mu_ij = u_i^T Cn^-1 u_j`` and ``nu_ij = a_i^T A^-1 a_j``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a = np.atleast_2d(np.asarray(a_vectors, dtype=float))
    u = np.atleast_2d(np.asarray(u_vectors, dtype=float))
    Cn = np.asarray(Cn, dtype=float)
    Cn_u = (u / Cn[None, :]).T if Cn.ndim == 1 else np.linalg.solve(Cn, u.T)
    A_a = np.linalg.solve(A, a.T)
    mu = u @ Cn_u
    nu = a @ A_a
    k = mu.shape[0]
    eye = np.eye(k)
    Zinv = _inv_small(eye + mu - nu @ mu, "1 + mu - nu mu")
    Xi = mu @ Zinv
    Gamma = Zinv
    Lam = Zinv @ (nu - eye)
    Theta = eye + mu @ Zinv @ (nu - eye)
    return mu, nu, Xi, Theta, Gamma, Lam


def multiport_inverse(A, a_vectors, Cn, u_vectors):
    """Inverse of ``[[A, -sum a_i u_i^T], [-sum u_i a_i^T, Cn + sum u_i u_i^T]]``.

    ``a_vectors`` and ``u_vectors`` hold one port vector per row. ``Cn`` may
    be a 1-d diagonal.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a = np.atleast_2d(np.asarray(a_vectors, dtype=float))
    u = np.atleast_2d(np.asarray(u_vectors, dtype=float))
    Cn = np.asarray(Cn, dtype=float)
    _, _, Xi, Theta, Gamma, Lam = multiport_coefficients(A, a, Cn, u)
    Ainv = np.linalg.inv(A)
    Aa = Ainv @ a.T
    if Cn.ndim == 1:
        Cu = u.T / Cn[:, None]
        Cninv = np.diag(1.0 / Cn)
    else:
        Cninv = np.linalg.inv(Cn)
        Cu = Cninv @ u.T
    UL = Ainv + Aa @ Xi @ Aa.T
    UR = Aa @ Theta @ Cu.T
    LL = Cu @ Gamma @ Aa.T
    LR = Cninv + Cu @ Lam @ Cu.T
    return BlockInverse(UL, UR, LL, LR)


def dressing_shift(C_A, C_B, t):
    """Kinetic coefficients after the shift ``Phi_A -> Phi_A + t Phi_port``.

    Returns ``(a, b, d)``: the network capacitance, the network-port cross
    term and the port self term.
    """
    cs = C_A + C_B
    return cs, t * cs - C_B, C_B - 2 * C_B * t + cs * t * t


@dataclass
class DressedModes:
    frequencies: np.ndarray
    coupling_vectors: np.ndarray
    Mn: np.ndarray
    transform: np.ndarray
    Cinv: np.ndarray
    Linv: np.ndarray


def dress_impedance_modes(qm, n_network, u_vectors, M0=1.0):
    """Rescale impedance variables so that their kinetic block is uniform.

    The first ``n_network`` variables belong to the network, the rest to
    the impedance ladder. ``Mn`` is the Schur complement of the network
    block in ``C``; the impedance fluxes are rescaled by
    ``M0^-1/2 Mn^1/2`` and rotated to diagonalize the inductive block.

    Returns
    -------
    DressedModes
        ``coupling_vectors`` holds ``f_i = M0^1/2 Mn^-1/2 u_i`` in the
        rotated mode basis (one row per port).
    """
    C = qm.C
    k = n_network
    A = C[:k, :k]
    Bc = C[:k, k:]
    Mn = C[k:, k:] - Bc.T @ np.linalg.solve(A, Bc)
    Mn = _sym(Mn)
    try:
        np.linalg.cholesky(Mn)
    except np.linalg.LinAlgError:
        raise LumpedError("M_n is not positive definite") from None
    w, V = np.linalg.eigh(Mn)
    Mn_mhalf = (V / np.sqrt(w)) @ V.T
    Tn = Mn_mhalf * np.sqrt(M0)
    n = C.shape[0]
    T = np.eye(n)
    T[k:, k:] = Tn
    Cp = T.T @ C @ T
    Lp = T.T @ qm.M0 @ T
    lam, U = np.linalg.eigh(_sym(Lp[k:, k:]))
    R = np.eye(n)
    R[k:, k:] = U
    Cp = R.T @ Cp @ R
    Lp = R.T @ Lp @ R
    Cinv = np.linalg.inv(Cp)
    u = np.atleast_2d(np.asarray(u_vectors, dtype=float))
    f = (U.T @ (np.sqrt(M0) * Mn_mhalf @ u.T)).T
    freqs = np.sqrt(np.clip(lam, 0, None) / M0)
    return DressedModes(freqs, f, Mn, T @ R, _sym(Cinv), _sym(Lp))


def hamiltonian_hessian(C, M0, G):
    """Hessian of ``(Q - G Phi / 2)^T C^-1 (Q - G Phi / 2) / 2 + Phi^T M0 Phi / 2``.

    Variables are ordered ``(Phi, Q)``.
    """
    Ci = np.linalg.inv(C)
    Ci = _sym(Ci)
    top = M0 + 0.25 * G.T @ Ci @ G
    off = -0.5 * G.T @ Ci
    return np.block([[_sym(top), off], [off.T, Ci]])


def _project(qm, rtol):
    w, V = np.linalg.eigh(qm.C)
    keep = w > rtol * w.max()
    Q = V[:, keep]
    frozen = [V[:, k] for k in np.nonzero(~keep)[0]]
    jun = [Junction(Q.T @ j.vector, j.EJ, j.phi_ext, j.label) for j in qm.junctions]
    return QuadraticModel(_sym(Q.T @ qm.C @ Q), _sym(Q.T @ qm.M0 @ Q), _skew(Q.T @ qm.G @ Q), jun,
                          frozen, None if qm.linear is None else Q.T @ qm.linear, []), frozen


def legendre_transform(qm, project=False, rtol=FROZEN_RTOL):
    """Quantize the harmonic sector and extract junction parameters.

    Junction variables (unit-vector junction fluxes) are split from the
    harmonic sector, which is brought to normal form by
    :func:`symplectic.williamson_diagonalize`. Couplings are read from the
    cross block of the Hessian.

    Raises
    ------
    SingularKineticError
        If ``C`` has frozen directions and ``project`` is false.
    """
    frozen = []
    w = np.linalg.eigvalsh(qm.C)
    if w.max() <= 0:
        raise SingularKineticError("capacitance matrix vanishes")
    if w.min() < rtol * w.max():
        if not project:
            raise SingularKineticError("singular capacitance matrix: frozen variables present (use projection)")
        qm, frozen = _project(qm, rtol)
    n = qm.size
    Hfull = hamiltonian_hessian(qm.C, qm.M0, qm.G)
    Cinv = Hfull[n:, n:]
    jidx = []
    anharm = []
    for j in qm.junctions:
        v = np.asarray(j.vector, dtype=float)
        nz = np.nonzero(np.abs(v) > 1e-12)[0]
        if len(nz) != 1 or abs(abs(v[nz[0]]) - 1) > 1e-12:
            raise LumpedError("junction flux is not a single tree variable")
        jidx.append(int(nz[0]))
        ec = 0.5 * E**2 * float(v @ Cinv @ v)
        anharm.append((ec, j.EJ))
    hidx = [i for i in range(n) if i not in set(jidx)]
    rows = np.array(hidx + [i + n for i in hidx], dtype=int)
    Hh = Hfull[np.ix_(rows, rows)]
    couplings = []
    S = None
    zero = 0
    if len(hidx) == 0:
        freqs = np.zeros(0)
    else:
        ev = np.linalg.eigvalsh(Hh)
        if ev.min() > 1e-12 * ev.max():
            freqs, S = williamson_diagonalize(Hh)
        else:
            om = normal_frequencies(Hh)
            tol = 1e-9 * max(om.max(), 1e-300)
            zero = int(np.sum(om <= tol))
            freqs = om[om > tol]
    if S is not None and jidx:
        m = len(hidx)
        for jn, ji in enumerate(jidx):
            for kind, row, scale in (("charge", ji + n, 2 * E), ("flux", ji, PHI0 / (2 * np.pi))):
                c = Hfull[row, rows] @ S
                amp = np.abs(c[:m] + 1j * c[m:]) * np.sqrt(HBAR / 2) * scale / HBAR
                for k in range(m):
                    if amp[k] > 0:
                        couplings.append({"mode": k, "partner": qm.junctions[jn].label or f"J{jn}",
                                          "g": float(amp[k]), "type": kind})
    return QuantizedHamiltonian(np.asarray(freqs), S, couplings, anharm, qm.G, Cinv, zero, frozen)


def dual_charge_hamiltonian(L, Z_G, E_S=None, E_J=None):
    """Charge-basis Hamiltonian of phase-slip junctions and a Z-circulator.

    ``H = (Phi - Z_G Q / 2)^T L^-1 (Phi - Z_G Q / 2) / 2 - sum E_S cos(pi Q / e)``.
    The harmonic sector uses the quadratic expansion of the phase-slip
    potential; the roles of charge and flux are swapped with respect to
    :func:`legendre_transform`.
    """
    if E_J is not None and np.any(np.asarray(E_J) != 0):
        raise LumpedError("mixed Josephson and phase-slip circuits are not supported")
    L = np.atleast_2d(np.asarray(L, dtype=float))
    Z = np.atleast_2d(np.asarray(Z_G, dtype=float))
    n = L.shape[0]
    ES = np.zeros(n) if E_S is None else np.asarray(E_S, dtype=float)
    K = np.diag(ES * (np.pi / E) ** 2)
    qm = QuadraticModel(_sym(L), K, _skew(Z))
    return legendre_transform(qm)
