"""Ideal nonreciprocal devices described by a real orthogonal S matrix."""

from dataclasses import dataclass

import numpy as np

from .symplectic import fix_phase

__all__ = [
    "NonreciprocalError",
    "ScatteringDevice",
    "Classification",
    "FrozenReduction",
    "circulator_smatrix",
    "gyrator_smatrix",
    "classify",
    "cayley_admittance",
    "cayley_impedance",
    "reduce_frozen",
]

EIG_TOL = 1e-9


class NonreciprocalError(ValueError):
    pass


@dataclass(frozen=True)
class ScatteringDevice:
    S: np.ndarray
    R: float

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise NonreciprocalError("S must be square")
        if not self.R > 0:
            raise NonreciprocalError("nonpositive parameter: R")
        if np.abs(S.T @ S - np.eye(S.shape[0])).max() > 1e-12:
            raise NonreciprocalError("S is not orthogonal")
        object.__setattr__(self, "S", S)

    @property
    def ports(self):
        return self.S.shape[0]


@dataclass(frozen=True)
class Classification:
    has_Y: bool
    has_Z: bool
    eigenvalues: np.ndarray
    plus_one: int
    minus_one: int


@dataclass(frozen=True)
class FrozenReduction:
    """Result of eliminating the frozen flux combination of a device.

    ``M = [v_minus, w_1, ...]`` is orthogonal and the fluxes are written as
    ``Phi = M (alpha, f)``. The reduced equations of motion read
    ``C_Q f'' = G_Q f' - grad U_alpha(f)``.
    """

    C_Q: np.ndarray
    G_Q: np.ndarray
    M: np.ndarray
    v_minus: np.ndarray
    alpha: float = 0.0

    @property
    def projector(self):
        return np.outer(self.v_minus, self.v_minus)

    def lagrangian_gyration(self):
        """Skew matrix for a Lagrangian term ``f'^T G f / 2``."""
        return -self.G_Q

    def fluxes(self, f):
        """Full port fluxes for reduced coordinates ``f``."""
        return self.M @ np.concatenate([[self.alpha], np.asarray(f, dtype=float)])

    def remap_potential(self, U):
        """Reduced potential ``f -> U(M (alpha, f))``."""
        return lambda f: U(self.fluxes(f))


def circulator_smatrix(n):
    """Ideal ``n``-port circulator, ``(-1)^n`` times the cyclic shift."""
    if n < 2:
        raise NonreciprocalError("circulator needs at least two ports")
    P = np.roll(np.eye(n), 1, axis=0)
    return float((-1) ** n) * P


def gyrator_smatrix():
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def _device(dev_or_S, R=1.0):
    if isinstance(dev_or_S, ScatteringDevice):
        return dev_or_S
    return ScatteringDevice(np.asarray(dev_or_S, dtype=float), R)


def classify(dev):
    """Existence of admittance and impedance descriptions."""
    dev = _device(dev)
    w = np.linalg.eigvals(dev.S)
    plus = int(np.sum(np.abs(w - 1) < EIG_TOL))
    minus = int(np.sum(np.abs(w + 1) < EIG_TOL))
    order = np.lexsort((w.imag, w.real))
    return Classification(has_Y=minus == 0, has_Z=plus == 0, eigenvalues=w[order], plus_one=plus, minus_one=minus)


def cayley_admittance(dev):
    """``Y = R^-1 (1 + S)^-1 (1 - S)``."""
    dev = _device(dev)
    if classify(dev).minus_one:
        raise NonreciprocalError("-1 eigenvalue: no Y")
    eye = np.eye(dev.ports)
    Y = np.linalg.solve(eye + dev.S, eye - dev.S) / dev.R
    return 0.5 * (Y - Y.T)


def cayley_impedance(dev):
    """``Z = R (1 - S)^-1 (1 + S)``."""
    dev = _device(dev)
    if classify(dev).plus_one:
        raise NonreciprocalError("+1 eigenvalue: no Z")
    eye = np.eye(dev.ports)
    Z = dev.R * np.linalg.solve(eye - dev.S, eye + dev.S)
    return 0.5 * (Z - Z.T)


def _w_basis(S):
    """Real orthonormal basis of the complement of the -1 eigenspace.

    Conjugate eigenvector pairs contribute their normalized real and
    imaginary parts; vectors are ordered by ascending eigenvalue phase.
    """
    w, V = np.linalg.eig(S)
    phase = np.angle(w)
    cols = []
    keys = []
    for j in range(len(w)):
        th = phase[j]
        if abs(abs(th) - np.pi) < EIG_TOL:
            continue
        if th < -EIG_TOL:
            continue
        v = fix_phase(V[:, j], tie="last")
        if abs(th) < EIG_TOL:
            cols.append(v.real / np.linalg.norm(v.real))
            keys.append(0.0)
        else:
            cols.append(v.real / np.linalg.norm(v.real))
            cols.append(v.imag / np.linalg.norm(v.imag))
            keys.extend([th, th + 1e-12])
    order = np.argsort(keys, kind="stable")
    B = np.column_stack([cols[i] for i in order])
    # orthonormalize within repeated eigenvalues
    Q, Rr = np.linalg.qr(B)
    Q = Q * np.sign(np.diag(Rr))[None, :]
    return Q


def reduce_frozen(dev, capacitances, alpha=0.0):
    """Remove the frozen flux combination of a device with a -1 eigenvalue.

    Parameters
    ----------
    dev : ScatteringDevice
    capacitances : sequence of float
        Shunt capacitance at each port.
    alpha : float
        Constant value of the frozen flux combination.

    Returns
    -------
    FrozenReduction
    """
    dev = _device(dev)
    S = dev.S
    n = dev.ports
    cls = classify(dev)
    if cls.minus_one != 1:
        raise NonreciprocalError("-1 eigenvalue multiplicity %d, expected 1" % cls.minus_one)
    _, sv, vt = np.linalg.svd(S + np.eye(n))
    v = vt[-1]
    if np.abs(np.imag(v)).max() != 0:
        raise NonreciprocalError("-1 eigenvector is not real")
    v = fix_phase(v.astype(complex), tie="last").real
    W = _w_basis(S)
    W = W - np.outer(v, v @ W)
    M = np.column_stack([v, W])
    Cmat = np.diag(np.asarray(capacitances, dtype=float))
    if Cmat.shape[0] != n:
        raise NonreciprocalError("need one capacitance per port")
    C_Q = W.T @ Cmat @ W
    Sw = W.T @ S @ W
    eye = np.eye(n - 1)
    Yw = np.linalg.solve(eye + Sw, eye - Sw) / dev.R
    G_Q = -0.5 * (Yw - Yw.T)
    return FrozenReduction(C_Q=0.5 * (C_Q + C_Q.T), G_Q=G_Q, M=M, v_minus=v, alpha=float(alpha))
