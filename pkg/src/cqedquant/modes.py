"""Transmission-line modes with eigenvalue-dependent boundary conditions.

Finite lines carry a lumped coupling at ``x = 0`` described by an electric
length ``alpha`` and a magnetic length ``beta``. Mode functions are
normalized as ``int u^2 dx + alpha u(0)^2 = 1``; physical amplitudes follow
by the factor ``sqrt(N_alpha / c)``.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc
from scipy import integrate, optimize

__all__ = [
    "ModesError",
    "BoundarySpec",
    "ModeBasis",
    "CouplingTable",
    "SumRuleReport",
    "optimal_lengths",
    "solve_secular",
    "coupling_spectrum",
    "coupling_prefactor",
    "sum_rule_check",
    "continuum_amplitude",
    "continuum_modes",
    "spectral_density",
    "endpoint_fluctuations",
    "doubled_space_basis",
    "telegrapher_matrix",
    "circulator_line_hamiltonian",
    "modes_csv",
    "spectral_csv",
    "sum_rule_csv",
]

HBAR = sc.hbar
KB = sc.k
E = sc.e
R_Q = sc.h / (2 * sc.e) ** 2
ROOT_RTOL = 1e-12
TAIL_FACTOR = 100.0


class ModesError(ValueError):
    pass


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary data of a coupled line.

    ``inv_beta`` is ``1/beta``; zero stands for the purely capacitive case.
    ``variant`` is ``"end-point"`` or ``"galvanic"``.
    """

    alpha: float
    inv_beta: float = 0.0
    variant: str = "end-point"
    far_end: str = "short"

    def __post_init__(self):
        if self.alpha < 0:
            raise ModesError("alpha must be nonnegative")
        if self.inv_beta < 0:
            raise ModesError("1/beta must be nonnegative")
        if self.variant not in ("end-point", "galvanic"):
            raise ModesError(f"unknown variant {self.variant!r}")
        if self.far_end not in ("short", "open"):
            raise ModesError(f"unknown far end {self.far_end!r}")
        if self.variant == "galvanic" and self.far_end != "short":
            raise ModesError("the galvanic variant uses shorted ends")

    @property
    def beta(self):
        return math.inf if self.inv_beta == 0 else 1.0 / self.inv_beta


@dataclass(frozen=True)
class ModeBasis:
    """Secular roots and endpoint amplitudes of a finite line.

    ``u0`` holds ``u_n(0)`` (or the jump ``Delta u_n(0)`` for the galvanic
    variant) of unit-normalized mode functions.
    """

    spec: BoundarySpec
    length: float
    k: np.ndarray
    u0: np.ndarray
    velocity: float = 1.0
    c: float = 1.0
    N_alpha: float = 1.0

    @property
    def omega(self):
        return self.k * self.velocity

    @property
    def frequency_hz(self):
        return self.omega / (2 * np.pi)

    @property
    def physical_u0(self):
        return np.sqrt(self.N_alpha / self.c) * self.u0

    def mode_function(self, n, x):
        """Unit-normalized ``u_n(x)`` on the line (``x >= 0``)."""
        k = self.k[n]
        L = self.length
        x = np.asarray(x, dtype=float)
        if self.spec.far_end == "short":
            shape = np.sin(k * (L - x))
            at0 = math.sin(k * L)
        else:
            shape = np.cos(k * (L - x))
            at0 = math.cos(k * L)
        if self.spec.variant == "galvanic":
            at0 = 2 * at0
        return shape * (self.u0[n] / at0)


def optimal_lengths(A, a, C_c, c, l, L_c=None, galvanic=False, C_A=None, L_B=None):
    """Boundary lengths that remove mode-mode couplings.

    Parameters
    ----------
    A : array_like
        Network capacitance matrix (scalar allowed).
    a : array_like
        Port vector of the network.
    C_c, L_c : float
        Coupling capacitance and inductance (``L_c=None`` for no inductor).
    c, l : float
        Line capacitance and inductance per unit length.
    galvanic : bool
        Use the galvanic forms with ``C_A`` and ``L_B``.

    Returns
    -------
    (alpha, inv_beta)
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    nu = float(a @ np.linalg.solve(A, a))
    if galvanic:
        if C_A is None:
            raise ModesError("galvanic lengths need C_A")
        alpha = (C_c + C_A - C_A**2 * nu) / c
        if L_c is None and L_B is None:
            return alpha, 0.0
        inv_lcb = (0.0 if L_c is None else 1.0 / L_c) + (0.0 if L_B is None else 1.0 / L_B)
        return alpha, inv_lcb * l
    alpha = C_c * (1.0 - C_c * nu) / c
    return alpha, (0.0 if L_c is None else l / L_c)


def _secular(spec, L):
    a = spec.alpha
    ib = spec.inv_beta
    if spec.variant == "galvanic":
        a, ib = 2 * a, 2 * ib
    if spec.far_end == "short":
        return lambda k: k * np.cos(k * L) - (a * k * k - ib) * np.sin(k * L)
    return lambda k: k * np.sin(k * L) + (a * k * k - ib) * np.cos(k * L)


def _brackets(spec, L, n_modes):
    h = np.pi / L
    if spec.far_end == "short":
        lo = np.arange(n_modes) * h
        hi = lo + h
        lo = lo.copy()
        lo[0] = 1e-9 * h
        return lo, hi
    if spec.inv_beta > 0:
        lo = (np.arange(n_modes) - 0.5) * h
        # the lowest root sits near sqrt((1/beta) / (L + alpha)) when 1/beta is tiny
        lo[0] = min(1e-9 * h, 0.5 * math.sqrt(spec.inv_beta) / math.sqrt(L + spec.alpha))
        hi = (np.arange(n_modes) + 0.5) * h
    else:
        lo = (np.arange(1, n_modes + 1) - 0.5) * h
        hi = lo + h
    return lo, hi


def solve_secular(spec, L, n_modes, velocity=1.0, c=1.0, N_alpha=1.0):
    """First ``n_modes`` positive roots of the secular equation.

    Short far end: ``k cos(kL) = (alpha k^2 - 1/beta) sin(kL)``, one root in
    each ``(n pi, (n+1) pi) / L``. Open far end:
    ``k sin(kL) = -(alpha k^2 - 1/beta) cos(kL)``. The galvanic variant on
    ``[-L, L]`` doubles both boundary parameters and reports the jump of the
    odd modes.
    """
    if not L > 0 or not np.isfinite(L):
        raise ModesError("line length must be positive and finite")
    if n_modes < 1:
        raise ModesError("n_modes must be at least 1")
    f = _secular(spec, L)
    lo, hi = _brackets(spec, L, n_modes)
    k = np.empty(n_modes)
    tiny = None
    if spec.far_end == "open" and spec.inv_beta > 0 and spec.variant == "end-point":
        # k^2 (L + alpha) = 1/beta up to O((kL)^2), exact in double precision here
        est = math.sqrt(spec.inv_beta) / math.sqrt(L + spec.alpha)
        if est * L < 1e-8:
            tiny = est
    for n in range(n_modes):
        if n == 0 and tiny is not None:
            k[0] = tiny
            continue
        a, b = lo[n], hi[n]
        fa, fb = f(a), f(b)
        if fa == 0:
            k[n] = a
            continue
        if fb == 0:
            k[n] = b
            continue
        if np.sign(fa) == np.sign(fb):
            raise ModesError(f"bracketing failure on [{a!r}, {b!r}]")
        k[n] = optimize.brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    al, ib = spec.alpha, spec.inv_beta
    if spec.variant == "galvanic":
        s = np.sin(k * L)
        norm = 2 * (L / 2 - np.sin(2 * k * L) / (4 * k)) + al * (2 * s) ** 2
        u0 = 2 * s / np.sqrt(norm)
    else:
        s = np.sin(k * L) if spec.far_end == "short" else np.cos(k * L)
        norm = L / 2 + (al / 2 + (math.sqrt(ib) / k) ** 2 / 2) * s * s
        u0 = s / np.sqrt(norm)
    u0 = np.abs(u0)
    return ModeBasis(spec, float(L), k, u0, float(velocity), float(c), float(N_alpha))


def coupling_prefactor(C_c, C_sigma, velocity, Z0):
    """``v (C_c / C_Sigma) sqrt(Z0 / R_Q)``, in m/s."""
    return velocity * (C_c / C_sigma) * math.sqrt(Z0 / R_Q)


@dataclass(frozen=True)
class CouplingTable:
    omega: np.ndarray
    g: np.ndarray
    argmax: int
    k_cutoff: float
    cutoff_index: int

    @property
    def frequency_hz(self):
        return self.omega / (2 * np.pi)

    @property
    def g_hz(self):
        return self.g / (2 * np.pi)


def coupling_spectrum(basis, C_c, C_J, Z0):
    """Charge couplings ``g_n`` (rad/s) of a junction to the line modes.

    ``g_n = v (C_c/C_Sigma) sqrt(Z0/R_Q) sqrt(pi k_n) u_n(0)`` with
    ``C_Sigma = C_c + C_J``. The table also carries the saturation wave
    number ``k_c = sqrt(1 + alpha/L) / alpha``.
    """
    pref = coupling_prefactor(C_c, C_c + C_J, basis.velocity, Z0)
    g = pref * np.sqrt(np.pi * basis.k) * basis.u0
    al = basis.spec.alpha
    if al > 0:
        kc = math.sqrt(1 + al / basis.length) / al
        idx = int(round(kc * basis.length / np.pi))
    else:
        kc, idx = math.inf, -1
    return CouplingTable(basis.omega, g, int(np.argmax(g)), kc, idx)


@dataclass(frozen=True)
class SumRuleReport:
    N: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    divergent: bool
    tail_estimate: np.ndarray

    def halving_ratio(self, i, j):
        return self.r1[i] / self.r1[j]


def sum_rule_check(basis, checkpoints=None):
    """Residuals of the two completeness sums at the endpoint.

    ``r1(N) = 1 - alpha sum u_n(0)^2`` and
    ``r2(N) = 1 - (1/beta) sum u_n(0)^2 / k_n^2``. With ``alpha = 0`` the
    first sum grows without bound and ``divergent`` is set.
    ``tail_estimate`` is the leading-order value ``2 / (pi alpha k_N)`` of
    the missing first-sum weight.
    """
    u2 = basis.u0**2
    cs1 = np.cumsum(u2)
    cs2 = np.cumsum(u2 / basis.k**2)
    if checkpoints is None:
        checkpoints = np.arange(1, len(u2) + 1)
    N = np.asarray(checkpoints, dtype=int)
    al, ib = basis.spec.alpha, basis.spec.inv_beta
    r1 = 1.0 - al * cs1[N - 1]
    r2 = 1.0 - ib * cs2[N - 1]
    divergent = al == 0
    if al > 0:
        tail = 2.0 / (np.pi * al * basis.k[N - 1])
    else:
        tail = np.full(len(N), np.inf)
    return SumRuleReport(N, r1, r2, divergent, np.asarray(tail))


def continuum_amplitude(k, alpha, inv_beta=0.0):
    """``u_k(0)`` of the semi-infinite line, generalized-normalized."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(2 * k * k / (np.pi * (k * k + (alpha * k * k - inv_beta) ** 2)))


@dataclass(frozen=True)
class ContinuumBasis:
    alpha: float
    inv_beta: float
    norm_integral: float
    inverse_k2_integral: float

    def u0(self, k):
        return continuum_amplitude(k, self.alpha, self.inv_beta)


def _u2_integral(alpha, inv_beta, power, K):
    def integrand(k):
        return continuum_amplitude(k, alpha, inv_beta) ** 2 / k**power if power else continuum_amplitude(k, alpha, inv_beta) ** 2

    pts = []
    if alpha > 0 and inv_beta > 0:
        pts = [1.0 / math.sqrt(alpha / inv_beta)]
    val, _ = integrate.quad(integrand, 0.0, K, points=pts or None, limit=500, epsabs=0, epsrel=1e-11)
    return val


def continuum_modes(alpha, inv_beta=0.0, k_max=None):
    """Generalized basis of a semi-infinite line.

    Computes ``int u_k(0)^2 dk`` by adaptive quadrature up to ``K``
    (default ``100/alpha``) plus the analytic tail
    ``(2/pi) [1/(alpha^2 K) - c1/(3 alpha^4 K^3)]`` with
    ``c1 = 1 - 2 alpha/beta``. The exact value is ``1/alpha``. When
    ``1/beta > 0`` the integral of ``u_k(0)^2 / k^2`` (exact value
    ``beta``) is reported as well.
    """
    if alpha <= 0:
        raise ModesError("continuum normalization needs alpha > 0")
    K = TAIL_FACTOR / alpha if k_max is None else float(k_max)
    c1 = 1.0 - 2.0 * alpha * inv_beta
    tail = (2 / np.pi) * (1 / (alpha**2 * K) - c1 / (3 * alpha**4 * K**3))
    norm = _u2_integral(alpha, inv_beta, 0, K) + tail
    if inv_beta > 0:
        inner, _ = integrate.quad(
            lambda k: continuum_amplitude(k, alpha, inv_beta) ** 2 / k**2, 0.0, K,
            points=[math.sqrt(inv_beta / alpha)], limit=500, epsabs=0, epsrel=1e-11)
        inv_k2 = inner + (2 / np.pi) / (3 * alpha**2 * K**3)
    else:
        inv_k2 = math.inf
    return ContinuumBasis(alpha, inv_beta, norm, inv_k2)


def spectral_density(alpha, inv_beta, velocity, kind="charge"):
    """Spectral function sampler ``omega -> J(omega)`` of a semi-infinite line.

    ``J_charge = alpha^2 w^3 / D`` and ``J_flux = w v^2 / D`` with
    ``D = (alpha w^2 - v^2/beta)^2 + w^2 v^2``; ``kind="total"`` returns the
    sum. Overall prefactors are left out.
    """
    v = float(velocity)

    def D(w):
        return (alpha * w * w - v * v * inv_beta) ** 2 + w * w * v * v

    if kind == "charge":
        return lambda w: alpha**2 * np.asarray(w) ** 3 / D(np.asarray(w))
    if kind == "flux":
        return lambda w: np.asarray(w) * v * v / D(np.asarray(w))
    if kind == "total":
        return lambda w: (alpha**2 * np.asarray(w) ** 3 + np.asarray(w) * v * v) / D(np.asarray(w))
    raise ModesError(f"unknown spectral kind {kind!r}")


def _coth_kernel(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(x > 40, 1.0, 1.0 / np.tanh(np.maximum(x, 1e-300)))


def _peak_cuts(center, rel_width):
    """Quadrature breakpoints bracketing a resonance of the given relative width."""
    cuts = [center]
    for f in (1.0, 10.0, 100.0):
        w = f * rel_width
        if w < 0.5:
            cuts += [center * (1 - w), center * (1 + w)]
    return sorted(cuts)


@dataclass(frozen=True)
class Fluctuations:
    flux2: float
    charge2: float
    charge_cutoff: float
    charge_divergent: bool
    flux2_frequency_form: float


def endpoint_fluctuations(C, L, c, l, T=0.0, k_max=None):
    """Thermal endpoint fluctuations of a semi-infinite line ended in C and L.

    Returns ``<Phi(0)^2>`` from the wave-number integral and from the
    frequency form, and the cutoff-dependent ``<Qbar(0)^2>`` with
    ``Qbar = alpha Q(0)``, whose integral diverges logarithmically.
    ``L=None`` stands for no inductor.
    """
    if C == 0 and L is None:
        raise ModesError("flux integral does not converge without C and L")
    alpha = C / c
    ib = 0.0 if L is None else l / L
    v = 1.0 / math.sqrt(l * c)

    def coth(w):
        if T == 0:
            return 1.0
        return float(_coth_kernel(HBAR * w / (2 * KB * T)))

    def flux_integrand(k):
        w = v * k
        return coth(w) * continuum_amplitude(k, alpha, ib) ** 2 / w

    edges = [0.0, np.inf]
    if alpha > 0 and ib > 0:
        k0 = math.sqrt(ib / alpha)
        edges = [0.0] + _peak_cuts(k0, 1.0 / (2 * alpha * k0)) + [np.inf]
    flux2 = HBAR / (2 * c) * sum(
        integrate.quad(flux_integrand, lo, hi, limit=1000, epsabs=0, epsrel=1e-10)[0]
        for lo, hi in zip(edges[:-1], edges[1:]))
    pts = edges[1:-1] or None
    K = TAIL_FACTOR / alpha if (k_max is None and alpha > 0) else (k_max or 1e6 * math.sqrt(ib))

    def charge_integrand(k):
        w = v * k
        return coth(w) * continuum_amplitude(k, alpha, ib) ** 2 * w

    charge2 = alpha**2 * HBAR * c / 2 * integrate.quad(charge_integrand, 0.0, K, points=pts, limit=1000,
                                                       epsabs=0, epsrel=1e-10)[0]
    # frequency form
    flux_w = math.nan
    if L is not None and C > 0:
        zlc = math.sqrt(L / C)
        wlc = 1.0 / math.sqrt(L * C)
        zr = zlc / math.sqrt(l / c)

        def fw(x):
            # dimensionless frequency x = w / w_LC
            return x * zr / (x * x * zr * zr + (x * x - 1) ** 2) * coth(x * wlc)

        cuts = sorted(set([0.0, 0.5, 2.0, 10.0] + _peak_cuts(1.0, zr))) + [np.inf]
        val = sum(integrate.quad(fw, lo, hi, limit=1000, epsabs=1e-14, epsrel=1e-11)[0]
                  for lo, hi in zip(cuts[:-1], cuts[1:]))
        flux_w = HBAR * zlc / np.pi * val
    return Fluctuations(flux2, charge2, K, True, flux_w)


# ---------------------------------------------------------------- doubled space

@dataclass(frozen=True)
class DoubledBasis:
    """Boundary coefficient blocks of the doubled flux-charge basis.

    Columns of ``E`` and ``R`` are the vectors ``e_lam`` and ``r_lam``; the
    ``u`` partner uses ``(e, r)`` and the ``v`` partner ``(-r, e)``.
    """

    m: np.ndarray
    E: np.ndarray
    R: np.ndarray
    Delta: np.ndarray
    Y: np.ndarray
    kernel: np.ndarray | None = None
    t: np.ndarray | None = None


def _diag_pow(d, p):
    return np.diag(np.asarray(d, dtype=float) ** p)


def telegrapher_matrix(Delta, Y, E):
    """Representation of the duality operator on the ideal doubled basis.

    Each basis function is a pair of coefficient vectors multiplying
    ``cos(w x Delta^-1/2)`` and ``sin(w x Delta^-1/2)``; inner products at
    equal frequency reduce to ``(pi/2) [c1^T Sig Delta^1/2 c2 + s1^T Sig Delta^1/2 s2]``
    with ``Sig = diag(1, Delta^-1)``. Returns ``t`` with
    ``<W_eps, T W_eps'> = w t[eps', eps]`` in ``(u_1..u_N, v_1..v_N)`` order.
    """
    d = np.asarray(Delta, dtype=float)
    n = len(d)
    Yt = _diag_pow(d, -0.5) @ Y @ _diag_pow(d, -0.5)
    m = np.array([E[:, j] @ (_diag_pow(d, -0.5) + Yt.T @ _diag_pow(d, 0.5) @ Yt) @ E[:, j] for j in range(n)])
    basis = []
    for j in range(n):
        e = E[:, j]
        nrm = math.sqrt(2 / (np.pi * m[j]))
        cu = np.concatenate([_diag_pow(d, -0.5) @ e, _diag_pow(d, 0.5) @ Yt @ e]) * nrm
        basis.append((cu, np.zeros(2 * n)))
    for j in range(n):
        e = E[:, j]
        nrm = math.sqrt(2 / (np.pi * m[j]))
        sv = np.concatenate([Yt @ e, e]) * nrm
        basis.append((np.zeros(2 * n), sv))
    weight = np.concatenate([d**0.5, d**-0.5])

    def inner(a, b):
        return np.pi / 2 * (np.sum(a[0].conj() * weight * b[0]) + np.sum(a[1].conj() * weight * b[1]))

    def apply_T(w):
        c, s = w
        p, q = c[:n], c[n:]
        r, s2 = s[:n], s[n:]
        cos_part = np.concatenate([d**-0.5 * s2, d**0.5 * r])
        sin_part = np.concatenate([-(d**-0.5) * q, -(d**0.5) * p])
        return (-1j * cos_part, -1j * sin_part)

    gram = np.array([[inner(a, b) for b in basis] for a in basis])
    rep = np.array([[inner(a, apply_T(b)) for b in basis] for a in basis])
    return rep.T, gram


def doubled_space_basis(Delta, Y, omega=None, A=None, Binv=None, omega2=None):
    """Orthonormal doubled-space basis data at the boundary.

    Parameters
    ----------
    Delta : (N,) array_like
        Squared velocities (positive).
    Y : (N, N) array_like
        Skew admittance of the ideal boundary device.
    omega : float, optional
        Frequency for the capacitive-inductive boundary variant.
    A, Binv : (N, N) array_like, optional
        Rescaled boundary capacitance and inverse inductance; when given the
        basis depends on ``omega`` and the projector kernel is returned for
        the frequency pair ``(omega, omega2)``.
    """
    d = np.asarray(Delta, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if np.any(d <= 0):
        raise ModesError("Delta must be positive")
    if np.abs(Y + Y.T).max() > 1e-12 * max(1.0, np.abs(Y).max()):
        raise ModesError("Y must be skew-symmetric")
    n = len(d)
    Dm = _diag_pow(d, -0.5)
    Dp = _diag_pow(d, 0.5)
    Yt = Dm @ Y @ Dm
    if A is None and Binv is None:
        M = Dm + Yt.T @ Dp @ Yt
        M = 0.5 * (M + M.T)
        m, E = np.linalg.eigh(M)
        if m.min() <= 0:
            raise ModesError("non-positive orthonormalization matrix")
        t, _ = telegrapher_matrix(d, Y, E)
        return DoubledBasis(m, E, np.zeros_like(E), d, Y, None, t)
    if omega is None or omega <= 0:
        raise ModesError("the boundary-capacitance variant needs omega > 0")
    A = np.zeros((n, n)) if A is None else np.asarray(A, dtype=float)
    Binv = np.zeros((n, n)) if Binv is None else np.asarray(Binv, dtype=float)

    def block(w):
        Cinv = Binv - w * w * A
        Cw = Cinv / w
        M = Dm + Cw @ Dp @ Cw + Yt.T @ Dp @ Yt
        N = Cw @ Dp @ Yt - Yt.T @ Dp @ Cw
        H = M - 1j * N
        H = 0.5 * (H + H.conj().T)
        m, Z = np.linalg.eigh(H)
        if m.min() <= 0:
            raise ModesError("non-positive orthonormalization matrix")
        from .symplectic import fix_phase

        Z = np.column_stack([fix_phase(Z[:, j]) for j in range(n)])
        return m, Z.real, Z.imag

    m, E, R = block(omega)
    kernel = None
    if omega2 is not None:
        m2, E2, R2 = block(omega2)
        left = np.vstack([R.T, E.T]) / np.sqrt(np.concatenate([m, m]))[:, None]
        right = np.hstack([R2, E2]) / np.sqrt(np.concatenate([m2, m2]))[None, :]
        kernel = 2 / (np.pi * omega * omega2) * left @ Binv @ right
    return DoubledBasis(m, E, R, d, Y, kernel, None)


# ---------------------------------------------------------- circulator example

@dataclass(frozen=True)
class CirculatorLineModes:
    """Modes of identical open lines joined by a circulator, one junction-coupled.

    ``U_end`` is the complex endpoint amplitude ``U_{+,1}(d)`` of each unit
    normalized complex mode; ``r`` the couplings ``sqrt(hbar w/2)(u_u + i u_v)``.
    """

    omega: np.ndarray
    k: np.ndarray
    U_end: np.ndarray
    r: np.ndarray
    alpha: float
    length: float

    @property
    def u_u(self):
        return np.sqrt(2) * self.U_end.real

    @property
    def u_v(self):
        return np.sqrt(2) * self.U_end.imag

    def chi_trace(self):
        """``2 alpha sum_n |U_{+,1}(d)|^2``, i.e. chi(N) over hbar/(2 alpha)."""
        return 2 * self.alpha * np.cumsum(np.abs(self.U_end) ** 2)


def _neg_count(H):
    return int(np.sum(np.linalg.eigvalsh(H) < 0))


def circulator_line_hamiltonian(Y_phys, c, l, d, alpha, n_modes, n_lines=None):
    """Couplings of a junction at the end of line 1 of a circulator network.

    Identical lines of length ``d`` meet a nonreciprocal device with
    admittance ``Y_phys`` (siemens) at ``x = 0``; lines 2.. are open at
    ``x = d`` and line 1 ends in the junction coupling of electric length
    ``alpha``. Complex modes solve ``U'' = -k^2 U`` with
    ``U_i = A_i cos(k (d - x) + theta_i)``, ``tan theta_1 = alpha k``,
    ``theta_i = 0`` otherwise, and the boundary relation
    ``sin(phi) A = i y cos(phi) A`` with ``phi_i = k d + theta_i`` and
    ``y = -Z0 Y_phys``.

    Roots are located with the counting function of the Hermitian matrix
    ``diag(tan phi) - i y`` and refined by bisection.
    """
    Y_phys = np.asarray(Y_phys, dtype=float)
    N = Y_phys.shape[0] if n_lines is None else n_lines
    Z0 = math.sqrt(l / c)
    v = 1.0 / math.sqrt(l * c)
    y = -Z0 * Y_phys
    iy = 1j * y

    def phis(k):
        th = np.zeros(N)
        th[0] = math.atan(alpha * k)
        return k * d + th, th

    def count(k):
        ph, _ = phis(k)
        base = int(np.sum(np.floor(ph / np.pi + 0.5)))
        return base - _neg_count(np.diag(np.tan(ph)) - iy)

    k_small = 1e-9 / d
    offset = count(k_small)
    total = n_modes
    # upper bound: each line contributes one root per pi/d
    ks = []
    h = np.pi / d
    k_hi = h
    while count(k_hi) - offset < total:
        k_hi += h * N
    grid_lo = k_small
    roots = []
    target = 1
    lo = grid_lo
    while target <= total:
        a, b = lo, k_hi
        if count(b) - offset < target:
            raise ModesError("root counting failed")
        for _ in range(200):
            mid = 0.5 * (a + b)
            if count(mid) - offset >= target:
                b = mid
            else:
                a = mid
            if b - a <= ROOT_RTOL * b:
                break
        jump = count(b) - offset - (target - 1)
        roots.append((0.5 * (a + b), max(jump, 1)))
        target += max(jump, 1)
        lo = b
    ks, Us = [], []
    for k, mult in roots:
        ph, th = phis(k)
        Msys = np.diag(np.sin(ph)) - iy @ np.diag(np.cos(ph))
        _, sv, vh = np.linalg.svd(Msys)
        for j in range(mult):
            A = vh[-1 - j].conj()
            norm2 = d * np.sum(np.abs(A) ** 2) + alpha * abs(A[0]) ** 2 * math.cos(th[0]) ** 2
            A = A / math.sqrt(norm2)
            ks.append(k)
            Us.append(A[0] * math.cos(th[0]))
    ks = np.array(ks[:total])
    Us = np.array(Us[:total])
    omega = v * ks
    r = np.sqrt(HBAR * omega / 2) * np.sqrt(2) * (Us.real + 1j * Us.imag)
    return CirculatorLineModes(omega, ks, Us, r, float(alpha), float(d))


# --------------------------------------------------------------------- CSV out

def _fmt(x):
    return format(float(x), ".15g")


def modes_csv(basis, table=None):
    """Rows ``n, k_n, f_n, u_n(0), g_n/2pi``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k_per_m", "f_hz", "u0", "g_hz"])
    g = table.g_hz if table is not None else np.full(len(basis.k), np.nan)
    for n in range(len(basis.k)):
        w.writerow([n, _fmt(basis.k[n]), _fmt(basis.frequency_hz[n]), _fmt(basis.u0[n]), _fmt(g[n])])
    return buf.getvalue()


def spectral_csv(omega, J):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_hz", "J"])
    for a, b in zip(np.asarray(omega) / (2 * np.pi), J):
        w.writerow([_fmt(a), _fmt(b)])
    return buf.getvalue()


def sum_rule_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "r1", "r2"])
    for n, a, b in zip(report.N, report.r1, report.r2):
        w.writerow([int(n), _fmt(a), _fmt(b)])
    return buf.getvalue()
