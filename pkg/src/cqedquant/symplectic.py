"""Symplectic and Bogoliubov diagonalization of quadratic Hamiltonians.

Two independent routes are provided:

* :func:`williamson_diagonalize` brings a positive definite Hessian ``H``
  in position-momentum form to ``diag(lam, lam)`` by a real symplectic
  congruence.
* :func:`bogoliubov_modes` diagonalizes a bosonic quadratic form written
  with creation and annihilation operators.
"""

import numpy as np

__all__ = [
    "symplectic_form",
    "williamson_diagonalize",
    "normal_frequencies",
    "bogoliubov_modes",
    "map_couplings",
    "bosonic_to_quadrature",
    "fix_phase",
    "DEGENERACY_RTOL",
]

DEGENERACY_RTOL = 1e-8


def symplectic_form(n):
    """Return the ``2n x 2n`` matrix ``J = [[0, 1], [-1, 0]]``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def fix_phase(v, tie="first", tol=1e-9):
    """Rotate ``v`` so that its largest component is real and positive.

    ``tie`` selects the first or the last index among components of equal
    magnitude.
    """
    mag = np.abs(v)
    top = mag.max()
    if top == 0:
        return v
    hits = np.nonzero(mag >= top * (1 - tol))[0]
    idx = hits[0] if tie == "first" else hits[-1]
    return v * (np.conj(v[idx]) / mag[idx])


def _clusters(values, rtol):
    """Group sorted values into runs whose relative gap is below ``rtol``."""
    groups = [[0]]
    for i in range(1, len(values)):
        scale = max(abs(values[i]), abs(values[i - 1]), 1e-300)
        if abs(values[i] - values[i - 1]) <= rtol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _canonical_cluster_basis(Z):
    """Deterministic orthonormal basis of the column span of ``Z``.

    The projector onto the span is applied to the standard basis vectors in
    index order and the images are orthonormalized by modified Gram-Schmidt.
    """
    m = Z.shape[1]
    if m == 1:
        return Z
    P = Z @ Z.conj().T
    out = []
    for k in range(Z.shape[0]):
        w = P[:, k].copy()
        for q in out:
            w = w - q * (q.conj() @ w)
        for q in out:
            w = w - q * (q.conj() @ w)
        nrm = np.linalg.norm(w)
        if nrm > 1e-6:
            out.append(w / nrm)
        if len(out) == m:
            break
    return np.column_stack(out)


def williamson_diagonalize(H, degeneracy_rtol=DEGENERACY_RTOL):
    """Williamson normal form of a positive definite quadratic Hamiltonian.

    Parameters
    ----------
    H : (2n, 2n) array_like
        Real symmetric positive definite Hessian in ``(q, p)`` ordering, so
        that the Hamiltonian reads ``x^T H x / 2``.
    degeneracy_rtol : float
        Relative gap below which symplectic eigenvalues are treated as one
        degenerate cluster.

    Returns
    -------
    lam : (n,) ndarray
        Symplectic eigenvalues in ascending order.
    S : (2n, 2n) ndarray
        Real symplectic matrix with ``S.T @ H @ S = diag(lam, lam)`` and
        ``S.T @ J @ S = J``.

    Notes
    -----
    The eigenvectors ``f`` of ``H J`` with eigenvalues ``-i lam`` are taken
    from the Hermitian matrix ``i H^{1/2} J H^{1/2}``, which is similar to
    ``H J``. They are normalized so that ``F F^dagger = H`` with
    ``F = [f, conj(f)]`` and the canonical transform follows from
    ``S = (F^dagger)^{-1} V D^{1/2}`` with ``V = [[1, i], [1, -i]] / sqrt(2)``.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] % 2:
        raise ValueError("H must be a square matrix of even dimension")
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("H must be symmetric")
    H = 0.5 * (H + H.T)
    n = H.shape[0] // 2
    ev, Q = np.linalg.eigh(H)
    if ev[0] <= 0:
        raise ValueError("H must be positive definite (min eigenvalue %.3e)" % ev[0])
    root = (Q * np.sqrt(ev)) @ Q.T
    J = symplectic_form(n)
    K = root @ J @ root
    mu, Z = np.linalg.eigh(1j * K)
    # positive mu pairs with eigenvalue -i mu of H J
    pos = mu[n:]
    Zp = Z[:, n:]
    cols = []
    for group in _clusters(pos, degeneracy_rtol):
        block = _canonical_cluster_basis(Zp[:, group])
        for j in range(block.shape[1]):
            cols.append(block[:, j])
    f = root @ np.column_stack(cols)
    f = np.column_stack([fix_phase(f[:, j]) for j in range(n)])
    lam = pos.copy()
    F = np.hstack([f, f.conj()])
    eye = np.eye(n)
    V = np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2)
    Dh = np.sqrt(np.concatenate([lam, lam]))
    S = np.linalg.solve(F.conj().T, V * Dh[None, :])
    if np.abs(S.imag).max() > 1e-8 * max(1.0, np.abs(S.real).max()):
        raise ArithmeticError("symplectic transform is not real")
    return lam, S.real


def normal_frequencies(H):
    """Positive imaginary parts of the eigenvalues of ``H J``, sorted."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0] // 2
    w = np.linalg.eigvals(H @ symplectic_form(n))
    im = np.sort(w.imag)
    return im[n:]


def _indefinite_gram_schmidt(vecs, metric):
    """Orthonormalize columns of ``vecs`` in an indefinite metric."""
    out = []
    for j in range(vecs.shape[1]):
        w = vecs[:, j].copy()
        for q in out:
            w = w - q * (q @ metric @ w)
        nrm = w @ metric @ w
        if nrm <= 0:
            raise ArithmeticError("eigenvector outside the physical sector")
        out.append(w / np.sqrt(nrm))
    return np.column_stack(out)


def bogoliubov_modes(theta, xi, degeneracy_rtol=DEGENERACY_RTOL):
    """Bogoliubov transformation of a bosonic quadratic form.

    The Hamiltonian is ``a_hat^T h a_hat`` with ``a_hat = (a, a^dagger)`` and
    ``h = [[theta, xi], [xi, theta]]``. Eigenvalues of ``h J`` come in
    pairs ``(-mu, +mu)``; the negative ones are listed first in order of
    increasing magnitude and give the mode energies ``2 mu``.

    Parameters
    ----------
    theta, xi : (n, n) array_like
        Real symmetric blocks.

    Returns
    -------
    mu : (n,) ndarray
        Half mode energies, ascending.
    A, B : (n, n) ndarray
        Blocks of ``F = [[A, B], [B, A]]`` whose columns are the eigenvectors
        of ``h J``. They satisfy ``A A^T - B B^T = 1`` and the original
        operators follow from ``a = A b - B b^dagger``.
    """
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = theta.shape[0]
    h = np.block([[theta, xi], [xi, theta]])
    J = symplectic_form(n)
    w, vr = np.linalg.eig(h @ J)
    if np.abs(w.imag).max() > 1e-9 * max(1.0, np.abs(w).max()):
        raise ArithmeticError("non-pairable spectrum: complex eigenvalues")
    w = w.real
    vr = vr.real
    order = np.argsort(w)
    w, vr = w[order], vr[:, order]
    neg, pos = w[:n], w[n:]
    if neg.max() >= 0 or not np.allclose(-neg[::-1], pos, rtol=1e-8, atol=1e-12 * np.abs(w).max()):
        raise ArithmeticError("non-pairable spectrum")
    # negative eigenvalues by increasing magnitude
    neg_idx = np.arange(n)[::-1]
    pos_idx = n + np.arange(n)
    mu = -neg[::-1]
    V = vr[:, neg_idx]
    W = vr[:, pos_idx]
    swap = np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    # sign rule: the first coefficient of v_m and the n-th coefficient of
    # its partner v_{m+n} carry the same sign
    for m in range(n):
        V[:, m] /= np.linalg.norm(V[:, m])
        W[:, m] /= np.linalg.norm(W[:, m])
        ref = V[0, m] * W[n, m]
        if abs(V[0, m]) < 1e-12 or abs(W[n, m]) < 1e-12:
            ref = (swap @ V[:, m]) @ W[:, m]
        if ref < 0:
            W[:, m] = -W[:, m]
    metric = J @ swap
    Vn = np.empty_like(V)
    for group in _clusters(mu, degeneracy_rtol):
        Vn[:, group] = _indefinite_gram_schmidt(V[:, group], metric)
        if len(group) == 1:
            m = group[0]
            partner = swap @ Vn[:, m]
            if abs(abs(partner @ W[:, m]) - np.linalg.norm(partner)) > 1e-6 * np.linalg.norm(partner):
                raise ArithmeticError("eigenvector pairing failed")
    # symmetric clean-up of the O(eps/gap) leakage between close clusters
    gram = Vn.T @ metric @ Vn
    gram = 0.5 * (gram + gram.T)
    if np.abs(gram - np.eye(n)).max() > 1e-14:
        gw, gv = np.linalg.eigh(gram)
        if gw.min() <= 0:
            raise ArithmeticError("indefinite mode metric")
        Vn = Vn @ (gv / np.sqrt(gw)) @ gv.T
    for m in range(n):
        col = Vn[:n, m]
        if col[np.argmax(np.abs(col))] < 0:
            Vn[:, m] = -Vn[:, m]
    A = Vn[:n, :]
    B = Vn[n:, :]
    return mu, A, B


def map_couplings(g, A, B):
    """Couplings to the Bogoliubov modes, ``g' = g (A - B)``."""
    return np.asarray(g) @ (A - B)


def bosonic_to_quadrature(theta, xi):
    """Hessian in ``(x, p)`` form equivalent to ``a_hat^T h a_hat``.

    Uses ``a = (x + i p) / sqrt(2)``; the returned matrix ``Hxp`` gives the
    Hamiltonian ``(x, p)^T Hxp (x, p) / 2`` up to a constant.
    """
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = theta.shape[0]
    h = np.block([[theta, xi], [xi, theta]])
    eye = np.eye(n)
    U = np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2)
    return 2.0 * (U.T @ h @ U).real
