"""Command-line front end: ``cqedquant <command> ...``.

Exit codes: 0 success, 1 failed self-check, 2 input or parse error,
3 circuit errors (singular kinetic matrix, no spanning tree),
4 mode-solver and device errors, 5 Rabi-model errors.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import lumped, modes, netlist, nonreciprocal, rabi, symplectic

CONVENTION = "f=omega/2pi"


class CLIError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _round(x):
    """Round floats to 15 significant digits so output is byte-stable."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(format(x, ".15g"))
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, np.generic):
        return _round(x.item())
    return x


def _dump_json(obj):
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _threads():
    try:
        return max(1, int(os.environ.get("CQED_THREADS", "1")))
    except ValueError:
        return 1


def _load(path):
    try:
        return netlist.load_netlist(path)
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}", 2) from None
    except netlist.NetlistError as exc:
        raise CLIError(f"parse error: {exc}", 2) from None


# ------------------------------------------------------------ line circuits

def _line_problem(net):
    """Recognize a junction coupled through a capacitor to one line end.

    Returns ``(segment, C_c, C_J, far_end)``. The other line end must be
    terminated by ``"short"`` or ``"open"``.
    """
    if len(net.tl_segments) != 1:
        raise CLIError("line commands need exactly one transmission line", 2)
    seg = net.tl_segments[0]
    if seg.semi_infinite:
        raise CLIError("line commands need a finite line", 2)
    ends = [seg.left, seg.right]
    terms = [e for e in ends if e in netlist.TERMINATIONS]
    nodes = [e for e in ends if e not in netlist.TERMINATIONS]
    if len(terms) != 1 or len(nodes) != 1:
        raise CLIError("line must have one node end and one short/open end", 2)
    x = nodes[0]
    g = net.ground
    doc = net.document["branches"]
    couple = [b for b in net.branches if b.kind == "C" and x in (b.start, b.end) and g not in (b.start, b.end)]
    if len(couple) != 1:
        raise CLIError("expected one coupling capacitor at the line end", 2)
    cb = couple[0]
    j = cb.end if cb.start == x else cb.start
    cj = 0.0
    for b in net.branches:
        if {b.start, b.end} == {j, g}:
            if b.kind == "C":
                cj += b.value
            elif b.kind == "JJ":
                cj += doc[b.source]["params"].get("CJ", 0.0)
    if cj <= 0:
        raise CLIError("junction node needs a capacitance to ground", 2)
    return seg, cb.value, cj, terms[0]


def _line_basis(net, n_modes):
    seg, Cc, CJ, far = _line_problem(net)
    alpha, inv_beta = modes.optimal_lengths(Cc + CJ, 1.0, Cc, seg.c, seg.l)
    spec = modes.BoundarySpec(alpha, inv_beta, far_end=far)
    basis = modes.solve_secular(spec, seg.length, n_modes, velocity=seg.velocity, c=seg.c)
    table = modes.coupling_spectrum(basis, Cc, CJ, seg.impedance)
    return basis, table


# ----------------------------------------------------------------- commands

def cmd_quantize(args):
    net = _load(args.netlist)
    if net.tl_segments:
        basis, table = _line_basis(net, args.modes)
        if args.format == "csv":
            return modes.modes_csv(basis, table)
        return _dump_json({
            "convention": CONVENTION,
            "frequencies_hz": table.frequency_hz.tolist(),
            "couplings": [{"mode": n, "g_hz": float(g)} for n, g in enumerate(table.g_hz)],
            "max_coupling_mode": table.argmax,
            "cutoff_mode_estimate": table.cutoff_index,
            "alpha_m": basis.spec.alpha,
        })
    try:
        qm = lumped.quadratic_model(net)
        for line in lumped.check_invertibility(qm, rtol=args.tol).lines():
            print(line, file=sys.stderr)
        ham = lumped.legendre_transform(qm, project=args.project, rtol=args.tol)
    except netlist.NoTreeError as exc:
        raise CLIError(str(exc), 3) from None
    except lumped.LumpedError as exc:
        raise CLIError(str(exc), 3) from None
    for v in ham.frozen:
        print("projected frozen direction: " + np.array2string(np.asarray(v), precision=6), file=sys.stderr)
    data = ham.to_json()
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "f_hz"])
        for i, f in enumerate(data["frequencies_hz"]):
            w.writerow([i, format(f, ".15g")])
        return buf.getvalue()
    return _dump_json(data)


def cmd_modes(args):
    net = _load(args.netlist)
    basis, table = _line_basis(net, args.n)
    if args.format == "json":
        return _dump_json({
            "convention": CONVENTION,
            "k_per_m": basis.k.tolist(),
            "frequencies_hz": basis.frequency_hz.tolist(),
            "u0": basis.u0.tolist(),
            "g_hz": table.g_hz.tolist(),
        })
    return modes.modes_csv(basis, table)


def cmd_spectrum(args):
    net = _load(args.netlist)
    seg, Cc, CJ, _ = _line_problem(net)
    alpha, inv_beta = modes.optimal_lengths(Cc + CJ, 1.0, Cc, seg.c, seg.l)
    J = modes.spectral_density(alpha, inv_beta, seg.velocity, args.kind)
    f_max = args.fmax if args.fmax else 10 * seg.velocity / (2 * np.pi * alpha)
    f = np.linspace(f_max / args.points, f_max, args.points)
    w = 2 * np.pi * f
    vals = J(w)
    if args.format == "json":
        return _dump_json({"convention": CONVENTION, "kind": args.kind, "f_hz": f.tolist(), "J": np.asarray(vals).tolist()})
    return modes.spectral_csv(w, vals)


def _parse_range(text):
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise CLIError(f"bad mode range {text!r}", 2) from None
    if not vals or min(vals) < 1:
        raise CLIError(f"bad mode range {text!r}", 2)
    return vals


def _rabi_point(job):
    cfg, renorm = job
    return rabi.build_and_diagonalize(cfg, renorm).omega_a


def cmd_rabi_converge(args):
    Ms = _parse_range(args.M)
    try:
        base = rabi.RabiConfig(omega0=2 * np.pi * args.f0, Z0=args.Z0, C_c=args.Cc, C_J=args.Cj,
                               E_J=rabi.H_PLANCK * args.EJ, n_atom=args.n_atom, N_max=args.N_max)
        jobs = [(rabi.RabiConfig(**{**base.__dict__, "M": M}), not args.no_renorm) for M in Ms]
        workers = min(_threads(), len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                omegas = list(ex.map(_rabi_point, jobs))
        else:
            omegas = [_rabi_point(j) for j in jobs]
    except rabi.RabiError as exc:
        raise CLIError(str(exc), 5) from None
    f = [w / (2 * np.pi) for w in omegas]
    if args.format == "json":
        return _dump_json({"convention": CONVENTION, "renormalized": not args.no_renorm,
                           "M": Ms, "f_hz": f})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["M", "f_hz"])
    for M, x in zip(Ms, f):
        w.writerow([M, format(x, ".15g")])
    return buf.getvalue()


# ------------------------------------------------------------- self check

def _check_lc():
    net = netlist.parse_netlist({
        "nodes": ["g", "a"], "ground": "g",
        "branches": [{"kind": "C", "from": "a", "to": "g", "params": {"C": 1e-12}},
                     {"kind": "L", "from": "a", "to": "g", "params": {"L": 1e-9}}]})
    f = lumped.legendre_transform(lumped.quadratic_model(net)).frequencies[0] / (2 * np.pi)
    return abs(f * 2 * np.pi * math.sqrt(1e-21) - 1) < 1e-12


def _check_symplectic():
    rng = np.random.default_rng(7)
    for n in (1, 3, 6):
        X = rng.normal(size=(2 * n, 2 * n))
        H = X @ X.T + 2 * n * np.eye(2 * n)
        lam, S = symplectic.williamson_diagonalize(H)
        J = symplectic.symplectic_form(n)
        if np.linalg.norm(S.T @ J @ S - J) > 1e-10:
            return False
        D = S.T @ H @ S
        if np.linalg.norm(D - np.diag(np.diag(D))) > 1e-10 * np.linalg.norm(H):
            return False
    return True


def _check_inverse():
    rng = np.random.default_rng(11)
    A = np.diag(rng.uniform(1, 2, 3))
    a = rng.normal(size=(2, 3)) * 0.3
    Cn = rng.uniform(1, 2, 40)
    u = rng.normal(size=(2, 40)) * 0.1
    inv = lumped.multiport_inverse(A, a, Cn, u)
    C = np.zeros((43, 43))
    C[:3, :3] = A
    C[3:, 3:] = np.diag(Cn) + u.T @ u
    C[:3, 3:] = -a.T @ u
    C[3:, :3] = C[:3, 3:].T
    ref = np.linalg.inv(C)
    return np.linalg.norm(inv.dense() - ref) < 1e-10 * np.linalg.norm(ref)


def _check_gyrator():
    C1, C2, L = 1e-12, 2e-12, 3e-9
    R = math.sqrt(L / C2)
    net = netlist.parse_netlist({
        "nodes": ["g", "a", "b"], "ground": "g",
        "branches": [{"kind": "C", "from": "a", "to": "g", "params": {"C": C1}},
                     {"kind": "C", "from": "b", "to": "g", "params": {"C": C2}}],
        "couplers": [{"kind": "gyrator", "R": R, "ports": [["a", "g"], ["b", "g"]]}]})
    ham = lumped.legendre_transform(lumped.quadratic_model(net))
    w = ham.frequencies[0]
    return abs(w * math.sqrt(L * C1) - 1) < 1e-12


def _check_circulator():
    dev = nonreciprocal.ScatteringDevice(nonreciprocal.circulator_smatrix(4), 50.0)
    red = nonreciprocal.reduce_frozen(dev, [1.0, 1.0, 1.0, 1.0])
    return np.allclose(red.C_Q, np.eye(3), atol=1e-12)


def _check_device_a():
    Cc, CJ, c, l, L = 40.3e-15, 5.13e-15, 249e-12, 623e-9, 4.7e-3
    alpha, _ = modes.optimal_lengths(Cc + CJ, 1.0, Cc, c, l)
    basis = modes.solve_secular(modes.BoundarySpec(alpha), L, 300, velocity=1 / math.sqrt(l * c), c=c)
    tab = modes.coupling_spectrum(basis, Cc, CJ, math.sqrt(l / c))
    return abs(tab.argmax - 81) <= 1 and abs(tab.frequency_hz[tab.argmax] / 702.5e9 - 1) < 0.02


def _check_telegrapher():
    db = modes.doubled_space_basis(np.array([1.0, 2.0]), np.array([[0.0, 0.7], [-0.7, 0.0]]))
    n = db.t.shape[0] // 2
    ref = np.block([[np.zeros((n, n)), 1j * np.eye(n)], [-1j * np.eye(n), np.zeros((n, n))]])
    return np.allclose(db.t, ref, atol=1e-10)


def _check_rabi():
    cfg = rabi.RabiConfig(C_J=5e-15, M=40)
    a = rabi.dressed_modes(cfg, "bogoliubov")
    b = rabi.dressed_modes(cfg, "quadrature")
    return np.allclose(a.omega, b.omega, rtol=1e-10) and abs(rabi.cutoff_mode(cfg) - 35) <= 1


SELFCHECKS = [
    ("lc-frequency", _check_lc),
    ("williamson", _check_symplectic),
    ("multiport-inverse", _check_inverse),
    ("gyrator-lc", _check_gyrator),
    ("circulator-reduction", _check_circulator),
    ("line-cutoff", _check_device_a),
    ("telegrapher-matrix", _check_telegrapher),
    ("mode-mixing-routes", _check_rabi),
]


def cmd_selfcheck(args):
    failed = 0
    lines = []
    for name, fn in SELFCHECKS:
        try:
            ok = bool(fn())
        except Exception as exc:  # a crash counts as a failure
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        failed += not ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
    text = "\n".join(lines) + "\n"
    if failed:
        raise CLIError(text + f"{failed} check(s) failed", 1)
    return text


# ------------------------------------------------------------------ parser

def build_parser():
    p = argparse.ArgumentParser(prog="cqedquant", description="Quantize superconducting circuits.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt="json"):
        sp.add_argument("--format", choices=("csv", "json"), default=fmt)
        sp.add_argument("-o", dest="output", metavar="PATH")
        sp.add_argument("--tol", type=float, default=lumped.FROZEN_RTOL,
                        help="relative tolerance for frozen directions")

    q = sub.add_parser("quantize", help="Hamiltonian of a netlist")
    q.add_argument("netlist")
    q.add_argument("--modes", type=int, default=200, help="line modes kept for line circuits")
    q.add_argument("--project", action="store_true", help="project out frozen variables")
    common(q)
    q.set_defaults(func=cmd_quantize)

    m = sub.add_parser("modes", help="line mode table")
    m.add_argument("netlist")
    m.add_argument("-n", type=int, default=100)
    common(m, "csv")
    m.set_defaults(func=cmd_modes)

    s = sub.add_parser("spectrum", help="spectral density at the line end")
    s.add_argument("netlist")
    s.add_argument("--kind", choices=("charge", "flux", "total"), default="charge")
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--fmax", type=float, default=None, help="upper frequency in Hz")
    common(s, "csv")
    s.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("rabi-converge", help="dressed qubit frequency versus mode count")
    r.add_argument("--M", default="1..6", help="range 'a..b' or list 'a,b,c'")
    r.add_argument("--Cj", type=float, default=0.0, help="junction capacitance in F")
    r.add_argument("--Cc", type=float, default=50e-15)
    r.add_argument("--f0", type=float, default=10e9, help="fundamental frequency in Hz")
    r.add_argument("--Z0", type=float, default=50.0)
    r.add_argument("--EJ", type=float, default=20e9, help="E_J/h in Hz")
    r.add_argument("--n-atom", type=int, default=16)
    r.add_argument("--N-max", type=int, default=20)
    r.add_argument("--no-renorm", action="store_true", help="keep E_C at e^2/2C_c")
    common(r, "csv")
    r.set_defaults(func=cmd_rabi_converge)

    c = sub.add_parser("selfcheck", help="run the invariant checks")
    c.set_defaults(func=cmd_selfcheck, output=None)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except CLIError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except netlist.NoTreeError as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except (modes.ModesError, nonreciprocal.NonreciprocalError) as exc:
        print(str(exc), file=sys.stderr)
        return 4
    except rabi.RabiError as exc:
        print(str(exc), file=sys.stderr)
        return 5
    _emit(text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
