"""Circuit netlists and their graph-theoretic loop structure.

A netlist is a JSON document with top-level keys ``nodes``, ``ground``,
``branches``, ``couplers``, ``transformers`` and ``tlines``. Fluxes of the
spanning-tree branches are the dynamical variables. Capacitors enter the
tree first, junctions and nonreciprocal ports are always chords.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .nonreciprocal import circulator_smatrix, gyrator_smatrix

__all__ = [
    "NetlistError",
    "SchemaError",
    "NoTreeError",
    "Branch",
    "TLSegment",
    "CircuitNetlist",
    "LoopStructure",
    "parse_netlist",
    "serialize_netlist",
    "load_netlist",
    "build_loop_structure",
    "eliminate_transformers",
    "incidence_matrix",
]

BRANCH_KINDS = ("C", "L", "JJ")
COUPLER_KINDS = ("gyrator", "circulator")
TERMINATIONS = ("short", "open")

# kind codes used in the loop structure
CAP, IND, JUNC, YDEV, TLEFT, TRIGHT = "C", "L", "J", "G", "TL", "TR"


class NetlistError(ValueError):
    pass


class SchemaError(NetlistError):
    def __init__(self, msg, where=""):
        self.where = where
        super().__init__(f"schema violation at {where}: {msg}" if where else f"schema violation: {msg}")


class NoTreeError(NetlistError):
    pass


@dataclass(frozen=True)
class Branch:
    """Two-terminal element of the expanded multigraph.

    ``value`` is the capacitance, inductance or Josephson energy. Device and
    transformer ports carry the index of their owner and the port number.
    """

    id: int
    kind: str
    start: str
    end: str
    value: float = 0.0
    owner: int = -1
    port: int = -1
    phi_ext: float = 0.0
    source: int = -1


@dataclass(frozen=True)
class TLSegment:
    c: float
    l: float
    length: float | None
    left: str
    right: str

    @property
    def semi_infinite(self):
        return self.length is None

    @property
    def velocity(self):
        return 1.0 / np.sqrt(self.l * self.c)

    @property
    def impedance(self):
        return np.sqrt(self.l / self.c)


@dataclass
class CircuitNetlist:
    nodes: list
    ground: str
    branches: list
    tl_segments: list = field(default_factory=list)
    couplers: list = field(default_factory=list)
    transformers: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    def expanded(self):
        """Branches with every junction capacitance split off as a capacitor.

        Order: declared two-terminal elements (a junction contributes its
        capacitor first), then device ports, then transformer ports.
        """
        out = []
        for b in self.branches:
            if b.kind == "JJ":
                cj = self.document["branches"][b.source]["params"].get("CJ", 0.0)
                if cj > 0:
                    out.append(Branch(len(out), CAP, b.start, b.end, cj, source=b.source))
                out.append(Branch(len(out), JUNC, b.start, b.end, b.value, phi_ext=b.phi_ext, source=b.source))
            elif b.kind in (CAP, IND):
                out.append(Branch(len(out), b.kind, b.start, b.end, b.value, phi_ext=b.phi_ext, source=b.source))
        for b in self.branches:
            if b.kind in (YDEV, TLEFT, TRIGHT):
                out.append(Branch(len(out), b.kind, b.start, b.end, b.value, b.owner, b.port, b.phi_ext, b.source))
        return out


def _num(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError("expected a number", where)
    return float(x)


def _positive(x, where, allow_zero=False):
    v = _num(x, where)
    if v < 0 or (v == 0 and not allow_zero) or not np.isfinite(v):
        raise NetlistError(f"nonpositive parameter at {where}: {v}")
    return v


def _node(ref, nodes, where):
    if not isinstance(ref, str):
        raise SchemaError("node reference must be a string", where)
    if ref not in nodes:
        raise NetlistError(f"unknown node reference {ref!r} at {where}")
    return ref


def _matrix(x, where):
    try:
        arr = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("expected a numeric matrix", where) from None
    if arr.ndim != 2:
        raise SchemaError("expected a 2-d matrix", where)
    return arr


def parse_netlist(doc):
    """Validate a netlist document and build a :class:`CircuitNetlist`.

    Parameters
    ----------
    doc : str or dict
        JSON text or an already decoded document.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object", "/")
    known = {"nodes", "ground", "branches", "couplers", "transformers", "tlines", "metadata"}
    for key in doc:
        if key not in known:
            raise SchemaError(f"unknown key {key!r}", "/")
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise SchemaError("'nodes' must be a list of strings", "/nodes")
    if len(set(nodes)) != len(nodes):
        raise SchemaError("duplicate node names", "/nodes")
    ground = doc.get("ground")
    if not isinstance(ground, str):
        raise SchemaError("'ground' must be a string", "/ground")
    if ground not in nodes:
        raise NetlistError(f"unknown node reference {ground!r} at /ground")

    branches = []
    for i, b in enumerate(doc.get("branches", [])):
        where = f"/branches/{i}"
        if not isinstance(b, dict):
            raise SchemaError("branch must be an object", where)
        kind = b.get("kind")
        if kind not in BRANCH_KINDS:
            raise SchemaError(f"kind must be one of {BRANCH_KINDS}", where + "/kind")
        start = _node(b.get("from"), nodes, where + "/from")
        end = _node(b.get("to"), nodes, where + "/to")
        if start == end:
            raise SchemaError("branch endpoints coincide", where)
        params = b.get("params")
        if not isinstance(params, dict):
            raise SchemaError("'params' must be an object", where + "/params")
        key = {"C": "C", "L": "L", "JJ": "EJ"}[kind]
        if key not in params:
            raise SchemaError(f"missing parameter {key!r}", where + "/params")
        value = _positive(params[key], f"{where}/params/{key}")
        if kind == "JJ" and "CJ" in params:
            _positive(params["CJ"], f"{where}/params/CJ", allow_zero=True)
        phi = _num(params.get("phi_ext", 0.0), where + "/params/phi_ext")
        branches.append(Branch(len(branches), kind, start, end, value, phi_ext=phi, source=i))

    couplers = []
    for i, c in enumerate(doc.get("couplers", [])):
        where = f"/couplers/{i}"
        if not isinstance(c, dict) or c.get("kind") not in COUPLER_KINDS:
            raise SchemaError(f"kind must be one of {COUPLER_KINDS}", where + "/kind")
        R = _positive(c.get("R"), where + "/R")
        ports = c.get("ports")
        if not isinstance(ports, list) or not ports:
            raise SchemaError("'ports' must be a non-empty list", where + "/ports")
        if "smatrix" in c:
            S = _matrix(c["smatrix"], where + "/smatrix")
        elif c["kind"] == "gyrator":
            S = gyrator_smatrix()
        else:
            S = circulator_smatrix(len(ports))
        if S.shape != (len(ports), len(ports)):
            raise SchemaError("smatrix size does not match the port count", where + "/smatrix")
        for p, pr in enumerate(ports):
            pw = f"{where}/ports/{p}"
            if not isinstance(pr, list) or len(pr) != 2:
                raise SchemaError("port must be a node pair", pw)
            a = _node(pr[0], nodes, pw)
            b = _node(pr[1], nodes, pw)
            branches.append(Branch(len(branches), YDEV, a, b, R, owner=i, port=p, source=-1))
        couplers.append({"kind": c["kind"], "R": R, "S": S})

    transformers = []
    for i, t in enumerate(doc.get("transformers", [])):
        where = f"/transformers/{i}"
        if not isinstance(t, dict):
            raise SchemaError("transformer must be an object", where)
        N = _matrix(t.get("turns"), where + "/turns")
        left = t.get("left_ports")
        right = t.get("right_ports")
        if not isinstance(left, list) or not isinstance(right, list):
            raise SchemaError("left_ports and right_ports must be lists", where)
        if N.shape != (len(right), len(left)):
            raise SchemaError("turns must have shape (right ports, left ports)", where + "/turns")
        for kind, plist, tag in ((TLEFT, left, "left_ports"), (TRIGHT, right, "right_ports")):
            for p, pr in enumerate(plist):
                pw = f"{where}/{tag}/{p}"
                if not isinstance(pr, list) or len(pr) != 2:
                    raise SchemaError("port must be a node pair", pw)
                a = _node(pr[0], nodes, pw)
                b = _node(pr[1], nodes, pw)
                branches.append(Branch(len(branches), kind, a, b, 0.0, owner=i, port=p, source=-1))
        transformers.append({"turns": N})

    tls = []
    for i, t in enumerate(doc.get("tlines", [])):
        where = f"/tlines/{i}"
        if not isinstance(t, dict):
            raise SchemaError("tline must be an object", where)
        c = _positive(t.get("c"), where + "/c")
        l = _positive(t.get("l"), where + "/l")
        if t.get("semi_infinite", False):
            length = None
        else:
            if "length" not in t:
                raise SchemaError("missing 'length' or 'semi_infinite'", where)
            length = _positive(t["length"], where + "/length")
        ends = []
        for side in ("left", "right"):
            ref = t.get(side)
            if ref in TERMINATIONS:
                ends.append(ref)
            else:
                ends.append(_node(ref, nodes, f"{where}/{side}"))
        tls.append(TLSegment(c, l, length, ends[0], ends[1]))

    meta = doc.get("metadata", {})
    if not isinstance(meta, dict):
        raise SchemaError("'metadata' must be an object", "/metadata")
    return CircuitNetlist(list(nodes), ground, branches, tls, couplers, transformers, dict(meta), doc)


def load_netlist(path):
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def serialize_netlist(net):
    """Inverse of :func:`parse_netlist` as a plain dictionary."""
    doc = {"nodes": list(net.nodes), "ground": net.ground, "branches": []}
    for b in net.branches:
        if b.kind not in BRANCH_KINDS:
            continue
        src = net.document["branches"][b.source]
        doc["branches"].append({"kind": b.kind, "from": b.start, "to": b.end, "params": dict(src["params"])})
    if net.couplers:
        doc["couplers"] = []
        for i, c in enumerate(net.couplers):
            ports = [[b.start, b.end] for b in net.branches if b.kind == YDEV and b.owner == i]
            doc["couplers"].append({"kind": c["kind"], "R": c["R"], "smatrix": c["S"].tolist(), "ports": ports})
    if net.transformers:
        doc["transformers"] = []
        for i, t in enumerate(net.transformers):
            left = [[b.start, b.end] for b in net.branches if b.kind == TLEFT and b.owner == i]
            right = [[b.start, b.end] for b in net.branches if b.kind == TRIGHT and b.owner == i]
            doc["transformers"].append({"turns": t["turns"].tolist(), "left_ports": left, "right_ports": right})
    if net.tl_segments:
        doc["tlines"] = []
        for t in net.tl_segments:
            entry = {"c": t.c, "l": t.l, "left": t.left, "right": t.right}
            if t.length is None:
                entry["semi_infinite"] = True
            else:
                entry["length"] = t.length
            doc["tlines"].append(entry)
    if net.metadata:
        doc["metadata"] = dict(net.metadata)
    return doc


@dataclass(frozen=True)
class LoopStructure:
    """Tree/chord partition with the fundamental loop matrix.

    ``F`` has one row per tree branch and one column per chord branch, and
    encodes ``F I_chord = -I_tree`` and ``F^T V_tree = V_chord``. ``turns``
    maps left (tree) transformer currents to right (chord) ones.
    """

    tree: tuple
    chord: tuple
    kinds: dict
    F: np.ndarray
    turns: np.ndarray | None = None
    phi_ext: np.ndarray | None = None
    eliminated: bool = False

    def rows(self, kind):
        return [i for i, b in enumerate(self.tree) if self.kinds[b] == kind]

    def cols(self, kind):
        return [j for j, b in enumerate(self.chord) if self.kinds[b] == kind]

    def block(self, row_kind, col_kind):
        return self.F[np.ix_(self.rows(row_kind), self.cols(col_kind))]

    @classmethod
    def from_blocks(cls, row_kinds, col_kinds, F, turns=None):
        """Build a structure directly from kind labels and a loop matrix."""
        nt = len(row_kinds)
        kinds = {i: k for i, k in enumerate(row_kinds)}
        kinds.update({nt + j: k for j, k in enumerate(col_kinds)})
        F = np.asarray(F, dtype=float)
        return cls(tuple(range(nt)), tuple(range(nt, nt + len(col_kinds))), kinds, F,
                   None if turns is None else np.asarray(turns, dtype=float))


class _DSU:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def incidence_matrix(nodes, ground, edges):
    """Reduced node-branch incidence matrix (ground row removed)."""
    idx = {n: i for i, n in enumerate(x for x in nodes if x != ground)}
    A = np.zeros((len(idx), len(edges)), dtype=int)
    for j, e in enumerate(edges):
        if e.start in idx:
            A[idx[e.start], j] += 1
        if e.end in idx:
            A[idx[e.end], j] -= 1
    return A


def _tree_path_signs(tree_edges, nodes, root):
    """Helper returning a function giving signed tree paths between nodes."""
    adj = {n: [] for n in nodes}
    for k, e in enumerate(tree_edges):
        adj[e.start].append((e.end, k))
        adj[e.end].append((e.start, k))
    parent = {root: (None, None)}
    depth = {root: 0}
    queue = [root]
    for u in queue:
        for v, k in adj[u]:
            if v not in parent:
                parent[v] = (u, k)
                depth[v] = depth[u] + 1
                queue.append(v)

    def path(a, b):
        signs = {}
        up, down = [], []
        x, y = a, b
        while depth[x] > depth[y]:
            up.append(x)
            x = parent[x][0]
        while depth[y] > depth[x]:
            down.append(y)
            y = parent[y][0]
        while x != y:
            up.append(x)
            down.append(y)
            x = parent[x][0]
            y = parent[y][0]
        for child in up:
            k = parent[child][1]
            signs[k] = 1 if tree_edges[k].start == child else -1
        for child in down:
            k = parent[child][1]
            signs[k] = 1 if tree_edges[k].end == child else -1
        return signs

    return path


def build_loop_structure(net):
    """Spanning tree, chords and fundamental loop matrix of a netlist.

    The tree is grown greedily: capacitors in declaration order, then
    left transformer ports, then inductors. Junctions, nonreciprocal ports
    and right transformer ports are always chords.
    """
    edges = net.expanded()
    dsu = _DSU(net.nodes)
    tree, chord = [], []
    order = [e for e in edges if e.kind == CAP]
    order += [e for e in edges if e.kind == TLEFT]
    order += [e for e in edges if e.kind == IND]
    for e in order:
        if dsu.union(e.start, e.end):
            tree.append(e)
        elif e.kind == TLEFT:
            raise NoTreeError(f"no valid BKD tree: transformer port {e.id} closes a loop of tree branches")
    in_tree = {e.id for e in tree}
    for e in edges:
        if e.id not in in_tree:
            chord.append(e)
    roots = {dsu.find(n) for n in net.nodes}
    if len(roots) != 1:
        lonely = sorted(n for n in net.nodes if dsu.find(n) != dsu.find(net.ground))
        raise NoTreeError(f"no valid BKD tree: nodes {lonely} are reached only through chord elements")
    tree.sort(key=lambda e: e.id)
    path = _tree_path_signs(tree, net.nodes, net.ground)
    F = np.zeros((len(tree), len(chord)), dtype=int)
    for j, e in enumerate(chord):
        for k, s in path(e.start, e.end).items():
            F[k, j] = s
    kinds = {e.id: e.kind for e in edges}
    turns = None
    if net.transformers:
        left = [e for e in tree if e.kind == TLEFT]
        right = [e for e in chord if e.kind == TRIGHT]
        turns = np.zeros((len(right), len(left)))
        for ti, t in enumerate(net.transformers):
            ri = [r for r, e in enumerate(right) if e.owner == ti]
            li = [c for c, e in enumerate(left) if e.owner == ti]
            rp = [right[r].port for r in ri]
            lp = [left[c].port for c in li]
            turns[np.ix_(ri, li)] = t["turns"][np.ix_(rp, lp)]
    phi = np.array([e.phi_ext for e in chord], dtype=float)
    return LoopStructure(tuple(e.id for e in tree), tuple(e.id for e in chord), kinds, F, turns, phi)


def eliminate_transformers(ls):
    """Fold ideal transformers into effective loop blocks.

    Every block towards a chord kind ``X`` becomes
    ``F_X + F_{.,TR} N F_{TL,X}`` and the transformer rows and columns are
    dropped.
    """
    left = ls.rows(TLEFT)
    right = ls.cols(TRIGHT)
    if not left and not right:
        return LoopStructure(ls.tree, ls.chord, ls.kinds, ls.F.astype(float), ls.turns, ls.phi_ext, True)
    N = ls.turns
    if N is None or N.shape != (len(right), len(left)):
        raise NetlistError("turns matrix does not match the transformer ports")
    if np.any(ls.F[np.ix_(left, right)] != 0):
        raise NetlistError("left transformer branch shunted by a right transformer branch")
    keep_rows = [i for i in range(len(ls.tree)) if i not in set(left)]
    keep_cols = [j for j in range(len(ls.chord)) if j not in set(right)]
    F = ls.F.astype(float)
    eff = F[np.ix_(keep_rows, keep_cols)] + F[np.ix_(keep_rows, right)] @ N @ F[np.ix_(left, keep_cols)]
    tree = tuple(ls.tree[i] for i in keep_rows)
    chord = tuple(ls.chord[j] for j in keep_cols)
    phi = None if ls.phi_ext is None else ls.phi_ext[keep_cols]
    return LoopStructure(tree, chord, ls.kinds, eff, None, phi, True)
