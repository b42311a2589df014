"""Modified nodal analysis: DoF mapping, matrix stamping and device evaluation.

Builds the DAE residual  Jc * dphi/dt + Jg * phi + i_nl(phi, t) - i_s(t) = 0
from a parsed netlist.  Jc and Jg hold the constant linear stamps; diodes and
PWM switches contribute through ``eval_nonlinear``.  Per-parameter derivative
stamps dJc/dp and dJg/dp are kept as sparse triplets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .netlist import Netlist, Parameter, DiodeModel, SwitchModel

DENSE_LIMIT = 100          # below this many DoFs matrices are plain ndarrays
DIODE_EXP_CLAMP = 40.0     # linear extrapolation of the exponential beyond


@dataclass(frozen=True)
class DofMap:
    node_index: dict        # node name -> row (ground eliminated)
    branch_index: dict      # element name -> extra current-variable row
    names: tuple            # row index -> printable DoF name

    @property
    def n_dofs(self) -> int:
        return len(self.names)


def assign_dofs(netlist: Netlist) -> DofMap:
    """Non-ground nodes first (netlist order), then one branch-current row
    per voltage source and per inductor (element order)."""
    node_index = {}
    names = []
    for n in netlist.nodes:
        if n == "0":
            continue
        node_index[n] = len(names)
        names.append(f"v({n})")
    branch_index = {}
    for e in netlist.elements:
        if e.kind in ("V", "L"):
            branch_index[e.name] = len(names)
            names.append(f"i({e.name})")
    return DofMap(node_index, branch_index, tuple(names))


@dataclass(frozen=True)
class ParamStamp:
    """Sparse derivative stamps (dJc/dp, dJg/dp) as triplet arrays."""
    jc_rows: np.ndarray
    jc_cols: np.ndarray
    jc_vals: np.ndarray
    jg_rows: np.ndarray
    jg_cols: np.ndarray
    jg_vals: np.ndarray

    def apply(self, phi_dot: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Row vector dJc/dp * phi_dot + dJg/dp * phi (dense, n entries)."""
        n = phi.shape[-1]
        out = np.zeros(n)
        np.add.at(out, self.jc_rows, self.jc_vals * phi_dot[self.jc_cols])
        np.add.at(out, self.jg_rows, self.jg_vals * phi[self.jg_cols])
        return out

    def apply_series(self, phi_dot: np.ndarray, phi: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
        """Integrand series w_k^T (dJc/dp phidot_k + dJg/dp phi_k) over all
        rows k of the (K, n) state arrays."""
        out = np.zeros(phi.shape[0])
        if self.jc_vals.size:
            out += (weights[:, self.jc_rows] * phi_dot[:, self.jc_cols]) @ self.jc_vals
        if self.jg_vals.size:
            out += (weights[:, self.jg_rows] * phi[:, self.jg_cols]) @ self.jg_vals
        return out


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, i, j, v):
        if i is None or j is None:   # ground row/col eliminated
            return
        self.rows.append(i)
        self.cols.append(j)
        self.vals.append(float(v))

    def add_pattern(self, a, b, v):
        """Two-terminal conductance/capacitance pattern between rows a, b."""
        self.add(a, a, v)
        self.add(b, b, v)
        self.add(a, b, -v)
        self.add(b, a, -v)

    def arrays(self):
        return (np.asarray(self.rows, dtype=np.intp),
                np.asarray(self.cols, dtype=np.intp),
                np.asarray(self.vals, dtype=float))

    def matrix(self, n, dense):
        rows, cols, vals = self.arrays()
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
        return coo.toarray() if dense else coo.tocsr()


def _row(dofs: DofMap, node: str):
    return None if node == "0" else dofs.node_index[node]


@dataclass
class StampedSystem:
    """Assembled, immutable system matrices and callbacks for one netlist."""
    n: int
    Jc: object                   # ndarray or csr_matrix
    Jg: object
    dense: bool
    dofs: DofMap
    _sources: list               # (kind, a, b, branch_row, waveform)
    _diodes: list                # (a, b, DiodeModel)
    _switches: list              # (a, b, SwitchModel)
    param_stamps: list           # ParamStamp per parameter id
    params: tuple

    def source_eval(self, t: float) -> np.ndarray:
        """Independent source vector i_s(t)."""
        i_s = np.zeros(self.n)
        for kind, a, b, br, wf in self._sources:
            val = wf(t)
            if kind == "V":
                i_s[br] += val
            else:  # current source pushes val from node a into node b
                if a is not None:
                    i_s[a] -= val
                if b is not None:
                    i_s[b] += val
        return i_s

    def eval_nonlinear(self, phi: np.ndarray, t: float):
        """Nonlinear/time-varying current i_nl(phi, t) and its Jacobian
        d i_nl / d phi.  Nothing here depends on dphi/dt."""
        i_nl = np.zeros(self.n)
        tri = _Triplets()
        for a, b, model in self._diodes:
            va = phi[a] if a is not None else 0.0
            vb = phi[b] if b is not None else 0.0
            cur, g = diode_current(va - vb, model)
            if a is not None:
                i_nl[a] += cur
            if b is not None:
                i_nl[b] -= cur
            tri.add_pattern(a, b, g)
        for a, b, model in self._switches:
            g = model.conductance(t)
            va = phi[a] if a is not None else 0.0
            vb = phi[b] if b is not None else 0.0
            cur = g * (va - vb)
            if a is not None:
                i_nl[a] += cur
            if b is not None:
                i_nl[b] -= cur
            tri.add_pattern(a, b, g)
        return i_nl, tri.matrix(self.n, self.dense)

    def conductance_at(self, phi: np.ndarray, t: float):
        """Linearized system matrix Jg + d i_nl/d phi at (phi, t)."""
        _, dnl = self.eval_nonlinear(phi, t)
        return self.Jg + dnl


def diode_current(v: float, model: DiodeModel):
    """Shockley current and conductance, exponent clamped at DIODE_EXP_CLAMP
    with linear extrapolation beyond (keeps Newton bounded)."""
    nvt = model.n * model.v_t
    x = v / nvt
    if x > DIODE_EXP_CLAMP:
        e = math.exp(DIODE_EXP_CLAMP)
        i = model.i_s * (e * (1.0 + (x - DIODE_EXP_CLAMP)) - 1.0)
        g = model.i_s * e / nvt
    else:
        i = model.i_s * math.expm1(x)
        g = model.i_s * math.exp(x) / nvt
    return i, g


def stamp_linear(netlist: Netlist, dofs: DofMap) -> StampedSystem:
    """Assemble the constant stamps and device callback tables."""
    n = dofs.n_dofs
    dense = n < DENSE_LIMIT
    jc = _Triplets()
    jg = _Triplets()
    sources, diodes, switches = [], [], []

    for e in netlist.elements:
        a = _row(dofs, e.nodes[0])
        b = _row(dofs, e.nodes[1])
        if e.kind == "R":
            jg.add_pattern(a, b, 1.0 / e.value)
        elif e.kind == "C":
            jc.add_pattern(a, b, e.value)
        elif e.kind == "L":
            br = dofs.branch_index[e.name]
            jg.add(a, br, 1.0)
            jg.add(b, br, -1.0)
            jg.add(br, a, 1.0)
            jg.add(br, b, -1.0)
            jc.add(br, br, -e.value)
        elif e.kind == "V":
            br = dofs.branch_index[e.name]
            jg.add(a, br, 1.0)
            jg.add(b, br, -1.0)
            jg.add(br, a, 1.0)
            jg.add(br, b, -1.0)
            sources.append(("V", a, b, br, e.value))
        elif e.kind == "I":
            sources.append(("I", a, b, None, e.value))
        elif e.kind == "D":
            diodes.append((a, b, e.value))
        elif e.kind == "S":
            switches.append((a, b, e.value))

    stamps = [_param_stamp(netlist, dofs, p) for p in netlist.params]
    return StampedSystem(n=n, Jc=jc.matrix(n, dense), Jg=jg.matrix(n, dense),
                         dense=dense, dofs=dofs, _sources=sources,
                         _diodes=diodes, _switches=switches,
                         param_stamps=stamps, params=netlist.params)


def _param_stamp(netlist: Netlist, dofs: DofMap, p: Parameter) -> ParamStamp:
    e = netlist.element(p.element)
    a = _row(dofs, e.nodes[0])
    b = _row(dofs, e.nodes[1])
    jc = _Triplets()
    jg = _Triplets()
    if p.kind == "R":
        jg.add_pattern(a, b, -1.0 / (p.nominal ** 2))   # d(1/R)/dR
    elif p.kind == "C":
        jc.add_pattern(a, b, 1.0)                        # d(C)/dC
    elif p.kind == "L":
        br = dofs.branch_index[e.name]
        jc.add(br, br, -1.0)                             # branch stamp is -L
    jc_rows, jc_cols, jc_vals = jc.arrays()
    jg_rows, jg_cols, jg_vals = jg.arrays()
    return ParamStamp(jc_rows, jc_cols, jc_vals, jg_rows, jg_cols, jg_vals)


def param_stamps(netlist: Netlist, dofs: DofMap, p: Parameter) -> ParamStamp:
    """Derivative stamps for one registered parameter."""
    ids = {q.id for q in netlist.params}
    if p.id not in ids:
        raise KeyError(f"unknown parameter id {p.id}")
    return _param_stamp(netlist, dofs, p)


def assemble(netlist: Netlist) -> StampedSystem:
    """Convenience: assign_dofs + stamp_linear."""
    return stamp_linear(netlist, assign_dofs(netlist))
