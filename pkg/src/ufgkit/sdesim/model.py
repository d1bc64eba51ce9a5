"""SDE model: drift ``V_0`` and diffusion fields ``V_1..V_d`` with bound parameters.

The fields are compiled into a flat term table consumed by both simulation
kernels: for field ``f`` and component ``i`` the terms live in
``offsets[f*N + i] : offsets[f*N + i + 1]``; each term is
``coeff * prod_k x_k^pow[k] sin(x_k)^sinp[k] cos(x_k)^cosp[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..liealg import VectorField
from ..symexpr import SIN, UnboundParameterError


class SdeError(Exception):
    code = "sdesim"


class NonFinite(SdeError):
    """A path or flow left the finite region (``|x| > 1e12`` or nan)."""

    def __init__(self, message: str, n_discarded: int = 0):
        super().__init__(message)
        self.n_discarded = n_discarded


class InsufficientPositiveValues(SdeError):
    pass


@dataclass(frozen=True)
class TermTable:
    coeff: np.ndarray
    pw: np.ndarray
    sinp: np.ndarray
    cosp: np.ndarray
    offsets: np.ndarray
    n_fields: int
    dim: int
    uses_trig: bool
    # sparse factor list: term t owns factors fstart[t]:fstart[t+1] of
    # (coordinate, kind 0=power 1=sin 2=cos, exponent)
    fstart: np.ndarray
    fcoord: np.ndarray
    fkind: np.ndarray
    fpow: np.ndarray
    # flat slot ``f*N + i`` each term contributes to
    target: np.ndarray


def compile_fields(fields: Sequence[VectorField], params: Mapping[str, float] | None = None) -> TermTable:
    params = dict(params or {})
    dim = fields[0].dim
    coeff, pw, sp, cp, offsets = [], [], [], [], [0]
    for v in fields:
        if v.dim != dim:
            raise ValueError("all fields must share one dimension")
        for comp in v.components:
            bound = comp.bind(params)
            if bound.parameters:
                raise UnboundParameterError(f"unbound parameters {sorted(bound.parameters)}")
            for t in bound.terms:
                coeff.append(float(t.coeff))
                row_p, row_s, row_c = [0] * dim, [0] * dim, [0] * dim
                for i, p in t.coords:
                    row_p[i] = p
                for i, kind, p in t.trig:
                    (row_s if kind == SIN else row_c)[i] = p
                pw.append(row_p)
                sp.append(row_s)
                cp.append(row_c)
            offsets.append(len(coeff))
    shape = (len(coeff), dim)
    as_int = lambda rows: np.array(rows, dtype=np.int32).reshape(shape)  # noqa: E731
    sinp, cosp = as_int(sp), as_int(cp)
    pw_arr = as_int(pw)
    fstart, fcoord, fkind, fpow = [0], [], [], []
    for t in range(len(coeff)):
        for kind, arr in enumerate((pw_arr, sinp, cosp)):
            for k in range(dim):
                if arr[t, k]:
                    fcoord.append(k)
                    fkind.append(kind)
                    fpow.append(int(arr[t, k]))
        fstart.append(len(fcoord))
    as_vec = lambda v: np.array(v, dtype=np.int32)  # noqa: E731
    return TermTable(
        np.array(coeff, dtype=np.float64),
        pw_arr,
        sinp,
        cosp,
        np.array(offsets, dtype=np.int64),
        len(fields),
        dim,
        bool(sinp.any() or cosp.any()),
        as_vec(fstart),
        as_vec(fcoord),
        as_vec(fkind),
        as_vec(fpow),
        np.repeat(np.arange(len(offsets) - 1, dtype=np.int32), np.diff(offsets)).astype(np.int32),
    )


@dataclass
class SdeModel:
    """Stratonovich SDE ``dX = V_0(X) dt + sqrt(2) sum_i V_i(X) o dW^i``."""

    fields: tuple
    params: dict = field(default_factory=dict)
    name: str = "model"

    def __post_init__(self):
        self.fields = tuple(self.fields)
        if len(self.fields) < 1:
            raise ValueError("model needs a drift field")
        dims = {v.dim for v in self.fields}
        if len(dims) != 1:
            raise ValueError("all fields must share one dimension")
        self._table = compile_fields(self.fields, self.params)

    @property
    def dim(self) -> int:
        return self.fields[0].dim

    @property
    def d(self) -> int:
        return len(self.fields) - 1

    @property
    def table(self) -> TermTable:
        return self._table

    def bound_field(self, v: VectorField) -> VectorField:
        return v.bind(self.params)

    def drift(self, x) -> np.ndarray:
        return self.fields[0].bind(self.params).evaluate(x)
