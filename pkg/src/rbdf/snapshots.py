"""Bit-exact persistence: binary state snapshots and CSV series.

Snapshot layout (little-endian, no padding):

    magic   4s   b"RBDF"
    version u32  1
    bc      u8   0 = stress-free
    Nx      u32
    Ny      u32
    L, l, nu, kappa, g, t   f64 each

followed by three row-major f64 arrays over the Nx x Ny grid (x1-major)
holding u1, u2, theta physical values.  Writing a loaded snapshot back
reproduces the file byte for byte, and a loaded state continues a run
bit for bit (see solver.canonical_from_grid).
"""

from __future__ import annotations

import datetime as _dt
import struct

import numpy as np

from .solver import PhysicalParams, RBState, arrays_to_state, canonical_from_grid
from .spectral import DomainSpec, to_grid

MAGIC = b"RBDF"
VERSION = 1
_HEADER = struct.Struct("<4sIBIIdddddd")


class SnapshotFormatError(ValueError):
    pass


def state_grids(state: RBState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The grid payload of a state: attached values when present."""
    if state.grid_values is not None:
        return state.grid_values
    return (
        to_grid(state.u.u1),
        to_grid(state.u.u2),
        to_grid(state.theta.theta),
    )


def write_state(path, state: RBState, p: PhysicalParams) -> None:
    d = state.domain
    g1, g2, gth = state_grids(state)
    header = _HEADER.pack(
        MAGIC, VERSION, 0, d.Nx, d.Ny, d.L, d.l, p.nu, p.kappa, p.g, state.t
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for g in (g1, g2, gth):
            fh.write(np.ascontiguousarray(g.T, dtype="<f8").tobytes())


def read_state(path) -> tuple[RBState, PhysicalParams]:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise SnapshotFormatError("truncated header")
        magic, version, bc, Nx, Ny, L, l, nu, kappa, g, t = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise SnapshotFormatError("bad magic")
        if version != VERSION:
            raise SnapshotFormatError(f"unsupported version {version}")
        domain = DomainSpec(L=L, l=l, Nx=Nx, Ny=Ny)
        n = Nx * Ny
        grids = []
        for _ in range(3):
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise SnapshotFormatError("truncated payload")
            grids.append(np.frombuffer(buf, dtype="<f8").reshape(Nx, Ny).T.copy())
    c1, c2, cth = canonical_from_grid(*grids, domain)
    state = arrays_to_state(c1, c2, cth, domain, t, grids=tuple(grids))
    return state, PhysicalParams(nu=nu, kappa=kappa, g=g, domain=domain)


def meta_line(command: str, **kv) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    extras = " ".join(f"{k}={v}" for k, v in kv.items())
    return f"# rbdf {command} {stamp} {extras}".rstrip()


def write_csv(path, command: str, columns, rows, **meta) -> None:
    """CSV with a header row and one ISO-8601 metadata comment line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(meta_line(command, **meta) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row) + "\n")
