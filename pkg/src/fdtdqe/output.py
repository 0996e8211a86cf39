"""Run outputs: CSV tables, binary field snapshots, SPA images and SVG plots."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FDQE"
# magic, version, dtype code, nx, ny, nz, dx, dt, step, components, padding
HEADER = struct.Struct("<4sHHIIIddQI16x")
DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<c16")}


def write_csv(path, columns: dict):
    """Columns of equal length, written with a header at 17 significant digits."""
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("all CSV columns must have the same length")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i]) for c in cols) + "\n")


def _fmt(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    return format(float(v), ".17g")


def read_csv(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    return {k: np.atleast_1d(data[k]) for k in data.dtype.names}


def write_snapshot(path, fields: dict, grid, step: int):
    """Flat little-endian dump of ``fields`` behind a 64-byte header.

    Components follow in the order given, each as a C-ordered array of the
    lattice shape (1D lattices are stored as (nx, 1, 1)).
    """
    arrs = list(fields.values())
    cplx = any(np.iscomplexobj(a) for a in arrs)
    code = 2 if cplx else 1
    shape = tuple(grid.shape) + (1,) * (3 - len(grid.shape))
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, 1, code, *shape, grid.dx, grid.dt, step, len(arrs)))
        for a in arrs:
            fh.write(np.ascontiguousarray(a, dtype=DTYPES[code]).tobytes())


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`: (header dict, list of arrays)."""
    raw = Path(path).read_bytes()
    magic, ver, code, nx, ny, nz, dx, dt, step, ncomp = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a field snapshot")
    dt_ = DTYPES[code]
    size = nx * ny * nz
    arrs = []
    off = HEADER.size
    for _ in range(ncomp):
        arrs.append(np.frombuffer(raw, dt_, size, off).reshape(nx, ny, nz))
        off += size * dt_.itemsize
    head = dict(version=ver, shape=(nx, ny, nz), dx=dx, dt=dt, step=step,
                components=ncomp, complex=code == 2)
    return head, arrs


def snapshot_spa(e_total: dict, grid, axis: str = "z", index: int | None = None):
    """Normalised |E| of the single-photon amplitude on a lattice plane.

    ``e_total`` is the stitched total field (main lattice outside Omega, main
    plus auxiliary inside). A 1D lattice gives a single-row image along x.
    The image is divided by its maximum, so the brightest pixel is exactly 1;
    an all-zero field stays zero.
    """
    mag2 = sum(np.abs(v) ** 2 for v in e_total.values())
    if grid.dim == 1:
        img = np.sqrt(mag2)[None, :]
    else:
        a = "xyz".index(axis)
        n = grid.shape[a]
        index = n // 2 if index is None else int(index)
        if not 0 <= index < n:
            raise ValueError(f"plane {axis} = {index} lies outside the lattice (0..{n - 1})")
        img = np.sqrt(np.take(mag2, index, axis=a))
    peak = img.max()
    return img / peak if peak > 0 else img


def write_image_csv(path, img):
    with open(path, "w") as fh:
        fh.write(",".join(f"c{j}" for j in range(img.shape[1])) + "\n")
        for row in img:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# --- plots ----------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_population(csv_path, svg_path, gamma0_value=None):
    plt = _pyplot()
    d = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    t = d["t"]
    x = t * gamma0_value if gamma0_value else t
    ax.plot(x, d["population"], label="|C(t)|^2")
    if gamma0_value:
        ax.plot(x, np.exp(-x), "--", label="free space")
        ax.set_xlabel("t Gamma0")
    else:
        ax.set_xlabel("t (m)")
    ax.set_ylabel("excited population")
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def plot_scan(csv_path, svg_path):
    plt = _pyplot()
    d = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(d["parameter"], d["purcell"], "o-", label="time domain")
    if "purcell_oracle" in d:
        ax.plot(d["parameter"], d["purcell_oracle"], "s--", label="transfer matrix")
    ax.set_xlabel("scan parameter")
    ax.set_ylabel("Purcell factor")
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def plot_image(img, svg_path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(img, aspect="auto", origin="lower", cmap="magma", vmin=0, vmax=1)
    fig.colorbar(im, ax=ax, label="|E| / max")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
