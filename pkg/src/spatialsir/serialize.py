"""CSV and flat-binary output with deterministic formatting."""

import struct

import numpy as np

_MAGIC = b"SSIR"


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        names = header.split(",") if header else []
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return names, rows


def write_counts_csv(traj, path):
    rows = [(t, c[0], c[1], c[2]) for t, c in zip(traj.step_times, traj.step_counts)]
    write_csv(path, ["t", "S_count", "I_count", "R_count"], rows)


def write_snapshot_binary(path, t, positions, labels):
    """Little-endian header (magic, version, N, d, t) + float64 positions
    row-major + int8 labels."""
    positions = np.ascontiguousarray(positions, dtype="<f8")
    labels = np.ascontiguousarray(labels, dtype=np.int8)
    n, d = positions.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQd", 1, n, d, float(t)))
        fh.write(positions.tobytes())
        fh.write(labels.tobytes())


def read_snapshot_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError("not a snapshot file")
        version, n, d, t = struct.unpack("<IQQd", fh.read(28))
        positions = np.frombuffer(fh.read(n * d * 8), dtype="<f8").reshape(n, d)
        labels = np.frombuffer(fh.read(n), dtype=np.int8)
    return t, positions.copy(), labels.copy()


def write_field_binary(path, field):
    grid = field.grid
    arrs = [np.ascontiguousarray(a, dtype="<f8") for a in (field.fS, field.fI, field.fR)]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQd", 2, arrs[0].size, grid.dim, float(field.t)))
        for a in arrs:
            fh.write(a.tobytes())


def write_density_csv(series, path):
    grid = series.grid
    pts = grid.points()
    rows = []
    for k, t in enumerate(series.times):
        fs, fi, fr = series.fS[k].ravel(), series.fI[k].ravel(), series.fR[k].ravel()
        for j in range(pts.shape[0]):
            rows.append((t, j) + tuple(pts[j]) + (fs[j], fi[j], fr[j]))
    coord_cols = ["x", "y"][:grid.dim]
    write_csv(path, ["t", "node"] + coord_cols + ["fS", "fI", "fR"], rows)


def write_coords_csv(ensemble, path):
    rows = []
    for r in range(ensemble.coords.shape[0]):
        for j, t in enumerate(ensemble.times):
            for a in range(3):
                for p in range(ensemble.coords.shape[-1]):
                    rows.append((r, t, a, p, ensemble.coords[r, j, a, p]))
    write_csv(path, ["replicate", "t", "compartment", "member_id", "value"], rows)


def write_dictionary_text(dictionary, path):
    gram = dictionary.gram_on_grid()
    dev = np.abs(gram - np.eye(len(dictionary))).max()
    with open(path, "w", newline="\n") as fh:
        fh.write(dictionary.describe() + "\n")
        fh.write(f"recomputed gram max deviation: {dev:.6e}\n")
