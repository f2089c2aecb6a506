"""Text tables, grayscale rasters, atomic output staging and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


def fmt(x) -> str:
    """Deterministic text form: ints as ints, floats via shortest round-trip repr."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def table_text(columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string rows; '#' lines and blank lines are skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValidationError(f"{path}: empty table")
    header = [h.strip() for h in rows[0]]
    body = [[c.strip() for c in r] for r in rows[1:]]
    for r in body:
        if len(r) != len(header):
            raise ValidationError(f"{path}: ragged row {r}")
    return header, body


def read_columns(path) -> dict[str, list[str]]:
    header, body = read_table(path)
    return {h: [r[i] for r in body] for i, h in enumerate(header)}


def matrix_text(m: np.ndarray, names: Sequence[str] | None = None, corner: str = "site") -> str:
    m = np.asarray(m)
    if names is None:
        return table_text([f"c{j}" for j in range(m.shape[1])], m.tolist())
    return table_text([corner, *names], [[n, *row] for n, row in zip(names, m.tolist())])


def read_matrix(path) -> tuple[list[str] | None, np.ndarray]:
    """Square named matrix (first column = names) or an unnamed numeric grid."""
    header, body = read_table(path)
    try:
        float(body[0][0])
        named = False
    except (ValueError, IndexError):
        named = True
    if named:
        names = [r[0] for r in body]
        m = np.array([[float(v) for v in r[1:]] for r in body])
        if header[1:] != names:
            raise ValidationError(f"{path}: row and column names differ")
        return names, m
    return None, np.array([[float(v) for v in r] for r in body])


# --------------------------------------------------------------------------- rasters

def pgm_bytes(grid: np.ndarray, vmin: float | None = None, vmax: float | None = None):
    """8-bit binary PGM with linear min/max scaling; NaN maps to 0."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 2:
        raise ValidationError("raster needs a 2-d grid")
    finite = g[np.isfinite(g)]
    if vmin is None:
        vmin = finite.min() if finite.size else 0.0
    if vmax is None:
        vmax = finite.max() if finite.size else 1.0
    lo, hi = float(vmin), float(vmax)
    span = hi - lo
    scaled = np.zeros_like(g) if span <= 0 else (g - lo) / span * 255.0
    px = np.clip(np.rint(np.nan_to_num(scaled, nan=0.0)), 0, 255).astype(np.uint8)
    head = f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii")
    return head + px.tobytes(), {"vmin": lo, "vmax": hi}


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValidationError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValidationError(f"{path}: only 8-bit PGM supported")
    pos += 1
    px = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return px.reshape(h, w).copy()


# --------------------------------------------------------------------------- atomic outputs

class OutputSet:
    """Collects output files and publishes them together.

    Files are written to hidden temp names in their target directory and renamed
    into place on ``commit``; if anything fails first, every temp file is removed.
    """

    def __init__(self):
        self._staged: list[tuple[str, Path]] = []
        self.rasters: dict[str, dict] = {}

    def _temp(self, target: Path) -> str:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
        os.close(fd)
        self._staged.append((tmp, target))
        return tmp

    def write_bytes(self, path, data: bytes) -> Path:
        target = Path(path)
        with open(self._temp(target), "wb") as fh:
            fh.write(data)
        return target

    def write_text(self, path, text: str) -> Path:
        return self.write_bytes(path, text.encode("utf-8"))

    def write_raster(self, path, grid, vmin=None, vmax=None) -> Path:
        data, scaling = pgm_bytes(grid, vmin, vmax)
        self.rasters[Path(path).name] = scaling
        return self.write_bytes(path, data)

    def temp_path(self, path) -> str:
        """Temp file name for writers that need a path (e.g. figure savers)."""
        return self._temp(Path(path))

    @property
    def targets(self) -> list[Path]:
        return [t for _, t in self._staged]

    def commit(self):
        for tmp, target in self._staged:
            os.replace(tmp, target)
        self._staged.clear()

    def discard(self):
        for tmp, _ in self._staged:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
        self._staged.clear()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.discard()
        return False


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def manifest(command: str, params: dict, inputs: Sequence = (), outputs: Sequence = (),
             rasters: dict | None = None, seed: int | None = None) -> str:
    import scipy

    from . import __version__
    doc = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "params": {k: v for k, v in sorted(params.items())},
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "outputs": [str(p) for p in outputs],
        "rasters": rasters or {},
        "versions": {"ogsnet": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    return json.dumps(doc, indent=2, default=str) + "\n"


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")
