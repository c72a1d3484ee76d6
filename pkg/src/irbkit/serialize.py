"""JSON and CSV formats shared by the library and the CLI."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import DimMismatch, InvalidInput


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    try:
        d = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((d, d))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad matrix object: {exc}") from exc
    if re.shape != (d, d) or im.shape != (d, d):
        raise DimMismatch(f"declared dim {d} but got re {re.shape}, im {im.shape}")
    return re + 1j * im


def generator_from_json(obj):
    from .dynamics import gksl_generator
    try:
        H = matrix_from_json(obj["H"])
        chans = [(c["gamma"], matrix_from_json(c["L"])) for c in obj.get("channels", [])]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"bad generator object: {exc}") from exc
    return gksl_generator(H, chans)


def format_number(x) -> str:
    """Locale-independent, fixed 12 significant digits; ``None`` renders as ``n/a``."""
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "n/a"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".11e")


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def trajectory_csv(traj, pairs: bool = True) -> str:
    from .diagnostics import CSV_HEADER
    header = list(CSV_HEADER)
    rows = [list(r.csv_values()) for r in traj.reports]
    if pairs:
        names, vals = traj.pair_moduli()
        header += [f"n_{i}_{j}" for i, j in names]
        for row, v in zip(rows, vals):
            row.extend(v.tolist())
    return csv_text(header, rows)
