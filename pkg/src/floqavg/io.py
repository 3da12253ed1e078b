"""Hamiltonian spec files and CSV output.

Spec files are JSON::

    {"dim": 2, "omega": 1.5,
     "components": [{"k": 0, "re": [...], "im": [...]}, ...]}

Only k >= 0 is stored (row-major real and imaginary parts); negative
harmonics follow from Hermiticity.
"""
from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .core import FourierHamiltonian, HamiltonianError


def hamiltonian_to_dict(h: FourierHamiltonian) -> dict:
    comps = []
    for k, m in h.components.items():
        if k < 0:
            continue
        comps.append({"k": k,
                      "re": [float(x) for x in m.real.reshape(-1)],
                      "im": [float(x) for x in m.imag.reshape(-1)]})
    return {"dim": h.dim, "omega": float(h.omega), "components": comps}


def hamiltonian_from_dict(data: dict) -> FourierHamiltonian:
    try:
        dim, omega, comps = data["dim"], data["omega"], data["components"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"spec file needs 'dim', 'omega' and 'components': missing {exc}") from None
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValueError(f"'dim' must be a positive integer, got {dim!r}")
    if not isinstance(omega, (int, float)) or isinstance(omega, bool):
        raise ValueError(f"'omega' must be a number, got {omega!r}")
    if not isinstance(comps, list) or not comps:
        raise ValueError("'components' must be a nonempty list")
    mats: dict[int, np.ndarray] = {}
    problems = []
    for entry in comps:
        k = entry.get("k") if isinstance(entry, dict) else None
        if not isinstance(k, int) or isinstance(k, bool):
            raise ValueError(f"component entry needs an integer 'k': {entry!r}")
        if k < 0:
            problems.append((k, "only k >= 0 may be stored"))
            continue
        if k in mats:
            problems.append((k, "duplicate component"))
            continue
        re, im = entry.get("re"), entry.get("im", [0.0] * dim * dim)
        if not isinstance(re, list) or not isinstance(im, list) \
                or len(re) != dim * dim or len(im) != dim * dim:
            problems.append((k, f"'re' and 'im' must each hold {dim * dim} numbers"))
            continue
        mats[k] = (np.array(re, dtype=float) + 1j * np.array(im, dtype=float)).reshape(dim, dim)
    if problems:
        raise HamiltonianError(problems)
    return FourierHamiltonian.from_nonnegative(mats, float(omega))


def load_hamiltonian(path: str | os.PathLike) -> FourierHamiltonian:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return hamiltonian_from_dict(data)


def dumps_hamiltonian(h: FourierHamiltonian) -> str:
    return json.dumps(hamiltonian_to_dict(h), indent=1) + "\n"


def atomic_write(path: str | os.PathLike | None, text: str) -> None:
    """Write text to path via a temporary file and rename; None or '-' means stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_hamiltonian(h: FourierHamiltonian, path) -> None:
    atomic_write(path, dumps_hamiltonian(h))


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        # nine significant digits; normalize negative zero
        return f"{float(x) + 0.0:.8e}"
    return str(x)


def format_csv(header: list[str], rows, metadata: list[str] = ()) -> str:
    lines = [f"# {m}" for m in metadata]
    lines.append(",".join(header))
    lines.extend(",".join(_cell(c) for c in row) for row in rows)
    return "\n".join(lines) + "\n"


def read_csv(text: str) -> tuple[list[str], list[list[str]], list[str]]:
    """Parse our CSV output back into (header, rows, metadata lines)."""
    meta, body = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            meta.append(line[1:].strip())
        elif line.strip():
            body.append(line.split(","))
    return body[0], body[1:], meta
