"""JSON channel specification files.

Format::

    {
      "d": 2,
      "input_distribution": [0.5, 0.5],          # optional, default uniform
      "outputs": [ [[[re, im], ...], ...], ... ],  # d matrices, entries [re, im]
      "symmetry": [ <unitary>, ... ]             # optional, one per input
    }

Matrices are lists of rows; every entry is a ``[re, im]`` pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from cqexp.errors import ValidationError
from cqexp.states import CQChannel, GroupAction, as_distribution, find_symmetry, uniform


@dataclass(frozen=True)
class ChannelSpec:
    channel: CQChannel
    distribution: np.ndarray
    symmetry_declared: bool


def _matrix(obj, where: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ValidationError(f"{where}: expected a non-empty list of rows")
    size = len(obj)
    out = np.zeros((size, size), dtype=complex)
    for i, row in enumerate(obj):
        if len(row) != size:
            raise ValidationError(f"{where}: row {i} has {len(row)} entries, expected {size}")
        for j, entry in enumerate(row):
            if (
                not isinstance(entry, list)
                or len(entry) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)
            ):
                raise ValidationError(f"{where}[{i}][{j}]: entries must be [re, im] number pairs")
            out[i, j] = complex(entry[0], entry[1])
    return out


def parse_spec(text: str, *, normalize: bool = False, detect_symmetry: bool = True) -> ChannelSpec:
    """Parse a channel spec.

    JSON syntax errors report line and column. With ``normalize`` the input
    distribution and output traces are rescaled to one instead of rejected.
    Without a symmetry block, a certifying action is searched among the
    built-in candidates (Pauli operators for qubits) when ``detect_symmetry``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec is not valid JSON: {exc.msg} at line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(raw, dict):
        raise ValidationError("spec must be a JSON object")
    unknown = set(raw) - {"d", "input_distribution", "outputs", "symmetry"}
    if unknown:
        raise ValidationError(f"unknown spec fields: {sorted(unknown)}")
    d = raw.get("d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise ValidationError("spec field 'd' must be an integer >= 2")
    outs = raw.get("outputs")
    if not isinstance(outs, list) or len(outs) != d:
        raise ValidationError(f"spec field 'outputs' must list {d} matrices")
    mats = [_matrix(o, f"outputs[{z}]") for z, o in enumerate(outs)]
    if normalize:
        mats = [m / np.trace(m).real if np.trace(m).real > 0 else m for m in mats]
    p = raw.get("input_distribution")
    dist = uniform(d) if p is None else as_distribution(p, d, normalize=normalize)
    sym = raw.get("symmetry")
    action = None
    if sym is not None:
        if not isinstance(sym, list) or len(sym) != d:
            raise ValidationError(f"spec field 'symmetry' must list {d} unitaries")
        action = GroupAction(tuple(_matrix(u, f"symmetry[{z}]") for z, u in enumerate(sym)))
    channel = CQChannel(d, tuple(mats), action)
    if action is None and detect_symmetry:
        found = find_symmetry(channel)
        if found is not None:
            channel = channel.with_symmetry(found)
    return ChannelSpec(channel, dist, sym is not None)


def load_spec(path: str, **kw) -> ChannelSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read spec file {path!r}: {exc.strerror}") from None
    return parse_spec(text, **kw)


def _encode(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m, dtype=complex)]


def spec_to_dict(channel: CQChannel, distribution=None, include_symmetry: bool = True) -> dict:
    out = {"d": channel.d}
    if distribution is not None:
        out["input_distribution"] = [float(x) for x in distribution]
    out["outputs"] = [_encode(o) for o in channel.outputs]
    if include_symmetry and channel.symmetry is not None:
        out["symmetry"] = [_encode(u) for u in channel.symmetry.unitaries]
    return out


def dump_spec(channel: CQChannel, distribution=None, include_symmetry: bool = True) -> str:
    return json.dumps(spec_to_dict(channel, distribution, include_symmetry), indent=2)
