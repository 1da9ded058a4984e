"""Checkpoint files: a text manifest followed by raw float32 payloads.

Layout (all header lines UTF-8, newline-terminated):

    aeronav-checkpoint 1
    kind <agent kind>
    iteration <int>
    seed <int>
    metric <name> <float>            (zero or more lines)
    config <sorted-key JSON object>
    tensors <count>
    <name> <rows> <cols>             (count manifest lines)
    end
    <binary: little-endian float32, row-major, manifest order>

Tensors are written in sorted-name order so identical parameter dicts always
produce identical bytes.  Parameters round-trip through float32 — that is the
storage precision — and come back as float64 arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAGIC = "aeronav-checkpoint"
VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    iteration: int
    seed: int
    params: dict[str, np.ndarray]
    config: dict = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.kind or any(ch.isspace() for ch in self.kind):
            raise ValueError(f"kind must be a single word, got {self.kind!r}")
        if self.iteration < 0:
            raise ValueError("iteration must be non-negative")
        for name, p in self.params.items():
            if p.ndim != 2:
                raise ValueError(
                    f"parameter {name!r} must be 2-D, got shape {p.shape}")
            if any(ch.isspace() for ch in name):
                raise ValueError(f"parameter name {name!r} contains whitespace")


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    names = sorted(ckpt.params)
    lines = [
        f"{MAGIC} {VERSION}",
        f"kind {ckpt.kind}",
        f"iteration {ckpt.iteration}",
        f"seed {ckpt.seed}",
    ]
    for mname in sorted(ckpt.metrics):
        lines.append(f"metric {mname} {float(ckpt.metrics[mname])!r}")
    lines.append("config " + json.dumps(ckpt.config, sort_keys=True))
    lines.append(f"tensors {len(names)}")
    for name in names:
        p = ckpt.params[name]
        lines.append(f"{name} {p.shape[0]} {p.shape[1]}")
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for name in names:
            fh.write(np.ascontiguousarray(
                ckpt.params[name], dtype="<f4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()

    # split the text header from the binary payload at the `end` line
    marker = b"\nend\n"
    cut = blob.find(marker)
    if cut < 0:
        raise ValueError("not a checkpoint file: missing manifest terminator")
    header = blob[:cut].decode("utf-8").splitlines()
    payload = blob[cut + len(marker):]

    def fail(msg: str):
        raise ValueError(f"malformed checkpoint: {msg}")

    if not header or header[0].split() != [MAGIC, str(VERSION)]:
        fail(f"bad magic line {header[0] if header else '<empty>'!r}")
    fields: dict[str, str] = {}
    metrics: dict[str, float] = {}
    i = 1
    while i < len(header):
        key, _, rest = header[i].partition(" ")
        if key == "metric":
            mname, _, mval = rest.partition(" ")
            metrics[mname] = float(mval)
        elif key in ("kind", "iteration", "seed", "config", "tensors"):
            fields[key] = rest
        else:
            fail(f"unexpected header line {header[i]!r}")
        i += 1
        if key == "tensors":
            break
    for required in ("kind", "iteration", "seed", "config", "tensors"):
        if required not in fields:
            fail(f"missing {required!r} line")

    count = int(fields["tensors"])
    manifest = header[i:]
    if len(manifest) != count:
        fail(f"manifest lists {len(manifest)} tensors, header says {count}")

    params: dict[str, np.ndarray] = {}
    offset = 0
    for line in manifest:
        parts = line.split()
        if len(parts) != 3:
            fail(f"bad manifest line {line!r}")
        name, rows, cols = parts[0], int(parts[1]), int(parts[2])
        nbytes = rows * cols * 4
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            fail(f"payload truncated at tensor {name!r}")
        params[name] = np.frombuffer(chunk, dtype="<f4").astype(
            np.float64).reshape(rows, cols)
        offset += nbytes
    if offset != len(payload):
        fail(f"{len(payload) - offset} trailing payload bytes")

    return Checkpoint(
        kind=fields["kind"],
        iteration=int(fields["iteration"]),
        seed=int(fields["seed"]),
        params=params,
        config=json.loads(fields["config"]),
        metrics=metrics,
    )
