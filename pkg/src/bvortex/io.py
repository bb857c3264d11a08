"""JSON and CSV serialization for domains, configs, fields and measures."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .canonical import BoundaryVortexConfig
from .errors import ConfigError
from .geometry import ConformalDomain


def load_json(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def read_domain(path) -> ConformalDomain:
    return ConformalDomain.from_json(load_json(path))


def write_domain(domain: ConformalDomain, path):
    Path(path).write_text(json.dumps(domain.to_json(), indent=2) + "\n")


def config_to_json(config: BoundaryVortexConfig):
    return {"thetas": list(config.thetas), "degrees": list(config.degrees)}


def read_config(path) -> BoundaryVortexConfig:
    obj = load_json(path)
    try:
        return BoundaryVortexConfig(obj["thetas"], obj["degrees"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: need 'thetas' and 'degrees' lists") from exc


def write_config(config: BoundaryVortexConfig, path):
    Path(path).write_text(json.dumps(config_to_json(config), indent=2) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_field(field, path):
    third = field.third
    header = ["vertex", "ux", "uy"] + (["uz"] if third is not None else [])
    rows = []
    for i, (a, b) in enumerate(field.values):
        rows.append([i, a, b] + ([third[i]] if third is not None else []))
    write_csv(path, header, rows)


def read_field(path, mesh, mode="s1"):
    from .fields import VectorField

    header, rows = read_csv(path)
    if header[:3] != ["vertex", "ux", "uy"]:
        raise ConfigError(f"{path}: expected columns vertex, ux, uy[, uz]")
    data = np.array([[float(v) for v in r] for r in rows])
    if data.shape[0] != mesh.n_vertices:
        raise ConfigError(f"{path}: {data.shape[0]} rows for a mesh with {mesh.n_vertices} vertices")
    order = np.argsort(data[:, 0])
    data = data[order]
    third = data[:, 3] if data.shape[1] > 3 else None
    if mode == "s1":
        n = np.hypot(data[:, 1], data[:, 2])
        data[:, 1:3] /= n[:, None]
    return VectorField(mesh, data[:, 1:3], third, mode)


def write_measure(measure, path):
    write_csv(path, ["arclength", "weight"], measure.atoms)
