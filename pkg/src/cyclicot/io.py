"""File formats: instance/potential/certificate JSON and plan CSV.

Floats are written with 17 significant digits and objects keep a fixed key
order, so writing the same data twice gives byte-identical files and reading
a file back recovers every float exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .core import (AffineMap, Box, DiscreteMeasure, Instance, Plan, PotentialSet,
                   QuadraticPotential, TabulatedPotential)


class FormatError(ValueError):
    """Input file does not follow the expected schema."""


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with 17-significant-digit floats; dict order is preserved."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric rows stay on one line
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


# instances

def instance_to_dict(instance: Instance) -> dict:
    return {
        "m": instance.m,
        "n": instance.n,
        "F": {"matrix": instance.F.matrix, "offset": instance.F.offset},
        "marginals": [
            {"points": mu.points, "weights": mu.weights,
             "box": {"lo": mu.box.lo, "hi": mu.box.hi}}
            for mu in instance.marginals
        ],
    }


def instance_from_dict(d: dict) -> Instance:
    try:
        F = AffineMap(np.asarray(d["F"]["matrix"], dtype=float),
                      np.asarray(d["F"]["offset"], dtype=float))
        marginals = []
        for md in d["marginals"]:
            box = Box(md["box"]["lo"], md["box"]["hi"]) if "box" in md else None
            marginals.append(DiscreteMeasure(np.asarray(md["points"], dtype=float),
                                             np.asarray(md["weights"], dtype=float), box))
        inst = Instance(tuple(marginals), F)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed instance: {exc}") from exc
    if int(d.get("m", inst.m)) != inst.m or int(d.get("n", inst.n)) != inst.n:
        raise FormatError("declared m/n do not match the marginals")
    return inst


def write_instance(instance: Instance, path) -> None:
    write_json(instance_to_dict(instance), path)


def read_instance(path) -> Instance:
    return instance_from_dict(read_json(path))


# plans

def plan_to_csv(plan: Plan) -> str:
    buf = io.StringIO()
    m = plan.instance.m
    buf.write(",".join([f"i{k + 1}" for k in range(m)] + ["mass"]) + "\n")
    for idx, w in zip(plan.indices.tolist(), plan.masses.tolist()):
        buf.write(",".join([str(i) for i in idx] + [_fmt_float(w)]) + "\n")
    return buf.getvalue()


def write_plan(plan: Plan, path) -> None:
    Path(path).write_text(plan_to_csv(plan))


def read_plan(path, instance: Instance) -> Plan:
    """Plan CSV with 0-based support indices i1..im and a mass column."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty plan file")
    header, body = rows[0], [r for r in rows[1:] if r]
    expected = [f"i{k + 1}" for k in range(instance.m)] + ["mass"]
    if [h.strip() for h in header] != expected:
        raise FormatError(f"{path}: header {header} does not match {expected}")
    if not body:
        raise FormatError(f"{path}: plan has no entries")
    try:
        idx = np.array([[int(v) for v in r[:-1]] for r in body], dtype=np.int64)
        masses = np.array([float(r[-1]) for r in body])
        return Plan(instance, idx, masses)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


# potentials

def potentials_to_dict(potentials: PotentialSet) -> dict:
    out = []
    for u in potentials.potentials:
        if isinstance(u, QuadraticPotential):
            out.append({"kind": "quadratic", "Q": u.Q, "l": u.l, "q0": u.q0})
        else:
            out.append({"kind": "tabulated", "values": u.values})
    return {"potentials": out}


def potentials_from_dict(d: dict) -> PotentialSet:
    try:
        items = []
        for p in d["potentials"]:
            if p["kind"] == "quadratic":
                items.append(QuadraticPotential(np.asarray(p["Q"], dtype=float),
                                                np.asarray(p["l"], dtype=float), float(p["q0"])))
            elif p["kind"] == "tabulated":
                items.append(TabulatedPotential(np.asarray(p["values"], dtype=float)))
            else:
                raise ValueError(f"unknown potential kind {p['kind']!r}")
        return PotentialSet(tuple(items))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed potentials: {exc}") from exc


def write_potentials(potentials: PotentialSet, path, extra: dict | None = None) -> None:
    d = potentials_to_dict(potentials)
    if extra:
        d.update(extra)
    write_json(d, path)


def read_potentials(path) -> PotentialSet:
    return potentials_from_dict(read_json(path))


# counterexample packages

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def package_to_dict(pkg) -> dict:
    return {
        "kind": pkg.kind,
        "expected_support_dim": pkg.expected_support_dim,
        "support_parametrization": _plain(pkg.support_parametrization),
        "notes": _plain(pkg.notes),
        "instance": instance_to_dict(pkg.instance),
        "plan": {"indices": pkg.plan.indices, "masses": pkg.plan.masses},
        "potentials": potentials_to_dict(pkg.potentials)["potentials"],
    }
