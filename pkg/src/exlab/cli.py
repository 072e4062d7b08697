"""Config-driven experiment runner.

Usage::

    exlab <kind> --config cfg.json [--seed N] [--threads N] [--out DIR]
    exlab verify --config cfg.json
    exlab report --out DIR

``kind`` is one of check, simulate, couple, burgers, hydro, tree (or ``run``
to take it from the config).  Exit status: 0 success, 1 validation error,
2 runtime failure.  Every artifact except ``manifest.json`` is a pure
function of the config and seed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, burgers, hydro
from .coupling import CoupledState, discrepancy_counts, evolve_coupled
from .dynamics import (Closed, Periodic, Reservoir, SimClock, Window,
                       default_threads, evolve, field_from_counts, map_replicates,
                       sample_product, write_density_csv, write_snapshot)
from .kernels import (KernelError, SubgroupError, check_condition6,
                      enumerate_stationary_exponents, is_irreducible, make_lattice_kernel,
                      mean_vector, subgroup_check)
from .measures import (FamilyShape, GraphKernel, build_rooted_tree, build_tree_case,
                       check_theorem1, family_alpha, jung_extremality, rooted_tree_ratio,
                       tree_stationary_families)
from .profiles import ProfileError, profile_from_spec

KINDS = ("check", "simulate", "couple", "burgers", "hydro", "tree")
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

_num = {"type": "number"}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_vec = {"type": "array", "items": _num, "minItems": 1}
_ivec = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_profile = {"type": "object", "required": ["type"],
            "properties": {"type": {"enum": ["constant", "exponential", "step", "table",
                                             "indicator", "scaled"]}}}
_boundary = {"type": "object", "required": ["type"],
             "properties": {"type": {"enum": ["periodic", "closed", "reservoir"]},
                            "profile": _profile},
             "additionalProperties": False}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "replicates": {"type": "integer", "minimum": 1},
        "threads": {"type": "integer", "minimum": 1},
        "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "scales": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "output": {"type": "string"},
        "kernel": {
            "type": "object", "required": ["dim", "entries"], "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "entries": {"type": "array", "minItems": 1,
                            "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                      "prefixItems": [_ivec, _num]}},
            },
        },
        "profile": _profile,
        "window": {
            "type": "object", "required": ["lower", "upper"], "additionalProperties": False,
            "properties": {
                "lower": _ivec, "upper": _ivec,
                "boundary": {"oneOf": [_boundary, {"type": "array", "items": _boundary,
                                                   "minItems": 1}]},
            },
        },
        "check": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "v": {"type": "array", "items": _vec},
                "graph": {
                    "type": "object", "required": ["rates", "alpha"],
                    "additionalProperties": False,
                    "properties": {
                        "rates": {"type": "array", "items": {
                            "type": "array", "minItems": 3, "maxItems": 3,
                            "prefixItems": [{}, {}, {"type": "number", "minimum": 0}]}},
                        "alpha": {"type": "array", "items": {
                            "type": "array", "minItems": 2, "maxItems": 2,
                            "prefixItems": [{}, _prob]}},
                        "boundary": {"type": "array"},
                    },
                },
            },
        },
        "couple": {
            "type": "object", "required": ["layers"], "additionalProperties": False,
            "properties": {"layers": {"type": "array", "items": _profile, "minItems": 2},
                           "monotone": {"type": "boolean"}},
        },
        "burgers": {
            "type": "object", "required": ["problem", "left", "right"],
            "additionalProperties": False,
            "properties": {
                "problem": {"enum": ["riemann", "example3", "fv"]},
                "left": _prob, "right": _prob, "m": _num,
                "c": {"type": "number", "exclusiveMinimum": 0}, "x1": _num,
                "grid": {
                    "type": "object", "additionalProperties": False,
                    "required": ["y_min", "y_max"],
                    "properties": {"y_min": _num, "y_max": _num,
                                   "points": {"type": "integer", "minimum": 2},
                                   "cells": {"type": "integer", "minimum": 1},
                                   "dt": {"type": "number", "exclusiveMinimum": 0}},
                },
            },
        },
        "hydro": {
            "type": "object", "required": ["experiment"], "additionalProperties": False,
            "properties": {
                "experiment": {"enum": ["block", "local", "asep", "theorem11", "profile",
                                        "drift"]},
                "t": {"type": "number", "minimum": 0},
                "block": {"type": "array", "minItems": 2, "maxItems": 2, "items": _vec},
                "halo": _ivec,
                "safety": {"type": "number", "exclusiveMinimum": 0},
                "x": _vec,
                "radius": {"type": "integer", "minimum": 0},
                "p": {"type": "number"}, "left": _prob, "right": _prob,
                "half_width": {"type": "integer", "minimum": 1},
                "block_half": {"type": "integer", "minimum": 0},
                "variant": {"enum": [87, 88]}, "param": _num,
                "js": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "depths": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "half": {"oneOf": [{"type": "integer", "minimum": 1}, _ivec]},
                "v": _vec,
                "half_length": {"type": "integer", "minimum": 1},
                "width": {"type": "integer", "minimum": 1},
            },
        },
        "tree": {
            "type": "object", "required": ["case", "depth"], "additionalProperties": False,
            "properties": {
                "case": {"enum": [1, 2, 3, "rooted"]},
                "params": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                "q": _num,
                "depth": {"type": "integer", "minimum": 1, "maximum": 12},
                "q_grid": {"type": "array", "items": _num},
            },
        },
    },
}


class ConfigError(Exception):
    """Validation failure; ``pointer`` is a JSON pointer into the config."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate(cfg) -> None:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(cfg),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _pointer(err.absolute_path))


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    validate(cfg)
    return cfg


# -- object construction ---------------------------------------------------------

def _require(cfg, key, kind):
    if key not in cfg:
        raise ConfigError(f"'{key}' is required for kind={kind}", "")
    return cfg[key]


def build_kernel(cfg):
    spec = _require(cfg, "kernel", cfg["kind"])
    try:
        return make_lattice_kernel(spec["dim"], [(z, p) for z, p in spec["entries"]])
    except KernelError as exc:
        raise ConfigError(str(exc), "/kernel") from exc


def build_profile(spec, pointer):
    try:
        return profile_from_spec(spec)
    except (ProfileError, KeyError, TypeError, ValueError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        raise ConfigError(msg, pointer) from exc


def _boundary_from(spec, pointer):
    kind = spec["type"]
    if kind == "periodic":
        return Periodic()
    if kind == "closed":
        return Closed()
    if "profile" not in spec:
        raise ConfigError("reservoir boundary needs a profile", pointer)
    return Reservoir(build_profile(spec["profile"], pointer + "/profile"))


def build_window(cfg, dim):
    spec = _require(cfg, "window", cfg["kind"])
    if len(spec["lower"]) != dim or len(spec["upper"]) != dim:
        raise ConfigError(f"window corners must have {dim} coordinates", "/window")
    b = spec.get("boundary", {"type": "closed"})
    if isinstance(b, list):
        bounds = tuple(_boundary_from(x, f"/window/boundary/{i}") for i, x in enumerate(b))
    else:
        bounds = (_boundary_from(b, "/window/boundary"),) * dim
    try:
        return Window(tuple(spec["lower"]), tuple(spec["upper"]), bounds)
    except ValueError as exc:
        raise ConfigError(str(exc), "/window") from exc


def _times(cfg, default=(1.0,)):
    return [float(t) for t in cfg.get("times", default)]


# -- runners ---------------------------------------------------------------------
# Each runner returns (report dict, {filename: writer}).  Planning happens in
# ``plan_*`` so that ``verify`` can share it without simulating.

def _json_writer(obj):
    def write(path):
        with open(path, "w") as fh:
            fh.write(json.dumps(hydro._jsonable(obj), indent=2, sort_keys=True) + "\n")
    return write


def _csv_writer(header, rows):
    def write(path):
        hydro._write_rows(path, header, rows)
    return write


def plan_check(cfg):
    k = build_kernel(cfg)
    sec = cfg.get("check", {})
    for i, v in enumerate(sec.get("v", [])):
        if len(v) != k.dim:
            raise ConfigError(f"v must have {k.dim} coordinates", f"/check/v/{i}")
    graph = None
    if "graph" in sec:
        g = sec["graph"]
        key = lambda s: tuple(s) if isinstance(s, list) else s
        sites = []
        rates = {}
        for x, y, p in g["rates"]:
            x, y = key(x), key(y)
            rates[(x, y)] = float(p)
            for s in (x, y):
                if s not in sites:
                    sites.append(s)
        alpha = {key(s): float(a) for s, a in g["alpha"]}
        missing = [s for s in sites if s not in alpha]
        if missing:
            raise ConfigError(f"no density for sites {missing}", "/check/graph/alpha")
        try:
            gk = GraphKernel.from_rates(sites, rates,
                                        boundary=[key(s) for s in g.get("boundary", [])])
        except ValueError as exc:
            raise ConfigError(str(exc), "/check/graph") from exc
        graph = (gk, alpha)
    return {"kernel": k, "v": sec.get("v", []), "graph": graph, "budget": 0.0}


def run_check(cfg, plan, threads):
    k = plan["kernel"]
    rep = {"dim": k.dim, "kernel": k.to_literal(), "mean": mean_vector(k),
           "subgroup": subgroup_check(k), "irreducible": is_irreducible(k)}
    rows = []
    try:
        exps = enumerate_stationary_exponents(k)
        rep["exponents"] = [np.round(v, 12) + 0.0 for v in exps]
        rows = [list(np.round(v, 12) + 0.0) for v in exps]
    except SubgroupError as exc:
        rep["exponents"] = None
        rep["subgroup_witness"] = {"basis": exc.basis, "index": exc.index}
    rep["condition6"] = [{"v": v, "holds": check_condition6(k, v)} for v in plan["v"]]
    if plan["graph"] is not None:
        res = check_theorem1(*plan["graph"])
        rep["graph"] = {"stationary": res.stationary, "reversible": res.reversible,
                           "partition": [[str(s) for s in c] for c in res.partition],
                           "failures": res.failures}
    files = {"report.json": _json_writer(rep),
             "exponents.csv": _csv_writer([f"v{i + 1}" for i in range(k.dim)], rows)}
    return rep, files


def plan_simulate(cfg):
    k = build_kernel(cfg)
    w = build_window(cfg, k.dim)
    prof = build_profile(_require(cfg, "profile", "simulate"), "/profile")
    times = sorted(_times(cfg))
    reps = cfg.get("replicates", 1)
    rho = float(np.mean(prof.density(w.sites()[:: max(1, w.size // 4096)])))
    return {"kernel": k, "window": w, "profile": prof, "times": times, "replicates": reps,
            "budget": w.size * max(rho, 1e-3) * times[-1] * reps}


def run_simulate(cfg, plan, threads):
    k, w, prof, times = plan["kernel"], plan["window"], plan["profile"], plan["times"]
    reps, seed = plan["replicates"], cfg.get("seed", 0)

    def one(rep):
        clock = SimClock(seed, rep)
        cfg0 = sample_product(prof, w, clock.rng)
        snaps = []
        for t in times:
            cfg0 = evolve(cfg0, k, t, clock)
            snaps.append(cfg0.occupancy.astype(np.int64))
        return snaps, (cfg0 if rep == 0 else None), clock.events

    out = map_replicates(one, reps, threads)
    files = {}
    summary = []
    for i, t in enumerate(times):
        counts = sum(o[0][i] for o in out)
        fld = field_from_counts(w, counts, reps)
        parts = [int(o[0][i].sum()) for o in out]
        summary.append({"t": t, "mean_density": float(fld.mean.mean()),
                        "mean_particles": float(np.mean(parts)), "particles": parts})
        files[f"density_t{i}.csv"] = (lambda f: lambda p: write_density_csv(f, p))(fld)
    final = out[0][1]
    files["snapshot.bin"] = lambda p: write_snapshot(final, p, times[-1], seed)
    rep = {"window": w.to_spec(), "kernel": k.to_literal(), "profile": prof.to_spec(),
           "replicates": reps, "times": times, "summary": summary,
           "events": [int(o[2]) for o in out]}
    files["report.json"] = _json_writer(rep)
    return rep, files


def plan_couple(cfg):
    k = build_kernel(cfg)
    w = build_window(cfg, k.dim)
    sec = _require(cfg, "couple", "couple")
    layers = [build_profile(s, f"/couple/layers/{i}") for i, s in enumerate(sec["layers"])]
    monotone = bool(sec.get("monotone", False))
    if monotone:
        sites = w.sites()
        dens = np.stack([p.density(sites) for p in layers])
        if (np.diff(dens, axis=0) < 0).any():
            raise ConfigError("monotone coupling needs sitewise increasing layer profiles",
                              "/couple/layers")
    times = sorted(_times(cfg))
    reps = cfg.get("replicates", 1)
    return {"kernel": k, "window": w, "layers": layers, "monotone": monotone,
            "times": times, "replicates": reps,
            "budget": w.size * len(layers) * times[-1] * reps}


def run_couple(cfg, plan, threads):
    k, w, layers, times = plan["kernel"], plan["window"], plan["layers"], plan["times"]
    seed = cfg.get("seed", 0)
    sites = w.sites()

    def one(rep):
        clock = SimClock(seed, rep)
        # shared uniforms give the sitewise-ordered coupling of product measures
        u = clock.rng.random(w.size)
        occ = np.stack([(u < p.density(sites)).astype(np.uint8) for p in layers])
        state = CoupledState(w, occ, plan["monotone"])
        series = []
        counts = []
        for t in times:
            state = evolve_coupled(state, k, t, clock)
            series.append(state.history)
            counts.append({f"{a}-{b}": list(c) for (a, b), c in discrepancy_counts(state).items()})
        return series, counts

    out = map_replicates(one, plan["replicates"], threads)
    files = {}
    for r, (series, _) in enumerate(out):
        rows = []
        for s in series:
            for t, p, a, b in zip(s.time, s.pair, s.count_10, s.count_01):
                rows.append((float(t), int(p), int(a), int(b)))
        files[f"discrepancy_r{r}.csv"] = _csv_writer(["time", "pair", "count_10", "count_01"], rows)
    rep = {"window": w.to_spec(), "kernel": k.to_literal(),
           "layers": [p.to_spec() for p in layers], "monotone": plan["monotone"],
           "times": times, "pairs": [list(p) for p in CoupledState(
               w, np.zeros((len(layers), w.size), dtype=np.uint8)).pairs()],
           "counts": [c for _, c in out]}
    files["report.json"] = _json_writer(rep)
    return rep, files


def _sample_points(grid):
    n = grid.get("points", 401)
    ys = np.linspace(grid["y_min"], grid["y_max"], n)
    ys[np.abs(ys) < 1e-12] = 0.0
    return ys


def plan_burgers(cfg):
    sec = _require(cfg, "burgers", "burgers")
    l, r, m = float(sec["left"]), float(sec["right"]), float(sec.get("m", 1.0))
    grid = sec.get("grid", {"y_min": -2.0, "y_max": 2.0})
    if grid["y_max"] <= grid["y_min"]:
        raise ConfigError("y_max must exceed y_min", "/burgers/grid")
    times = sorted(_times(cfg))
    plan = {"problem": sec["problem"], "left": l, "right": r, "m": m, "grid": grid,
            "times": times, "budget": 0.0}
    if sec["problem"] == "example3":
        if l == r:
            raise ConfigError("example3 needs left != right", "/burgers")
        if "c" not in sec or "x1" not in sec:
            raise ConfigError("example3 needs c and x1", "/burgers")
        plan["c"], plan["x1"] = float(sec["c"]), float(sec["x1"])
    if sec["problem"] == "fv":
        n = grid.get("cells", 400)
        dx = (grid["y_max"] - grid["y_min"]) / n
        limit = burgers.max_stable_dt(dx, m)
        dt = grid.get("dt")
        if dt is not None and dt > limit * (1 + 1e-12):
            raise ConfigError(str(burgers.CFLViolation(dt, limit)) +
                              f"; max admissible dt = {limit!r}", "/burgers/grid/dt")
        plan["cells"], plan["dt"] = n, dt
        step = dt if dt is not None else 0.45 * limit
        plan["budget"] = n * (times[-1] / step if math.isfinite(step) else 1.0)
    return plan


def run_burgers(cfg, plan, threads):
    l, r, m, times, grid = plan["left"], plan["right"], plan["m"], plan["times"], plan["grid"]
    files = {}
    rep = {"problem": plan["problem"], "left": l, "right": r, "m": m, "times": times}
    prob = burgers.RiemannProblem(l, r, m)
    if plan["problem"] == "riemann":
        ys = _sample_points(grid)
        vals = np.array([prob.value(t, ys) for t in times])
        rep["structure"] = [prob.structure(t) for t in times]
        files["structure.json"] = _json_writer(rep["structure"])
    elif plan["problem"] == "example3":
        c, x1 = plan["c"], plan["x1"]
        ys = _sample_points(grid)
        vals = np.array([burgers.example3_solution(l, r, c, x1, t, ys, m) for t in times])
        rep.update(c=c, x1=x1, meeting_time=burgers.example3_meeting_time(l, r, c, x1, m))
        rep["front"] = [burgers.example3_front(l, r, c, x1, t, m) if t > 0 and x1 > 0 and m != 0 else None
                        for t in times]
    else:
        g = burgers.make_grid(lambda y: prob.value(0.0, y), grid["y_min"], grid["y_max"],
                              plan["cells"], m, l, r)
        limit = burgers.max_stable_dt(g.dx, m)
        dt = plan["dt"] or (0.45 * limit if math.isfinite(limit) else None)
        ys = g.centers
        vals, l1, mass = [], [], []
        for t in times:
            while dt is not None and g.time < t - 1e-14:
                burgers.fv_step(g, min(dt, t - g.time))
            g.time = max(g.time, t)
            vals.append(g.u.copy())
            l1.append(burgers.l1_distance(g, lambda y, t=t: prob.value(t, y)))
            mass.append(g.mass_defect())
        vals = np.array(vals)
        rep.update(cells=g.n, dx=g.dx, dt=dt, l1_error=l1, mass_defect=mass,
                   clamped=g.clamped, steps=g.steps)
    files["field.csv"] = lambda p: burgers.write_field_csv(p, times, ys, vals)
    files["report.json"] = _json_writer(rep)
    return rep, files


def plan_hydro(cfg):
    sec = _require(cfg, "hydro", "hydro")
    ex = sec["experiment"]
    seed = cfg.get("seed", 0)
    reps = cfg.get("replicates", 20)
    plan = {"experiment": ex, "sec": sec, "replicates": reps}
    try:
        if ex in ("block", "local"):
            k = build_kernel(cfg)
            u0 = build_profile(_require(cfg, "profile", "hydro"), "/profile")
            block = sec.get("block")
            if block is not None and any(len(c) != k.dim for c in block):
                raise ConfigError(f"block corners must have {k.dim} coordinates", "/hydro/block")
            e = hydro.HydroExperiment(k, u0, tuple(cfg.get("scales", (20, 50, 100))),
                                      float(sec.get("t", 1.0)),
                                      None if block is None else tuple(map(tuple, block)),
                                      reps, seed, None if "halo" not in sec else tuple(sec["halo"]),
                                      float(sec.get("safety", 4.0)))
            e.check()
            if ex == "local":
                if "x" not in sec or len(sec["x"]) != k.dim:
                    raise ConfigError(f"x must have {k.dim} coordinates", "/hydro/x")
            plan.update(e=e, budget=e.event_budget())
        elif ex == "asep":
            p = float(sec.get("p", 1.0))
            if not 0.5 < p <= 1.0:
                raise ConfigError("p must lie in (1/2, 1]", "/hydro/p")
            hw = int(sec.get("half_width", 1000))
            if int(sec.get("block_half", 20)) >= hw:
                raise ConfigError("block_half must be below half_width", "/hydro/block_half")
            plan["budget"] = 2 * hw * max(_times(cfg)) * reps
        elif ex == "theorem11":
            variant, param = sec.get("variant", 87), float(sec.get("param", 0.4))
            hydro.theorem11_kernel(variant, param)
            half = sec.get("half", 100)
            if isinstance(half, list):
                half = min(half)
            js = sec.get("js", [4])
            depths = sec.get("depths", list(range(9)))
            need = 2 * max(list(js) + list(depths) + [0]) + 10
            if half < need:
                raise hydro.HaloError([need, need], [half, half])
            plan["budget"] = (2 * half) ** 2 * 0.25 * max(_times(cfg)) * reps
        elif ex in ("profile", "drift"):
            k = build_kernel(cfg)
            if "v" not in sec or len(sec["v"]) != k.dim:
                raise ConfigError(f"v must have {k.dim} coordinates", "/hydro/v")
            if ex == "profile" and not check_condition6(k, sec["v"]):
                raise ConfigError("kernel and v fail the stationary-exponent condition", "/hydro/v")
            if ex == "drift":
                m = mean_vector(k)
                if float(m @ np.asarray(sec["v"], dtype=float)) >= 0:
                    raise ConfigError("drift experiment needs <m, v> < 0", "/hydro/v")
            half = sec.get("half", 10)
            size = (2 * half) ** k.dim if isinstance(half, int) else int(np.prod(np.multiply(2, half)))
            plan.update(kernel=k, budget=size * max(_times(cfg)) * reps)
    except hydro.HaloError as exc:
        raise ConfigError(str(exc) + f" (required {exc.required})", "/hydro") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "/hydro") from exc
    return plan


def run_hydro(cfg, plan, threads):
    sec, ex, reps = plan["sec"], plan["experiment"], plan["replicates"]
    seed = cfg.get("seed", 0)
    times = _times(cfg)
    if ex == "block":
        e = plan["e"]
        e.threads = threads
        res = hydro.block_average_test(e)
    elif ex == "local":
        e = plan["e"]
        e.threads = threads
        res = hydro.local_limit_test(e, sec["x"], int(sec.get("radius", 5)))
    elif ex == "asep":
        res = hydro.asep_limit_experiment(float(sec.get("p", 1.0)), float(sec.get("left", 0.0)),
                                          float(sec.get("right", 1.0)), times,
                                          int(sec.get("half_width", 1000)), reps,
                                          int(sec.get("block_half", 20)), seed, threads)
    elif ex == "theorem11":
        half = sec.get("half", 100)
        res = hydro.theorem11_experiment(sec.get("variant", 87), float(sec.get("param", 0.4)),
                                         sec.get("js", [4]), times,
                                         min(half) if isinstance(half, list) else half, reps,
                                         seed, sec.get("depths", list(range(9))), threads)
    elif ex == "profile":
        res = hydro.profile_convergence_experiment(plan["kernel"], sec["v"], times,
                                                   sec.get("half", 10), reps, seed,
                                                   threads=threads)
    else:
        res = hydro.drift_experiment(plan["kernel"], sec["v"], times,
                                     int(sec.get("half_length", 200)), int(sec.get("width", 20)),
                                     reps, seed, float(sec.get("left", 0.0)),
                                     float(sec.get("right", 1.0)), threads)
    rep = res.to_dict()
    files = {"report.json": _json_writer(rep)}
    if hasattr(res, "to_csv"):
        files["table.csv"] = res.to_csv
    return rep, files


def plan_tree(cfg):
    sec = _require(cfg, "tree", "tree")
    case, depth = sec["case"], sec["depth"]
    try:
        if case == "rooted":
            if "q" not in sec:
                raise ConfigError("rooted tree needs q", "/tree")
            build_rooted_tree(float(sec["q"]), depth)
        else:
            if "params" not in sec:
                raise ConfigError("tree case needs params [q, r, s]", "/tree")
            build_tree_case(case, tuple(sec["params"]), depth)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "/tree") from exc
    for i, q in enumerate(sec.get("q_grid", [])):
        if not 0 < q < 0.5:
            raise ConfigError("q must lie in (0, 1/2)", f"/tree/q_grid/{i}")
    return {"sec": sec, "budget": 0.0}


def run_tree(cfg, plan, threads):
    sec = plan["sec"]
    case, depth = sec["case"], sec["depth"]
    if case == "rooted":
        model, gk = build_rooted_tree(float(sec["q"]), depth)
    else:
        model, gk = build_tree_case(case, tuple(sec["params"]), depth)
    fams = []
    for f in tree_stationary_families(model):
        res = check_theorem1(gk, family_alpha(f), exempt=model.leaves)
        entry = {"name": f.name, "homogeneous": f.homogeneous, "reversible": f.reversible,
                 "stationary": res.stationary, "measure_reversible": res.reversible,
                 "failures": res.failures}
        if case == "rooted" and f.reversible:
            lam = rooted_tree_ratio(float(sec["q"]))
            entry["ratio"] = lam
            entry["extremality"] = jung_extremality(FamilyShape("rooted_tree", lam))
        elif f.homogeneous:
            entry["extremality"] = jung_extremality(FamilyShape("constant"))
        fams.append(entry)
    grid = []
    for q in sec.get("q_grid", []):
        lam = rooted_tree_ratio(q)
        grid.append((q, lam, jung_extremality(FamilyShape("rooted_tree", lam))))
    rep = {"case": case, "depth": depth, "params": list(model.params),
           "vertices": len(model.vertices), "families": fams,
           "q_grid": [{"q": q, "ratio": lam, "verdict": v} for q, lam, v in grid]}
    files = {"report.json": _json_writer(rep)}
    if grid:
        files["extremality.csv"] = _csv_writer(["q", "ratio", "verdict"], grid)
    return rep, files


PLANS = {"check": plan_check, "simulate": plan_simulate, "couple": plan_couple,
         "burgers": plan_burgers, "hydro": plan_hydro, "tree": plan_tree}
RUNNERS = {"check": run_check, "simulate": run_simulate, "couple": run_couple,
           "burgers": run_burgers, "hydro": run_hydro, "tree": run_tree}


# -- plumbing --------------------------------------------------------------------

def version_string() -> str:
    """``git describe``-style version: release tag, commit and dirty flag when known."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "-C", str(here), "describe", "--always", "--dirty",
                              "--tags"], capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def effective_config(path, seed=None, kind=None) -> dict:
    cfg = load_config(path)
    if kind is not None and kind != "run" and cfg["kind"] != kind:
        raise ConfigError(f"config kind {cfg['kind']!r} does not match subcommand {kind!r}", "/kind")
    if seed is not None:
        cfg = copy.deepcopy(cfg)
        cfg["seed"] = seed
        validate(cfg)
    return cfg


def run(cfg: dict, out_dir, threads: int | None = None) -> dict:
    """Execute ``cfg`` and write its artifacts; returns the report."""
    start = time.perf_counter()
    plan = PLANS[cfg["kind"]](cfg)
    threads = threads or cfg.get("threads") or default_threads()
    rep, files = RUNNERS[cfg["kind"]](cfg, plan, threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        files[name](out / name)
    manifest = {"config": cfg, "seed": cfg.get("seed", 0), "version": version_string(),
                "wall_time": time.perf_counter() - start, "artifacts": sorted(files)}
    with open(out / "manifest.json", "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return rep


def verify(cfg: dict) -> dict:
    plan = PLANS[cfg["kind"]](cfg)
    return {"status": "OK", "kind": cfg["kind"], "budget": float(plan["budget"])}


def render_report(out_dir) -> str:
    out = Path(out_dir)
    with open(out / "manifest.json") as fh:
        man = json.load(fh)
    lines = [f"kind: {man['config']['kind']}", f"seed: {man['seed']}",
             f"version: {man['version']}", f"wall time: {man['wall_time']:.3f} s"]
    rep_path = out / "report.json"
    if rep_path.exists():
        with open(rep_path) as fh:
            rep = json.load(fh)
        if isinstance(rep, dict):
            for k in sorted(rep):
                if isinstance(rep[k], (int, float, str, bool)) or rep[k] is None:
                    lines.append(f"{k}: {rep[k]}")
    for name in man.get("artifacts", []):
        if not name.endswith(".csv"):
            continue
        with open(out / name, newline="") as fh:
            rows = list(csv.reader(fh))
        lines.append(f"\n{name} ({max(len(rows) - 1, 0)} rows)")
        if rows:
            widths = [max(len(r[i]) if i < len(r) else 0 for r in rows[:11])
                      for i in range(len(rows[0]))]
            for r in rows[:11]:
                lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exlab", description="exclusion-process experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in KINDS + ("run", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out")
    p = sub.add_parser("report")
    p.add_argument("--out")
    p.add_argument("--config")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            out = args.out
            if out is None and args.config:
                out = load_config(args.config).get("output", "exlab-out")
            print(render_report(out or "exlab-out"))
            return EXIT_OK
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "/seed")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("threads must be >= 1", "/threads")
        kind = None if args.command == "verify" else args.command
        cfg = effective_config(args.config, args.seed, kind)
        if args.command == "verify":
            res = verify(cfg)
            print(f"OK  kind={res['kind']}  estimated events={res['budget']:.3g}")
            return EXIT_OK
        out = args.out or cfg.get("output", "exlab-out")
        run(cfg, out, args.threads)
        print(f"wrote {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"validation error at {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
