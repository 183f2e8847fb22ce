"""Run configuration: a flat, typed, sectioned key-value text format.

Grammar (one statement per line, '#' starts a comment):

    [mesh]
    box = <lx> <ly> <lz> <nx> <ny> <nz>     # or: file = path/to/mesh.txt
    [network]
    widths = 3 64 64 64 3
    seed = 0
    normalize_inputs = true
    zero_init = true
    [optimizer]
    lr = 0.5
    lbfgs_memory = 20
    patience = 10
    tol = 1e-6
    max_iters_per_step = 2000
    [material.<name>]                       # at least one
    mu = 384.62
    kappa = 833.33
    sigma_y0 = 50.0
    H = 500.0
    C = 0.0
    mode = isotropic                        # or kinematic
    elemset = <element set name>            # optional; at most one
                                            # material may omit it and
                                            # becomes the default
    [dirichlet.<name>]
    nodeset = <one or more node set names>
    axis = x                                # x, y or z
    value = const <v>                       # or: affine <a> <b> <c> <d>
                                            # meaning a*x + b*y + c*z + d
    [traction.<name>]
    sideset = <one or more side (or node) set names>
    vector = <tx> <ty> <tz>
    [loadsteps]
    factors = 0.5 1.0 0.5 0.0               # brackets and commas allowed

Unknown sections or keys are rejected with the offending line number.
Mesh file paths are resolved relative to the config file.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .bc import AXES, AFFINE, CONST, DirichletBC, LoadProgram, TractionBC
from .material import ElasticConstants, HardeningLaw
from .mesh import Mesh, generate_structured_box, read_mesh
from .solver import NetworkConfig, OptimizerConfig, Problem


class ConfigError(ValueError):
    pass


@dataclass
class MaterialSpec:
    name: str
    mu: float
    kappa: float
    sigma_y0: float
    H: float = 0.0
    C: float = 0.0
    mode: str = "isotropic"
    elemset: str | None = None


@dataclass
class DirichletSpec:
    name: str
    node_sets: tuple
    axis: str
    kind: str            # const | affine
    coeffs: tuple        # (a, b, c, d)


@dataclass
class TractionSpec:
    name: str
    side_sets: tuple
    vector: tuple


@dataclass
class ProblemSpec:
    """Parsed configuration, still independent of any mesh object."""

    mesh_box: tuple | None = None              # (lx, ly, lz, nx, ny, nz)
    mesh_file: str | None = None
    materials: list = field(default_factory=list)
    dirichlet: list = field(default_factory=list)
    tractions: list = field(default_factory=list)
    factors: tuple = ()
    network: NetworkConfig = field(default_factory=NetworkConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    name: str = "problem"


_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.-]+)\]$")

_BOOL = {"true": True, "false": False, "yes": True, "no": False,
         "1": True, "0": False}


def _err(where, msg):
    raise ConfigError(f"{where}: {msg}")


def _floats(where, text, n=None):
    toks = text.replace(",", " ").replace("[", " ").replace("]", " ").split()
    try:
        vals = [float(t) for t in toks]
    except ValueError:
        _err(where, f"expected numbers, got {text!r}")
    if n is not None and len(vals) != n:
        _err(where, f"expected {n} numbers, got {len(vals)}")
    return vals


def _ints(where, text, n=None):
    vals = _floats(where, text, n)
    out = [int(v) for v in vals]
    if any(o != v for o, v in zip(out, vals)):
        _err(where, f"expected integers, got {text!r}")
    return out


def _bool(where, text):
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        _err(where, f"expected true/false, got {text!r}")


def parse_config(path) -> ProblemSpec:
    """Parse a config file into a ProblemSpec, validating every key."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    name = os.path.basename(str(path))

    spec = ProblemSpec(name=os.path.splitext(name)[0])
    section = None          # (kind, subname, collected dict, line)
    pending = []            # completed raw sections

    def close_section():
        if section is not None:
            pending.append(section)

    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            close_section()
            full = m.group(1)
            kind, _, sub = full.partition(".")
            if kind in ("mesh", "network", "optimizer", "loadsteps"):
                if sub:
                    _err(f"{name}:{ln}", f"section [{full}] takes no sub-name")
            elif kind in ("material", "dirichlet", "traction"):
                if not sub:
                    _err(f"{name}:{ln}",
                         f"section [{kind}] needs a sub-name, e.g. "
                         f"[{kind}.steel]")
            else:
                _err(f"{name}:{ln}", f"unknown section [{full}]")
            section = (kind, sub, {}, ln)
            continue
        if "=" not in line:
            _err(f"{name}:{ln}", f"expected 'key = value', got {line!r}")
        if section is None:
            _err(f"{name}:{ln}", "key outside of any [section]")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in section[2]:
            _err(f"{name}:{ln}", f"duplicate key {key!r} in "
                 f"[{section[0]}{'.' + section[1] if section[1] else ''}]")
        section[2][key] = (value, ln)
    close_section()

    seen = set()
    for kind, sub, kv, ln in pending:
        where = f"{name}:{ln}"
        label = kind + ("." + sub if sub else "")
        if label in seen:
            _err(where, f"duplicate section [{label}]")
        seen.add(label)

        def need(key):
            if key not in kv:
                _err(where, f"section [{label}] is missing key {key!r}")
            return kv[key]

        def used(allowed):
            for key, (_, kln) in kv.items():
                if key not in allowed:
                    _err(f"{name}:{kln}",
                         f"unknown key {key!r} in section [{label}]")

        if kind == "mesh":
            used({"box", "file"})
            if "box" in kv and "file" in kv:
                _err(where, "[mesh] takes either box or file, not both")
            if "box" in kv:
                text, kln = kv["box"]
                vals = _floats(f"{name}:{kln}", text, 6)
                spec.mesh_box = (vals[0], vals[1], vals[2],
                                 int(vals[3]), int(vals[4]), int(vals[5]))
                if any(v != int(v) for v in vals[3:]):
                    _err(f"{name}:{kln}", "divisions must be integers")
            elif "file" in kv:
                spec.mesh_file = kv["file"][0]
            else:
                _err(where, "[mesh] needs box = ... or file = ...")
        elif kind == "network":
            used({"widths", "seed", "normalize_inputs", "zero_init"})
            net = spec.network
            if "widths" in kv:
                text, kln = kv["widths"]
                w = tuple(_ints(f"{name}:{kln}", text))
                if len(w) < 2 or w[0] != 3 or w[-1] != 3:
                    _err(f"{name}:{kln}",
                         f"widths must run from 3 inputs to 3 outputs, "
                         f"got {text!r}")
                net = replace(net, widths=w)
            if "seed" in kv:
                text, kln = kv["seed"]
                net = replace(net, seed=_ints(f"{name}:{kln}", text, 1)[0])
            if "normalize_inputs" in kv:
                text, kln = kv["normalize_inputs"]
                net = replace(net, normalize_inputs=_bool(f"{name}:{kln}", text))
            if "zero_init" in kv:
                text, kln = kv["zero_init"]
                net = replace(net, zero_init=_bool(f"{name}:{kln}", text))
            spec.network = net
        elif kind == "optimizer":
            used({"lr", "lbfgs_memory", "patience", "tol",
                  "max_iters_per_step"})
            opt = spec.optimizer
            if "lr" in kv:
                text, kln = kv["lr"]
                opt = replace(opt, lr=_floats(f"{name}:{kln}", text, 1)[0])
            if "lbfgs_memory" in kv:
                text, kln = kv["lbfgs_memory"]
                opt = replace(opt,
                              lbfgs_memory=_ints(f"{name}:{kln}", text, 1)[0])
            if "patience" in kv:
                text, kln = kv["patience"]
                opt = replace(opt, patience=_ints(f"{name}:{kln}", text, 1)[0])
            if "tol" in kv:
                text, kln = kv["tol"]
                opt = replace(opt, tol=_floats(f"{name}:{kln}", text, 1)[0])
            if "max_iters_per_step" in kv:
                text, kln = kv["max_iters_per_step"]
                opt = replace(opt,
                              max_iters_per_step=_ints(f"{name}:{kln}",
                                                       text, 1)[0])
            spec.optimizer = opt
        elif kind == "loadsteps":
            used({"factors"})
            text, kln = need("factors")
            spec.factors = tuple(_floats(f"{name}:{kln}", text))
            if not spec.factors:
                _err(f"{name}:{kln}", "factors must not be empty")
        elif kind == "material":
            used({"mu", "kappa", "sigma_y0", "H", "C", "mode", "elemset"})
            get = lambda key, default: \
                _floats(f"{name}:{kv[key][1]}", kv[key][0], 1)[0] \
                if key in kv else default
            mspec = MaterialSpec(
                name=sub,
                mu=_floats(f"{name}:{need('mu')[1]}", need("mu")[0], 1)[0],
                kappa=_floats(f"{name}:{need('kappa')[1]}",
                              need("kappa")[0], 1)[0],
                sigma_y0=_floats(f"{name}:{need('sigma_y0')[1]}",
                                 need("sigma_y0")[0], 1)[0],
                H=get("H", 0.0), C=get("C", 0.0),
                mode=kv["mode"][0] if "mode" in kv else "isotropic",
                elemset=kv["elemset"][0] if "elemset" in kv else None)
            try:
                HardeningLaw(sigma_y0=mspec.sigma_y0, H=mspec.H, C=mspec.C,
                             mode=mspec.mode)
                ElasticConstants(mu=mspec.mu, kappa=mspec.kappa)
            except ValueError as exc:
                _err(where, f"material {sub!r}: {exc}")
            spec.materials.append(mspec)
        elif kind == "dirichlet":
            used({"nodeset", "axis", "value"})
            sets = tuple(need("nodeset")[0].split())
            if not sets:
                _err(where, "nodeset needs at least one set name")
            axis_text, axis_ln = need("axis")
            if axis_text not in AXES:
                _err(f"{name}:{axis_ln}", f"axis must be x, y or z, "
                     f"got {axis_text!r}")
            vtext, vln = need("value")
            parts = vtext.split(None, 1)
            if parts[0] == CONST:
                v = _floats(f"{name}:{vln}", parts[1] if len(parts) > 1
                            else "", 1)[0]
                kind_, coeffs = CONST, (0.0, 0.0, 0.0, v)
            elif parts[0] == AFFINE:
                vals = _floats(f"{name}:{vln}", parts[1] if len(parts) > 1
                               else "", 4)
                kind_, coeffs = AFFINE, tuple(vals)
            else:
                _err(f"{name}:{vln}",
                     f"value must start with 'const' or 'affine', "
                     f"got {parts[0]!r}")
            spec.dirichlet.append(DirichletSpec(name=sub, node_sets=sets,
                                                axis=axis_text, kind=kind_,
                                                coeffs=coeffs))
        elif kind == "traction":
            used({"sideset", "vector"})
            sets = tuple(need("sideset")[0].split())
            vtext, vln = need("vector")
            vec = tuple(_floats(f"{name}:{vln}", vtext, 3))
            spec.tractions.append(TractionSpec(name=sub, side_sets=sets,
                                               vector=vec))

    if spec.mesh_box is None and spec.mesh_file is None:
        _err(name, "config needs a [mesh] section with box or file")
    if not spec.materials:
        _err(name, "config needs at least one [material.<name>] section")
    if not spec.factors:
        _err(name, "config needs a [loadsteps] section with factors")
    return spec


def build_problem(spec: ProblemSpec, base_dir: str = ".") -> Problem:
    """Materialize a ProblemSpec: load or generate the mesh, assign
    per-element materials, and build BC objects."""
    if spec.mesh_file is not None:
        path = spec.mesh_file
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise FileNotFoundError(f"mesh file not found: {path}")
        mesh = read_mesh(path)
    else:
        lx, ly, lz, nx, ny, nz = spec.mesh_box
        mesh = generate_structured_box((lx, ly, lz), (nx, ny, nz))

    materials = []
    default_idx = None
    assigned = np.full(mesh.n_elements, -1, dtype=np.int64)
    for i, m in enumerate(spec.materials):
        materials.append((ElasticConstants(mu=m.mu, kappa=m.kappa),
                          HardeningLaw(sigma_y0=m.sigma_y0, H=m.H, C=m.C,
                                       mode=m.mode)))
        if m.elemset is None:
            if default_idx is not None:
                raise ConfigError("at most one material may omit 'elemset' "
                                  f"(both {spec.materials[default_idx].name!r} "
                                  f"and {m.name!r} do)")
            default_idx = i
        else:
            if m.elemset not in mesh.elem_sets:
                raise ConfigError(f"material {m.name!r}: unknown element set "
                                  f"{m.elemset!r}")
            ids = mesh.elem_sets[m.elemset]
            clash = assigned[ids] >= 0
            if np.any(clash):
                e = int(ids[np.flatnonzero(clash)[0]])
                raise ConfigError(f"element {e} assigned to two materials "
                                  f"({spec.materials[assigned[e]].name!r} and "
                                  f"{m.name!r})")
            assigned[ids] = i
    if default_idx is not None:
        assigned[assigned < 0] = default_idx
    elif np.any(assigned < 0):
        e = int(np.flatnonzero(assigned < 0)[0])
        raise ConfigError(f"element {e} has no material; add a material "
                          "without 'elemset' as the default")
    mesh.mat_id = assigned

    dirichlet = []
    for d in spec.dirichlet:
        for s in d.node_sets:
            if s not in mesh.node_sets:
                raise ConfigError(f"dirichlet {d.name!r}: unknown node set "
                                  f"{s!r}")
        dirichlet.append(DirichletBC(node_sets=d.node_sets, axis=AXES[d.axis],
                                     coeffs=d.coeffs, kind=d.kind, name=d.name))
    tractions = []
    for t in spec.tractions:
        for s in t.side_sets:
            if s not in mesh.side_sets and s not in mesh.node_sets:
                raise ConfigError(f"traction {t.name!r}: unknown side set "
                                  f"{s!r}")
        tractions.append(TractionBC(side_sets=t.side_sets, vector=t.vector,
                                    name=t.name))

    return Problem(mesh=mesh, materials=materials, dirichlet=dirichlet,
                   tractions=tractions, program=LoadProgram(factors=spec.factors),
                   network=spec.network, optimizer=spec.optimizer,
                   name=spec.name)


def _fmt_floats(vals) -> str:
    return " ".join(f"{v:.17g}" for v in vals)


def serialize_spec(spec: ProblemSpec) -> str:
    """Config text for a spec with every default filled in; parsing it
    back reproduces the same resolved problem."""
    out = []
    out.append("[mesh]")
    if spec.mesh_file is not None:
        out.append(f"file = {spec.mesh_file}")
    else:
        lx, ly, lz, nx, ny, nz = spec.mesh_box
        out.append(f"box = {_fmt_floats((lx, ly, lz))} {nx} {ny} {nz}")
    net = spec.network
    out += ["", "[network]",
            "widths = " + " ".join(str(w) for w in net.widths),
            f"seed = {net.seed}",
            f"normalize_inputs = {'true' if net.normalize_inputs else 'false'}",
            f"zero_init = {'true' if net.zero_init else 'false'}"]
    opt = spec.optimizer
    out += ["", "[optimizer]", f"lr = {opt.lr:.17g}",
            f"lbfgs_memory = {opt.lbfgs_memory}",
            f"patience = {opt.patience}", f"tol = {opt.tol:.17g}",
            f"max_iters_per_step = {opt.max_iters_per_step}"]
    for m in spec.materials:
        out += ["", f"[material.{m.name}]", f"mu = {m.mu:.17g}",
                f"kappa = {m.kappa:.17g}", f"sigma_y0 = {m.sigma_y0:.17g}",
                f"H = {m.H:.17g}", f"C = {m.C:.17g}", f"mode = {m.mode}"]
        if m.elemset is not None:
            out.append(f"elemset = {m.elemset}")
    for d in spec.dirichlet:
        value = f"const {d.coeffs[3]:.17g}" if d.kind == CONST \
            else "affine " + _fmt_floats(d.coeffs)
        out += ["", f"[dirichlet.{d.name}]",
                "nodeset = " + " ".join(d.node_sets),
                f"axis = {d.axis}", f"value = {value}"]
    for t in spec.tractions:
        out += ["", f"[traction.{t.name}]",
                "sideset = " + " ".join(t.side_sets),
                f"vector = {_fmt_floats(t.vector)}"]
    out += ["", "[loadsteps]", f"factors = {_fmt_floats(spec.factors)}", ""]
    return "\n".join(out)
