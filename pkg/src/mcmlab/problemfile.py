"""Declarative TOML problem files: one ring, named modules/filtrations/sequences.

Layout:

    [ring]
    vars = 2
    field = 32003          # 0 for the rationals, otherwise a prime
    relations = ["x*y"]

    [options]              # optional
    cap_dim = 200000

    [modules.Mx]
    mf = { phi = [["x"]], psi = [["y"]] }
    [modules.A]
    free_rank = 1
    [modules.My]
    presentation = [["y"]]
    [modules.S]
    sum = ["Mx", "My"]

    [filtrations.madic]
    kind = "adic"          # adic | integral-closure | custom
    ideal = ["x", "y"]
    # custom additionally takes: table = [[...], ...], stabilization = t

    [sequences.s1]
    N = "My"
    E = "A"
    M = "Mx"
    inject = [["x"]]
    project = [["1"]]

Every referenced name must resolve; the ring is validated before anything is
computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .fields import Field
from .filtration import FiltrationSpec
from .homology import ShortExactSequence
from .modules import Module, direct_sum, pm_parse
from .poly import PolyParseError, Ring, make_ring, validate_ring


class ProblemFileError(ValueError):
    """Malformed problem file: bad syntax, bad reference, or bad shape."""


@dataclass
class ProblemFile:
    ring: Ring
    modules: Dict[str, Module]
    filtrations: Dict[str, FiltrationSpec]
    sequences: Dict[str, ShortExactSequence]
    options: dict = dc_field(default_factory=dict)
    ring_diagnostics: dict = dc_field(default_factory=dict)


def load_problem(path: str, field_override: Optional[int] = None) -> ProblemFile:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ProblemFileError(f"{path}: no such file")
    except tomllib.TOMLDecodeError as exc:
        raise ProblemFileError(f"{path}: {exc}")
    return build_problem(data, source=path, field_override=field_override)


def build_problem(data: dict, source: str = "<memory>",
                  field_override: Optional[int] = None) -> ProblemFile:
    ring_block = data.get("ring")
    if not isinstance(ring_block, dict):
        raise ProblemFileError(f"{source}: missing [ring] block")
    nvars = ring_block.get("vars")
    if not isinstance(nvars, int) or nvars < 1:
        raise ProblemFileError(f"{source}: ring.vars must be a positive integer")
    char = ring_block.get("field", 32003)
    if field_override is not None:
        char = field_override
    try:
        fld = Field(int(char))
    except ValueError as exc:
        raise ProblemFileError(f"{source}: {exc}")
    relations = ring_block.get("relations", [])
    try:
        ring = make_ring(nvars, [str(r) for r in relations], fld)
    except (PolyParseError, ValueError) as exc:
        raise ProblemFileError(f"{source}: ring: {exc}")
    diagnostics = validate_ring(ring)
    if not diagnostics["ok"]:
        raise ProblemFileError(f"{source}: ring rejected: {'; '.join(diagnostics['problems'])}")

    modules: Dict[str, Module] = {}
    pending_sums = {}
    for name, block in (data.get("modules") or {}).items():
        try:
            if "free_rank" in block:
                modules[name] = Module.free(ring, int(block["free_rank"]), label=name)
            elif "mf" in block:
                mf = block["mf"]
                modules[name] = Module.from_mf(
                    ring, pm_parse(ring, mf["phi"]), pm_parse(ring, mf["psi"]), label=name)
            elif "presentation" in block:
                modules[name] = Module.from_presentation(
                    ring, pm_parse(ring, block["presentation"]),
                    mcm_asserted=bool(block.get("mcm", False)), label=name)
            elif "sum" in block:
                pending_sums[name] = [str(s) for s in block["sum"]]
            else:
                raise ProblemFileError(
                    f"{source}: module {name!r} needs free_rank, mf, presentation or sum")
        except (PolyParseError, ValueError, KeyError) as exc:
            raise ProblemFileError(f"{source}: module {name!r}: {exc}")
    for name, parts in pending_sums.items():
        acc = None
        for part in parts:
            if part not in modules:
                raise ProblemFileError(f"{source}: module {name!r}: unknown summand {part!r}")
            acc = modules[part] if acc is None else direct_sum(acc, modules[part])
        acc.label = name
        modules[name] = acc

    filtrations: Dict[str, FiltrationSpec] = {}
    for name, block in (data.get("filtrations") or {}).items():
        try:
            kind = block.get("kind", "adic")
            ideal = tuple(ring.parse(str(t)) for t in block.get("ideal", []))
            table = tuple(tuple(ring.parse(str(t)) for t in row)
                          for row in block.get("table", []))
            filtrations[name] = FiltrationSpec(
                ring, kind, ideal, table, int(block.get("stabilization", len(table))))
        except (PolyParseError, ValueError) as exc:
            raise ProblemFileError(f"{source}: filtration {name!r}: {exc}")

    sequences: Dict[str, ShortExactSequence] = {}
    for name, block in (data.get("sequences") or {}).items():
        try:
            refs = {}
            for role in ("N", "E", "M"):
                ref = block.get(role)
                if ref not in modules:
                    raise ProblemFileError(
                        f"{source}: sequence {name!r}: unknown module {ref!r} for {role}")
                refs[role] = modules[ref]
            sequences[name] = ShortExactSequence(
                refs["N"], refs["E"], refs["M"],
                pm_parse(ring, block["inject"]), pm_parse(ring, block["project"]),
                label=name)
        except (PolyParseError, ValueError, KeyError) as exc:
            raise ProblemFileError(f"{source}: sequence {name!r}: {exc}")

    options = dict(data.get("options") or {})
    return ProblemFile(ring, modules, filtrations, sequences, options, diagnostics)
