"""Read and write simulation case files.

The format is flat ``key : value`` text with R-style matrix blocks, shaped
so published case listings (keys Niter, n, d, m, qN, Npts, dp1$xi,
dp1$Omega, dp1$alpha, dp1$nu, mix.p, dp2$...) transcribe mechanically.
A few extension keys cover what the listings leave implicit: ``seed``,
``N`` (grid target, otherwise taken from Npts), ``methods`` and ``p``.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .simharness import DEFAULT_SEED, METHODS, CaseConfig
from .skewdist import ComponentSpec, MixtureSpec

_SCALAR_KEYS = {"Niter", "n", "d", "m", "qN", "Npts", "N", "seed", "p", "mix.p"}
_COMPONENT_KEYS = {"xi", "Omega", "alpha", "nu"}


class CaseFileError(ValueError):
    """Malformed case file; the message names the offending key or line."""


def _parse_floats(text: str, key: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split()])
    except ValueError as exc:
        raise CaseFileError(f"key '{key}': cannot parse numbers from '{text}'") from exc


def _is_matrix_row(line: str) -> bool:
    stripped = line.lstrip()
    return stripped.startswith("[")


def _read_matrix(lines: list[str], start: int, key: str) -> tuple[np.ndarray, int]:
    rows = []
    i = start
    while i < len(lines) and _is_matrix_row(lines[i]):
        tokens = lines[i].split()
        if tokens[0].startswith("[,"):  # column-label header row
            i += 1
            continue
        rows.append(_parse_floats(" ".join(tokens[1:]), key))
        i += 1
    if not rows:
        raise CaseFileError(f"key '{key}': matrix block is empty")
    try:
        mat = np.vstack(rows)
    except ValueError as exc:
        raise CaseFileError(f"key '{key}': ragged matrix block") from exc
    return mat, i


def parse_case_file(path: str) -> CaseConfig:
    """Parse a case file into a CaseConfig; unknown keys are an error."""
    with open(path) as fh:
        raw = fh.read()
    return parse_case_text(raw)


def parse_case_text(text: str) -> CaseConfig:
    lines = [ln.rstrip() for ln in text.splitlines()]
    scalars: dict[str, str] = {}
    comps: dict[str, dict[str, object]] = {"dp1": {}, "dp2": {}}

    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip() or line.lstrip().startswith("#"):
            i += 1
            continue
        if ":" not in line:
            raise CaseFileError(f"line {i + 1}: expected 'key : value'")
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()

        if "$" in key:
            comp, _, field = key.partition("$")
            if comp not in comps or field not in _COMPONENT_KEYS:
                raise CaseFileError(f"unknown key '{key}'")
            if field == "Omega":
                mat, i = _read_matrix(lines, i + 1, key)
                comps[comp][field] = mat
                continue
            comps[comp][field] = value
        elif key == "methods":
            scalars[key] = value
        elif key in _SCALAR_KEYS:
            scalars[key] = value
        else:
            raise CaseFileError(f"unknown key '{key}'")
        i += 1

    def need(key: str) -> str:
        if key not in scalars:
            raise CaseFileError(f"missing required key '{key}'")
        return scalars[key]

    def as_int(key: str, text_value: str) -> int:
        try:
            return int(text_value)
        except ValueError as exc:
            raise CaseFileError(f"key '{key}': expected an integer") from exc

    def as_float(key: str, text_value: str) -> float:
        try:
            return float(text_value)
        except ValueError as exc:
            raise CaseFileError(f"key '{key}': expected a number") from exc

    d = as_int("d", need("d"))
    mix_p = as_float("mix.p", need("mix.p"))

    def build_component(tag: str) -> ComponentSpec:
        block = comps[tag]
        for field in ("xi", "Omega", "alpha"):
            if field not in block:
                raise CaseFileError(f"missing required key '{tag}${field}'")
        nu = math.inf
        if "nu" in block:
            text_value = str(block["nu"])
            nu = math.inf if text_value.lower() in ("inf", "infinity") else as_float(
                f"{tag}$nu", text_value
            )
        try:
            return ComponentSpec(
                xi=_parse_floats(str(block["xi"]), f"{tag}$xi"),
                omega=np.asarray(block["Omega"], dtype=float),
                alpha=_parse_floats(str(block["alpha"]), f"{tag}$alpha"),
                nu=nu,
            )
        except ValueError as exc:
            raise CaseFileError(f"component '{tag}': {exc}") from exc

    comp1 = build_component("dp1")
    comp2 = build_component("dp2") if mix_p < 1.0 else None
    if mix_p == 1.0 and comps["dp2"]:
        raise CaseFileError("mix.p = 1 admits no dp2 component")

    if "N" in scalars:
        n_target = as_int("N", scalars["N"])
    elif "Npts" in scalars:
        n_target = as_int("Npts", scalars["Npts"])
    else:
        n_target = 2000

    methods = METHODS
    if "methods" in scalars:
        methods = tuple(
            tok for tok in scalars["methods"].replace(",", " ").split() if tok
        )

    try:
        dist = MixtureSpec(comp1=comp1, comp2=comp2, mix_p=mix_p)
        return CaseConfig(
            n_iter=as_int("Niter", need("Niter")),
            n=as_int("n", need("n")),
            d=d,
            m=as_int("m", need("m")),
            q=as_float("qN", need("qN")),
            dist=dist,
            n_target=n_target,
            seed=as_int("seed", scalars.get("seed", str(DEFAULT_SEED))),
            methods=methods,
            p=as_float("p", scalars.get("p", "0.5")),
        )
    except ValueError as exc:
        raise CaseFileError(str(exc)) from exc


def _format_vector(vec: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in vec)


def _format_matrix(mat: np.ndarray) -> list[str]:
    d = mat.shape[0]
    lines = ["     " + " ".join(f"[,{j + 1}]" for j in range(d))]
    for i in range(d):
        lines.append(f"[{i + 1},] " + _format_vector(mat[i]))
    return lines


def render_case(cfg: CaseConfig) -> str:
    """Serialize a CaseConfig in the case-file format (lossless round trip)."""
    lines = [
        f"Niter : {cfg.n_iter}",
        f"n : {cfg.n}",
        f"d : {cfg.d}",
        f"m : {cfg.m}",
        f"qN : {format(cfg.q, 'g')}",
        f"N : {cfg.n_target}",
        f"seed : {cfg.seed}",
        f"p : {format(cfg.p, 'g')}",
        "methods : " + ",".join(cfg.methods),
    ]

    def emit_component(tag: str, comp: ComponentSpec) -> None:
        lines.append(f"{tag}$xi : {_format_vector(comp.xi)}")
        lines.append(f"{tag}$Omega : ")
        lines.extend(_format_matrix(comp.omega))
        lines.append(f"{tag}$alpha : {_format_vector(comp.alpha)}")
        if not comp.is_skew_normal:
            lines.append(f"{tag}$nu : {repr(comp.nu)}")

    emit_component("dp1", cfg.dist.comp1)
    lines.append(f"mix.p : {repr(float(cfg.dist.mix_p))}")
    if cfg.dist.comp2 is not None:
        emit_component("dp2", cfg.dist.comp2)
    return "\n".join(lines) + "\n"


def write_case_file(cfg: CaseConfig, path: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(render_case(cfg))
    os.replace(tmp, path)


def case_configs_equal(a: CaseConfig, b: CaseConfig) -> bool:
    """Field-by-field equality, treating the numpy payloads exactly."""

    def comp_eq(x: ComponentSpec | None, y: ComponentSpec | None) -> bool:
        if (x is None) != (y is None):
            return False
        if x is None:
            return True
        return (
            np.array_equal(x.xi, y.xi)
            and np.array_equal(x.omega, y.omega)
            and np.array_equal(x.alpha, y.alpha)
            and (x.nu == y.nu or (math.isinf(x.nu) and math.isinf(y.nu)))
        )

    return (
        (a.n_iter, a.n, a.d, a.m, a.q, a.n_target, a.seed, a.methods, a.p)
        == (b.n_iter, b.n, b.d, b.m, b.q, b.n_target, b.seed, b.methods, b.p)
        and a.dist.mix_p == b.dist.mix_p
        and comp_eq(a.dist.comp1, b.dist.comp1)
        and comp_eq(a.dist.comp2, b.dist.comp2)
        and a.fill == b.fill
    )
