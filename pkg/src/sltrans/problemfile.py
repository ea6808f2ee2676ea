"""Problem definition files (TOML, ``format = 1``).

Example::

    format = 1
    h1 = "-1/3"
    h2 = "1/3"

    [coefficients]
    r = ["1", "1", "1"]
    p = ["1", "1", "1"]
    q = ["0", "0", "0"]

    [boundary]
    alpha = [0, -1]
    beta = [1, 0]

    [transmission]
    gamma = [1, 1, 1, 1]
    delta = [1, 1, 1, 1]

Scalars may be numbers or constant expression strings such as ``"-1/3"``.
Each coefficient is one expression per piece, or a single string used on
all three.  The ``[transmission]`` section is optional and defaults to ones.
"""

from __future__ import annotations

import sys
from pathlib import Path

from .expr import ExprSyntaxError, constant_value, to_string
from .problem import ProblemSpec, ValidatedProblem, validate_problem

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ProblemFileError", "FORMAT_VERSION", "parse_problem", "load_problem", "load_spec", "dump_problem"]

FORMAT_VERSION = 1


class ProblemFileError(ValueError):
    """The file is missing, unreadable or does not follow the schema."""


def _scalar(name: str, v) -> float:
    if isinstance(v, bool):
        raise ProblemFileError(f"{name}: expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return constant_value(v)
        except (ExprSyntaxError, ValueError, ArithmeticError) as err:
            raise ProblemFileError(f"{name}: {err}") from None
    raise ProblemFileError(f"{name}: expected a number or constant expression, got {type(v).__name__}")


def _vector(name: str, v, n: int) -> tuple[float, ...]:
    if not isinstance(v, list) or len(v) != n:
        raise ProblemFileError(f"{name}: expected a list of {n} values")
    return tuple(_scalar(f"{name}[{i}]", x) for i, x in enumerate(v))


def _pieces(name: str, v) -> tuple[str, str, str]:
    if isinstance(v, (str, int, float)) and not isinstance(v, bool):
        v = [v] * 3
    if not isinstance(v, list) or len(v) != 3:
        raise ProblemFileError(f"coefficients.{name}: expected one expression or a list of 3")
    return tuple(str(e) for e in v)  # type: ignore[return-value]


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ProblemFileError(f"missing section [{name}]")
        return {}
    if not isinstance(sec, dict):
        raise ProblemFileError(f"[{name}] must be a table")
    return sec


def _require(sec: dict, key: str, where: str):
    if key not in sec:
        raise ProblemFileError(f"missing key {where}{key}")
    return sec[key]


def parse_problem(text: str) -> ProblemSpec:
    """Parse file contents into an unvalidated :class:`ProblemSpec`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ProblemFileError(f"malformed problem file: {err}") from None
    version = doc.get("format")
    if version != FORMAT_VERSION:
        raise ProblemFileError(f"unsupported or missing format version {version!r} (expected {FORMAT_VERSION})")
    coef = _section(doc, "coefficients")
    bnd = _section(doc, "boundary")
    trans = _section(doc, "transmission", required=False)
    try:
        return ProblemSpec(
            h1=_scalar("h1", _require(doc, "h1", "")),
            h2=_scalar("h2", _require(doc, "h2", "")),
            r=_pieces("r", _require(coef, "r", "coefficients.")),
            p=_pieces("p", _require(coef, "p", "coefficients.")),
            q=_pieces("q", coef.get("q", "0")),
            alpha=_vector("alpha", _require(bnd, "alpha", "boundary."), 2),
            beta=_vector("beta", _require(bnd, "beta", "boundary."), 2),
            gamma=_vector("gamma", trans.get("gamma", [1, 1, 1, 1]), 4),
            delta=_vector("delta", trans.get("delta", [1, 1, 1, 1]), 4),
        )
    except ExprSyntaxError as err:
        raise ProblemFileError(f"coefficient expression: {err.msg} at offset {err.offset}") from None


def load_spec(path: str | Path) -> ProblemSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ProblemFileError(f"cannot read {path}: {err.strerror or err}") from None
    return parse_problem(text)


def load_problem(path: str | Path) -> ValidatedProblem:
    """Read, parse and validate a problem file."""
    return validate_problem(load_spec(path))


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_problem(spec: ProblemSpec) -> str:
    """Canonical file text; ``parse_problem(dump_problem(s))`` reproduces ``s``."""

    def exprs(es):
        return "[" + ", ".join(f'"{to_string(e)}"' for e in es) + "]"

    def nums(vs):
        return "[" + ", ".join(_fmt(v) for v in vs) + "]"

    return "\n".join(
        [
            f"format = {FORMAT_VERSION}",
            f"h1 = {_fmt(spec.h1)}",
            f"h2 = {_fmt(spec.h2)}",
            "",
            "[coefficients]",
            f"r = {exprs(spec.r)}",
            f"p = {exprs(spec.p)}",
            f"q = {exprs(spec.q)}",
            "",
            "[boundary]",
            f"alpha = {nums(spec.alpha)}",
            f"beta = {nums(spec.beta)}",
            "",
            "[transmission]",
            f"gamma = {nums(spec.gamma)}",
            f"delta = {nums(spec.delta)}",
            "",
        ]
    )
