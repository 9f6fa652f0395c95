"""Bundled benchmark problems."""

from importlib import resources
from pathlib import Path
from typing import List, Optional

from octrans.core.exceptions import ValidationException
from octrans.dsl import OcpProblem, parse_ocp

_PACKAGE = "octrans.bench"
_SUFFIX = ".ocp"


def _problems_dir():
    return resources.files(_PACKAGE).joinpath("problems")


def available_problems() -> List[str]:
    """Names of the bundled problems, sorted."""
    return sorted(
        entry.name[: -len(_SUFFIX)]
        for entry in _problems_dir().iterdir()
        if entry.name.endswith(_SUFFIX)
    )


def problem_source(name: str) -> str:
    """DSL text of a bundled problem."""
    entry = _problems_dir().joinpath(name + _SUFFIX)
    if not entry.is_file():
        raise ValidationException(
            f"unknown problem '{name}' (available: {', '.join(available_problems())})"
        )
    return entry.read_text(encoding="utf-8")


def load_problem(
    name: str, source: Optional[str] = None, base_dir: Optional[Path] = None
) -> OcpProblem:
    """Parse a bundled problem, or the ``.ocp`` file at ``source``.

    Relative ``source`` paths are taken from ``base_dir`` when given.
    """
    if source is None:
        return parse_ocp(problem_source(name), name=name)
    path = Path(source)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationException(f"cannot read {path}: {exc.strerror}") from exc
    return parse_ocp(text, name=name)
