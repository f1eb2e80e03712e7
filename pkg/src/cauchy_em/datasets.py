"""Single-column numeric dataset files and the bundled fixtures."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .errors import DatasetError

__all__ = ["read_dataset", "parse_dataset", "fixture_names", "load_fixture", "fixture_path"]

FIXTURES = {
    "earthquake": "earthquake_distances.csv",
    "tetrahydrocortisone": "tetrahydrocortisone.csv",
    "guinea-pig": "guinea_pig_survival.csv",
}


def parse_dataset(text, source="<string>"):
    """Parse one value per line; '#' starts a comment and one leading header is allowed."""
    values = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip().rstrip(",")
        if not line:
            continue
        if "," in line or "\t" in line:
            raise DatasetError(f"{source}: expected a single column, got {raw.strip()!r}", lineno)
        try:
            v = float(line)
        except ValueError:
            if values or header_seen:
                raise DatasetError(f"{source}: not a number: {line!r}", lineno) from None
            header_seen = True
            continue
        if not np.isfinite(v):
            raise DatasetError(f"{source}: non-finite value {line!r}", lineno)
        values.append(v)
    if not values:
        raise DatasetError(f"{source}: no numeric values", None)
    return np.array(values)


def read_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read(), source=str(path))


def fixture_names():
    return sorted(FIXTURES)


def fixture_path(name):
    if name not in FIXTURES:
        raise DatasetError(f"unknown fixture {name!r}; choose from {', '.join(fixture_names())}", None)
    return resources.files("cauchy_em") / "fixtures" / FIXTURES[name]


def load_fixture(name):
    path = fixture_path(name)
    return parse_dataset(path.read_text(encoding="utf-8"), source=FIXTURES[name])
