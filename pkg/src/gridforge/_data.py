"""Access to the packaged lookup tables."""

from functools import lru_cache
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


@lru_cache(maxsize=None)
def load_table(name):
    text = resources.files("gridforge.data").joinpath(name).read_text(encoding="utf-8")
    return tomllib.loads(text)


def load_toml_file(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


@lru_cache(maxsize=None)
def hvdc_project_names():
    text = resources.files("gridforge.data").joinpath("hvdc_projects.txt").read_text(encoding="utf-8")
    names = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.append(line.lower())
    return tuple(names)
