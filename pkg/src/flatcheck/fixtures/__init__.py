"""Example system files shipped with the package."""

from importlib import resources

NAMES = ("motor", "dim5", "brunovsky", "chained", "nonaccessible")


def path(name):
    """Filesystem path of the fixture ``name`` (with or without ``.sys``)."""
    if not name.endswith(".sys"):
        name += ".sys"
    return str(resources.files(__name__).joinpath(name))
