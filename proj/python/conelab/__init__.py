"""Python access to the conelab locality experiments."""

from ._conelab import (  # noqa: F401
    ConeVanishedError,
    ConfigError,
    Error,
    InstabilityError,
    InvalidStateError,
    PreconditionError,
    QuadratureError,
    ShapeError,
    __version__,
    chain_entropy,
    leakage_fraction,
    list_experiments,
    nonseparability_demo,
    nw_overlap,
    parse_config,
    pauli_jordan,
    run,
    validate,
    wightman_equal_time,
)


def run_file(path, out_dir="", threads=1, seed_override=None):
    """Runs the scenario stored at `path` and returns the report dict."""
    with open(path, encoding="utf-8") as fh:
        return run(fh.read(), out_dir=str(out_dir), threads=threads, seed_override=seed_override)
