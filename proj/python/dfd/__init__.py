"""Python bindings for the dfd few-shot anomaly detection core.

Images are float32 arrays of shape (H, W, 3) with values in [0, 1]; masks are
uint8 arrays of shape (H, W) holding 0 or 1. Config overrides are plain dicts
of `key: value` using the same keys as the command line.
"""

from ._dfd import (
    ArgumentError,
    ConfigError,
    Error,
    LayoutError,
    MetricError,
    Model,
    NumericError,
    __version__,
    auroc,
    blend_anomaly,
    config,
    config_keys,
    default_config,
    dft2,
    foreground_mask,
    grad_suite,
    gray_histogram,
    load_model,
    perlin,
    pro,
    radial_energy,
    run_category,
    split_frequency,
    train,
    write_fixture,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
