"""Cached expensive objects shared across test modules."""

import functools

from capcav import pipeline
from capcav.config import load_config


@functools.lru_cache(maxsize=None)
def paper_config():
    return load_config()


@functools.lru_cache(maxsize=None)
def calibration(pol="y"):
    return pipeline.calibrate(paper_config(), pol)


@functools.lru_cache(maxsize=None)
def calibrated_spec(pol="y"):
    return pipeline.calibrated_spec(paper_config(), calibration(pol))


@functools.lru_cache(maxsize=None)
def surrogate_resonance(pol="y"):
    return pipeline.surrogate_resonance(calibrated_spec(pol), calibration(pol))


@functools.lru_cache(maxsize=None)
def geometry_sweep(parameter, start, stop, step):
    from capcav.config import SweepConfig
    from capcav.sweep import run_sweep

    sw = SweepConfig(parameter, start, stop, step)
    return run_sweep(paper_config(), sw, calibration=calibration("y"))
