"""One-bit LFMCW radar: cube synthesis, harmonic theory, FFT + OS-CFAR
predetection and DR-GAMP recovery with an EM-learned Bernoulli-Gaussian prior."""

__version__ = "0.1.0"

from .gamp import BGPrior, GampControls, GampResult, gamp_run
from .harmonics import HarmonicLine, harmonic_frequencies, harmonic_lines
from .operator import ReducedOperator
from .pipeline import GridSpec, OsCfarConfig, PreDetectionSet, fft3d, os_cfar_1d, predetect
from .scene import (DataCube, OneBitCube, RadarParams, Target, TargetScene, csign, quantize_one_bit,
                    synthesize_cube)

__all__ = [
    "BGPrior", "DataCube", "GampControls", "GampResult", "GridSpec", "HarmonicLine", "OneBitCube",
    "OsCfarConfig", "PreDetectionSet", "RadarParams", "ReducedOperator", "Target", "TargetScene",
    "csign", "fft3d", "gamp_run", "harmonic_frequencies", "harmonic_lines", "os_cfar_1d", "predetect",
    "quantize_one_bit", "synthesize_cube",
]
